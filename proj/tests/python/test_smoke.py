"""Smoke tests for the dpiqn extension module."""

import json
import math
import os

import numpy as np
import pytest

import dpiqn


def test_env_reset_shape_and_range():
    env = dpiqn.SoccerEnv("one_vs_one", seed=7)
    obs = env.reset()
    assert obs.shape == (84, 84, 1)
    assert obs.dtype == np.float32
    assert float(obs.min()) >= 0.0
    assert float(obs.max()) <= 1.0


def test_env_determinism_and_step():
    a = dpiqn.SoccerEnv("one_vs_one", seed=3)
    b = dpiqn.SoccerEnv("one_vs_one", seed=3)
    oa, ob = a.reset(), b.reset()
    assert np.array_equal(oa, ob)
    assert a.state() == b.state()

    obs, reward, terminal, others = a.step([3, 4])  # learner East, opponent stands
    assert obs.shape == (84, 84, 1)
    assert reward in (-1.0, 0.0, 1.0)
    assert isinstance(terminal, bool)
    assert list(others.keys()) == [1]


def test_env_episode_terminates():
    env = dpiqn.SoccerEnv("one_vs_one", seed=11)
    env.reset()
    terminal = False
    for _ in range(100):
        _, _, terminal, _ = env.step([env.scripted_action(0, "offensive"),
                                      env.scripted_action(1, "offensive")])
        if terminal:
            break
    assert terminal


def test_scenarios_match_field_sizes():
    env = dpiqn.SoccerEnv("two_vs_two_large", seed=1)
    assert (env.width, env.height) == (21, 14)
    assert env.frame_skip == 2
    assert env.num_agents == 4


def test_model_forward_shapes_and_softmax():
    m = dpiqn.Model("dpiqn", n_heads=1, history=4, embed_dim=32, branch_dim=24,
                    conv=[[4, 8, 4], [4, 4, 2]], seed=5)
    obs = np.random.default_rng(0).random((2, 4, 84, 84), dtype=np.float32)
    out = m.forward(obs)
    assert out["q"].shape == (2, 5)
    assert len(out["policies"]) == 1
    head = out["policies"][0]
    assert head.shape == (2, 5)
    np.testing.assert_allclose(head.sum(axis=1), 1.0, atol=1e-5)
    assert (head >= 0).all()


def test_loss_helpers():
    assert dpiqn.adaptive_lambda(1.0) == 1.0
    assert dpiqn.adaptive_lambda(0.25) == 2.0
    assert math.isfinite(dpiqn.adaptive_lambda(0.0))
    assert dpiqn.total_loss(0.5, 1.0, 1.0) == 1.5

    uniform = np.full((1, 1, 5), 0.2)
    assert dpiqn.policy_inference_loss(uniform, [[2]]) == pytest.approx(math.log(5.0))


def test_schedules():
    assert dpiqn.epsilon_at(0) == 1.0
    assert dpiqn.epsilon_at(1_000_000) == pytest.approx(0.1)
    assert dpiqn.epsilon_at(500_000) == pytest.approx(0.55)
    assert dpiqn.lr_at(0) == 0.001
    assert dpiqn.lr_at(600) == 0.0004
    assert dpiqn.lr_at(1000) == 0.0002


def test_tiny_training_run(tmp_path):
    config = {
        "seed": 2,
        "out_dir": str(tmp_path / "run"),
        "model": {"kind": "dqn", "conv": [[4, 8, 4], [4, 4, 2]],
                  "embed_dim": 16, "branch_dim": 12},
        "train": {"total_timesteps": 200, "epoch_len": 100, "replay_capacity": 400,
                  "batch": 8, "history": 4, "warmup": 40, "target_sync": 20},
    }
    result = dpiqn.train(json.dumps(config))
    assert result["env_steps"] == 200
    assert os.path.exists(result["checkpoint"])
    with open(result["curves"][0]) as f:
        lines = f.read().strip().splitlines()
    assert lines[0].startswith("epoch,env_steps,mean_reward_first500")
    assert len(lines) == 3  # header + 2 epochs


def test_dump_obs(tmp_path):
    path = str(tmp_path / "obs.pgm")
    dpiqn.dump_obs("one_vs_one", 3, path)
    with open(path, "rb") as f:
        assert f.read(2) == b"P5"
