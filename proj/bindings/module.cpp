#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dpiqn/evaluator.hpp"
#include "dpiqn/losses.hpp"
#include "dpiqn/trainer.hpp"
#include "dpiqn/verify.hpp"

namespace py = pybind11;
using namespace dpiqn;

namespace {

py::array_t<float> obs_array(const std::vector<float>& obs) {
  py::array_t<float> out({kObsSize, kObsSize, 1});
  std::copy(obs.begin(), obs.end(), out.mutable_data());
  return out;
}

// Stateful env wrapper mirroring the trainer's view: reset -> observation,
// step(actions) -> (observation, reward, terminal, other_actions).
class PyEnv {
 public:
  PyEnv(const std::string& scenario, uint64_t seed, int n_controlled)
      : env_(parse(scenario), n_controlled), rng_(seed), obs_(kObsPixels) {}

  static Scenario parse(const std::string& s) {
    Scenario sc;
    DPIQN_CHECK(scenario_from_string(s, &sc), "unknown scenario ", s);
    return sc;
  }

  py::array_t<float> reset() {
    env_.reset(rng_);
    env_.render(obs_.data());
    return obs_array(obs_);
  }

  py::tuple step(const std::vector<int>& actions) {
    DPIQN_CHECK(actions.size() == env_.roster().size(), "need one action per agent");
    std::vector<Action> acts;
    for (int a : actions) {
      DPIQN_CHECK(a >= 0 && a < kNumActions, "action out of range");
      acts.push_back(static_cast<Action>(a));
    }
    StepOutcome out = env_.step(acts);
    if (!out.terminal) env_.render(obs_.data());
    py::dict others;
    for (const auto& [idx, a] : out.other_actions) others[py::int_(idx)] = static_cast<int>(a);
    return py::make_tuple(obs_array(obs_), out.reward, out.terminal, others);
  }

  py::array_t<float> render() {
    env_.render(obs_.data());
    return obs_array(obs_);
  }

  int num_agents() const { return static_cast<int>(env_.roster().size()); }
  int width() const { return env_.config().width; }
  int height() const { return env_.config().height; }
  int frame_skip() const { return env_.config().frame_skip; }

  int scripted_action(int agent, const std::string& mode) {
    Mode m = mode == "offensive" ? Mode::Offensive : Mode::Defensive;
    return static_cast<int>(rule_action(env_.config(), env_.roster(), env_.state(), agent, m));
  }

  py::dict state() const {
    py::dict d;
    py::list pos;
    for (const Cell& c : env_.state().positions) pos.append(py::make_tuple(c.x, c.y));
    d["positions"] = pos;
    d["ball_holder"] = env_.state().ball_holder;
    d["step_count"] = env_.state().step_count;
    d["terminal"] = env_.state().terminal;
    return d;
  }

 private:
  SoccerEnv env_;
  Rng rng_;
  std::vector<float> obs_;
};

// Thin model wrapper: build from a spec dict, run forward on numpy inputs.
class PyModel {
 public:
  PyModel(const std::string& kind, int n_heads, int history, int embed_dim, int branch_dim,
          int lstm_hidden, std::vector<std::vector<int>> conv, uint64_t seed)
      : model_(make_spec(kind, n_heads, history, embed_dim, branch_dim, lstm_hidden, conv)),
        params_(model_.init_params(seed)) {}

  static ModelSpec make_spec(const std::string& kind, int n_heads, int history, int embed_dim,
                             int branch_dim, int lstm_hidden,
                             const std::vector<std::vector<int>>& conv) {
    ModelSpec spec;
    DPIQN_CHECK(model_kind_from_string(kind, &spec.kind), "unknown model kind ", kind);
    spec.n_heads = n_heads;
    spec.history = spec.recurrent() ? 1 : history;
    if (!conv.empty()) {
      spec.convs.clear();
      for (const auto& c : conv) {
        DPIQN_CHECK(c.size() == 3, "conv rows are [filters, kernel, stride]");
        spec.convs.push_back({c[0], c[1], c[2]});
      }
    }
    spec.embed_dim = embed_dim;
    spec.branch_dim = branch_dim;
    spec.lstm_hidden = lstm_hidden;
    spec.validate();
    return spec;
  }

  py::dict forward(py::array_t<float, py::array::c_style | py::array::forcecast> obs) {
    const ModelSpec& spec = model_.spec();
    DPIQN_CHECK(obs.ndim() == 4, "obs must be (N, C, H, W)");
    Tensor<float> in({obs.shape(0), obs.shape(1), obs.shape(2), obs.shape(3)});
    std::copy(obs.data(), obs.data() + in.numel(), in.ptr());

    LstmState<float> state = model_.zero_state(static_cast<int>(obs.shape(0)));
    ForwardOptions opt;
    auto out = model_.forward(params_, in, nullptr, spec.recurrent() ? &state : nullptr, opt,
                              nullptr);

    py::dict d;
    py::array_t<float> q({out.q.dim(0), out.q.dim(1)});
    std::copy(out.q.data.begin(), out.q.data.end(), q.mutable_data());
    d["q"] = q;
    py::list heads;
    for (const auto& p : out.policies) {
      py::array_t<float> h({p.dim(0), p.dim(1)});
      std::copy(p.data.begin(), p.data.end(), h.mutable_data());
      heads.append(h);
    }
    d["policies"] = heads;
    return d;
  }

  int64_t num_params() const {
    int64_t n = 0;
    for (const auto& t : params_.tensors) n += t.numel();
    return n;
  }

 private:
  Model<float> model_;
  ParamSet params_;
};

double py_policy_inference_loss(
    py::array_t<double, py::array::c_style | py::array::forcecast> heads,
    const std::vector<std::vector<int>>& actions) {
  DPIQN_CHECK(heads.ndim() == 3, "heads must be (N_heads, B, A)");
  std::vector<Tensor<double>> policies;
  std::vector<std::vector<uint8_t>> mu;
  for (py::ssize_t h = 0; h < heads.shape(0); ++h) {
    Tensor<double> t({heads.shape(1), heads.shape(2)});
    std::copy(heads.data(h, 0, 0), heads.data(h, 0, 0) + t.numel(), t.ptr());
    policies.push_back(std::move(t));
    std::vector<uint8_t> a;
    for (int v : actions[static_cast<size_t>(h)]) a.push_back(static_cast<uint8_t>(v));
    mu.push_back(std::move(a));
  }
  return policy_inference_loss(policies, mu);
}

}  // namespace

PYBIND11_MODULE(dpiqn, m) {
  m.doc() = "Grid-soccer multi-agent RL lab: DPIQN/DRPIQN with DQN-family baselines";

  m.attr("ACTIONS") = py::make_tuple("N", "S", "W", "E", "stand");

  py::class_<PyEnv>(m, "SoccerEnv")
      .def(py::init<const std::string&, uint64_t, int>(), py::arg("scenario") = "one_vs_one",
           py::arg("seed") = 1, py::arg("n_controlled") = 1)
      .def("reset", &PyEnv::reset)
      .def("step", &PyEnv::step, py::arg("actions"))
      .def("render", &PyEnv::render)
      .def("scripted_action", &PyEnv::scripted_action, py::arg("agent"), py::arg("mode"))
      .def("state", &PyEnv::state)
      .def_property_readonly("num_agents", &PyEnv::num_agents)
      .def_property_readonly("width", &PyEnv::width)
      .def_property_readonly("height", &PyEnv::height)
      .def_property_readonly("frame_skip", &PyEnv::frame_skip);

  py::class_<PyModel>(m, "Model")
      .def(py::init<const std::string&, int, int, int, int, int, std::vector<std::vector<int>>,
                    uint64_t>(),
           py::arg("kind"), py::arg("n_heads") = 0, py::arg("history") = 12,
           py::arg("embed_dim") = 512, py::arg("branch_dim") = 512, py::arg("lstm_hidden") = 512,
           py::arg("conv") = std::vector<std::vector<int>>{}, py::arg("seed") = 1)
      .def("forward", &PyModel::forward, py::arg("obs"))
      .def_property_readonly("num_params", &PyModel::num_params);

  m.def("adaptive_lambda", &adaptive_lambda, py::arg("l_pi"),
        "Adaptive scale factor min(1/sqrt(max(l_pi, 1e-6)), 1000)");
  m.def("total_loss", &total_loss, py::arg("l_q"), py::arg("l_pi"), py::arg("lambda_"));
  m.def("policy_inference_loss", &py_policy_inference_loss, py::arg("heads"), py::arg("actions"));

  m.def(
      "epsilon_at",
      [](int64_t step, int epoch_len, int anneal_epochs) {
        TrainSection t;
        t.epoch_len = epoch_len;
        t.epsilon_anneal_epochs = anneal_epochs;
        return epsilon_at(step, t);
      },
      py::arg("step"), py::arg("epoch_len") = 10000, py::arg("anneal_epochs") = 100);
  m.def(
      "lr_at",
      [](int64_t epoch) {
        TrainSection t;
        return lr_at(epoch, t);
      },
      py::arg("epoch"));

  m.def(
      "train",
      [](const std::string& config_json, const std::string& out_dir) {
        ExperimentConfig cfg = ExperimentConfig::from_json_text(config_json);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        TrainResult r = run_training(cfg);
        py::dict d;
        d["curves"] = r.curve_files;
        d["checkpoint"] = r.final_checkpoint;
        d["env_steps"] = r.env_steps;
        return d;
      },
      py::arg("config_json"), py::arg("out_dir") = "",
      "Run a training experiment from a JSON config string");

  m.def("verify", []() {
    py::list out;
    for (const SuiteResult& r : run_verification()) {
      py::dict d;
      d["name"] = r.name;
      d["pass"] = r.pass;
      d["detail"] = r.detail;
      out.append(d);
    }
    return out;
  });

  m.def(
      "dump_obs",
      [](const std::string& scenario, uint64_t seed, const std::string& path) {
        Scenario sc;
        DPIQN_CHECK(scenario_from_string(scenario, &sc), "unknown scenario ", scenario);
        SoccerEnv env(sc);
        Rng rng(seed);
        env.reset(rng);
        std::vector<float> obs(kObsPixels);
        env.render(obs.data());
        write_pgm(path, obs.data());
      },
      py::arg("scenario"), py::arg("seed"), py::arg("path"));
}
