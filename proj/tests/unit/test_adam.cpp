#include <doctest.h>

#include "dpiqn/adam.hpp"

using namespace dpiqn;

TEST_CASE("adam leaves parameters unchanged under zero gradients") {
  NamedTensors<double> p;
  p.add("w", {3}).fill(0.5);
  auto g = p.zeros_like();
  auto st = AdamState<double>::init(p);
  adam_step(p, g, st, 0.01);
  for (int i = 0; i < 3; ++i) CHECK(p.at("w")[i] == doctest::Approx(0.5));
}

TEST_CASE("first adam step moves a scalar by about lr") {
  // bias-corrected first step: lr * g / (|g| + eps) ~= lr * sign(g)
  NamedTensors<double> p;
  p.add("w", {1}).fill(1.0);
  auto g = p.zeros_like();
  g.at("w")[0] = 0.37;
  auto st = AdamState<double>::init(p);
  adam_step(p, g, st, 0.01);
  CHECK(p.at("w")[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-5));
}

TEST_CASE("two sequential steps replay identically from the same state") {
  Rng rng(77);
  NamedTensors<float> p;
  p.add("w", {8});
  for (int i = 0; i < 8; ++i) p.at("w")[i] = static_cast<float>(uniform_real(rng));
  NamedTensors<float> g1 = p.zeros_like(), g2 = p.zeros_like();
  for (int i = 0; i < 8; ++i) {
    g1.at("w")[i] = static_cast<float>(2.0 * uniform_real(rng) - 1.0);
    g2.at("w")[i] = static_cast<float>(2.0 * uniform_real(rng) - 1.0);
  }

  NamedTensors<float> pa = p;
  auto sa = AdamState<float>::init(pa);
  adam_step(pa, g1, sa, 0.003);
  adam_step(pa, g2, sa, 0.003);

  NamedTensors<float> pb = p;
  auto sb = AdamState<float>::init(pb);
  adam_step(pb, g1, sb, 0.003);
  adam_step(pb, g2, sb, 0.003);

  for (int i = 0; i < 8; ++i) CHECK(pa.at("w")[i] == pb.at("w")[i]);
}
