#include <doctest.h>

#include "dpiqn/layers.hpp"
#include "dpiqn/losses.hpp"

using namespace dpiqn;

namespace {
// non-template shims so brace-init lists convert
double pl(std::vector<Tensor<double>> heads, std::vector<std::vector<uint8_t>> mu) {
  return policy_inference_loss(heads, mu);
}
std::vector<Tensor<double>> plg(std::vector<Tensor<double>> heads,
                                std::vector<std::vector<uint8_t>> mu, double scale) {
  return policy_loss_logit_grads(heads, mu, scale);
}
}  // namespace

TEST_CASE("td targets: terminal transitions use the raw reward") {
  Tensor<double> qn({2, 5}, 0.0);
  for (int j = 0; j < 5; ++j) qn[5 + j] = 2.0;  // row 1 max = 2
  auto y = td_targets(qn, {1.0f, 0.0f}, {1, 0}, 0.99);
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(y[1] == doctest::Approx(0.99 * 2.0));
}

TEST_CASE("q loss hand values") {
  // terminal r=1 with Q=1 contributes 0; with Q=0 contributes 1
  Tensor<double> q({1, 5}, 0.0);
  q[2] = 1.0;
  CHECK(q_loss_value(q, {2}, {1.0}) == doctest::Approx(0.0));
  Tensor<double> q0({1, 5}, 0.0);
  CHECK(q_loss_value(q0, {2}, {1.0}) == doctest::Approx(1.0));

  // non-terminal, r=0, gamma .99, max target 2, Q=0 -> (1.98)^2
  Tensor<double> qn({1, 5}, 2.0);
  auto y = td_targets(qn, {0.0f}, {0}, 0.99);
  CHECK(q_loss_value(q0, {0}, y) == doctest::Approx(3.9204));
}

TEST_CASE("empty batch is a contract violation") {
  Tensor<double> q;
  CHECK_THROWS_AS(q_loss_value(q, {}, {}), ContractError);
}

TEST_CASE("policy loss: perfect prediction, uniform head, two-head aggregate") {
  Tensor<double> perfect({1, 5}, 0.0);
  perfect[3] = 1.0;
  CHECK(pl({perfect}, {{3}}) == doctest::Approx(0.0));

  Tensor<double> uniform({1, 5}, 0.2);
  CHECK(pl({uniform}, {{1}}) == doctest::Approx(std::log(5.0)));

  const double agg = pl({perfect, uniform}, {{3}, {0}});
  CHECK(agg == doctest::Approx((0.0 + std::log(5.0)) / 2.0).epsilon(1e-12));
}

TEST_CASE("one-hot reduction holds over random distributions") {
  Rng rng(17);
  for (int it = 0; it < 1000; ++it) {
    Tensor<double> logits({1, 5});
    for (int j = 0; j < 5; ++j) logits[j] = 6.0 * (2.0 * uniform_real(rng) - 1.0);
    Tensor<double> p = softmax_forward(logits);
    const uint8_t a = static_cast<uint8_t>(uniform_index(rng, 5));
    const double direct = -std::log(std::max(p[a], kLogProbFloor));
    CHECK(pl({p}, {{a}}) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("non-normalized head is a contract violation") {
  Tensor<double> bad({1, 5}, 0.3);
  CHECK_THROWS_AS(pl({bad}, {{0}}), ContractError);
}

TEST_CASE("adaptive lambda anchors, clamp, and monotonicity") {
  CHECK(adaptive_lambda(1.0) == 1.0);
  CHECK(adaptive_lambda(0.25) == 2.0);
  CHECK(adaptive_lambda(0.0) == kLambdaMax);
  CHECK(std::isfinite(adaptive_lambda(0.0)));

  // non-increasing in l_pi; lambda*l_q non-increasing too for fixed l_q
  double prev = adaptive_lambda(1e-9);
  const double l_q = 0.7;
  double prev_prod = prev * l_q;
  for (double l = 1e-8; l < 100.0; l *= 3.0) {
    const double cur = adaptive_lambda(l);
    CHECK(cur <= prev);
    CHECK(cur * l_q <= prev_prod);
    prev = cur;
    prev_prod = cur * l_q;
  }
}

TEST_CASE("total loss composes and stays finite") {
  CHECK(total_loss(0.5, 1.0, 1.0) == doctest::Approx(1.5));
  LossBreakdown b = make_breakdown(0.5, 1.0, adaptive_lambda(1.0));
  CHECK(b.total == doctest::Approx(b.lambda * b.l_q + b.l_pi));
  for (double l : {0.0, 1e-12, 1e-3, 1.0, 50.0})
    CHECK(std::isfinite(total_loss(3.0, l, adaptive_lambda(l))));
}

TEST_CASE("q_loss_grad scales by lambda and batch size") {
  Tensor<double> q({2, 5}, 0.0);
  q[1] = 2.0;
  q[5 + 4] = -1.0;
  std::vector<double> y = {0.5, 0.5};
  const double lambda = 3.0;
  Tensor<double> dq = q_loss_grad(q, {1, 4}, y, lambda);
  CHECK(dq[1] == doctest::Approx(2.0 * (2.0 - 0.5) * lambda / 2.0));
  CHECK(dq[5 + 4] == doctest::Approx(2.0 * (-1.0 - 0.5) * lambda / 2.0));
  CHECK(dq[0] == 0.0);
}

TEST_CASE("policy logit grads equal (pi - onehot) / count") {
  Tensor<double> p({1, 5}, 0.2);
  auto grads = plg({p, p}, {{0}, {1}}, 1.0);
  CHECK(grads.size() == 2);
  CHECK(grads[0][0] == doctest::Approx((0.2 - 1.0) / 2.0));
  CHECK(grads[0][1] == doctest::Approx(0.2 / 2.0));
  CHECK(grads[1][1] == doctest::Approx((0.2 - 1.0) / 2.0));
}
