#pragma once

#include <cmath>
#include <vector>

#include "dpiqn/tensor.hpp"

namespace dpiqn {

constexpr double kLambdaFloor = 1e-6;  // keeps 1/sqrt finite as L^PI -> 0
constexpr double kLambdaMax = 1000.0;
constexpr double kLogProbFloor = 1e-12;

struct LossBreakdown {
  double l_q = 0.0;
  double l_pi = 0.0;
  double lambda = 1.0;
  double total = 0.0;
};

// lambda = min(1/sqrt(max(l_pi, floor)), max). Computed once per minibatch
// from the batch-mean policy loss; carries no gradient.
inline double adaptive_lambda(double l_pi) {
  DPIQN_CHECK(l_pi >= 0.0, "policy inference loss must be nonnegative");
  return std::min(1.0 / std::sqrt(std::max(l_pi, kLambdaFloor)), kLambdaMax);
}

inline double total_loss(double l_q, double l_pi, double lambda) {
  return lambda * l_q + l_pi;
}

inline LossBreakdown make_breakdown(double l_q, double l_pi, double lambda) {
  return {l_q, l_pi, lambda, total_loss(l_q, l_pi, lambda)};
}

// y = r for terminal transitions, r + gamma * max_a' targetQ(s', a') otherwise.
template <typename T>
std::vector<double> td_targets(const Tensor<T>& target_q_next, const std::vector<float>& rewards,
                               const std::vector<uint8_t>& terminals, double gamma) {
  DPIQN_CHECK(target_q_next.shape.size() == 2 && target_q_next.dim(0) > 0, "empty batch");
  const int b = static_cast<int>(target_q_next.dim(0)), a = static_cast<int>(target_q_next.dim(1));
  DPIQN_CHECK(rewards.size() == static_cast<size_t>(b) && terminals.size() == rewards.size(),
              "batch arrays disagree in length");
  std::vector<double> y(static_cast<size_t>(b));
  for (int i = 0; i < b; ++i) {
    double best = target_q_next[static_cast<int64_t>(i) * a];
    for (int j = 1; j < a; ++j)
      best = std::max(best, static_cast<double>(target_q_next[static_cast<int64_t>(i) * a + j]));
    y[static_cast<size_t>(i)] = terminals[static_cast<size_t>(i)]
                                    ? static_cast<double>(rewards[static_cast<size_t>(i)])
                                    : rewards[static_cast<size_t>(i)] + gamma * best;
  }
  return y;
}

// Mean squared TD error over the minibatch.
template <typename T>
double q_loss_value(const Tensor<T>& q, const std::vector<uint8_t>& actions,
                    const std::vector<double>& y) {
  DPIQN_CHECK(q.shape.size() == 2 && q.dim(0) > 0, "empty batch");
  const int b = static_cast<int>(q.dim(0)), a = static_cast<int>(q.dim(1));
  double acc = 0.0;
  for (int i = 0; i < b; ++i) {
    const double diff =
        y[static_cast<size_t>(i)] -
        static_cast<double>(q[static_cast<int64_t>(i) * a + actions[static_cast<size_t>(i)]]);
    acc += diff * diff;
  }
  return acc / b;
}

// d(l_q)/dq scaled by `scale` (the trainer passes lambda there, and divides by
// the element count for sequence batches).
template <typename T>
Tensor<T> q_loss_grad(const Tensor<T>& q, const std::vector<uint8_t>& actions,
                      const std::vector<double>& y, double scale) {
  const int b = static_cast<int>(q.dim(0)), a = static_cast<int>(q.dim(1));
  Tensor<T> dq(q.shape, T(0));
  for (int i = 0; i < b; ++i) {
    const int64_t idx = static_cast<int64_t>(i) * a + actions[static_cast<size_t>(i)];
    dq[idx] = static_cast<T>(2.0 * (static_cast<double>(q[idx]) - y[static_cast<size_t>(i)]) *
                             scale / b);
  }
  return dq;
}

// H(mu) + KL(mu || pi) for one-hot mu collapses to -log pi(a_o); averaged over
// heads and batch. Heads must be proper distributions.
template <typename T>
double policy_inference_loss(const std::vector<Tensor<T>>& policies,
                             const std::vector<std::vector<uint8_t>>& true_actions) {
  DPIQN_CHECK(!policies.empty(), "policy loss needs at least one head");
  DPIQN_CHECK(policies.size() == true_actions.size(), "heads vs action vectors mismatch");
  double acc = 0.0;
  int64_t count = 0;
  for (size_t h = 0; h < policies.size(); ++h) {
    const auto& p = policies[h];
    const int b = static_cast<int>(p.dim(0)), k = static_cast<int>(p.dim(1));
    DPIQN_CHECK(true_actions[h].size() == static_cast<size_t>(b), "head ", h,
                " action count mismatch");
    for (int i = 0; i < b; ++i) {
      const T* row = p.ptr() + static_cast<int64_t>(i) * k;
      double sum = 0.0;
      for (int j = 0; j < k; ++j) sum += static_cast<double>(row[j]);
      DPIQN_CHECK(std::fabs(sum - 1.0) <= 1e-4, "head ", h, " is not normalized (sum=", sum, ")");
      const double pa = std::max(static_cast<double>(row[true_actions[h][static_cast<size_t>(i)]]),
                                 kLogProbFloor);
      acc += -std::log(pa);
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

// Gradient of the mean cross-entropy w.r.t. head logits: (pi - onehot) / count.
template <typename T>
std::vector<Tensor<T>> policy_loss_logit_grads(const std::vector<Tensor<T>>& policies,
                                               const std::vector<std::vector<uint8_t>>& true_actions,
                                               double extra_scale = 1.0) {
  int64_t count = 0;  // batch * heads
  for (const auto& p : policies) count += p.dim(0);
  std::vector<Tensor<T>> grads;
  const double scale = extra_scale / static_cast<double>(count);
  for (size_t h = 0; h < policies.size(); ++h) {
    const auto& p = policies[h];
    const int b = static_cast<int>(p.dim(0)), k = static_cast<int>(p.dim(1));
    Tensor<T> g(p.shape);
    for (int i = 0; i < b; ++i) {
      const int64_t off = static_cast<int64_t>(i) * k;
      for (int j = 0; j < k; ++j) g[off + j] = static_cast<T>(p[off + j] * scale);
      g[off + true_actions[h][static_cast<size_t>(i)]] -= static_cast<T>(scale);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

}  // namespace dpiqn
