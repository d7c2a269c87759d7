#pragma once

#include <cmath>

#include "dpiqn/tensor.hpp"

namespace dpiqn {

template <typename T>
struct AdamState {
  NamedTensors<T> m, v;
  int64_t step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  static AdamState init(const NamedTensors<T>& params) {
    AdamState s;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    return s;
  }
};

// Bias-corrected Adam. Mutates params and state in place.
template <typename T>
void adam_step(NamedTensors<T>& params, const NamedTensors<T>& grads, AdamState<T>& state,
               double lr) {
  DPIQN_CHECK(params.size() == grads.size() && params.size() == state.m.size(),
              "adam: parameter/gradient/moment sets differ in size");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t t = 0; t < params.size(); ++t) {
    auto& p = params.tensors[t];
    const auto& g = grads.tensors[t];
    auto& m = state.m.tensors[t];
    auto& v = state.v.tensors[t];
    DPIQN_CHECK(p.same_shape(g), "adam: grad shape ", shape_str(g.shape), " vs param ",
                shape_str(p.shape), " for ", params.names[t]);
    const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
    for (int64_t i = 0; i < p.numel(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      const double mhat = static_cast<double>(m[i]) / bc1;
      const double vhat = static_cast<double>(v[i]) / bc2;
      p[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

}  // namespace dpiqn
