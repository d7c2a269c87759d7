#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dpiqn/tensor.hpp"

namespace dpiqn {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 1e-4;
  bool pass = true;
  double worst = 0.0;
  std::string worst_name;
};

// Central finite differences against analytic gradients, 64-bit only.
// `loss` evaluates the scalar loss from the current parameter values;
// `analytic` holds d(loss)/d(param) for every named parameter.
inline GradCheckReport grad_check(NamedTensors<double>& params,
                                  const std::function<double()>& loss,
                                  const NamedTensors<double>& analytic, double tolerance = 1e-4,
                                  double eps = 1e-5) {
  GradCheckReport report;
  report.tolerance = tolerance;
  for (size_t t = 0; t < params.size(); ++t) {
    GradCheckEntry entry;
    entry.name = params.names[t];
    auto& p = params.tensors[t];
    const auto& g = analytic.at(params.names[t]);
    DPIQN_CHECK(p.same_shape(g), "grad_check: shape mismatch for ", entry.name);
    for (int64_t i = 0; i < p.numel(); ++i) {
      const double keep = p[i];
      p[i] = keep + eps;
      const double up = loss();
      p[i] = keep - eps;
      const double down = loss();
      p[i] = keep;
      const double fd = (up - down) / (2.0 * eps);
      const double denom = std::max({std::fabs(fd), std::fabs(g[i]), 1e-6});
      const double rel = std::fabs(fd - g[i]) / denom;
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    entry.pass = entry.max_rel_err <= tolerance;
    if (entry.max_rel_err > report.worst) {
      report.worst = entry.max_rel_err;
      report.worst_name = entry.name;
    }
    report.pass = report.pass && entry.pass;
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace dpiqn
