#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace tosc::testing {

// One block of scalars to perturb, with the analytic gradient to compare.
struct Probe {
  double* data;
  long size;
  Eigen::VectorXd analytic;
};

// Worst per-entry relative error between central differences (step h) of
// f and the analytic gradients. Entries below `floor` in magnitude are
// compared absolutely against floor.
inline double grad_check(const std::function<double()>& f, std::vector<Probe>& probes,
                         double h = 1e-4, double floor = 1e-5) {
  double worst = 0.0;
  for (auto& p : probes) {
    for (long i = 0; i < p.size; ++i) {
      const double x0 = p.data[i];
      p.data[i] = x0 + h;
      const double fp = f();
      p.data[i] = x0 - h;
      const double fm = f();
      p.data[i] = x0;
      const double num = (fp - fm) / (2.0 * h);
      const double a = p.analytic[i];
      worst = std::max(worst, std::abs(a - num) / std::max({std::abs(a), std::abs(num), floor}));
    }
  }
  return worst;
}

template <class M>
Probe probe(M& m, const M& grad) {
  return Probe{m.data(), static_cast<long>(m.size()),
               Eigen::Map<const Eigen::VectorXd>(grad.data(), grad.size())};
}

}  // namespace tosc::testing
