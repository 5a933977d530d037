#pragma once

// Test-only helpers: independent oracles the implementation is checked
// against (finite differences, brute-force counting, dense matrices).
// Nothing here may call back into the code path it verifies.

#include <cmath>
#include <functional>
#include <vector>

#include "mfm/tensor.hpp"

namespace oracle {

// Relative error with a floor: coordinates smaller than `floor` in both
// arguments are compared absolutely against floor.
inline double rel_err(double a, double b, double floor = 1e-3) {
  const double denom = std::max({std::fabs(a), std::fabs(b), floor});
  return std::fabs(a - b) / denom;
}

// Central finite difference of f at x along coordinate i.
inline double central_diff(const std::function<double(const std::vector<double>&)>& f,
                           std::vector<double> x, size_t i, double h) {
  x[i] += h;
  const double fp = f(x);
  x[i] -= 2.0 * h;
  const double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

// Max relative error between an analytic gradient and the FD sweep.
inline double max_grad_rel_err(const std::function<double(const std::vector<double>&)>& f,
                               const std::vector<double>& x,
                               const std::vector<double>& analytic, double h,
                               double floor = 1e-3) {
  double worst = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double fd = central_diff(f, x, i, h);
    worst = std::max(worst, rel_err(analytic[i], fd, floor));
  }
  return worst;
}

// Dense realization of a weight-hash side: W(i,j) = zeta(i) [j == kappa(i)].
inline std::vector<std::vector<double>> dense_hash_matrix(
    const std::vector<int64_t>& kappa, const std::vector<int8_t>& zeta, int64_t m) {
  std::vector<std::vector<double>> w(kappa.size(),
                                     std::vector<double>(static_cast<size_t>(m), 0.0));
  for (size_t i = 0; i < kappa.size(); ++i) {
    w[i][static_cast<size_t>(kappa[i])] = static_cast<double>(zeta[i]);
  }
  return w;
}

inline std::vector<double> matvec(const std::vector<std::vector<double>>& w,
                                  const std::vector<double>& x) {
  std::vector<double> y(w.size(), 0.0);
  for (size_t i = 0; i < w.size(); ++i) {
    for (size_t j = 0; j < x.size(); ++j) y[i] += w[i][j] * x[j];
  }
  return y;
}

inline std::vector<double> matvec_t(const std::vector<std::vector<double>>& w,
                                    const std::vector<double>& y) {
  if (w.empty()) return {};
  std::vector<double> x(w[0].size(), 0.0);
  for (size_t i = 0; i < w.size(); ++i) {
    for (size_t j = 0; j < x.size(); ++j) x[j] += w[i][j] * y[i];
  }
  return x;
}

}  // namespace oracle
