#pragma once

#include <random>
#include <vector>

#include "conservo/core.hpp"
#include "conservo/rk.hpp"
#include "conservo/systems.hpp"

namespace conservo::testing {

/// Central differences with a step scaled to each coordinate. `scales` gives the
/// typical magnitude of each coordinate (1 when empty).
inline StateVector fd_gradient(const std::function<double(const StateVector&)>& g,
                               const StateVector& y, double rel_step = 1e-6,
                               const StateVector& scales = StateVector()) {
  StateVector grad(y.size());
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    const double typical = scales.size() ? scales[j] : 1.0;
    const double dj = rel_step * std::max(typical, std::abs(y[j]));
    StateVector yp = y;
    StateVector ym = y;
    yp[j] += dj;
    ym[j] -= dj;
    grad[j] = (g(yp) - g(ym)) / (2.0 * dj);
  }
  return grad;
}

/// States reached from y0 by RK4 over random short times with a fine step.
inline std::vector<StateVector> flowed_states(const ConservativeSystem& sys, int count,
                                              double max_time, double h, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, max_time);
  const auto tab = tableau("RK4");
  std::vector<StateVector> out;
  for (int i = 0; i < count; ++i) {
    const double t = dist(rng);
    StateVector y = sys.initial_state;
    const int n = static_cast<int>(t / h);
    for (int k = 0; k < n; ++k) y = rk_step(sys.rhs, y, h, tab);
    out.push_back(y);
  }
  return out;
}

/// Random perturbation of y with relative size `scale` per coordinate.
inline StateVector perturbed(const StateVector& y, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  StateVector out = y;
  for (Eigen::Index j = 0; j < y.size(); ++j) out[j] += scale * std::abs(y[j]) * n(rng);
  return out;
}

/// Per-coordinate magnitudes for a [q; p] state: the largest entry of each half.
inline StateVector half_scales(const StateVector& y) {
  const Eigen::Index n = y.size() / 2;
  StateVector s(y.size());
  s.head(n).setConstant(y.head(n).cwiseAbs().maxCoeff());
  s.tail(y.size() - n).setConstant(y.tail(y.size() - n).cwiseAbs().maxCoeff());
  return s;
}

inline StateVector vec(std::initializer_list<double> v) {
  StateVector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace conservo::testing
