#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "conservo/core.hpp"

namespace conservo {

/// Coefficients of an explicit Runge-Kutta method.
struct ButcherTableau {
  std::string name;
  Eigen::MatrixXd a;  // s x s, strictly lower triangular
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  int order = 0;

  int stages() const { return static_cast<int>(b.size()); }
};

/// Checks explicitness, consistency and the row-sum condition. Throws Error.
void validate_tableau(const ButcherTableau& tab);

/// RK1 (Euler), RK2 (midpoint), RK3, RK4 (classical) and RK5 (6-stage Fehlberg).
ButcherTableau tableau(std::string_view name);

const std::vector<std::string>& tableau_names();

/// One explicit RK step y -> y + h sum_i b_i k_i.
StateVector rk_step(const Rhs& f, const StateVector& y, double h, const ButcherTableau& tab);

}  // namespace conservo
