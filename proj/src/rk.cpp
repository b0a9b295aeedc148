#include "conservo/rk.hpp"

#include <cmath>

namespace conservo {

namespace {

ButcherTableau make(std::string name, std::vector<std::vector<double>> rows,
                    std::vector<double> b, int order) {
  const auto s = static_cast<Eigen::Index>(b.size());
  ButcherTableau tab;
  tab.name = std::move(name);
  tab.a = Eigen::MatrixXd::Zero(s, s);
  tab.b = Eigen::Map<const Eigen::VectorXd>(b.data(), s);
  tab.c = Eigen::VectorXd::Zero(s);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(rows.size()); ++i) {
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()); ++j) {
      tab.a(i + 1, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  // Abscissae from the row sums; the stored values are then exact by construction.
  for (Eigen::Index i = 0; i < s; ++i) tab.c[i] = tab.a.row(i).sum();
  tab.order = order;
  return tab;
}

}  // namespace

void validate_tableau(const ButcherTableau& tab) {
  const auto s = tab.b.size();
  if (s < 1 || tab.a.rows() != s || tab.a.cols() != s || tab.c.size() != s) {
    throw Error("tableau '" + tab.name + "' has inconsistent shapes");
  }
  for (Eigen::Index i = 0; i < s; ++i) {
    for (Eigen::Index j = i; j < s; ++j) {
      if (tab.a(i, j) != 0.0) throw Error("tableau '" + tab.name + "' is not explicit");
    }
    if (std::abs(tab.a.row(i).sum() - tab.c[i]) > 1e-15) {
      throw Error("tableau '" + tab.name + "' violates the row-sum condition");
    }
  }
  if (std::abs(tab.b.sum() - 1.0) > 1e-15) {
    throw Error("tableau '" + tab.name + "' weights do not sum to one");
  }
}

const std::vector<std::string>& tableau_names() {
  static const std::vector<std::string> names{"RK1", "RK2", "RK3", "RK4", "RK5"};
  return names;
}

ButcherTableau tableau(std::string_view name) {
  ButcherTableau tab;
  if (name == "RK1") {
    tab = make("RK1", {}, {1.0}, 1);
  } else if (name == "RK2") {
    tab = make("RK2", {{0.5}}, {0.0, 1.0}, 2);
  } else if (name == "RK3") {
    tab = make("RK3", {{1.0 / 3.0}, {0.0, 2.0 / 3.0}}, {0.25, 0.0, 0.75}, 3);
  } else if (name == "RK4") {
    tab = make("RK4", {{0.5}, {0.0, 0.5}, {0.0, 0.0, 1.0}},
               {1.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0}, 4);
  } else if (name == "RK5") {
    // Fehlberg's six-stage pair, fifth-order weights.
    tab = make("RK5",
               {{1.0 / 4.0},
                {3.0 / 32.0, 9.0 / 32.0},
                {1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0},
                {439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0},
                {-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0}},
               {16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0}, 5);
  } else {
    std::string valid;
    for (const auto& n : tableau_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw Error("unknown tableau '" + std::string(name) + "' (valid: " + valid + ")");
  }
  validate_tableau(tab);
  return tab;
}

StateVector rk_step(const Rhs& f, const StateVector& y, double h, const ButcherTableau& tab) {
  if (!(h > 0.0)) throw Error("rk_step: step size must be positive");
  require_finite(y, "rk_step input");
  const int s = tab.stages();
  std::vector<StateVector> k(static_cast<std::size_t>(s));
  StateVector stage(y.size());
  for (int i = 0; i < s; ++i) {
    stage = y;
    for (int j = 0; j < i; ++j) {
      const double aij = tab.a(i, j);
      if (aij != 0.0) stage.noalias() += (h * aij) * k[static_cast<std::size_t>(j)];
    }
    k[static_cast<std::size_t>(i)] = f(stage);
    if (!k[static_cast<std::size_t>(i)].allFinite()) {
      throw NonFiniteError("rk_step: stage " + std::to_string(i + 1) + " of " + tab.name +
                           " is non-finite");
    }
  }
  StateVector out = y;
  for (int i = 0; i < s; ++i) {
    const double bi = tab.b[i];
    if (bi != 0.0) out.noalias() += (h * bi) * k[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace conservo
