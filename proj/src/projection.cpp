#include "conservo/projection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include <spdlog/spdlog.h>

namespace conservo {

namespace {

constexpr double kManifoldWarnTolerance = 1e-10;
constexpr int kMaxManifoldWarnings = 5;
std::atomic<int> manifold_warnings{0};

// Solves (left^T right) x = rhs for the l x l system of the correction.
// Conditioning is judged on the column-normalized matrix so that invariants of
// very different magnitude (energy vs. angular momentum in SI units) do not
// register as rank deficiency; only near-collinear directions do.
Eigen::VectorXd solve_small(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs,
                            const Eigen::VectorXd& left_norms, const Eigen::VectorXd& right_norms) {
  const auto l = m.rows();
  if (rhs.size() != l) throw DimensionError("projection: residual length does not match gradients");
  for (Eigen::Index i = 0; i < l; ++i) {
    if (!(left_norms[i] > 0.0) || !(right_norms[i] > 0.0)) {
      throw SingularDirectionError(
          "projection: an invariant gradient vanishes; the directions do not have full column rank");
    }
  }
  if (l == 1) {
    // Single invariant: lambda = residual / ||grad g||^2.
    if (m(0, 0) == 0.0) throw SingularDirectionError("projection: zero normal matrix");
    return Eigen::VectorXd::Constant(1, rhs[0] / m(0, 0));
  }
  const Eigen::MatrixXd scaled =
      left_norms.cwiseInverse().asDiagonal() * m * right_norms.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled);
  const auto& sv = svd.singularValues();
  const double smax = sv[0];
  const double smin = sv[l - 1];
  if (!(smin > 0.0) || smax / smin > kMaxDirectionCondition) {
    throw SingularDirectionError(
        "projection: normal matrix is singular to working precision (condition estimate " +
        std::to_string(smin > 0.0 ? smax / smin : INFINITY) +
        "); the invariant gradients are not linearly independent");
  }
  const Eigen::VectorXd scaled_rhs = rhs.cwiseQuotient(left_norms);
  const Eigen::VectorXd z = scaled.partialPivLu().solve(scaled_rhs);
  return z.cwiseQuotient(right_norms);
}

Eigen::VectorXd column_norms(const GradientMatrix& g) { return g.colwise().norm().transpose(); }

void check_on_manifold(const ConservativeSystem& sys, const StateVector& y_n) {
  if (manifold_warnings.load(std::memory_order_relaxed) >= kMaxManifoldWarnings) return;
  const Eigen::VectorXd r = sys.invariants.residuals(y_n);
  const Eigen::VectorXd& ref = sys.invariants.reference_values();
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double scale = std::max(1.0, std::abs(ref[i]));
    if (std::abs(r[i]) > kManifoldWarnTolerance * scale) {
      const int n = manifold_warnings.fetch_add(1, std::memory_order_relaxed);
      if (n < kMaxManifoldWarnings) {
        spdlog::warn("{}: step input is off the invariant manifold ({} residual {:.3e}){}",
                     sys.name, sys.invariants.invariants()[static_cast<std::size_t>(i)].name, r[i],
                     n + 1 == kMaxManifoldWarnings ? "; further warnings suppressed" : "");
      }
      return;
    }
  }
}

}  // namespace

ProjectionDirection parse_direction(std::string_view name) {
  if (name == "predicted") return ProjectionDirection::AtPredicted;
  if (name == "previous") return ProjectionDirection::AtPrevious;
  if (name == "midpoint") return ProjectionDirection::AtMidpoint;
  throw Error("unknown projection direction '" + std::string(name) +
              "' (valid: predicted, previous, midpoint)");
}

std::string to_string(ProjectionDirection dir) {
  switch (dir) {
    case ProjectionDirection::AtPredicted: return "predicted";
    case ProjectionDirection::AtPrevious: return "previous";
    case ProjectionDirection::AtMidpoint: return "midpoint";
  }
  return "predicted";
}

Eigen::VectorXd eip_lambda(const Eigen::VectorXd& residual, const GradientMatrix& g) {
  const Eigen::VectorXd norms = column_norms(g);
  const Eigen::MatrixXd normal = g.transpose() * g;
  return -solve_small(normal, residual, norms, norms);
}

Eigen::VectorXd eip_lambda(const Eigen::VectorXd& residual, const GradientMatrix& grad_predicted,
                           const GradientMatrix& direction) {
  if (grad_predicted.rows() != direction.rows() || grad_predicted.cols() != direction.cols()) {
    throw DimensionError("eip_lambda: gradient and direction shapes differ");
  }
  const Eigen::MatrixXd jac = grad_predicted.transpose() * direction;
  return -solve_small(jac, residual, column_norms(grad_predicted), column_norms(direction));
}

EipStep eip_step_detailed(const ConservativeSystem& sys, const StateVector& y_n, double h,
                          const ButcherTableau& tab, ProjectionDirection dir) {
  require_dimension(y_n, sys.dimension, sys.name);
  check_on_manifold(sys, y_n);

  EipStep out;
  out.predicted = rk_step(sys.rhs, y_n, h, tab);
  const Eigen::VectorXd residual = sys.invariants.residuals(out.predicted);
  const GradientMatrix g_hat = sys.invariants.gradients(out.predicted);

  switch (dir) {
    case ProjectionDirection::AtPredicted:
      out.lambda = eip_lambda(residual, g_hat);
      out.y = out.predicted + g_hat * out.lambda;
      break;
    case ProjectionDirection::AtPrevious: {
      const GradientMatrix g_dir = sys.invariants.gradients(y_n);
      out.lambda = eip_lambda(residual, g_hat, g_dir);
      out.y = out.predicted + g_dir * out.lambda;
      break;
    }
    case ProjectionDirection::AtMidpoint: {
      const GradientMatrix g_dir = sys.invariants.gradients(0.5 * (y_n + out.predicted));
      out.lambda = eip_lambda(residual, g_hat, g_dir);
      out.y = out.predicted + g_dir * out.lambda;
      break;
    }
  }
  require_finite(out.y, sys.name + " projected state");
  return out;
}

StateVector eip_step(const ConservativeSystem& sys, const StateVector& y_n, double h,
                     const ButcherTableau& tab, ProjectionDirection dir) {
  return eip_step_detailed(sys, y_n, h, tab, dir).y;
}

NewtonProjection newton_projection_step(const ConservativeSystem& sys, const StateVector& y_n,
                                        double h, const ButcherTableau& tab,
                                        const NewtonPolicy& policy) {
  if (policy.max_iters < 1) throw Error("newton projection: max_iters must be at least 1");
  if (!(policy.tolerance >= 0.0)) throw Error("newton projection: tolerance must be non-negative");
  require_dimension(y_n, sys.dimension, sys.name);
  check_on_manifold(sys, y_n);

  NewtonProjection out;
  out.predicted = rk_step(sys.rhs, y_n, h, tab);
  const GradientMatrix dir = sys.invariants.gradients(out.predicted);
  const Eigen::VectorXd dir_norms = column_norms(dir);
  out.lambda = Eigen::VectorXd::Zero(dir.cols());

  for (int k = 0; k < policy.max_iters; ++k) {
    const StateVector z = out.predicted + dir * out.lambda;
    const Eigen::VectorXd f = sys.invariants.residuals(z);
    if (policy.tolerance > 0.0 && f.norm() <= policy.tolerance) break;
    const GradientMatrix gz = sys.invariants.gradients(z);
    // Jacobian of F(lambda) = g(y_hat + G lambda) is grad g(z)^T G.
    const Eigen::MatrixXd jac = gz.transpose() * dir;
    out.lambda -= solve_small(jac, f, column_norms(gz), dir_norms);
    ++out.iterations;
  }

  out.y = out.predicted + dir * out.lambda;
  require_finite(out.y, sys.name + " projected state");
  out.residual_norm = sys.invariants.residuals(out.y).norm();
  if (policy.tolerance > 0.0 && out.residual_norm > policy.tolerance) {
    throw ConvergenceError("newton projection did not reach tolerance after " +
                               std::to_string(out.iterations) + " iterations (residual " +
                               std::to_string(out.residual_norm) + ")",
                           out.residual_norm);
  }
  return out;
}

double lambda_star_harmonic(double omega, const StateVector& y0, const StateVector& y_hat) {
  if (!(omega > 0.0)) throw Error("lambda_star_harmonic: omega must be positive");
  const double n_hat = y_hat.norm();
  if (n_hat == 0.0) throw Error("lambda_star_harmonic: predicted state has zero norm");
  return -(1.0 / omega) * (1.0 - y0.norm() / n_hat);
}

}  // namespace conservo
