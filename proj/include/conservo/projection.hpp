#pragma once

#include <string>
#include <string_view>

#include "conservo/core.hpp"
#include "conservo/rk.hpp"

namespace conservo {

/// Point at which the invariant gradients that span the correction are taken.
enum class ProjectionDirection {
  AtPredicted,  // grad g(y_hat), the default
  AtPrevious,   // grad g(y_n)
  AtMidpoint,   // grad g((y_n + y_hat) / 2)
};

ProjectionDirection parse_direction(std::string_view name);
std::string to_string(ProjectionDirection dir);

struct NewtonPolicy {
  int max_iters = 1;
  /// Stop once ||F(lambda)|| <= tolerance. Zero means run exactly max_iters iterations.
  double tolerance = 0.0;
};

/// Condition threshold above which the projection directions count as rank deficient.
inline constexpr double kMaxDirectionCondition = 1e12;

/// Multiplier of the explicit correction: -(G^T G)^{-1} residual.
Eigen::VectorXd eip_lambda(const Eigen::VectorXd& residual, const GradientMatrix& g);

/// One Newton step from lambda = 0 when the correction is spanned by `direction`
/// rather than by the gradients at the predicted point:
/// -(grad_predicted^T direction)^{-1} residual.
Eigen::VectorXd eip_lambda(const Eigen::VectorXd& residual, const GradientMatrix& grad_predicted,
                           const GradientMatrix& direction);

struct EipStep {
  StateVector y;          // corrected state
  StateVector predicted;  // RK predictor y_hat
  Eigen::VectorXd lambda;
};

/// Runge-Kutta predictor followed by the single explicit projection correction.
EipStep eip_step_detailed(const ConservativeSystem& sys, const StateVector& y_n, double h,
                          const ButcherTableau& tab,
                          ProjectionDirection dir = ProjectionDirection::AtPredicted);

StateVector eip_step(const ConservativeSystem& sys, const StateVector& y_n, double h,
                     const ButcherTableau& tab,
                     ProjectionDirection dir = ProjectionDirection::AtPredicted);

struct NewtonProjection {
  StateVector y;
  StateVector predicted;
  Eigen::VectorXd lambda;
  int iterations = 0;
  double residual_norm = 0.0;
};

/// Orthogonal projection along grad g(y_hat), solving g(y_hat + G lambda) = 0 with
/// Newton's method started from lambda = 0.
NewtonProjection newton_projection_step(const ConservativeSystem& sys, const StateVector& y_n,
                                        double h, const ButcherTableau& tab,
                                        const NewtonPolicy& policy);

/// Smallest-magnitude root of the projection equation for H = (omega/2) |y|^2.
double lambda_star_harmonic(double omega, const StateVector& y0, const StateVector& y_hat);

}  // namespace conservo
