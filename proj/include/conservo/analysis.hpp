#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "conservo/core.hpp"
#include "conservo/projection.hpp"
#include "conservo/rk.hpp"

namespace conservo {

// ---------------------------------------------------------------------------
// Methods

enum class MethodKind { BareRk, Eip, NewtonProjection, StormerVerlet };

MethodKind parse_method_kind(std::string_view name);
std::string to_string(MethodKind kind);

struct MethodSpec {
  MethodKind kind = MethodKind::Eip;
  std::string tableau = "RK4";
  /// Invariants to project onto. Empty selects every invariant of the system.
  std::vector<std::string> invariants;
  ProjectionDirection direction = ProjectionDirection::AtPredicted;
  NewtonPolicy newton;

  /// Short name such as "EIP-HL", "NP2-H-RK1" or "RK4". Non-RK4 bases are suffixed.
  std::string label() const;
};

/// Integration aborted; carries the time of the last accepted step.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// A system bound to a method. Stateless apart from the bound data.
class Integrator {
 public:
  Integrator(const ConservativeSystem& sys, MethodSpec method);

  StateVector step(const StateVector& y, double h) const;
  const ConservativeSystem& system() const { return full_; }
  const MethodSpec& method() const { return method_; }

 private:
  ConservativeSystem full_;
  ConservativeSystem projected_;
  MethodSpec method_;
  ButcherTableau tab_;
};

/// round(horizon / h), at least one.
long long step_count(double h, double horizon);

StateVector integrate(const ConservativeSystem& sys, const MethodSpec& method, double h,
                      double horizon);

// ---------------------------------------------------------------------------
// Order estimation

/// Error (or adjacent-difference) values against strictly decreasing step sizes.
struct ErrorSeries {
  std::string label;
  std::vector<double> steps;
  std::vector<double> errors;

  void validate() const;
};

/// Errors below this are treated as round-off and excluded from order fits.
inline constexpr double kRoundOffFloor = 1e-14;

struct FittedOrder {
  double order = 0.0;
  bool skipped = false;  // one of the pair is below the round-off floor
};

/// Order between levels i and i+1: log(e_i / e_{i+1}) / log(h_i / h_{i+1}).
/// For halving steps this is log2 of the error ratio.
std::vector<FittedOrder> estimate_order(const ErrorSeries& series, double floor = kRoundOffFloor);

/// Order of the finest pair that was not skipped.
double finest_order(const std::vector<FittedOrder>& orders);

/// ComplexLInf treats the vector as [re; im] halves and takes max |re + i im|.
enum class ErrorNorm { LInf, L2, ComplexLInf };

double error_norm(const StateVector& v, ErrorNorm norm);

/// Differences between solutions at adjacent levels. Entry i is |y_i - y_{i+1}|,
/// labelled with step h_{i+1}; successive ratios estimate 2^p.
ErrorSeries self_convergence_series(std::string label, const std::vector<double>& steps,
                                    const std::vector<StateVector>& solutions, ErrorNorm norm);

ErrorSeries self_convergence_study(const ConservativeSystem& sys, const MethodSpec& method,
                                   const std::vector<double>& steps, double horizon,
                                   ErrorNorm norm = ErrorNorm::LInf);

/// Error against the system's exact solution at the horizon.
ErrorSeries exact_error_study(const ConservativeSystem& sys, const MethodSpec& method,
                              const std::vector<double>& steps, double horizon,
                              ErrorNorm norm = ErrorNorm::LInf);

enum class ResidualStatistic { Final, Max };

/// max_i |g_i| over the named invariants (all projected ones if empty), either at
/// the horizon or maximized over the run.
ErrorSeries invariant_error_study(const ConservativeSystem& sys, const MethodSpec& method,
                                  const std::vector<double>& steps, double horizon,
                                  ResidualStatistic stat,
                                  const std::vector<std::string>& names = {});

/// |lambda_hat - lambda_star| at the last step of an EIP run to `horizon` on the
/// harmonic oscillator.
ErrorSeries lambda_error_study(double omega, const StateVector& y0, const ButcherTableau& tab,
                               const std::vector<double>& steps, double horizon = 1.0);

/// h0, h0/ratio, h0/ratio^2, ...
std::vector<double> step_levels(double h0, int levels, double ratio = 2.0);

// ---------------------------------------------------------------------------
// Long runs

struct RunResult {
  std::vector<std::string> invariant_names;
  std::vector<double> times;
  /// residuals[i][k]: invariant i at times[k].
  std::vector<std::vector<double>> residuals;
  std::vector<std::pair<double, StateVector>> snapshots;
  StateVector final_state;
  double duration_seconds = 0.0;
  std::optional<std::string> failure;
  double failure_time = 0.0;

  double max_abs_residual(std::string_view name) const;
  std::vector<double> series(std::string_view name) const;
};

/// Integrates and samples every invariant of `sys` at t = 0, every `stride`
/// steps and at the end. Integrator errors end the run and are recorded.
RunResult run_invariant_study(const ConservativeSystem& sys, const MethodSpec& method, double h,
                              double horizon, long long stride = 1,
                              const std::vector<double>& snapshot_times = {});

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kCsvSchemaLine = "# conservo-csv schema=1";

struct OrderRow {
  std::string study;
  std::string system;
  std::string method;
  std::string tableau;
  double h = 0.0;
  double error = 0.0;
  std::optional<double> fitted_order;
};

std::vector<OrderRow> order_rows(const std::string& study, const std::string& system,
                                 const std::string& method, const std::string& tableau,
                                 const ErrorSeries& series, double floor = kRoundOffFloor);

std::string format_double(double v);

/// Written to a temporary file and renamed into place.
void write_order_csv(const std::filesystem::path& path, const std::vector<OrderRow>& rows);
void write_residual_csv(const std::filesystem::path& path, const RunResult& run);
void write_text_atomic(const std::filesystem::path& path, const std::string& body);

}  // namespace conservo
