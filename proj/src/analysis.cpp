#include "conservo/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "conservo/systems.hpp"

namespace conservo {

MethodKind parse_method_kind(std::string_view name) {
  if (name == "bare-rk") return MethodKind::BareRk;
  if (name == "eip") return MethodKind::Eip;
  if (name == "newton-projection") return MethodKind::NewtonProjection;
  if (name == "stormer-verlet") return MethodKind::StormerVerlet;
  throw Error("unknown method '" + std::string(name) +
              "' (valid: bare-rk, eip, newton-projection, stormer-verlet)");
}

std::string to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::BareRk: return "bare-rk";
    case MethodKind::Eip: return "eip";
    case MethodKind::NewtonProjection: return "newton-projection";
    case MethodKind::StormerVerlet: return "stormer-verlet";
  }
  return "eip";
}

std::string MethodSpec::label() const {
  std::string tag;
  for (const auto& n : invariants) {
    if (!n.empty() && tag.find(n[0]) == std::string::npos) tag += n[0];
  }
  if (tag.empty()) tag = "all";
  const std::string base = tableau == "RK4" ? "" : "-" + tableau;
  switch (kind) {
    case MethodKind::BareRk: return tableau;
    case MethodKind::StormerVerlet: return "SV";
    case MethodKind::Eip: return "EIP-" + tag + base;
    case MethodKind::NewtonProjection: return fmt::format("NP{}-{}{}", newton.max_iters, tag, base);
  }
  return tableau;
}

Integrator::Integrator(const ConservativeSystem& sys, MethodSpec method)
    : full_(sys), method_(std::move(method)) {
  if (method_.kind != MethodKind::StormerVerlet) tab_ = tableau(method_.tableau);
  if (method_.kind == MethodKind::StormerVerlet && !full_.split) {
    throw Error("stormer-verlet: system '" + full_.name + "' is not separable");
  }
  projected_ = method_.invariants.empty() ? full_ : full_.with_invariants(method_.invariants);
  if (method_.invariants.empty()) method_.invariants = full_.invariants.names();
}

StateVector Integrator::step(const StateVector& y, double h) const {
  switch (method_.kind) {
    case MethodKind::BareRk: return rk_step(full_.rhs, y, h, tab_);
    case MethodKind::Eip: return eip_step(projected_, y, h, tab_, method_.direction);
    case MethodKind::NewtonProjection:
      return newton_projection_step(projected_, y, h, tab_, method_.newton).y;
    case MethodKind::StormerVerlet: return stormer_verlet_step(full_, y, h);
  }
  throw Error("unreachable method kind");
}

long long step_count(double h, double horizon) {
  if (!(h > 0.0)) throw Error("step size must be positive");
  if (!(horizon > 0.0)) throw Error("horizon must be positive");
  const auto n = std::llround(horizon / h);
  return std::max<long long>(n, 1);
}

StateVector integrate(const ConservativeSystem& sys, const MethodSpec& method, double h,
                      double horizon) {
  const Integrator integrator(sys, method);
  const long long n = step_count(h, horizon);
  StateVector y = sys.initial_state;
  for (long long i = 0; i < n; ++i) {
    try {
      y = integrator.step(y, h);
    } catch (const IntegrationError&) {
      throw;
    } catch (const Error& e) {
      throw IntegrationError(e.what(), static_cast<double>(i) * h);
    }
  }
  return y;
}

// ---------------------------------------------------------------------------

void ErrorSeries::validate() const {
  if (steps.size() != errors.size()) throw Error("error series: steps and errors differ in length");
  if (steps.size() < 2) throw Error("error series: at least two levels are required");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!(steps[i] > 0.0)) throw Error("error series: step sizes must be positive");
    if (i > 0 && !(steps[i] < steps[i - 1])) {
      throw Error("error series: step sizes must be strictly decreasing");
    }
  }
}

std::vector<FittedOrder> estimate_order(const ErrorSeries& series, double floor) {
  series.validate();
  std::vector<FittedOrder> out;
  for (std::size_t i = 0; i + 1 < series.errors.size(); ++i) {
    const double e0 = series.errors[i];
    const double e1 = series.errors[i + 1];
    if (!(e0 > 0.0) || !(e1 > 0.0) || !std::isfinite(e0) || !std::isfinite(e1)) {
      throw Error(fmt::format("{}: non-positive error between levels {} and {}; the error floor "
                              "has been reached",
                              series.label.empty() ? "order estimate" : series.label, i, i + 1));
    }
    FittedOrder fo;
    if (e0 < floor || e1 < floor) {
      fo.skipped = true;
      fo.order = std::nan("");
    } else {
      fo.order = std::log(e0 / e1) / std::log(series.steps[i] / series.steps[i + 1]);
    }
    out.push_back(fo);
  }
  return out;
}

double finest_order(const std::vector<FittedOrder>& orders) {
  for (auto it = orders.rbegin(); it != orders.rend(); ++it) {
    if (!it->skipped) return it->order;
  }
  throw Error("no order could be fitted above the round-off floor");
}

double error_norm(const StateVector& v, ErrorNorm norm) {
  if (v.size() == 0) return 0.0;
  if (norm == ErrorNorm::LInf) return v.cwiseAbs().maxCoeff();
  if (norm == ErrorNorm::ComplexLInf) {
    if (v.size() % 2 != 0) throw DimensionError("complex norm needs an even-length vector");
    const Eigen::Index n = v.size() / 2;
    return std::sqrt((v.head(n).cwiseAbs2() + v.tail(n).cwiseAbs2()).maxCoeff());
  }
  return v.norm() / std::sqrt(static_cast<double>(v.size()));
}

ErrorSeries self_convergence_series(std::string label, const std::vector<double>& steps,
                                    const std::vector<StateVector>& solutions, ErrorNorm norm) {
  if (steps.size() != solutions.size() || steps.size() < 3) {
    throw Error("self-convergence needs at least three levels with matching solutions");
  }
  ErrorSeries s;
  s.label = std::move(label);
  for (std::size_t i = 0; i + 1 < solutions.size(); ++i) {
    s.steps.push_back(steps[i + 1]);
    s.errors.push_back(error_norm(solutions[i] - solutions[i + 1], norm));
  }
  return s;
}

ErrorSeries self_convergence_study(const ConservativeSystem& sys, const MethodSpec& method,
                                   const std::vector<double>& steps, double horizon,
                                   ErrorNorm norm) {
  std::vector<StateVector> sols;
  for (double h : steps) sols.push_back(integrate(sys, method, h, horizon));
  return self_convergence_series(method.label(), steps, sols, norm);
}

ErrorSeries exact_error_study(const ConservativeSystem& sys, const MethodSpec& method,
                              const std::vector<double>& steps, double horizon, ErrorNorm norm) {
  if (!sys.exact_solution) throw Error("system '" + sys.name + "' has no exact solution");
  ErrorSeries s;
  s.label = method.label();
  for (double h : steps) {
    const long long n = step_count(h, horizon);
    const StateVector y = integrate(sys, method, h, horizon);
    s.steps.push_back(h);
    s.errors.push_back(error_norm(y - sys.exact_solution(static_cast<double>(n) * h), norm));
  }
  return s;
}

ErrorSeries invariant_error_study(const ConservativeSystem& sys, const MethodSpec& method,
                                  const std::vector<double>& steps, double horizon,
                                  ResidualStatistic stat, const std::vector<std::string>& names) {
  const Integrator integrator(sys, method);
  const InvariantSet watched =
      sys.invariants.select(names.empty() ? integrator.method().invariants : names);
  auto measure = [&](const StateVector& y) { return watched.residuals(y).cwiseAbs().maxCoeff(); };
  ErrorSeries s;
  s.label = method.label();
  for (double h : steps) {
    const long long n = step_count(h, horizon);
    StateVector y = sys.initial_state;
    double worst = 0.0;
    for (long long i = 0; i < n; ++i) {
      y = integrator.step(y, h);
      if (stat == ResidualStatistic::Max) worst = std::max(worst, measure(y));
    }
    s.steps.push_back(h);
    s.errors.push_back(stat == ResidualStatistic::Max ? worst : measure(y));
  }
  return s;
}

ErrorSeries lambda_error_study(double omega, const StateVector& y0, const ButcherTableau& tab,
                               const std::vector<double>& steps, double horizon) {
  const ConservativeSystem sys = harmonic_oscillator(omega, y0);
  ErrorSeries s;
  s.label = "lambda-" + tab.name;
  for (double h : steps) {
    const long long n = step_count(h, horizon);
    StateVector y = sys.initial_state;
    double err = 0.0;
    for (long long i = 0; i < n; ++i) {
      const EipStep st = eip_step_detailed(sys, y, h, tab);
      err = std::abs(st.lambda[0] - lambda_star_harmonic(omega, y0, st.predicted));
      y = st.y;
    }
    s.steps.push_back(h);
    s.errors.push_back(err);
  }
  return s;
}

std::vector<double> step_levels(double h0, int levels, double ratio) {
  std::vector<double> out;
  double h = h0;
  for (int i = 0; i < levels; ++i, h /= ratio) out.push_back(h);
  return out;
}

// ---------------------------------------------------------------------------

double RunResult::max_abs_residual(std::string_view name) const {
  double m = 0.0;
  for (double v : series(name)) m = std::max(m, std::abs(v));
  return m;
}

std::vector<double> RunResult::series(std::string_view name) const {
  for (std::size_t i = 0; i < invariant_names.size(); ++i) {
    if (invariant_names[i] == name) return residuals[i];
  }
  throw Error("run result has no invariant '" + std::string(name) + "'");
}

RunResult run_invariant_study(const ConservativeSystem& sys, const MethodSpec& method, double h,
                              double horizon, long long stride,
                              const std::vector<double>& snapshot_times) {
  if (stride < 1) throw Error("sample stride must be at least 1");
  const auto start = std::chrono::steady_clock::now();
  const Integrator integrator(sys, method);
  const long long n = step_count(h, horizon);

  RunResult r;
  r.invariant_names = sys.invariants.names();
  r.residuals.assign(r.invariant_names.size(), {});
  auto record = [&](double t, const StateVector& y) {
    r.times.push_back(t);
    const Eigen::VectorXd g = sys.invariants.residuals(y);
    for (std::size_t i = 0; i < r.residuals.size(); ++i) {
      r.residuals[i].push_back(g[static_cast<Eigen::Index>(i)]);
    }
  };
  std::vector<double> pending = snapshot_times;
  std::sort(pending.begin(), pending.end());
  std::size_t next_snapshot = 0;
  auto maybe_snapshot = [&](long long step, const StateVector& y) {
    while (next_snapshot < pending.size() &&
           std::llround(pending[next_snapshot] / h) <= step) {
      r.snapshots.emplace_back(static_cast<double>(step) * h, y);
      ++next_snapshot;
    }
  };

  StateVector y = sys.initial_state;
  record(0.0, y);
  maybe_snapshot(0, y);
  for (long long i = 1; i <= n; ++i) {
    try {
      y = integrator.step(y, h);
    } catch (const Error& e) {
      r.failure = e.what();
      r.failure_time = static_cast<double>(i - 1) * h;
      break;
    }
    if (i % stride == 0 || i == n) record(static_cast<double>(i) * h, y);
    maybe_snapshot(i, y);
  }
  r.final_state = y;
  r.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

// ---------------------------------------------------------------------------

std::vector<OrderRow> order_rows(const std::string& study, const std::string& system,
                                 const std::string& method, const std::string& tableau,
                                 const ErrorSeries& series, double floor) {
  series.validate();
  std::vector<OrderRow> rows;
  for (std::size_t i = 0; i < series.steps.size(); ++i) {
    OrderRow row{study, system, method, tableau, series.steps[i], series.errors[i], std::nullopt};
    if (i > 0) {
      // Pairs at an exact zero have no order; the rest of the series still does.
      const ErrorSeries pair{series.label, {series.steps[i - 1], series.steps[i]},
                             {series.errors[i - 1], series.errors[i]}};
      try {
        const FittedOrder fo = estimate_order(pair, floor).front();
        if (!fo.skipped) row.fitted_order = fo.order;
      } catch (const Error&) {
      }
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

void write_text_atomic(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open '" + tmp.string() + "' for writing");
    os << body;
    if (!os) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_order_csv(const std::filesystem::path& path, const std::vector<OrderRow>& rows) {
  std::ostringstream os;
  os << kCsvSchemaLine << '\n' << "study,system,method,tableau,h,error,fitted_order\n";
  for (const auto& r : rows) {
    os << r.study << ',' << r.system << ',' << r.method << ',' << r.tableau << ','
       << format_double(r.h) << ',' << format_double(r.error) << ','
       << (r.fitted_order ? format_double(*r.fitted_order) : "") << '\n';
  }
  write_text_atomic(path, os.str());
}

void write_residual_csv(const std::filesystem::path& path, const RunResult& run) {
  std::ostringstream os;
  os << kCsvSchemaLine << '\n' << "t,invariant_name,residual\n";
  for (std::size_t k = 0; k < run.times.size(); ++k) {
    for (std::size_t i = 0; i < run.invariant_names.size(); ++i) {
      os << format_double(run.times[k]) << ',' << run.invariant_names[i] << ','
         << format_double(run.residuals[i][k]) << '\n';
    }
  }
  write_text_atomic(path, os.str());
}

}  // namespace conservo
