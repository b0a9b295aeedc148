// Acceptance criteria 1-10: one PASS/FAIL line each.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "conservo/analysis.hpp"
#include "conservo/gpe.hpp"
#include "conservo/projection.hpp"
#include "conservo/systems.hpp"
#include "support.hpp"

using namespace conservo;
using conservo::testing::vec;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "!") + what;
  }
};

int failures = 0;

void criterion(int id, const char* title, double limit_s, const std::function<Verdict()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v.check(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  v.check(secs < limit_s, fmt::format("runtime {:.2f} s < {} s", secs, limit_s));
  if (!v.pass) ++failures;
  std::printf("%s %2d %s: %s\n", v.pass ? "PASS" : "FAIL", id, title, v.detail.c_str());
  std::fflush(stdout);
}

std::string g(double x) { return fmt::format("{:.5g}", x); }

MethodSpec eip(const std::string& tab, std::vector<std::string> invariants = {}) {
  MethodSpec m;
  m.tableau = tab;
  m.invariants = std::move(invariants);
  return m;
}

double max_rel_diff(const StateVector& a, const StateVector& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max(std::abs(a[i]), std::abs(b[i]));
    if (scale > 0) worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

GpeConfig plane_wave_box(std::size_t n) {
  GpeConfig c;
  c.nx = c.ny = n;
  c.beta = 1.0;
  return c;
}

GpeConfig rotating_box(std::size_t n) {
  GpeConfig c;
  c.x_min = c.y_min = -2.0;
  c.x_max = c.y_max = 2.0;
  c.nx = c.ny = n;
  c.beta = 1.0;
  c.omega = 0.5;
  c.potential = harmonic_potential();
  return c;
}

// ---------------------------------------------------------------------------

Verdict lambda_orders() {
  Verdict v;
  const StateVector y0 = vec({1.0, 0.0});
  const std::vector<std::string> names{"RK1", "RK2", "RK3", "RK4"};
  const std::vector<double> bound{3.8, 7.8, 7.8, 11.7};
  const std::vector<std::vector<double>> table{
      {6.3506e-03, 6.2524e-04, 4.5956e-05, 3.0048e-06},
      {6.2524e-04, 3.0048e-06, 1.1909e-08, 4.6563e-11},
      {4.0849e-05, 2.8629e-07, 1.2703e-09, 5.1204e-12},
      {1.8688e-06, 5.5259e-10, 1.4148e-13, 3.3307e-17}};
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto s = lambda_error_study(10.0, y0, tableau(names[i]), step_levels(0.1, 4));
    const double order = estimate_order(s, 0.0).back().order;
    double worst = 1.0;
    for (std::size_t k = 0; k < 4; ++k) {
      worst = std::max(worst, std::max(s.errors[k] / table[i][k], table[i][k] / s.errors[k]));
    }
    v.check(order >= bound[i], names[i] + " order " + g(order) + " >= " + g(bound[i]));
    v.check(worst <= 3.0, names[i] + " magnitude factor " + g(worst) + " <= 3");
  }
  return v;
}

Verdict energy_orders() {
  Verdict v;
  const auto sys = harmonic_oscillator(10.0, vec({1.0, 0.0}));
  struct Row {
    MethodSpec m;
    double h0;
    double bound;
  };
  std::vector<Row> rows;
  const std::vector<double> eip_bound{3.8, 7.8, 7.6, 11.7};
  for (int p = 1; p <= 4; ++p) {
    rows.push_back({eip("RK" + std::to_string(p), {"H"}), p == 1 ? 0.1 : 0.2, eip_bound[p - 1]});
  }
  for (int p = 1; p <= 2; ++p) {
    MethodSpec np = eip("RK" + std::to_string(p), {"H"});
    np.kind = MethodKind::NewtonProjection;
    np.newton = NewtonPolicy{2, 0.0};
    rows.push_back({np, p == 1 ? 0.1 : 0.2, p == 1 ? 7.5 : 15.0});
  }
  for (const auto& r : rows) {
    const auto s = invariant_error_study(sys, r.m, step_levels(r.h0, 4), 1.0, ResidualStatistic::Final);
    const double order = finest_order(estimate_order(s));
    v.check(order >= r.bound, r.m.label() + " " + g(order) + " >= " + g(r.bound));
  }
  return v;
}

Verdict kepler_solution_orders() {
  Verdict v;
  const auto sys = perturbed_kepler(0.6);
  for (const auto& inv : std::vector<std::vector<std::string>>{{"H"}, {"L"}, {"H", "L"}}) {
    const MethodSpec m = eip("RK4", inv);
    const auto orders = estimate_order(self_convergence_study(sys, m, step_levels(0.02, 5), 1.0));
    std::string list;
    for (const auto& o : orders) list += (list.empty() ? "" : ",") + g(o.order);
    const double finest = finest_order(orders);
    v.check(std::abs(finest - 4.0) <= 0.1, m.label() + " finest " + g(finest) + " = 4 +- 0.1 (all " + list + ")");
  }
  return v;
}

Verdict kepler_invariant_orders() {
  Verdict v;
  const auto sys = perturbed_kepler(0.6);
  const std::vector<double> steps{0.03, 0.03 / 2, 0.03 / 3, 0.03 / 4};
  for (int p : {1, 2}) {
    const double target = 2.0 * (p + 1);
    for (const auto& inv : std::vector<std::vector<std::string>>{{"H"}, {"L"}, {"H", "L"}}) {
      const MethodSpec m = eip("RK" + std::to_string(p), inv);
      const auto s = invariant_error_study(sys, m, steps, 1.0, ResidualStatistic::Final);
      const double order = finest_order(estimate_order(s));
      v.check(std::abs(order - target) <= 0.3, m.label() + " " + g(order) + " = " + g(target) + " +- 0.3");
    }
  }
  return v;
}

Verdict single_newton_equals_eip() {
  Verdict v;
  const GpeModel rot(rotating_box(16));
  const GpeModel pw(plane_wave_box(16));
  const std::vector<std::pair<ConservativeSystem, double>> cases{
      {harmonic_oscillator(10.0, vec({1.0, 0.0})), 0.01},
      {perturbed_kepler(0.6), 0.03},
      {solar_system(), 0.002 * kJulianYear},
      {charged_particle(default_particle_setup(ChargedField::Uniform)), M_PI / 10},
      {charged_particle(default_particle_setup(ChargedField::Tokamak)), M_PI / 10},
      {zero_field(vec({1.0, -0.5, 2.0})), 0.1},
      {rot.as_conservative_system(GpeInvariants::Both, rot.vortex_state()), 1e-3},
      {pw.as_conservative_system(GpeInvariants::Energy, pw.plane_wave(1.0, 1.0, 1.0, 0.0)), 1e-3},
  };
  std::mt19937_64 rng(97);
  std::uniform_real_distribution<double> u(0.25, 1.0);
  for (const auto& [sys, h] : cases) {
    const auto states = conservo::testing::flowed_states(sys, 100, 50 * h, h, 101);
    double worst = 0.0;
    for (const auto& name : tableau_names()) {
      const auto tab = tableau(name);
      for (const auto& y : states) {
        const double step = h * u(rng);
        const auto e = eip_step(sys, y, step, tab);
        const auto n = newton_projection_step(sys, y, step, tab, NewtonPolicy{1, 0.0});
        worst = std::max(worst, max_rel_diff(e, n.y));
      }
    }
    v.check(worst <= 1e-15, sys.name + "-" + sys.invariants.names().back() + " " + g(worst));
  }
  return v;
}

Verdict kepler_long_run() {
  Verdict v;
  const auto sys = perturbed_kepler(0.6);
  const auto hl = run_invariant_study(sys, eip("RK4", {"H", "L"}), 0.03, 300.0, 10);
  v.check(!hl.failure, "EIP-HL completed");
  v.check(hl.max_abs_residual("H") <= 1e-11, "EIP-HL |H| " + g(hl.max_abs_residual("H")) + " <= 1e-11");
  v.check(hl.max_abs_residual("L") <= 1e-11, "EIP-HL |L| " + g(hl.max_abs_residual("L")) + " <= 1e-11");
  const auto h = run_invariant_study(sys, eip("RK4", {"H"}), 0.03, 300.0, 10);
  v.check(!h.failure, "EIP-H completed");
  v.check(h.max_abs_residual("H") <= 1e-11, "EIP-H |H| " + g(h.max_abs_residual("H")) + " <= 1e-11");
  v.check(h.max_abs_residual("L") <= 1e-6, "EIP-H |L| " + g(h.max_abs_residual("L")) + " <= 1e-6");
  const auto l = h.series("L");
  double first = 0.0;
  for (std::size_t i = 0; i < l.size() / 2; ++i) first = std::max(first, std::abs(l[i]));
  const double ratio = h.max_abs_residual("L") / first;
  v.check(ratio <= 2.2, "EIP-H |L| growth over doubled horizon x" + g(ratio) + " <= 2.2");
  return v;
}

Verdict solar_system_run() {
  Verdict v;
  const auto sys = solar_system();
  const Eigen::VectorXd ref = sys.invariants.reference_values();
  const double h = 0.002 * kJulianYear;
  const double horizon = 10.0 * kJulianYear;
  const auto names = sys.invariants.names();
  const auto hl = run_invariant_study(sys, eip("RK4", names), h, horizon, 1);
  v.check(!hl.failure, "EIP-HL completed");
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double rel = hl.max_abs_residual(names[i]) / std::abs(ref[i]);
    v.check(rel <= 1e-12, "EIP-HL " + names[i] + " " + g(rel) + " <= 1e-12");
  }
  MethodSpec sv;
  sv.kind = MethodKind::StormerVerlet;
  const auto s = run_invariant_study(sys, sv, h, horizon, 1);
  v.check(!s.failure, "SV completed");
  for (std::size_t i = 1; i < names.size(); ++i) {
    const double rel = s.max_abs_residual(names[i]) / std::abs(ref[i]);
    v.check(rel <= 1e-12, "SV " + names[i] + " " + g(rel) + " <= 1e-12");
  }
  const double rel_h = s.max_abs_residual("H") / std::abs(ref[0]);
  v.check(rel_h <= 1e-8, "SV H " + g(rel_h) + " <= 1e-8");
  const auto hs = s.series("H");
  const std::size_t year = 500;
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i <= year; ++i) first = std::max(first, std::abs(hs[i]));
  for (std::size_t i = hs.size() - year - 1; i < hs.size(); ++i) last = std::max(last, std::abs(hs[i]));
  v.check(last <= 2.0 * first, "SV H last/first year x" + g(last / first) + " <= 2 (no secular drift)");
  return v;
}

Verdict charged_particle_runs() {
  Verdict v;
  const double h = M_PI / 10;
  const auto uni = charged_particle(default_particle_setup(ChargedField::Uniform));
  const auto hl = run_invariant_study(uni, eip("RK4", {"H", "L"}), h, 1e4 * h, 1);
  v.check(hl.max_abs_residual("H") <= 1e-10, "EIP-HL |H| " + g(hl.max_abs_residual("H")) + " <= 1e-10");
  v.check(hl.max_abs_residual("L") <= 1e-10, "EIP-HL |L| " + g(hl.max_abs_residual("L")) + " <= 1e-10");
  MethodSpec rk4;
  rk4.kind = MethodKind::BareRk;
  const auto bare = run_invariant_study(uni, rk4, h, 1e4 * h, 1);
  const auto hs = bare.series("H");
  bool monotone = true;
  for (std::size_t i = 2; i < hs.size(); ++i) monotone = monotone && std::abs(hs[i]) > std::abs(hs[i - 1]);
  v.check(monotone, "RK4 |H| strictly increasing");
  v.check(std::abs(hs.back()) > 1e-6, "RK4 final |H| " + g(std::abs(hs.back())) + " > 1e-6");

  // Banana orbit: the band of R over the first bounce period (second sign
  // change of the 1000-step mean of z), then the next 1e4 steps.
  const auto tok = charged_particle(default_particle_setup(ChargedField::Tokamak));
  const Integrator integrator(tok, eip("RK4", {"H"}));
  StateVector y = tok.initial_state;
  const int block = 1000;
  double z_sum = 0.0;
  int sign = 0, changes = 0;
  long long n = 0;
  double r_min = 1e300, r_max = -1e300;
  while (changes < 2) {
    if (n > 1000000) throw Error("no banana period within 1e6 steps");
    y = integrator.step(y, h);
    ++n;
    const double r = std::hypot(y[0], y[1]);
    r_min = std::min(r_min, r);
    r_max = std::max(r_max, r);
    z_sum += y[2];
    if (n % block == 0) {
      const int s = z_sum > 0 ? 1 : -1;
      if (sign != 0 && s != sign) ++changes;
      sign = s;
      z_sum = 0.0;
    }
  }
  double lo = 1e300, hi = -1e300;
  for (int k = 0; k < 10000; ++k) {
    y = integrator.step(y, h);
    const double r = std::hypot(y[0], y[1]);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  v.check(lo >= r_min && hi <= r_max,
          fmt::format("tokamak EIP-H R [{:.6f}, {:.6f}] within first-period band [{:.6f}, {:.6f}] ({} steps)", lo,
                      hi, r_min, r_max, n));
  return v;
}

Verdict gpe_plane_wave() {
  Verdict v;
  const GpeModel m(plane_wave_box(32));
  const ComplexGrid psi0 = m.plane_wave(1.0, 1.0, 1.0, 0.0);
  const std::vector<double> steps{2e-4, 1e-4, 5e-5};
  const std::vector<std::pair<GpeInvariants, std::vector<std::string>>> methods{
      {GpeInvariants::Mass, {"M"}}, {GpeInvariants::Energy, {"E"}}, {GpeInvariants::Both, {"M", "E"}}};
  for (const auto& [which, names] : methods) {
    auto sys = m.as_conservative_system(which, psi0);
    sys.exact_solution = [m](double t) { return vectorize(m.plane_wave(1.0, 1.0, 1.0, t)); };
    const MethodSpec spec = eip("RK4", names);
    try {
      const auto s = exact_error_study(sys, spec, steps, 0.1, ErrorNorm::ComplexLInf);
      const auto orders = estimate_order(s, 0.0);
      const double order = orders.back().order;
      v.check(std::abs(order - 4.0) <= 0.1, fmt::format("{} order {} = 4 +- 0.1 (errors {}, {}, {})", spec.label(),
                                                        g(order), g(s.errors[0]), g(s.errors[1]), g(s.errors[2])));
      const auto run = run_invariant_study(sys, spec, steps.front(), 0.1, 10);
      v.check(!run.failure, spec.label() + " residual run completed");
      for (const auto& name : names) {
        v.check(run.max_abs_residual(name) <= 1e-10,
                spec.label() + " |" + name + "| " + g(run.max_abs_residual(name)) + " <= 1e-10");
      }
    } catch (const Error& e) {
      v.check(false, spec.label() + ": " + e.what());
    }
  }
  return v;
}

Verdict property_suites() {
  Verdict v;
  // Tableau order conditions through the stated order.
  {
    double worst = 0.0;
    for (const auto& name : tableau_names()) {
      const auto t = tableau(name);
      const Eigen::VectorXd c = t.a.rowwise().sum();
      const Eigen::VectorXd c2 = c.cwiseProduct(c), c3 = c2.cwiseProduct(c), Ac = t.a * c;
      const Eigen::VectorXd Ac2 = t.a * c2, AAc = t.a * Ac;
      const Eigen::VectorXd& b = t.b;
      std::vector<std::pair<double, double>> conds{{b.sum(), 1.0}};
      if (t.order >= 2) conds.push_back({b.dot(c), 1.0 / 2});
      if (t.order >= 3) conds.insert(conds.end(), {{b.dot(c2), 1.0 / 3}, {b.dot(Ac), 1.0 / 6}});
      if (t.order >= 4) {
        conds.insert(conds.end(), {{b.dot(c3), 1.0 / 4}, {b.dot(c.cwiseProduct(Ac)), 1.0 / 8},
                                   {b.dot(Ac2), 1.0 / 12}, {b.dot(AAc), 1.0 / 24}});
      }
      if (t.order >= 5) {
        conds.insert(conds.end(),
                     {{b.dot(c3.cwiseProduct(c)), 1.0 / 5}, {b.dot(c2.cwiseProduct(Ac)), 1.0 / 10},
                      {b.dot(c.cwiseProduct(Ac2)), 1.0 / 15}, {b.dot(c.cwiseProduct(AAc)), 1.0 / 30},
                      {b.dot(Ac.cwiseProduct(Ac)), 1.0 / 20}, {b.dot(t.a * c3), 1.0 / 20},
                      {b.dot(t.a * c.cwiseProduct(Ac)), 1.0 / 40}, {b.dot(t.a * Ac2), 1.0 / 60},
                      {b.dot(t.a * AAc), 1.0 / 120}});
      }
      for (const auto& [val, want] : conds) worst = std::max(worst, std::abs(val - want));
    }
    v.check(worst <= 1e-14, "order conditions " + g(worst) + " <= 1e-14");
  }
  // Gradients against finite differences and the first-integral identity.
  {
    const GpeModel gpe(rotating_box(8));
    const std::vector<std::pair<ConservativeSystem, double>> systems{
        {harmonic_oscillator(10.0, vec({1.0, 0.0})), 1e-3},
        {perturbed_kepler(0.6), 1e-2},
        {solar_system(), 0.002 * kJulianYear},
        {charged_particle(default_particle_setup(ChargedField::Uniform)), 0.05},
        {charged_particle(default_particle_setup(ChargedField::Tokamak)), 0.05},
        {gpe.as_conservative_system(GpeInvariants::Both, gpe.vortex_state()), 1e-3},
    };
    double fd_worst = 0.0, fi_worst = 0.0;
    for (const auto& [sys, h] : systems) {
      for (const auto& y : conservo::testing::flowed_states(sys, 100, 50 * h, h, 7)) {
        const StateVector f = sys.rhs(y);
        for (const auto& inv : sys.invariants.invariants()) {
          const StateVector grad = inv.gradient(y);
          fi_worst = std::max(fi_worst, std::abs(grad.dot(f)) / (grad.norm() * f.norm()));
        }
      }
      const StateVector scales = sys.name == "solar" ? conservo::testing::half_scales(sys.initial_state) : StateVector();
      for (const auto& y : conservo::testing::flowed_states(sys, 5, 50 * h, h, 9)) {
        for (const auto& inv : sys.invariants.invariants()) {
          const StateVector grad = inv.gradient(y);
          const StateVector fd = conservo::testing::fd_gradient(inv.value, y, 1e-6, scales);
          fd_worst = std::max(fd_worst, (fd - grad).norm() / grad.norm());
        }
      }
    }
    v.check(fd_worst <= 1e-6, "gradient vs finite differences " + g(fd_worst) + " <= 1e-6");
    v.check(fi_worst <= 1e-10, "first-integral identity " + g(fi_worst) + " <= 1e-10");
  }
  // Vectorize round trip.
  {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    bool exact = true;
    for (int trial = 0; trial < 100; ++trial) {
      ComplexGrid c({6, 10});
      RealGrid r({7, 3});
      for (auto& z : c.data()) z = {n(rng), n(rng)};
      for (auto& x : r.data()) x = n(rng);
      exact = exact && devectorize_complex(vectorize(c), GridShape{{6, 10}, true}) == c &&
              devectorize_real(vectorize(r), GridShape{{7, 3}, false}) == r;
    }
    v.check(exact, "vectorize round trip exact");
  }
  // Spectral eigenfunctions.
  {
    const std::size_t n = 32;
    const double length = 2 * M_PI;
    const SpectralOperators ops(n, n, length, length);
    double worst = 0.0;
    for (int k = -(static_cast<int>(n) / 2 - 1); k < static_cast<int>(n) / 2; ++k) {
      ComplexGrid u({n, n});
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t l = 0; l < n; ++l) u(j, l) = std::polar(1.0, k * length * l / n);
      }
      const auto d2 = ops.d2y(u);
      for (std::size_t i = 0; i < u.size(); ++i) {
        worst = std::max(worst, std::abs(d2.data()[i] + double(k * k) * u.data()[i]) / std::max(1, k * k));
      }
    }
    ComplexGrid one({n, n});
    for (auto& z : one.data()) z = 1.0;
    double d1 = 0.0;
    for (const auto& z : ops.d1x(one).data()) d1 = std::max(d1, std::abs(z));
    v.check(worst <= 1e-12, "D2 eigenfunctions " + g(worst) + " <= 1e-12");
    v.check(d1 <= 1e-12, "D1 constant " + g(d1) + " <= 1e-12");
  }
  // Synthetic power laws.
  {
    double worst = 0.0;
    for (int q = 1; q <= 12; ++q) {
      ErrorSeries s{"synthetic", step_levels(0.5, 4), {}};
      for (double h : s.steps) s.errors.push_back(0.7 * std::pow(h, q));
      for (const auto& o : estimate_order(s, 0.0)) worst = std::max(worst, std::abs(o.order - q));
    }
    v.check(worst <= 1e-12, "estimate_order synthetic " + g(worst) + " <= 1e-12");
  }
  return v;
}

}  // namespace

int main() {
  criterion(1, "lambda-error orders (harmonic oscillator)", 1, lambda_orders);
  criterion(2, "energy-error orders, EIP and Newton k=2", 5, energy_orders);
  criterion(3, "Kepler solution self-convergence order", 30, kepler_solution_orders);
  criterion(4, "Kepler invariant-error orders", 30, kepler_invariant_orders);
  criterion(5, "one-iteration Newton projection equals EIP", 10, single_newton_equals_eip);
  criterion(6, "Kepler long run t <= 300", 10, kepler_long_run);
  criterion(7, "solar system 10 years", 120, solar_system_run);
  criterion(8, "charged particle", 30, charged_particle_runs);
  criterion(9, "GPE plane wave", 120, gpe_plane_wave);
  criterion(10, "property suites", 30, property_suites);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
