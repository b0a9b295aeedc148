#include "conservo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <toml.hpp>

#include "conservo/gpe.hpp"
#include "conservo/systems.hpp"

namespace conservo {

namespace {

const std::vector<std::string> kSystemNames = {"harmonic-oscillator", "kepler", "solar-system",
                                                "charged-particle", "zero-field", "gpe"};

StudyKind parse_study(std::string_view s) {
  if (s == "convergence") return StudyKind::Convergence;
  if (s == "lambda") return StudyKind::Lambda;
  if (s == "invariant-drift") return StudyKind::InvariantDrift;
  if (s == "snapshot") return StudyKind::Snapshot;
  throw ConfigError("unknown study '" + std::string(s) +
                    "' (valid: convergence, lambda, invariant-drift, snapshot)");
}

ErrorMeasure parse_measure(std::string_view s) {
  if (s == "self") return ErrorMeasure::Self;
  if (s == "exact") return ErrorMeasure::Exact;
  if (s == "invariant-final") return ErrorMeasure::InvariantFinal;
  if (s == "invariant-max") return ErrorMeasure::InvariantMax;
  throw ConfigError("unknown error measure '" + std::string(s) +
                    "' (valid: self, exact, invariant-final, invariant-max)");
}

ErrorNorm parse_norm(std::string_view s) {
  if (s == "linf") return ErrorNorm::LInf;
  if (s == "l2") return ErrorNorm::L2;
  if (s == "complex-linf") return ErrorNorm::ComplexLInf;
  throw ConfigError("unknown norm '" + std::string(s) + "' (valid: linf, l2, complex-linf)");
}

std::string study_name(StudyKind k) {
  switch (k) {
    case StudyKind::Convergence: return "convergence";
    case StudyKind::Lambda: return "lambda";
    case StudyKind::InvariantDrift: return "invariant-drift";
    case StudyKind::Snapshot: return "snapshot";
  }
  return "convergence";
}

double as_number(const toml::node& n, const std::string& key) {
  if (auto v = n.value<double>()) return *v;
  throw ConfigError("'" + key + "' must be a number");
}

std::vector<double> as_numbers(const toml::node& n, const std::string& key) {
  const auto* arr = n.as_array();
  if (!arr) throw ConfigError("'" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : *arr) out.push_back(as_number(e, key));
  return out;
}

std::vector<std::string> as_strings(const toml::node& n, const std::string& key) {
  if (auto s = n.value<std::string>()) return {*s};
  const auto* arr = n.as_array();
  if (!arr) throw ConfigError("'" + key + "' must be a string or an array of strings");
  std::vector<std::string> out;
  for (const auto& e : *arr) {
    auto s = e.value<std::string>();
    if (!s) throw ConfigError("'" + key + "' must contain strings");
    out.push_back(*s);
  }
  return out;
}

const toml::table& table_at(const toml::table& root, const char* key, bool required) {
  static const toml::table empty;
  const toml::node* n = root.get(key);
  if (!n) {
    if (required) throw ConfigError(std::string("missing [") + key + "] section");
    return empty;
  }
  const auto* t = n->as_table();
  if (!t) throw ConfigError(std::string("'") + key + "' must be a table");
  return *t;
}

template <class F>
void for_keys(const toml::table& t, const std::string& section,
              const std::vector<std::string>& allowed, F&& f) {
  for (const auto& [k, v] : t) {
    const std::string key(k.str());
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in [" + section + "]");
    }
    f(key, v);
  }
}

MethodEntry parse_method(const toml::table& t) {
  MethodEntry m;
  std::string kind = "eip";
  int iters = 1;
  double tol = 0.0;
  for_keys(t, "method",
           {"kind", "tableau", "invariants", "direction", "newton_iters", "newton_tol", "label"},
           [&](const std::string& key, const toml::node& v) {
             if (key == "kind") {
               kind = v.value<std::string>().value_or("");
             } else if (key == "tableau") {
               m.spec.tableau = v.value<std::string>().value_or("");
             } else if (key == "invariants") {
               m.spec.invariants = as_strings(v, key);
             } else if (key == "direction") {
               m.spec.direction = parse_direction(v.value<std::string>().value_or(""));
             } else if (key == "newton_iters") {
               auto i = v.value<int64_t>();
               if (!i || *i < 1) throw ConfigError("'newton_iters' must be a positive integer");
               iters = static_cast<int>(*i);
             } else if (key == "newton_tol") {
               tol = as_number(v, key);
               if (tol < 0.0) throw ConfigError("'newton_tol' must be non-negative");
             } else if (key == "label") {
               m.label = v.value<std::string>().value_or("");
             }
           });
  try {
    m.spec.kind = parse_method_kind(kind);
    if (m.spec.kind != MethodKind::StormerVerlet) (void)tableau(m.spec.tableau);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  m.spec.newton = NewtonPolicy{iters, tol};
  return m;
}

struct BuiltSystem {
  ConservativeSystem sys;
  std::optional<GridShape> grid;
  double time_scale = 1.0;  // config time units to system time units
};

double scalar_or(const SystemSpec& s, const std::string& key, double fallback) {
  auto it = s.scalars.find(key);
  return it == s.scalars.end() ? fallback : it->second;
}

const std::vector<double>* vector_or_null(const SystemSpec& s, const std::string& key,
                                          std::size_t size) {
  auto it = s.vectors.find(key);
  if (it == s.vectors.end()) return nullptr;
  if (size != 0 && it->second.size() != size) {
    throw ConfigError(fmt::format("system parameter '{}' needs {} entries", key, size));
  }
  return &it->second;
}

std::string string_or(const SystemSpec& s, const std::string& key, const std::string& fallback) {
  auto it = s.strings.find(key);
  return it == s.strings.end() ? fallback : it->second;
}

void allow_only(const SystemSpec& s, const std::vector<std::string>& allowed) {
  auto check = [&](const std::string& k) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ConfigError("system '" + s.name + "' does not take parameter '" + k + "'");
    }
  };
  for (const auto& [k, _] : s.scalars) check(k);
  for (const auto& [k, _] : s.vectors) check(k);
  for (const auto& [k, _] : s.strings) check(k);
}

std::array<double, 3> to3(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }

BuiltSystem build(const SystemSpec& spec, const std::filesystem::path& base_dir) {
  BuiltSystem out;
  const std::string& n = spec.name;
  if (n == "harmonic-oscillator") {
    allow_only(spec, {"omega", "y0"});
    StateVector y0;
    if (const auto* v = vector_or_null(spec, "y0", 2)) y0 = Eigen::Map<const StateVector>(v->data(), 2);
    out.sys = harmonic_oscillator(scalar_or(spec, "omega", 10.0), y0);
  } else if (n == "kepler") {
    allow_only(spec, {"eccentricity"});
    const double e = scalar_or(spec, "eccentricity", 0.6);
    if (!(e >= 0.0 && e < 1.0)) throw ConfigError("kepler eccentricity must lie in [0, 1)");
    out.sys = perturbed_kepler(e);
  } else if (n == "solar-system") {
    allow_only(spec, {"data"});
    const std::string data = string_or(spec, "data", "");
    if (data.empty()) {
      out.sys = solar_system();
    } else {
      std::filesystem::path p(data);
      if (p.is_relative()) p = base_dir / p;
      if (!std::filesystem::exists(p)) throw ConfigError("solar data file not found: " + p.string());
      out.sys = solar_system(load_solar_csv(p));
    }
    out.time_scale = kJulianYear;
  } else if (n == "charged-particle") {
    allow_only(spec, {"field", "position", "velocity"});
    const std::string field = string_or(spec, "field", "uniform");
    ChargedField f;
    if (field == "uniform") {
      f = ChargedField::Uniform;
    } else if (field == "tokamak") {
      f = ChargedField::Tokamak;
    } else {
      throw ConfigError("unknown field '" + field + "' (valid: uniform, tokamak)");
    }
    ChargedParticleSetup setup = default_particle_setup(f);
    if (const auto* v = vector_or_null(spec, "position", 3)) setup.position = to3(*v);
    if (const auto* v = vector_or_null(spec, "velocity", 3)) setup.velocity = to3(*v);
    out.sys = charged_particle(setup);
  } else if (n == "zero-field") {
    allow_only(spec, {"y0"});
    const auto* v = vector_or_null(spec, "y0", 0);
    if (!v || v->empty()) throw ConfigError("zero-field needs a non-empty 'y0'");
    out.sys = zero_field(Eigen::Map<const StateVector>(v->data(), static_cast<Eigen::Index>(v->size())));
  } else if (n == "gpe") {
    allow_only(spec, {"domain", "grid", "beta", "omega", "potential", "gamma", "initial", "wave"});
    GpeConfig g;
    if (const auto* v = vector_or_null(spec, "domain", 4)) {
      g.x_min = (*v)[0];
      g.x_max = (*v)[1];
      g.y_min = (*v)[2];
      g.y_max = (*v)[3];
    }
    if (const auto* v = vector_or_null(spec, "grid", 2)) {
      if ((*v)[0] < 1 || (*v)[1] < 1) throw ConfigError("gpe grid sizes must be positive");
      g.nx = static_cast<std::size_t>((*v)[0]);
      g.ny = static_cast<std::size_t>((*v)[1]);
    }
    g.beta = scalar_or(spec, "beta", 1.0);
    g.omega = scalar_or(spec, "omega", 0.0);
    const std::string pot = string_or(spec, "potential", "none");
    if (pot == "harmonic") {
      const auto* gm = vector_or_null(spec, "gamma", 2);
      g.potential = gm ? harmonic_potential((*gm)[0], (*gm)[1]) : harmonic_potential();
    } else if (pot != "none") {
      throw ConfigError("unknown potential '" + pot + "' (valid: none, harmonic)");
    }
    try {
      g.validate();
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    const GpeModel model(g);
    const std::string init = string_or(spec, "initial", "plane-wave");
    const bool free = pot == "none" && g.omega == 0.0;
    if (init == "plane-wave") {
      std::vector<double> w{1.0, 1.0, 1.0};
      if (const auto* v = vector_or_null(spec, "wave", 3)) w = *v;
      out.sys = model.as_conservative_system(GpeInvariants::Both, model.plane_wave(w[0], w[1], w[2], 0.0));
      if (free) {
        out.sys.exact_solution = [model, w](double t) {
          return vectorize(model.plane_wave(w[0], w[1], w[2], t));
        };
      }
    } else if (init == "vortex") {
      out.sys = model.as_conservative_system(GpeInvariants::Both, model.vortex_state());
    } else {
      throw ConfigError("unknown initial state '" + init + "' (valid: plane-wave, vortex)");
    }
    out.grid = model.shape();
  } else {
    std::string valid;
    for (const auto& s : kSystemNames) valid += (valid.empty() ? "" : ", ") + s;
    throw ConfigError("unknown system '" + n + "' (valid: " + valid + ")");
  }
  return out;
}

}  // namespace

std::vector<double> ExperimentConfig::step_list() const {
  if (!steps.empty()) return steps;
  return step_levels(h, levels, ratio);
}

const std::vector<std::string>& system_names() { return kSystemNames; }

ConservativeSystem build_system(const SystemSpec& spec, const std::filesystem::path& base_dir) {
  return build(spec, base_dir).sys;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config parse error: " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(os.str());
  }
  for (const auto& [k, v] : root) {
    const std::string key(k.str());
    if (key != "experiment" && key != "system" && key != "run" && key != "method") {
      throw ConfigError("unknown section [" + key + "]");
    }
  }

  ExperimentConfig cfg;
  cfg.base_dir = base_dir;

  const toml::table& exp = table_at(root, "experiment", true);
  std::string study = "convergence";
  for_keys(exp, "experiment", {"name", "study", "long", "description"},
           [&](const std::string& key, const toml::node& v) {
             if (key == "name") cfg.name = v.value<std::string>().value_or("");
             if (key == "study") study = v.value<std::string>().value_or("");
             if (key == "long") cfg.long_tagged = v.value<bool>().value_or(false);
           });
  if (cfg.name.empty()) throw ConfigError("[experiment] needs a non-empty 'name'");
  if (cfg.name.find_first_of("/\\") != std::string::npos || cfg.name == "." || cfg.name == "..") {
    throw ConfigError("experiment name must be a plain file name");
  }
  cfg.study = parse_study(study);

  const toml::table& sys = table_at(root, "system", true);
  for (const auto& [k, v] : sys) {
    const std::string key(k.str());
    if (key == "name") {
      cfg.system.name = v.value<std::string>().value_or("");
    } else if (auto s = v.value<std::string>()) {
      cfg.system.strings[key] = *s;
    } else if (v.is_array()) {
      cfg.system.vectors[key] = as_numbers(v, key);
    } else {
      cfg.system.scalars[key] = as_number(v, key);
    }
  }
  if (cfg.system.name.empty()) throw ConfigError("[system] needs a 'name'");

  const toml::table& run = table_at(root, "run", true);
  bool have_h = false;
  bool have_horizon = false;
  for_keys(run, "run",
           {"h", "steps", "levels", "ratio", "horizon", "long_horizon", "error", "norm", "floor",
            "stride", "snapshot_times"},
           [&](const std::string& key, const toml::node& v) {
             if (key == "h") {
               cfg.h = as_number(v, key);
               have_h = true;
             } else if (key == "steps") {
               cfg.steps = as_numbers(v, key);
             } else if (key == "levels") {
               auto i = v.value<int64_t>();
               if (!i) throw ConfigError("'levels' must be an integer");
               cfg.levels = static_cast<int>(*i);
             } else if (key == "ratio") {
               cfg.ratio = as_number(v, key);
             } else if (key == "horizon") {
               cfg.horizon = as_number(v, key);
               have_horizon = true;
             } else if (key == "long_horizon") {
               cfg.long_horizon = as_number(v, key);
             } else if (key == "error") {
               cfg.error = parse_measure(v.value<std::string>().value_or(""));
             } else if (key == "norm") {
               cfg.norm = parse_norm(v.value<std::string>().value_or(""));
             } else if (key == "floor") {
               cfg.floor = as_number(v, key);
             } else if (key == "stride") {
               auto i = v.value<int64_t>();
               if (!i || *i < 1) throw ConfigError("'stride' must be a positive integer");
               cfg.stride = *i;
             } else if (key == "snapshot_times") {
               cfg.snapshot_times = as_numbers(v, key);
             }
           });
  if (!have_h && cfg.steps.empty()) throw ConfigError("[run] needs 'h' or 'steps'");
  if (have_h && !(cfg.h > 0.0)) throw ConfigError("step size h must be positive");
  for (double s : cfg.steps) {
    if (!(s > 0.0)) throw ConfigError("every entry of 'steps' must be positive");
  }
  if (!have_horizon || !(cfg.horizon > 0.0)) throw ConfigError("horizon must be positive");
  if (cfg.long_horizon < 0.0) throw ConfigError("long_horizon must be positive");
  if (!(cfg.ratio > 1.0)) throw ConfigError("ratio must exceed 1");
  if (cfg.floor < 0.0) throw ConfigError("floor must be non-negative");
  for (double t : cfg.snapshot_times) {
    if (t < 0.0) throw ConfigError("snapshot times must be non-negative");
  }
  const bool order_study = cfg.study == StudyKind::Convergence || cfg.study == StudyKind::Lambda;
  if (order_study) {
    if (cfg.steps.empty() && cfg.levels < 2) throw ConfigError("'levels' must be at least 2");
    const auto levels = cfg.step_list();
    for (std::size_t i = 1; i < levels.size(); ++i) {
      if (!(levels[i] < levels[i - 1])) throw ConfigError("step sizes must be strictly decreasing");
    }
    if (cfg.study == StudyKind::Convergence && cfg.error == ErrorMeasure::Self && levels.size() < 3) {
      throw ConfigError("self-convergence needs at least three step sizes");
    }
  } else if (!have_h) {
    if (cfg.steps.size() != 1) throw ConfigError("drift and snapshot studies take a single 'h'");
    cfg.h = cfg.steps.front();
  }

  const toml::node* methods = root.get("method");
  if (!methods) throw ConfigError("at least one [[method]] is required");
  const auto* arr = methods->as_array();
  if (!arr) throw ConfigError("'method' must be an array of tables ([[method]])");
  for (const auto& m : *arr) {
    const auto* t = m.as_table();
    if (!t) throw ConfigError("'method' entries must be tables");
    cfg.methods.push_back(parse_method(*t));
  }
  if (cfg.methods.empty()) throw ConfigError("at least one [[method]] is required");

  // Resolve system parameters and invariant names now so a bad config never
  // produces partial output.
  const BuiltSystem built = build(cfg.system, base_dir);
  for (auto& m : cfg.methods) {
    try {
      Integrator check(built.sys, m.spec);
      if (m.spec.kind == MethodKind::Eip || m.spec.kind == MethodKind::NewtonProjection) {
        m.spec.invariants = check.method().invariants;
      }
    } catch (const Error& e) {
      throw ConfigError((m.label.empty() ? m.spec.label() : m.label) + ": " + e.what());
    }
    if (m.label.empty()) m.label = m.spec.label();
  }
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (cfg.methods[i].label == cfg.methods[j].label) {
        throw ConfigError("duplicate method label '" + cfg.methods[i].label + "'");
      }
    }
  }

  if (cfg.study == StudyKind::Lambda) {
    if (cfg.system.name != "harmonic-oscillator") {
      throw ConfigError("the lambda study needs the harmonic-oscillator system");
    }
    for (const auto& m : cfg.methods) {
      if (m.spec.kind != MethodKind::Eip) throw ConfigError("the lambda study takes eip methods only");
    }
  }
  if (cfg.study == StudyKind::Convergence && cfg.error == ErrorMeasure::Exact &&
      !built.sys.exact_solution) {
    throw ConfigError("system '" + cfg.system.name + "' has no exact solution in this setup");
  }
  if (cfg.study == StudyKind::Snapshot && !built.grid) {
    throw ConfigError("snapshot studies need a grid system (gpe)");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config '" + path.string() + "'");
  std::ostringstream os;
  os << is.rdbuf();
  return parse_config(os.str(), path.parent_path().empty() ? "." : path.parent_path());
}

namespace {

/// Runs fn(0..count-1) on up to `jobs` threads. The first exception is rethrown.
template <class F>
void parallel_for(std::size_t count, int jobs, F&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

std::string time_tag(double t) { return fmt::format("{:.6g}", t); }

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& opts,
                                 std::ostream& log) {
  ExperimentOutcome out;
  if (cfg.long_tagged && !opts.long_mode) {
    out.exit_code = 2;
    out.message = "config '" + cfg.name + "' is tagged long; pass --long to run it";
    return out;
  }
  const BuiltSystem built = build(cfg.system, cfg.base_dir);
  const ConservativeSystem& sys = built.sys;
  const double scale = built.time_scale;
  const double horizon =
      (opts.long_mode && cfg.long_horizon > 0.0 ? cfg.long_horizon : cfg.horizon) * scale;
  const std::filesystem::path dir = opts.out_dir / cfg.name;
  const std::string study = study_name(cfg.study);

  try {
    if (cfg.study == StudyKind::Convergence || cfg.study == StudyKind::Lambda) {
      const std::vector<double> levels = cfg.step_list();
      const std::size_t nl = levels.size();
      const std::size_t nm = cfg.methods.size();
      std::vector<StateVector> solutions(nm * nl);
      std::vector<double> values(nm * nl, 0.0);

      parallel_for(nm * nl, opts.jobs, [&](std::size_t cell) {
        const MethodEntry& m = cfg.methods[cell / nl];
        const double h = levels[cell % nl] * scale;
        if (cfg.study == StudyKind::Lambda) {
          const ErrorSeries s = lambda_error_study(scalar_or(cfg.system, "omega", 10.0), sys.initial_state,
                                                   tableau(m.spec.tableau), {h}, horizon);
          values[cell] = s.errors[0];
          return;
        }
        switch (cfg.error) {
          case ErrorMeasure::Self:
            solutions[cell] = integrate(sys, m.spec, h, horizon);
            break;
          case ErrorMeasure::Exact:
            values[cell] = exact_error_study(sys, m.spec, {h}, horizon, cfg.norm).errors[0];
            break;
          case ErrorMeasure::InvariantFinal:
            values[cell] =
                invariant_error_study(sys, m.spec, {h}, horizon, ResidualStatistic::Final).errors[0];
            break;
          case ErrorMeasure::InvariantMax:
            values[cell] =
                invariant_error_study(sys, m.spec, {h}, horizon, ResidualStatistic::Max).errors[0];
            break;
        }
      });

      std::vector<OrderRow> all;
      std::ostringstream summary;
      summary << kCsvSchemaLine << '\n' << "study,system,method,tableau,finest_order\n";
      for (std::size_t mi = 0; mi < nm; ++mi) {
        const MethodEntry& m = cfg.methods[mi];
        ErrorSeries s;
        s.label = m.label;
        if (cfg.study == StudyKind::Convergence && cfg.error == ErrorMeasure::Self) {
          std::vector<StateVector> sols(solutions.begin() + static_cast<long>(mi * nl),
                                        solutions.begin() + static_cast<long>((mi + 1) * nl));
          s = self_convergence_series(m.label, levels, sols, cfg.norm);
        } else {
          s.steps = levels;
          s.errors.assign(values.begin() + static_cast<long>(mi * nl),
                          values.begin() + static_cast<long>((mi + 1) * nl));
        }
        const std::string tab = m.spec.kind == MethodKind::StormerVerlet ? "" : m.spec.tableau;
        auto rows = order_rows(study, cfg.system.name, m.label, tab, s, cfg.floor);
        const std::filesystem::path file = dir / (m.label + ".csv");
        write_order_csv(file, rows);
        out.files.push_back(file);
        all.insert(all.end(), rows.begin(), rows.end());

        std::string finest;
        try {
          finest = format_double(finest_order(estimate_order(s, cfg.floor)));
        } catch (const Error&) {
        }
        summary << study << ',' << cfg.system.name << ',' << m.label << ',' << tab << ',' << finest
                << '\n';
        log << fmt::format("{:<14} finest order {}\n", m.label, finest.empty() ? "n/a" : finest);
      }
      write_order_csv(dir / "orders.csv", all);
      write_text_atomic(dir / "summary.csv", summary.str());
      out.files.push_back(dir / "orders.csv");
      out.files.push_back(dir / "summary.csv");
    } else {
      const double h = cfg.h * scale;
      std::vector<double> snaps;
      for (double t : cfg.snapshot_times) snaps.push_back(t * scale);
      const std::size_t nm = cfg.methods.size();
      std::vector<RunResult> runs(nm);
      parallel_for(nm, opts.jobs, [&](std::size_t i) {
        RunResult r = run_invariant_study(sys, cfg.methods[i].spec, h, horizon, cfg.stride, snaps);
        for (double& t : r.times) t /= scale;
        for (auto& [t, _] : r.snapshots) t /= scale;
        const std::string& label = cfg.methods[i].label;
        write_residual_csv(dir / (label + "-residuals.csv"), r);
        if (built.grid) {
          for (const auto& [t, y] : r.snapshots) {
            write_snapshot(dir / (label + "-t" + time_tag(t) + ".bin"),
                           devectorize_complex(y, *built.grid), t);
          }
        }
        runs[i] = std::move(r);
      });

      std::ostringstream summary;
      summary << kCsvSchemaLine << '\n'
              << "study,system,method,invariant,max_abs_residual,max_rel_residual,completed\n";
      const Eigen::VectorXd refs = sys.invariants.reference_values();
      std::optional<std::pair<std::string, double>> failure;
      for (std::size_t i = 0; i < nm; ++i) {
        const RunResult& r = runs[i];
        const std::string& label = cfg.methods[i].label;
        out.files.push_back(dir / (label + "-residuals.csv"));
        for (const auto& [t, _] : r.snapshots) {
          out.files.push_back(dir / (label + "-t" + time_tag(t) + ".bin"));
        }
        for (std::size_t k = 0; k < r.invariant_names.size(); ++k) {
          const double mx = r.max_abs_residual(r.invariant_names[k]);
          const double ref = std::abs(refs[static_cast<Eigen::Index>(k)]);
          summary << study << ',' << cfg.system.name << ',' << label << ',' << r.invariant_names[k]
                  << ',' << format_double(mx) << ',' << (ref > 0.0 ? format_double(mx / ref) : "")
                  << ',' << (r.failure ? "false" : "true") << '\n';
          log << fmt::format("{:<14} {:<4} max |residual| {:.3e}\n", label, r.invariant_names[k], mx);
        }
        if (r.failure && !failure) failure = std::make_pair(label + ": " + *r.failure, r.failure_time / scale);
      }
      write_text_atomic(dir / "summary.csv", summary.str());
      out.files.push_back(dir / "summary.csv");
      if (failure) {
        out.exit_code = 3;
        out.message = fmt::format("integration failed at t = {}: {}", format_double(failure->second),
                                  failure->first);
        return out;
      }
    }
  } catch (const IntegrationError& e) {
    out.exit_code = 3;
    out.message = fmt::format("integration failed at t = {}: {}", format_double(e.time() / scale),
                              e.what());
    return out;
  }
  out.message = fmt::format("wrote {} files under {}", out.files.size(), dir.string());
  return out;
}

int run_config_file(const std::filesystem::path& path, const RunOptions& opts, std::ostream& log) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(path);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
  ExperimentOutcome res;
  try {
    res = run_experiment(cfg, opts, log);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
  if (res.exit_code != 0) {
    log << "error: " << res.message << '\n';
  } else {
    log << res.message << '\n';
  }
  return res.exit_code;
}

}  // namespace conservo
