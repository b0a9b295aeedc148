#include "conservo/systems.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

namespace conservo {

// ---------------------------------------------------------------------------
// Harmonic oscillator

ConservativeSystem harmonic_oscillator(double omega, StateVector y0) {
  if (!(omega > 0.0)) throw Error("harmonic oscillator: omega must be positive");
  if (y0.size() == 0) y0 = StateVector::Unit(2, 0);
  require_dimension(y0, 2, "harmonic oscillator");

  ConservativeSystem sys;
  sys.name = "harmonic";
  sys.dimension = 2;
  sys.initial_state = y0;
  sys.rhs = [omega](const StateVector& y) {
    StateVector f(2);
    f << omega * y[1], -omega * y[0];
    return f;
  };
  Invariant energy{"H", [omega](const StateVector& y) { return 0.5 * omega * y.squaredNorm(); },
                   [omega](const StateVector& y) -> StateVector { return omega * y; }};
  sys.invariants = InvariantSet({energy}, y0);
  sys.exact_solution = [omega, y0](double t) {
    const double c = std::cos(omega * t);
    const double s = std::sin(omega * t);
    StateVector y(2);
    y << c * y0[0] + s * y0[1], -s * y0[0] + c * y0[1];
    return y;
  };
  return sys;
}

// ---------------------------------------------------------------------------
// Perturbed Kepler

namespace {

constexpr double kSchwarzschild = 0.005;

double planar_radius(double x, double y, const char* who) {
  const double r = std::hypot(x, y);
  if (r < kCollisionGuard) {
    throw CollisionError(std::string(who) + ": radius below collision guard");
  }
  return r;
}

}  // namespace

ConservativeSystem perturbed_kepler(double eccentricity) {
  if (!(eccentricity >= 0.0 && eccentricity < 1.0)) {
    throw Error("kepler: eccentricity must lie in [0, 1)");
  }
  ConservativeSystem sys;
  sys.name = "kepler";
  sys.dimension = 4;
  StateVector y0(4);
  y0 << 1.0 - eccentricity, 0.0, 0.0, std::sqrt((1.0 + eccentricity) / (1.0 - eccentricity));
  sys.initial_state = y0;

  auto grad_v = [](const StateVector& q) -> StateVector {
    const double r = planar_radius(q[0], q[1], "kepler");
    const double r3 = r * r * r;
    const double coeff = 1.0 / r3 + 1.5 * kSchwarzschild / (r3 * r * r);
    return coeff * q;
  };
  sys.rhs = [grad_v](const StateVector& y) {
    StateVector f(4);
    f.head<2>() = y.tail<2>();
    f.tail<2>() = -grad_v(y.head<2>());
    return f;
  };
  Invariant energy{
      "H",
      [](const StateVector& y) {
        const double r = planar_radius(y[0], y[1], "kepler");
        return 0.5 * y.tail<2>().squaredNorm() - 1.0 / r - kSchwarzschild / (2.0 * r * r * r);
      },
      [grad_v](const StateVector& y) -> StateVector {
        StateVector g(4);
        g.head<2>() = grad_v(y.head<2>());
        g.tail<2>() = y.tail<2>();
        return g;
      }};
  Invariant momentum{"L", [](const StateVector& y) { return y[0] * y[3] - y[1] * y[2]; },
                     [](const StateVector& y) -> StateVector {
                       StateVector g(4);
                       g << y[3], -y[2], -y[1], y[0];
                       return g;
                     }};
  sys.invariants = InvariantSet({energy, momentum}, y0);
  sys.split = SeparableSplit{grad_v, [](const StateVector& p) -> StateVector { return p; }};
  return sys;
}

// ---------------------------------------------------------------------------
// Solar system

std::vector<Body> load_solar_data() {
  std::vector<Body> bodies{
      {"Mercury",
       {1.563021412664830e+10, 4.327888220902108e+10, 2.102123103174893e+09},
       {-5.557001175482630e+04, 1.840863017229157e+04, 6.602621285552567e+03},
       2.203209e+13},
      {"Venus",
       {-9.030189258080004e+10, 5.802615456116644e+10, 6.006513603716755e+09},
       {-1.907374632532257e+04, -2.963461693326599e+04, 6.946391255404438e+02},
       3.248586e+14},
      {"Earth",
       {-1.018974476358996e+11, 1.065689158175689e+11, -3.381951053601424e+06},
       {-2.201749257051057e+04, -2.071074857788741e+04, 1.575245213712245e+00},
       3.986004e+14},
      {"Mars",
       {-2.443763125844157e+11, 4.473211564076996e+10, 6.935657388967808e+09},
       {-3.456935754608896e+03, -2.176307370133160e+04, -3.711433859326417e-02},
       4.282830e+13},
      {"Jupiter",
       {-2.3516546827532200e+11, 7.421837640432589e+11, 2.179850895804323e+09},
       {-1.262559929908801e+04, -3.332552395475581e+03, 2.962741332356101e+02},
       1.266865e+17},
      {"Saturn",
       {-1.011712827283427e+12, -1.077496255617324e+12, 5.901251900068215e+10},
       {6.507898648442419e+03, -6.640809674126991e+03, -1.434198106014633e+02},
       3.793120e+16},
      {"Uranus",
       {2.934840841770302e+12, 6.048399137411513e+11, -3.576451387567792e+10},
       {-1.433852081777671e+03, 6.347897341634990e+03, 4.228261484335974e+01},
       5.793966e+15},
      {"Neptune",
       {4.055112581124043e+12, -1.914578873112663e+12, -5.400973716179796e+10},
       {2.275119229131818e+03, 4.942356914027413e+03, -1.548950389954096e+02},
       6.835107e+15},
      {"Pluto",
       {9.514009594170194e+11, -4.776029500570151e+12, 2.358627841705075e+11},
       {5.431808363374300e+03, -2.387056445508962e+01, -1.551877289694926e+03},
       8.72400e+11},
  };
  // Sun at the origin, moving so that the total linear momentum vanishes.
  const double sun_mass = kSunGravitationalParameter / kGravitationalConstant;
  std::array<double, 3> momentum{0.0, 0.0, 0.0};
  for (const auto& b : bodies) {
    const double m = b.gm / kGravitationalConstant;
    for (int k = 0; k < 3; ++k) momentum[k] += m * b.velocity[k];
  }
  Body sun{"Sun",
           {0.0, 0.0, 0.0},
           {-momentum[0] / sun_mass, -momentum[1] / sun_mass, -momentum[2] / sun_mass},
           kSunGravitationalParameter};
  bodies.insert(bodies.begin(), sun);
  return bodies;
}

std::vector<Body> load_solar_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open solar data file '" + path.string() + "'");
  std::vector<Body> bodies;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": expected 8 columns");
    }
    Body b;
    b.name = cells[0];
    try {
      for (int k = 0; k < 3; ++k) b.position[k] = std::stod(cells[1 + k]);
      for (int k = 0; k < 3; ++k) b.velocity[k] = std::stod(cells[4 + k]);
      b.gm = std::stod(cells[7]);
    } catch (const std::exception&) {
      if (bodies.empty() && line_no == 1) continue;  // header row
      throw Error(path.string() + ":" + std::to_string(line_no) + ": malformed number");
    }
    if (!(b.gm > 0.0)) throw Error(path.string() + ": G*mass of '" + b.name + "' must be positive");
    bodies.push_back(b);
  }
  if (bodies.empty()) throw Error("solar data file '" + path.string() + "' has no bodies");
  bool has_sun = false;
  for (const auto& b : bodies) has_sun = has_sun || b.name == "Sun";
  if (!has_sun) {
    const double sun_mass = kSunGravitationalParameter / kGravitationalConstant;
    std::array<double, 3> momentum{0.0, 0.0, 0.0};
    for (const auto& b : bodies) {
      for (int k = 0; k < 3; ++k) momentum[k] += b.gm / kGravitationalConstant * b.velocity[k];
    }
    bodies.insert(bodies.begin(),
                  Body{"Sun",
                       {0.0, 0.0, 0.0},
                       {-momentum[0] / sun_mass, -momentum[1] / sun_mass, -momentum[2] / sun_mass},
                       kSunGravitationalParameter});
  }
  return bodies;
}

namespace {

struct NBody {
  std::vector<double> mass;
  Eigen::Index n = 0;

  StateVector grad_potential(const StateVector& q) const {
    StateVector g = StateVector::Zero(3 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const Eigen::Vector3d d = q.segment<3>(3 * i) - q.segment<3>(3 * j);
        const double r = d.norm();
        if (r < kCollisionGuard) throw CollisionError("solar system: bodies collided");
        const double coeff = kGravitationalConstant * mass[static_cast<std::size_t>(i)] *
                             mass[static_cast<std::size_t>(j)] / (r * r * r);
        g.segment<3>(3 * i) += coeff * d;
        g.segment<3>(3 * j) -= coeff * d;
      }
    }
    return g;
  }

  StateVector velocities(const StateVector& p) const {
    StateVector v(3 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      v.segment<3>(3 * i) = p.segment<3>(3 * i) / mass[static_cast<std::size_t>(i)];
    }
    return v;
  }

  double energy(const StateVector& y) const {
    double kinetic = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      kinetic += y.segment<3>(3 * n + 3 * i).squaredNorm() / (2.0 * mass[static_cast<std::size_t>(i)]);
    }
    double potential = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double r = (y.segment<3>(3 * i) - y.segment<3>(3 * j)).norm();
        if (r < kCollisionGuard) throw CollisionError("solar system: bodies collided");
        potential -= kGravitationalConstant * mass[static_cast<std::size_t>(i)] *
                     mass[static_cast<std::size_t>(j)] / r;
      }
    }
    return kinetic + potential;
  }
};

// Component `axis` of sum_i q_i x p_i and its gradient.
Invariant angular_momentum_component(int axis, Eigen::Index n, std::string name) {
  const int a = (axis + 1) % 3;
  const int b = (axis + 2) % 3;
  return Invariant{
      std::move(name),
      [n, a, b](const StateVector& y) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto q = y.segment<3>(3 * i);
          const auto p = y.segment<3>(3 * n + 3 * i);
          s += q[a] * p[b] - q[b] * p[a];
        }
        return s;
      },
      [n, a, b](const StateVector& y) -> StateVector {
        StateVector g = StateVector::Zero(6 * n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto q = y.segment<3>(3 * i);
          const auto p = y.segment<3>(3 * n + 3 * i);
          g[3 * i + a] = p[b];
          g[3 * i + b] = -p[a];
          g[3 * n + 3 * i + b] = q[a];
          g[3 * n + 3 * i + a] = -q[b];
        }
        return g;
      }};
}

}  // namespace

ConservativeSystem solar_system(const std::vector<Body>& bodies) {
  if (bodies.size() < 2) throw Error("solar system: at least two bodies are required");
  auto model = std::make_shared<NBody>();
  model->n = static_cast<Eigen::Index>(bodies.size());
  for (const auto& b : bodies) model->mass.push_back(b.gm / kGravitationalConstant);
  const Eigen::Index n = model->n;

  StateVector y0(6 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& b = bodies[static_cast<std::size_t>(i)];
    const double m = model->mass[static_cast<std::size_t>(i)];
    for (int k = 0; k < 3; ++k) {
      y0[3 * i + k] = b.position[static_cast<std::size_t>(k)];
      y0[3 * n + 3 * i + k] = m * b.velocity[static_cast<std::size_t>(k)];
    }
  }

  ConservativeSystem sys;
  sys.name = "solar";
  sys.dimension = 6 * n;
  sys.initial_state = y0;
  sys.rhs = [model](const StateVector& y) {
    const Eigen::Index n = model->n;
    StateVector f(6 * n);
    f.head(3 * n) = model->velocities(y.tail(3 * n));
    f.tail(3 * n) = -model->grad_potential(y.head(3 * n));
    return f;
  };
  Invariant energy{"H", [model](const StateVector& y) { return model->energy(y); },
                   [model](const StateVector& y) -> StateVector {
                     const Eigen::Index n = model->n;
                     StateVector g(6 * n);
                     g.head(3 * n) = model->grad_potential(y.head(3 * n));
                     g.tail(3 * n) = model->velocities(y.tail(3 * n));
                     return g;
                   }};
  sys.invariants = InvariantSet({energy, angular_momentum_component(0, n, "Lx"),
                                 angular_momentum_component(1, n, "Ly"),
                                 angular_momentum_component(2, n, "Lz")},
                                y0);
  sys.split = SeparableSplit{
      [model](const StateVector& q) -> StateVector { return model->grad_potential(q); },
      [model](const StateVector& p) -> StateVector { return model->velocities(p); }};
  return sys;
}

ConservativeSystem solar_system() { return solar_system(load_solar_data()); }

std::array<double, 3> total_linear_momentum(const StateVector& y) {
  if (y.size() % 6 != 0) throw DimensionError("total_linear_momentum: not an N-body state");
  const Eigen::Index n = y.size() / 6;
  std::array<double, 3> p{0.0, 0.0, 0.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) p[static_cast<std::size_t>(k)] += y[3 * n + 3 * i + k];
  }
  return p;
}

// ---------------------------------------------------------------------------
// Charged particle

namespace {

constexpr double kUniformCharge = 1e-2;

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

double axis_radius(const Vec3& x) {
  return planar_radius(x[0], x[1], "charged particle");
}

// Scalar potential and its gradient.
double scalar_potential(ChargedField field, const Vec3& x) {
  if (field == ChargedField::Tokamak) return 0.0;
  return kUniformCharge / axis_radius(x);
}

Vec3 scalar_potential_gradient(ChargedField field, const Vec3& x) {
  if (field == ChargedField::Tokamak) return {0.0, 0.0, 0.0};
  const double r = axis_radius(x);
  const double c = -kUniformCharge / (r * r * r);
  return {c * x[0], c * x[1], 0.0};
}

Vec3 to_vec3(const StateVector& y, Eigen::Index offset) {
  return {y[offset], y[offset + 1], y[offset + 2]};
}

}  // namespace

Vec3 vector_potential(ChargedField field, const Vec3& x) {
  if (field == ChargedField::Uniform) return {-0.5 * x[1], 0.5 * x[0], 0.0};
  const double r = axis_radius(x);
  const double r2 = r * r;
  const double z = x[2];
  const double f = (1.0 - r) * (1.0 - r) + z * z;
  return {x[0] * z / (2.0 * r2) - f * x[1] / (4.0 * r2),
          x[1] * z / (2.0 * r2) + f * x[0] / (4.0 * r2), -0.5 * std::log(r)};
}

Mat3 vector_potential_jacobian(ChargedField field, const Vec3& x) {
  if (field == ChargedField::Uniform) {
    return Mat3{{{0.0, -0.5, 0.0}, {0.5, 0.0, 0.0}, {0.0, 0.0, 0.0}}};
  }
  const double px = x[0];
  const double py = x[1];
  const double z = x[2];
  const double r = axis_radius(x);
  const double r2 = r * r;
  const double r3 = r2 * r;
  const double r4 = r2 * r2;
  const double f = (1.0 - r) * (1.0 - r) + z * z;
  const double w = 1.0 - r;
  Mat3 j{};
  j[0][0] = z / (2.0 * r2) - px * px * z / r4 + w * px * py / (2.0 * r3) + f * px * py / (2.0 * r4);
  j[0][1] = -px * py * z / r4 + w * py * py / (2.0 * r3) - f / (4.0 * r2) + f * py * py / (2.0 * r4);
  j[0][2] = px / (2.0 * r2) - z * py / (2.0 * r2);
  j[1][0] = -px * py * z / r4 - w * px * px / (2.0 * r3) + f / (4.0 * r2) - f * px * px / (2.0 * r4);
  j[1][1] = z / (2.0 * r2) - py * py * z / r4 - w * px * py / (2.0 * r3) - f * px * py / (2.0 * r4);
  j[1][2] = py / (2.0 * r2) + z * px / (2.0 * r2);
  j[2][0] = -px / (2.0 * r2);
  j[2][1] = -py / (2.0 * r2);
  j[2][2] = 0.0;
  return j;
}

ChargedParticleSetup default_particle_setup(ChargedField field) {
  if (field == ChargedField::Uniform) return ChargedParticleSetup{};
  return ChargedParticleSetup{ChargedField::Tokamak, {1.05, 0.0, 0.0}, {0.0, 4.816e-4, -2.059e-3}};
}

ConservativeSystem charged_particle(const ChargedParticleSetup& setup) {
  const ChargedField field = setup.field;
  ConservativeSystem sys;
  sys.name = field == ChargedField::Uniform ? "particle-uniform" : "particle-tokamak";
  sys.dimension = 6;
  const Vec3 a0 = vector_potential(field, setup.position);
  StateVector y0(6);
  for (int k = 0; k < 3; ++k) {
    y0[k] = setup.position[static_cast<std::size_t>(k)];
    y0[3 + k] = setup.velocity[static_cast<std::size_t>(k)] + a0[static_cast<std::size_t>(k)];
  }
  sys.initial_state = y0;

  // dH/dx = -(dA/dx)^T (p - A) + grad(phi), dH/dp = p - A.
  auto gradient = [field](const StateVector& y) -> StateVector {
    const Vec3 x = to_vec3(y, 0);
    const Vec3 a = vector_potential(field, x);
    const Mat3 ja = vector_potential_jacobian(field, x);
    const Vec3 gphi = scalar_potential_gradient(field, x);
    Vec3 v{};
    for (int i = 0; i < 3; ++i) v[i] = y[3 + i] - a[i];
    StateVector g(6);
    for (int k = 0; k < 3; ++k) {
      double s = 0.0;
      for (int i = 0; i < 3; ++i) s += ja[i][k] * v[i];
      g[k] = -s + gphi[k];
      g[3 + k] = v[k];
    }
    return g;
  };
  sys.rhs = [gradient](const StateVector& y) {
    const StateVector g = gradient(y);
    StateVector f(6);
    f.head<3>() = g.tail<3>();
    f.tail<3>() = -g.head<3>();
    return f;
  };
  Invariant energy{"H",
                   [field](const StateVector& y) {
                     const Vec3 x = to_vec3(y, 0);
                     const Vec3 a = vector_potential(field, x);
                     double k = 0.0;
                     for (int i = 0; i < 3; ++i) k += (y[3 + i] - a[i]) * (y[3 + i] - a[i]);
                     return 0.5 * k + scalar_potential(field, x);
                   },
                   gradient};
  Invariant momentum{"L", [](const StateVector& y) { return y[0] * y[4] - y[1] * y[3]; },
                     [](const StateVector& y) -> StateVector {
                       StateVector g = StateVector::Zero(6);
                       g[0] = y[4];
                       g[1] = -y[3];
                       g[3] = -y[1];
                       g[4] = y[0];
                       return g;
                     }};
  sys.invariants = InvariantSet({energy, momentum}, y0);
  return sys;
}

// ---------------------------------------------------------------------------

ConservativeSystem zero_field(StateVector y0) {
  ConservativeSystem sys;
  sys.name = "zero";
  sys.dimension = y0.size();
  sys.initial_state = y0;
  const Eigen::Index d = y0.size();
  sys.rhs = [d](const StateVector&) -> StateVector { return StateVector::Zero(d); };
  Invariant quadratic{"Q", [](const StateVector& y) { return 0.5 * y.squaredNorm(); },
                      [](const StateVector& y) -> StateVector { return y; }};
  Invariant linear{"S", [](const StateVector& y) { return y.sum(); },
                   [d](const StateVector&) -> StateVector { return StateVector::Ones(d); }};
  sys.invariants = InvariantSet({quadratic, linear}, y0);
  sys.exact_solution = [y0](double) { return y0; };
  sys.split = SeparableSplit{
      [](const StateVector& q) -> StateVector { return StateVector::Zero(q.size()); },
      [](const StateVector& p) -> StateVector { return StateVector::Zero(p.size()); }};
  return sys;
}

StateVector stormer_verlet_step(const ConservativeSystem& sys, const StateVector& y, double h) {
  if (!sys.split) {
    throw Error("stormer-verlet: system '" + sys.name + "' has no separable H = T(p) + V(q) split");
  }
  if (!(h > 0.0)) throw Error("stormer-verlet: step size must be positive");
  require_dimension(y, sys.dimension, sys.name);
  const Eigen::Index half = y.size() / 2;
  const auto& split = *sys.split;
  StateVector p = y.tail(half) - (0.5 * h) * split.grad_potential(y.head(half));
  StateVector q = y.head(half) + h * split.grad_kinetic(p);
  p -= (0.5 * h) * split.grad_potential(q);
  StateVector out(y.size());
  out.head(half) = q;
  out.tail(half) = p;
  require_finite(out, "stormer-verlet step");
  return out;
}

}  // namespace conservo
