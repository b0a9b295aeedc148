#include "conservo/gpe.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>

#include <fftw3.h>

namespace conservo {

namespace {

// The FFTW planner is not reentrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<double> wavenumbers(std::size_t n, double length) {
  std::vector<double> k(n);
  const double scale = 2.0 * std::numbers::pi / length;
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<double>(j);
    k[j] = scale * (j < n / 2 ? jj : jj - static_cast<double>(n));
  }
  return k;
}

using cplx = std::complex<double>;

}  // namespace

void GpeConfig::validate() const {
  if (nx < 8 || ny < 8 || nx % 2 != 0 || ny % 2 != 0) {
    throw Error("gpe: grid sizes must be even and at least 8");
  }
  if (!(x_max > x_min) || !(y_max > y_min)) throw Error("gpe: domain lengths must be positive");
}

std::function<double(double, double)> harmonic_potential(double gamma_x, double gamma_y) {
  return [gamma_x, gamma_y](double x, double y) {
    return 0.5 * (gamma_x * gamma_x * x * x + gamma_y * gamma_y * y * y);
  };
}

// ---------------------------------------------------------------------------

SpectralOperators::SpectralOperators(std::size_t nx, std::size_t ny, double length_x,
                                     double length_y)
    : nx_(nx), ny_(ny), kx_(wavenumbers(nx, length_x)), ky_(wavenumbers(ny, length_y)) {
  const cplx i(0.0, 1.0);
  auto build = [&](const std::vector<double>& k, std::vector<cplx>& d1, std::vector<cplx>& d2,
                   std::vector<cplx>& one) {
    const std::size_t n = k.size();
    d1.resize(n);
    d2.resize(n);
    one.assign(n, cplx(1.0, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
      d1[j] = j == n / 2 ? cplx(0.0, 0.0) : i * k[j];
      d2[j] = cplx(-k[j] * k[j], 0.0);
    }
  };
  build(kx_, d1x_mult_, d2x_mult_, one_x_);
  build(ky_, d1y_mult_, d2y_mult_, one_y_);

  Buffer scratch(nx_ * ny_);
  auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
  std::lock_guard lock(planner_mutex());
  // Column-major J x K storage is row-major K x J for FFTW.
  const auto n0 = static_cast<int>(ny_);
  const auto n1 = static_cast<int>(nx_);
  forward_plan_ = fftw_plan_dft_2d(n0, n1, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_2d(n0, n1, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
  if (forward_plan_ == nullptr || inverse_plan_ == nullptr) throw Error("gpe: FFT planning failed");
}

SpectralOperators::~SpectralOperators() {
  std::lock_guard lock(planner_mutex());
  if (forward_plan_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  if (inverse_plan_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

std::complex<double>* SpectralOperators::AlignedAllocator::allocate(std::size_t n) {
  void* p = fftw_malloc(n * sizeof(std::complex<double>));
  if (p == nullptr) throw std::bad_alloc();
  return static_cast<std::complex<double>*>(p);
}

void SpectralOperators::AlignedAllocator::deallocate(std::complex<double>* p,
                                                     std::size_t) noexcept {
  fftw_free(p);
}

void SpectralOperators::forward(Buffer& data) const {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(forward_plan_), p, p);
}

void SpectralOperators::inverse(Buffer& data) const {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(inverse_plan_), p, p);
  const double scale = 1.0 / static_cast<double>(nx_ * ny_);
  for (auto& v : data) v *= scale;
}

ComplexGrid SpectralOperators::apply(const ComplexGrid& u, const std::vector<cplx>& mult_x,
                                     const std::vector<cplx>& mult_y) const {
  if (u.extents() != std::vector<std::size_t>{nx_, ny_}) {
    throw DimensionError("spectral operator: grid shape mismatch");
  }
  Buffer buf(u.data().begin(), u.data().end());
  forward(buf);
  for (std::size_t k = 0; k < ny_; ++k) {
    for (std::size_t j = 0; j < nx_; ++j) buf[j + nx_ * k] *= mult_x[j] * mult_y[k];
  }
  inverse(buf);
  return ComplexGrid({nx_, ny_}, std::vector<cplx>(buf.begin(), buf.end()));
}

ComplexGrid SpectralOperators::d1x(const ComplexGrid& u) const { return apply(u, d1x_mult_, one_y_); }
ComplexGrid SpectralOperators::d1y(const ComplexGrid& u) const { return apply(u, one_x_, d1y_mult_); }
ComplexGrid SpectralOperators::d2x(const ComplexGrid& u) const { return apply(u, d2x_mult_, one_y_); }
ComplexGrid SpectralOperators::d2y(const ComplexGrid& u) const { return apply(u, one_x_, d2y_mult_); }

ComplexGrid SpectralOperators::laplacian(const ComplexGrid& u) const {
  return all(u, false).laplacian;
}

SpectralOperators::Derivatives SpectralOperators::all(const ComplexGrid& u,
                                                      bool with_gradient) const {
  if (u.extents() != std::vector<std::size_t>{nx_, ny_}) {
    throw DimensionError("spectral operator: grid shape mismatch");
  }
  Buffer hat(u.data().begin(), u.data().end());
  forward(hat);
  Buffer lap(hat.size());
  for (std::size_t k = 0; k < ny_; ++k) {
    for (std::size_t j = 0; j < nx_; ++j) {
      const std::size_t idx = j + nx_ * k;
      lap[idx] = hat[idx] * (d2x_mult_[j] + d2y_mult_[k]);
    }
  }
  inverse(lap);
  Derivatives out{ComplexGrid({nx_, ny_}, std::vector<cplx>(lap.begin(), lap.end())), {}, {}};
  if (with_gradient) {
    Buffer dx(hat.size());
    Buffer dy(hat.size());
    for (std::size_t k = 0; k < ny_; ++k) {
      for (std::size_t j = 0; j < nx_; ++j) {
        const std::size_t idx = j + nx_ * k;
        dx[idx] = hat[idx] * d1x_mult_[j];
        dy[idx] = hat[idx] * d1y_mult_[k];
      }
    }
    inverse(dx);
    inverse(dy);
    out.dx = ComplexGrid({nx_, ny_}, std::vector<cplx>(dx.begin(), dx.end()));
    out.dy = ComplexGrid({nx_, ny_}, std::vector<cplx>(dy.begin(), dy.end()));
  }
  return out;
}

// ---------------------------------------------------------------------------

GpeModel::GpeModel(GpeConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const double lx = cfg_.x_max - cfg_.x_min;
  const double ly = cfg_.y_max - cfg_.y_min;
  hx_ = lx / static_cast<double>(cfg_.nx);
  hy_ = ly / static_cast<double>(cfg_.ny);
  v_.assign(cfg_.nx * cfg_.ny, 0.0);
  if (cfg_.potential) {
    for (std::size_t k = 0; k < cfg_.ny; ++k) {
      for (std::size_t j = 0; j < cfg_.nx; ++j) v_[j + cfg_.nx * k] = cfg_.potential(x(j), y(k));
    }
  }
  ops_ = std::make_shared<const SpectralOperators>(cfg_.nx, cfg_.ny, lx, ly);
}

void GpeModel::check(const ComplexGrid& psi) const {
  if (psi.extents() != std::vector<std::size_t>{cfg_.nx, cfg_.ny}) {
    throw DimensionError("gpe: field shape does not match the grid");
  }
}

ComplexGrid GpeModel::angular_momentum(const ComplexGrid& psi) const {
  check(psi);
  const auto d = ops_->all(psi, true);
  ComplexGrid out({cfg_.nx, cfg_.ny});
  const cplx minus_i(0.0, -1.0);
  for (std::size_t k = 0; k < cfg_.ny; ++k) {
    for (std::size_t j = 0; j < cfg_.nx; ++j) {
      out(j, k) = minus_i * (x(j) * d.dy(j, k) - y(k) * d.dx(j, k));
    }
  }
  return out;
}

ComplexGrid GpeModel::hamiltonian(const ComplexGrid& psi) const {
  check(psi);
  const bool rotating = cfg_.omega != 0.0;
  const auto d = ops_->all(psi, rotating);
  ComplexGrid out({cfg_.nx, cfg_.ny});
  const cplx minus_i(0.0, -1.0);
  for (std::size_t k = 0; k < cfg_.ny; ++k) {
    for (std::size_t j = 0; j < cfg_.nx; ++j) {
      const cplx u = psi(j, k);
      cplx h = -0.5 * d.laplacian(j, k) + (v_[j + cfg_.nx * k] + cfg_.beta * std::norm(u)) * u;
      if (rotating) {
        const cplx lz = minus_i * (x(j) * d.dy(j, k) - y(k) * d.dx(j, k));
        h -= cfg_.omega * lz;
      }
      out(j, k) = h;
    }
  }
  return out;
}

ComplexGrid GpeModel::rhs(const ComplexGrid& psi) const {
  ComplexGrid h = hamiltonian(psi);
  const cplx minus_i(0.0, -1.0);
  for (auto& v : h.data()) v *= minus_i;
  return h;
}

std::complex<double> GpeModel::inner(const ComplexGrid& u, const ComplexGrid& v) const {
  check(u);
  check(v);
  cplx s(0.0, 0.0);
  auto a = u.data();
  auto b = v.data();
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * std::conj(b[i]);
  return hx_ * hy_ * s;
}

double GpeModel::mass(const ComplexGrid& psi) const {
  check(psi);
  double s = 0.0;
  for (const auto& v : psi.data()) s += std::norm(v);
  return hx_ * hy_ * s;
}

double GpeModel::energy(const ComplexGrid& psi) const {
  check(psi);
  const bool rotating = cfg_.omega != 0.0;
  const auto d = ops_->all(psi, rotating);
  const cplx minus_i(0.0, -1.0);
  double kinetic = 0.0;  // -(Lap psi, psi)
  double potential = 0.0;
  double rotation = 0.0;  // Re (L_z psi, psi)
  double quartic = 0.0;
  for (std::size_t k = 0; k < cfg_.ny; ++k) {
    for (std::size_t j = 0; j < cfg_.nx; ++j) {
      const cplx u = psi(j, k);
      const double rho = std::norm(u);
      kinetic -= (d.laplacian(j, k) * std::conj(u)).real();
      potential += v_[j + cfg_.nx * k] * rho;
      quartic += rho * rho;
      if (rotating) {
        const cplx lz = minus_i * (x(j) * d.dy(j, k) - y(k) * d.dx(j, k));
        rotation += (lz * std::conj(u)).real();
      }
    }
  }
  const double w = hx_ * hy_;
  return w * (0.5 * kinetic + potential - cfg_.omega * rotation + 0.5 * cfg_.beta * quartic);
}

ComplexGrid GpeModel::mass_gradient(const ComplexGrid& psi) const {
  check(psi);
  ComplexGrid g = psi;
  const double w = 2.0 * hx_ * hy_;
  for (auto& v : g.data()) v *= w;
  return g;
}

ComplexGrid GpeModel::energy_gradient(const ComplexGrid& psi) const {
  // Each term of E is a Hermitian quadratic form (or |psi|^4), so the gradient
  // with respect to the real unknowns is 2 h_x h_y H(psi) psi.
  ComplexGrid g = hamiltonian(psi);
  const double w = 2.0 * hx_ * hy_;
  for (auto& v : g.data()) v *= w;
  return g;
}

ConservativeSystem GpeModel::as_conservative_system(GpeInvariants which,
                                                    const ComplexGrid& psi0) const {
  check(psi0);
  const GridShape gs = shape();
  ConservativeSystem sys;
  sys.name = "gpe";
  sys.dimension = static_cast<Eigen::Index>(gs.real_dimension());
  sys.initial_state = vectorize(psi0);
  const GpeModel model = *this;
  sys.rhs = [model, gs](const StateVector& y) {
    return vectorize(model.rhs(devectorize_complex(y, gs)));
  };
  Invariant mass_inv{"M",
                     [model, gs](const StateVector& y) {
                       return model.mass(devectorize_complex(y, gs));
                     },
                     [model, gs](const StateVector& y) -> StateVector {
                       return vectorize(model.mass_gradient(devectorize_complex(y, gs)));
                     }};
  Invariant energy_inv{"E",
                       [model, gs](const StateVector& y) {
                         return model.energy(devectorize_complex(y, gs));
                       },
                       [model, gs](const StateVector& y) -> StateVector {
                         return vectorize(model.energy_gradient(devectorize_complex(y, gs)));
                       }};
  std::vector<Invariant> invs;
  if (which != GpeInvariants::Energy) invs.push_back(mass_inv);
  if (which != GpeInvariants::Mass) invs.push_back(energy_inv);
  sys.invariants = InvariantSet(std::move(invs), sys.initial_state);
  return sys;
}

ComplexGrid GpeModel::plane_wave(double amplitude, double k1, double k2, double t) const {
  const double w = 0.5 * (k1 * k1 + k2 * k2) + cfg_.beta * amplitude * amplitude;
  ComplexGrid out({cfg_.nx, cfg_.ny});
  for (std::size_t k = 0; k < cfg_.ny; ++k) {
    for (std::size_t j = 0; j < cfg_.nx; ++j) {
      out(j, k) = std::polar(amplitude, k1 * x(j) + k2 * y(k) - w * t);
    }
  }
  return out;
}

ComplexGrid GpeModel::vortex_state() const {
  ComplexGrid out({cfg_.nx, cfg_.ny});
  const double c = 2.0 / std::sqrt(std::numbers::pi);
  for (std::size_t k = 0; k < cfg_.ny; ++k) {
    for (std::size_t j = 0; j < cfg_.nx; ++j) {
      const double xx = x(j);
      const double yy = y(k);
      out(j, k) = c * cplx(xx, yy) * std::exp(-8.0 * (xx * xx + yy * yy));
    }
  }
  const double m = mass(out);
  if (!(m > 0.0)) throw Error("gpe: vortex state has zero mass on this grid");
  const double scale = 1.0 / std::sqrt(m);
  for (auto& v : out.data()) v *= scale;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kSnapshotMagic[8] = {'C', 'N', 'S', 'V', 'S', 'N', 'A', 'P'};
constexpr std::uint32_t kSnapshotVersion = 1;

static_assert(std::endian::native == std::endian::little, "snapshot IO assumes little-endian");

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error("snapshot: truncated file");
  return v;
}

// Offset into the column-major storage of the i-th entry in row-major order.
std::vector<std::size_t> row_major_order(const std::vector<std::size_t>& extents) {
  std::size_t n = 1;
  for (auto e : extents) n *= e;
  std::vector<std::size_t> order(n);
  std::vector<std::size_t> idx(extents.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t off = 0;
    std::size_t stride = 1;
    for (std::size_t a = 0; a < extents.size(); ++a) {
      off += idx[a] * stride;
      stride *= extents[a];
    }
    order[i] = off;
    for (std::size_t a = extents.size(); a-- > 0;) {
      if (++idx[a] < extents[a]) break;
      idx[a] = 0;
    }
  }
  return order;
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, const ComplexGrid& field, double time) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("snapshot: cannot open '" + path.string() + "' for writing");
  os.write(kSnapshotMagic, sizeof(kSnapshotMagic));
  put(os, kSnapshotVersion);
  put(os, static_cast<std::uint32_t>(field.extents().size()));
  for (auto e : field.extents()) put(os, static_cast<std::uint64_t>(e));
  put(os, time);
  auto data = field.data();
  for (auto off : row_major_order(field.extents())) {
    put(os, data[off].real());
    put(os, data[off].imag());
  }
  if (!os) throw Error("snapshot: write failed for '" + path.string() + "'");
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("snapshot: cannot open '" + path.string() + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kSnapshotMagic, sizeof(magic)) != 0) {
    throw Error("snapshot: bad magic in '" + path.string() + "'");
  }
  if (get<std::uint32_t>(is) != kSnapshotVersion) throw Error("snapshot: unsupported version");
  const auto rank = get<std::uint32_t>(is);
  if (rank < 1 || rank > 3) throw Error("snapshot: invalid rank");
  std::vector<std::size_t> extents(rank);
  for (auto& e : extents) e = static_cast<std::size_t>(get<std::uint64_t>(is));
  Snapshot snap;
  snap.time = get<double>(is);
  snap.field = ComplexGrid(extents);
  auto data = snap.field.data();
  for (auto off : row_major_order(extents)) {
    const double re = get<double>(is);
    const double im = get<double>(is);
    data[off] = {re, im};
  }
  return snap;
}

}  // namespace conservo
