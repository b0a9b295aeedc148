#pragma once

#include <complex>
#include <filesystem>
#include <functional>
#include <memory>

#include "conservo/core.hpp"

namespace conservo {

struct GpeConfig {
  double x_min = 0.0;
  double x_max = 2.0 * 3.14159265358979323846;
  double y_min = 0.0;
  double y_max = 2.0 * 3.14159265358979323846;
  std::size_t nx = 32;  // J
  std::size_t ny = 32;  // K
  double beta = 1.0;
  double omega = 0.0;  // rotation speed
  /// V(x, y). Empty means V = 0.
  std::function<double(double, double)> potential;

  void validate() const;
};

/// 0.5 (gx^2 x^2 + gy^2 y^2).
std::function<double(double, double)> harmonic_potential(double gamma_x = 1.0, double gamma_y = 1.0);

/// Fourier differentiation on a periodic J x K grid, applied through FFTs.
/// The first-derivative Nyquist coefficient is zero so D1 stays skew-symmetric.
class SpectralOperators {
 public:
  SpectralOperators(std::size_t nx, std::size_t ny, double length_x, double length_y);
  ~SpectralOperators();
  SpectralOperators(const SpectralOperators&) = delete;
  SpectralOperators& operator=(const SpectralOperators&) = delete;

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }

  ComplexGrid d1x(const ComplexGrid& u) const;
  ComplexGrid d1y(const ComplexGrid& u) const;
  ComplexGrid d2x(const ComplexGrid& u) const;
  ComplexGrid d2y(const ComplexGrid& u) const;
  ComplexGrid laplacian(const ComplexGrid& u) const;

  struct Derivatives {
    ComplexGrid laplacian;
    ComplexGrid dx;
    ComplexGrid dy;
  };
  /// Laplacian and both first derivatives from a single forward transform.
  Derivatives all(const ComplexGrid& u, bool with_gradient) const;

 private:
  /// Allocates through fftw_malloc so transforms can use SIMD codelets.
  struct AlignedAllocator {
    using value_type = std::complex<double>;
    template <class U>
    struct rebind {
      using other = AlignedAllocator;
    };
    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const U&) {}
    std::complex<double>* allocate(std::size_t n);
    void deallocate(std::complex<double>* p, std::size_t) noexcept;
    bool operator==(const AlignedAllocator&) const { return true; }
  };
  using Buffer = std::vector<std::complex<double>, AlignedAllocator>;
  void forward(Buffer& data) const;
  void inverse(Buffer& data) const;
  ComplexGrid apply(const ComplexGrid& u, const std::vector<std::complex<double>>& mult_x,
                    const std::vector<std::complex<double>>& mult_y) const;

  std::size_t nx_;
  std::size_t ny_;
  std::vector<double> kx_, ky_;
  std::vector<std::complex<double>> d1x_mult_, d1y_mult_, d2x_mult_, d2y_mult_, one_x_, one_y_;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

enum class GpeInvariants { Mass, Energy, Both };

/// Fourier-pseudospectral semi-discretization of the rotating Gross-Pitaevskii equation
///   i psi_t = (-1/2 Lap + V - Omega L_z + beta |psi|^2) psi
/// on a periodic box. Cheap to copy; copies share the FFT plans.
class GpeModel {
 public:
  explicit GpeModel(GpeConfig cfg);

  const GpeConfig& config() const { return cfg_; }
  GridShape shape() const { return GridShape{{cfg_.nx, cfg_.ny}, true}; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double x(std::size_t j) const { return cfg_.x_min + static_cast<double>(j) * hx_; }
  double y(std::size_t k) const { return cfg_.y_min + static_cast<double>(k) * hy_; }
  const SpectralOperators& operators() const { return *ops_; }

  /// L_z^h psi = -i (x D1y psi - y D1x psi).
  ComplexGrid angular_momentum(const ComplexGrid& psi) const;
  /// (-1/2 Lap + V - Omega L_z + beta |psi|^2) psi.
  ComplexGrid hamiltonian(const ComplexGrid& psi) const;
  ComplexGrid rhs(const ComplexGrid& psi) const;

  double mass(const ComplexGrid& psi) const;
  double energy(const ComplexGrid& psi) const;
  /// Gradients with respect to (Re psi, Im psi), returned as d/dRe + i d/dIm.
  ComplexGrid mass_gradient(const ComplexGrid& psi) const;
  ComplexGrid energy_gradient(const ComplexGrid& psi) const;

  /// Discrete inner product h_x h_y sum u conj(v).
  std::complex<double> inner(const ComplexGrid& u, const ComplexGrid& v) const;

  ConservativeSystem as_conservative_system(GpeInvariants which, const ComplexGrid& psi0) const;

  /// A exp(i(k1 x + k2 y - w t)), w = (k1^2 + k2^2)/2 + beta A^2: exact for V = 0, Omega = 0.
  ComplexGrid plane_wave(double amplitude, double k1, double k2, double t) const;

  /// (2/sqrt(pi)) (x + i y) exp(-8 (x^2 + y^2)) rescaled to unit discrete mass.
  ComplexGrid vortex_state() const;

 private:
  void check(const ComplexGrid& psi) const;

  GpeConfig cfg_;
  double hx_ = 0.0;
  double hy_ = 0.0;
  std::vector<double> v_;
  std::shared_ptr<const SpectralOperators> ops_;
};

/// Snapshot file: 8-byte magic "CNSVSNAP", uint32 version (1), uint32 rank,
/// rank x uint64 extents, float64 time, then row-major (last index fastest)
/// float64 (re, im) pairs. Native little-endian byte order.
void write_snapshot(const std::filesystem::path& path, const ComplexGrid& field, double time);

struct Snapshot {
  ComplexGrid field;
  double time = 0.0;
};
Snapshot read_snapshot(const std::filesystem::path& path);

}  // namespace conservo
