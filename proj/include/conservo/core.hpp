#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace conservo {

/// Flat real state. Complex fields use the [real parts; imaginary parts] layout.
using StateVector = Eigen::VectorXd;

/// Column i holds the gradient of invariant i (d x l).
using GradientMatrix = Eigen::MatrixXd;

using Rhs = std::function<StateVector(const StateVector&)>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// The projection directions are (numerically) linearly dependent.
class SingularDirectionError : public Error {
 public:
  using Error::Error;
};

/// Two bodies (or a particle and the axis) came closer than the guard distance.
class CollisionError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

bool all_finite(const StateVector& y);

/// Throws NonFiniteError mentioning `what` if any entry is NaN or Inf.
void require_finite(const StateVector& y, std::string_view what);

void require_dimension(const StateVector& y, Eigen::Index expected, std::string_view what);

struct Invariant {
  std::string name;
  std::function<double(const StateVector&)> value;
  std::function<StateVector(const StateVector&)> gradient;
};

/// A bundle of scalar invariants g_i(y) = I_i(y) - I_i(y0).
///
/// Reference values are taken at construction so that the residual vanishes
/// at the reference state.
class InvariantSet {
 public:
  InvariantSet() = default;
  InvariantSet(std::vector<Invariant> invariants, const StateVector& reference_state);
  InvariantSet(std::vector<Invariant> invariants, Eigen::VectorXd reference_values,
               Eigen::Index dimension);

  std::size_t size() const { return invariants_.size(); }
  bool empty() const { return invariants_.empty(); }
  Eigen::Index dimension() const { return dimension_; }

  const std::vector<Invariant>& invariants() const { return invariants_; }
  const Eigen::VectorXd& reference_values() const { return reference_values_; }
  std::vector<std::string> names() const;

  /// Raw invariant values I_i(y).
  Eigen::VectorXd values(const StateVector& y) const;

  /// Residuals I_i(y) - I_i(y0).
  Eigen::VectorXd residuals(const StateVector& y) const;

  /// d x l matrix whose columns are the invariant gradients.
  GradientMatrix gradients(const StateVector& y) const;

  /// The invariants listed in `names`, in that order. Unknown names throw.
  InvariantSet select(const std::vector<std::string>& names) const;

  std::optional<std::size_t> index_of(std::string_view name) const;

 private:
  std::vector<Invariant> invariants_;
  Eigen::VectorXd reference_values_;
  Eigen::Index dimension_ = 0;
};

/// Separable Hamiltonian H = T(p) + V(q) over a state laid out as [q; p].
struct SeparableSplit {
  std::function<StateVector(const StateVector& q)> grad_potential;
  std::function<StateVector(const StateVector& p)> grad_kinetic;
};

struct ConservativeSystem {
  std::string name;
  Eigen::Index dimension = 0;
  Rhs rhs;
  InvariantSet invariants;
  StateVector initial_state;
  std::function<StateVector(double)> exact_solution;
  std::optional<SeparableSplit> split;

  ConservativeSystem with_invariants(const std::vector<std::string>& names) const;
};

Eigen::VectorXd evaluate_invariants(const InvariantSet& inv, const StateVector& y);
GradientMatrix invariant_gradients(const InvariantSet& inv, const StateVector& y);

// ---------------------------------------------------------------------------
// Grid vectorization. Grids are stored column-major: the first (x) index
// varies fastest. Complex grids vectorize to [all real parts; all imaginary].

struct GridShape {
  std::vector<std::size_t> extents;
  bool complex = false;

  std::size_t rank() const { return extents.size(); }
  std::size_t points() const;
  /// Length of the real vector holding a field of this shape.
  std::size_t real_dimension() const { return points() * (complex ? 2 : 1); }
  bool operator==(const GridShape&) const = default;
};

template <typename T>
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<std::size_t> extents)
      : extents_(std::move(extents)), data_(count(extents_)) {}
  Grid(std::vector<std::size_t> extents, std::vector<T> data)
      : extents_(std::move(extents)), data_(std::move(data)) {
    if (data_.size() != count(extents_)) {
      throw DimensionError("grid data size does not match its extents");
    }
  }

  const std::vector<std::size_t>& extents() const { return extents_; }
  std::size_t size() const { return data_.size(); }
  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  template <typename... Idx>
  T& operator()(Idx... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... Idx>
  const T& operator()(Idx... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  bool operator==(const Grid&) const = default;

 private:
  static std::size_t count(const std::vector<std::size_t>& e) {
    std::size_t n = e.empty() ? 0 : 1;
    for (auto v : e) n *= v;
    return n;
  }
  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != extents_.size()) throw DimensionError("grid index rank mismatch");
    std::size_t off = 0;
    std::size_t stride = 1;
    std::size_t axis = 0;
    for (auto i : idx) {
      off += i * stride;
      stride *= extents_[axis++];
    }
    return off;
  }

  std::vector<std::size_t> extents_;
  std::vector<T> data_;
};

using RealGrid = Grid<double>;
using ComplexGrid = Grid<std::complex<double>>;

StateVector vectorize(const RealGrid& grid);
StateVector vectorize(const ComplexGrid& grid);
RealGrid devectorize_real(const StateVector& v, const GridShape& shape);
ComplexGrid devectorize_complex(const StateVector& v, const GridShape& shape);

}  // namespace conservo
