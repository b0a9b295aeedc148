#include "conservo/core.hpp"

#include <cmath>
#include <string>

namespace conservo {

bool all_finite(const StateVector& y) { return y.allFinite(); }

void require_finite(const StateVector& y, std::string_view what) {
  if (!y.allFinite()) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (!std::isfinite(y[i])) {
        throw NonFiniteError(std::string(what) + ": non-finite entry at index " +
                             std::to_string(i));
      }
    }
  }
}

void require_dimension(const StateVector& y, Eigen::Index expected, std::string_view what) {
  if (y.size() != expected) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(expected) +
                         ", got " + std::to_string(y.size()));
  }
}

InvariantSet::InvariantSet(std::vector<Invariant> invariants, const StateVector& reference_state)
    : invariants_(std::move(invariants)), dimension_(reference_state.size()) {
  reference_values_.resize(static_cast<Eigen::Index>(invariants_.size()));
  for (std::size_t i = 0; i < invariants_.size(); ++i) {
    reference_values_[static_cast<Eigen::Index>(i)] = invariants_[i].value(reference_state);
  }
}

InvariantSet::InvariantSet(std::vector<Invariant> invariants, Eigen::VectorXd reference_values,
                           Eigen::Index dimension)
    : invariants_(std::move(invariants)),
      reference_values_(std::move(reference_values)),
      dimension_(dimension) {
  if (reference_values_.size() != static_cast<Eigen::Index>(invariants_.size())) {
    throw DimensionError("one reference value per invariant is required");
  }
}

std::vector<std::string> InvariantSet::names() const {
  std::vector<std::string> out;
  out.reserve(invariants_.size());
  for (const auto& inv : invariants_) out.push_back(inv.name);
  return out;
}

Eigen::VectorXd InvariantSet::values(const StateVector& y) const {
  require_dimension(y, dimension_, "invariant evaluation");
  Eigen::VectorXd out(static_cast<Eigen::Index>(invariants_.size()));
  for (std::size_t i = 0; i < invariants_.size(); ++i) {
    const double v = invariants_[i].value(y);
    if (!std::isfinite(v)) {
      throw NonFiniteError("invariant '" + invariants_[i].name + "' evaluated to a non-finite value");
    }
    out[static_cast<Eigen::Index>(i)] = v;
  }
  return out;
}

Eigen::VectorXd InvariantSet::residuals(const StateVector& y) const {
  return values(y) - reference_values_;
}

GradientMatrix InvariantSet::gradients(const StateVector& y) const {
  require_dimension(y, dimension_, "invariant gradient");
  GradientMatrix g(dimension_, static_cast<Eigen::Index>(invariants_.size()));
  for (std::size_t i = 0; i < invariants_.size(); ++i) {
    StateVector col = invariants_[i].gradient(y);
    if (col.size() != dimension_) {
      throw DimensionError("gradient of '" + invariants_[i].name + "' has the wrong length");
    }
    if (!col.allFinite()) {
      throw NonFiniteError("gradient of invariant '" + invariants_[i].name + "' is non-finite");
    }
    g.col(static_cast<Eigen::Index>(i)) = col;
  }
  return g;
}

std::optional<std::size_t> InvariantSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < invariants_.size(); ++i) {
    if (invariants_[i].name == name) return i;
  }
  return std::nullopt;
}

InvariantSet InvariantSet::select(const std::vector<std::string>& names) const {
  std::vector<Invariant> picked;
  Eigen::VectorXd refs(static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    auto idx = index_of(names[k]);
    if (!idx) {
      std::string known;
      for (const auto& inv : invariants_) known += (known.empty() ? "" : ", ") + inv.name;
      throw Error("unknown invariant '" + names[k] + "' (available: " + known + ")");
    }
    picked.push_back(invariants_[*idx]);
    refs[static_cast<Eigen::Index>(k)] = reference_values_[static_cast<Eigen::Index>(*idx)];
  }
  return InvariantSet(std::move(picked), std::move(refs), dimension_);
}

ConservativeSystem ConservativeSystem::with_invariants(const std::vector<std::string>& names) const {
  ConservativeSystem out = *this;
  out.invariants = invariants.select(names);
  return out;
}

Eigen::VectorXd evaluate_invariants(const InvariantSet& inv, const StateVector& y) {
  return inv.residuals(y);
}

GradientMatrix invariant_gradients(const InvariantSet& inv, const StateVector& y) {
  return inv.gradients(y);
}

std::size_t GridShape::points() const {
  if (extents.empty()) return 0;
  std::size_t n = 1;
  for (auto e : extents) n *= e;
  return n;
}

namespace {

void check_shape(const StateVector& v, const GridShape& shape) {
  if (shape.rank() < 1 || shape.rank() > 3) {
    throw DimensionError("grid rank must be 1, 2 or 3");
  }
  if (static_cast<std::size_t>(v.size()) != shape.real_dimension()) {
    throw DimensionError("vector length " + std::to_string(v.size()) +
                         " does not match grid shape (" + std::to_string(shape.real_dimension()) +
                         " expected)");
  }
}

}  // namespace

StateVector vectorize(const RealGrid& grid) {
  auto data = grid.data();
  StateVector v(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) v[static_cast<Eigen::Index>(i)] = data[i];
  return v;
}

StateVector vectorize(const ComplexGrid& grid) {
  auto data = grid.data();
  const auto n = static_cast<Eigen::Index>(data.size());
  StateVector v(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v[i] = data[static_cast<std::size_t>(i)].real();
    v[n + i] = data[static_cast<std::size_t>(i)].imag();
  }
  return v;
}

RealGrid devectorize_real(const StateVector& v, const GridShape& shape) {
  if (shape.complex) throw DimensionError("devectorize_real called with a complex shape");
  check_shape(v, shape);
  std::vector<double> data(v.data(), v.data() + v.size());
  return RealGrid(shape.extents, std::move(data));
}

ComplexGrid devectorize_complex(const StateVector& v, const GridShape& shape) {
  if (!shape.complex) throw DimensionError("devectorize_complex called with a real shape");
  check_shape(v, shape);
  const auto n = static_cast<Eigen::Index>(shape.points());
  std::vector<std::complex<double>> data(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) data[static_cast<std::size_t>(i)] = {v[i], v[n + i]};
  return ComplexGrid(shape.extents, std::move(data));
}

}  // namespace conservo
