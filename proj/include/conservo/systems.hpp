#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "conservo/core.hpp"

namespace conservo {

inline constexpr double kGravitationalConstant = 6.67430e-11;  // m^3 kg^-1 s^-2
inline constexpr double kSunGravitationalParameter = 1.32712440018e20;  // m^3 s^-2
inline constexpr double kJulianYear = 3.15576e7;  // s
inline constexpr double kCollisionGuard = 1e-12;

/// y' = [[0, w], [-w, 0]] y with H = (w/2) |y|^2. Exact solution is a rotation.
ConservativeSystem harmonic_oscillator(double omega, StateVector y0 = StateVector());

/// Kepler problem in the Schwarzschild-perturbed potential, state (q1, q2, p1, p2).
/// Invariants "H" and "L".
ConservativeSystem perturbed_kepler(double eccentricity = 0.6);

struct Body {
  std::string name;
  std::array<double, 3> position;  // m
  std::array<double, 3> velocity;  // m/s
  double gm;                       // m^3/s^2
};

/// The Sun followed by the eight planets and Pluto.
std::vector<Body> load_solar_data();

/// CSV with columns name,x,y,z,vx,vy,vz,gm (SI). A header row is optional.
/// The Sun is prepended with the standard closure unless the file names it.
std::vector<Body> load_solar_csv(const std::filesystem::path& path);

/// N-body gravitational system, state [q_1..q_N, p_1..p_N] (positions, then momenta).
/// Invariants "H", "Lx", "Ly", "Lz".
ConservativeSystem solar_system(const std::vector<Body>& bodies);
ConservativeSystem solar_system();

/// Total linear momentum of an N-body state.
std::array<double, 3> total_linear_momentum(const StateVector& y);

enum class ChargedField { Uniform, Tokamak };

struct ChargedParticleSetup {
  ChargedField field = ChargedField::Uniform;
  std::array<double, 3> position{0.0, -1.0, 0.0};
  std::array<double, 3> velocity{0.1, 0.01, 0.0};
};

/// Default initial data for each field: the gyro-orbit for Uniform and the
/// banana orbit for Tokamak.
ChargedParticleSetup default_particle_setup(ChargedField field);

/// Canonical (x, p) formulation with q = m = 1, state in R^6.
/// Invariants "H" and "L" (= x p_y - y p_x).
ConservativeSystem charged_particle(const ChargedParticleSetup& setup);

/// Vector potential and its Jacobian dA_i/dx_j, exposed for testing.
std::array<double, 3> vector_potential(ChargedField field, const std::array<double, 3>& x);
std::array<std::array<double, 3>, 3> vector_potential_jacobian(ChargedField field,
                                                               const std::array<double, 3>& x);

/// f = 0 with invariants "Q" = |y|^2 / 2 and "S" = sum(y); used as a stationary control.
ConservativeSystem zero_field(StateVector y0);

/// Kick-drift-kick Stormer-Verlet step for a separable system laid out as [q; p].
StateVector stormer_verlet_step(const ConservativeSystem& sys, const StateVector& y, double h);

}  // namespace conservo
