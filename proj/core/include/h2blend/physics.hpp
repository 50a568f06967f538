#pragma once

// Ideal H2/NG mixture thermodynamics and the nondimensionalization scales.
//
// All functions are pure. Units are SI unless stated otherwise: densities in
// kg/m^3, pressures in Pa, sound speeds in m/s, calorific values in MJ/kg.

namespace h2blend {

/// Pure-component sound speeds and calorific values.
///
/// The default sound speeds come from a = sqrt(R T / M) at T = 288.7 K with
/// molar masses 2.016 g/mol (H2) and 16.04 g/mol (NG). Calorific values are
/// standard higher heating values.
struct GasConstants {
  double a_h2 = 1091.4;  // m/s
  double a_ng = 386.9;   // m/s
  double r_h2 = 141.8;   // MJ/kg
  double r_ng = 44.2;    // MJ/kg

  /// Throws DomainError unless a_h2 > a_ng > 0 and r_h2 > r_ng > 0.
  void validate() const;
};

/// Nominal values used to make the discretized system O(1).
struct NondimScales {
  double l0 = 0.0;     // length scale, m
  double p0 = 0.0;     // pressure scale, Pa
  double mach = 0.0;   // nominal Mach number
  double a0 = 0.0;     // nominal wave speed, m/s
  double v0 = 0.0;     // nominal flow speed, m/s
  double rho0 = 0.0;   // nominal density, kg/m^3
  double phi0 = 0.0;   // nominal mass flux, kg/m^2/s
  double area0 = 1.0;  // nominal area, m^2
  double kappa = 0.0;  // rate constant v0/l0, 1/s

  /// Nominal mass flow rho0 * v0 * area0 in kg/s.
  double flow() const { return phi0 * area0; }
};

/// State of the mixture at one node and time.
struct MixtureState {
  double rho_h2 = 0.0;
  double rho_ng = 0.0;
  double eta = 0.0;  // H2 mass fraction
  double a2 = 0.0;   // squared mixture sound speed, m^2/s^2
  double p = 0.0;    // pressure, Pa

  double rho() const { return rho_h2 + rho_ng; }
};

/// a^2(eta) = a_h2^2 eta + a_ng^2 (1 - eta). Throws DomainError for eta outside [0, 1].
double mixture_sound_speed_sq(double eta, const GasConstants& gas);

/// P = a_h2^2 rho_h2 + a_ng^2 rho_ng. Throws DomainError for negative or all-zero densities.
double eos_pressure(double rho_h2, double rho_ng, const GasConstants& gas);

/// H2 mass fraction rho_h2 / (rho_h2 + rho_ng).
double mass_fraction(double rho_h2, double rho_ng);

/// Energy content (eta R_h2 + (1 - eta) R_ng) qw of a withdrawal flow, in MJ/s.
double energy_rate(double eta, double qw, const GasConstants& gas);

/// Mass flow that carries `energy` MJ/s at mass fraction eta. Inverse of energy_rate.
double withdrawal_for_energy(double eta, double energy, const GasConstants& gas);

/// Builds a consistent MixtureState from partial densities.
MixtureState make_state(double rho_h2, double rho_ng, const GasConstants& gas);

/// Builds the state with pressure p and mass fraction eta (inverse EOS).
MixtureState state_from_pressure(double p, double eta, const GasConstants& gas);

/// Derives all nominal scales from l0, p0 and the Mach number.
NondimScales nondim_scales(double l0, double p0, double mach, const GasConstants& gas);

/// Dimensionless friction resistance of a pipe segment, beta = M^2 lambda L / (2 D).
///
/// L/D is scale-free, so beta does not depend on l0.
double pipe_beta(double lambda, double length, double diameter, double mach);

/// Compressor work constant 286.76 mu T / (G (mu - 1)) in J/kg.
double compressor_work_constant(double mu, double specific_gravity, double temperature);

}  // namespace h2blend
