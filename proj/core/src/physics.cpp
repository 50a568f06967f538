#include "h2blend/physics.hpp"

#include <cmath>
#include <string>

#include "h2blend/errors.hpp"

namespace h2blend {

namespace {

void require_fraction(double eta, const char* what) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw DomainError(std::string(what) + ": mass fraction " + std::to_string(eta) +
                      " outside [0, 1]");
  }
}

}  // namespace

void GasConstants::validate() const {
  if (!(a_ng > 0.0 && a_h2 > a_ng)) {
    throw DomainError("gas constants: need a_h2 > a_ng > 0");
  }
  if (!(r_ng > 0.0 && r_h2 > r_ng)) {
    throw DomainError("gas constants: need r_h2 > r_ng > 0");
  }
}

double mixture_sound_speed_sq(double eta, const GasConstants& gas) {
  require_fraction(eta, "mixture_sound_speed_sq");
  return gas.a_h2 * gas.a_h2 * eta + gas.a_ng * gas.a_ng * (1.0 - eta);
}

double eos_pressure(double rho_h2, double rho_ng, const GasConstants& gas) {
  if (rho_h2 < 0.0 || rho_ng < 0.0) {
    throw DomainError("eos_pressure: negative partial density");
  }
  if (rho_h2 + rho_ng <= 0.0) {
    throw DomainError("eos_pressure: total density is zero, mass fraction undefined");
  }
  return gas.a_h2 * gas.a_h2 * rho_h2 + gas.a_ng * gas.a_ng * rho_ng;
}

double mass_fraction(double rho_h2, double rho_ng) {
  if (rho_h2 < 0.0 || rho_ng < 0.0 || rho_h2 + rho_ng <= 0.0) {
    throw DomainError("mass_fraction: densities must be non-negative with positive sum");
  }
  return rho_h2 / (rho_h2 + rho_ng);
}

double energy_rate(double eta, double qw, const GasConstants& gas) {
  require_fraction(eta, "energy_rate");
  if (qw < 0.0) {
    throw DomainError("energy_rate: negative withdrawal flow");
  }
  return (eta * gas.r_h2 + (1.0 - eta) * gas.r_ng) * qw;
}

double withdrawal_for_energy(double eta, double energy, const GasConstants& gas) {
  require_fraction(eta, "withdrawal_for_energy");
  if (energy < 0.0) {
    throw DomainError("withdrawal_for_energy: negative energy rate");
  }
  return energy / (eta * gas.r_h2 + (1.0 - eta) * gas.r_ng);
}

MixtureState make_state(double rho_h2, double rho_ng, const GasConstants& gas) {
  MixtureState s;
  s.rho_h2 = rho_h2;
  s.rho_ng = rho_ng;
  s.p = eos_pressure(rho_h2, rho_ng, gas);
  s.eta = mass_fraction(rho_h2, rho_ng);
  s.a2 = mixture_sound_speed_sq(s.eta, gas);
  return s;
}

MixtureState state_from_pressure(double p, double eta, const GasConstants& gas) {
  if (p <= 0.0) {
    throw DomainError("state_from_pressure: pressure must be positive");
  }
  MixtureState s;
  s.eta = eta;
  s.a2 = mixture_sound_speed_sq(eta, gas);
  s.p = p;
  const double rho = p / s.a2;
  s.rho_h2 = eta * rho;
  s.rho_ng = (1.0 - eta) * rho;
  return s;
}

NondimScales nondim_scales(double l0, double p0, double mach, const GasConstants& gas) {
  if (!(l0 > 0.0 && p0 > 0.0 && mach > 0.0)) {
    throw DomainError("nondim_scales: l0, p0 and mach must be positive");
  }
  gas.validate();
  NondimScales s;
  s.l0 = l0;
  s.p0 = p0;
  s.mach = mach;
  s.a0 = std::sqrt(gas.a_h2 * gas.a_ng);
  s.v0 = s.a0 * mach;
  s.rho0 = p0 / (s.a0 * s.a0);
  s.phi0 = s.rho0 * s.v0;
  s.area0 = 1.0;
  s.kappa = s.v0 / l0;
  return s;
}

double pipe_beta(double lambda, double length, double diameter, double mach) {
  if (lambda < 0.0 || !(length > 0.0) || !(diameter > 0.0) || !(mach > 0.0)) {
    throw DomainError("pipe_beta: lambda must be non-negative, L, D and M positive");
  }
  return mach * mach * lambda * length / (2.0 * diameter);
}

double compressor_work_constant(double mu, double specific_gravity, double temperature) {
  if (!(mu > 1.0) || !(specific_gravity > 0.0) || !(temperature > 0.0)) {
    throw DomainError("compressor_work_constant: need mu > 1, G > 0, T > 0");
  }
  return 286.76 * mu * temperature / (specific_gravity * (mu - 1.0));
}

}  // namespace h2blend
