#include <doctest.h>

#include <cmath>
#include <random>

#include "h2blend/errors.hpp"
#include "h2blend/physics.hpp"

using namespace h2blend;
using doctest::Approx;

namespace {
const GasConstants gas{};
}

TEST_CASE("mixture sound speed at ten percent hydrogen") {
  // 1091.4^2 * 0.1 + 386.9^2 * 0.9
  CHECK(mixture_sound_speed_sq(0.1, gas) == Approx(253837.845).epsilon(1e-12));
  CHECK(mixture_sound_speed_sq(0.0, gas) == Approx(386.9 * 386.9).epsilon(1e-15));
  CHECK(mixture_sound_speed_sq(1.0, gas) == Approx(1091.4 * 1091.4).epsilon(1e-15));
  CHECK_THROWS_AS(mixture_sound_speed_sq(1.2, gas), DomainError);
  CHECK_THROWS_AS(mixture_sound_speed_sq(-0.01, gas), DomainError);
}

TEST_CASE("pressure from partial densities") {
  CHECK(eos_pressure(3.0, 27.0, gas) == Approx(7615135.35).epsilon(1e-12));
  CHECK_THROWS_AS(eos_pressure(-1.0, 2.0, gas), DomainError);
  CHECK_THROWS_AS(eos_pressure(0.0, 0.0, gas), DomainError);
}

TEST_CASE("energy content and its inversion") {
  CHECK(energy_rate(0.1, 100.0, gas) == Approx(5396.0).epsilon(1e-14));
  CHECK(withdrawal_for_energy(0.1, 8000.0, gas) == Approx(148.25796886582654).epsilon(1e-12));
  // fixed withdrawal of 8000 MJ/s at 15% hydrogen
  CHECK(withdrawal_for_energy(0.15, 8000.0, gas) == Approx(135.96193065941534).epsilon(1e-12));
  CHECK_THROWS_AS(energy_rate(0.1, -1.0, gas), DomainError);
}

TEST_CASE("slack density from pressure") {
  const MixtureState s = state_from_pressure(4.337e6, 0.1, gas);
  CHECK(s.rho() == Approx(17.08571076152967).epsilon(1e-12));
  CHECK(s.rho_h2 / s.rho() == Approx(0.1).epsilon(1e-14));
  CHECK(eos_pressure(s.rho_h2, s.rho_ng, gas) == Approx(4.337e6).epsilon(1e-13));
  CHECK_THROWS_AS(state_from_pressure(0.0, 0.1, gas), DomainError);
}

TEST_CASE("compressor work constant and friction resistance") {
  CHECK(compressor_work_constant(1.31, 0.505, 288.7) == Approx(692761.2374321303).epsilon(1e-12));
  CHECK(pipe_beta(0.01, 10000.0, 0.9144, 1.0 / 300.0) ==
        Approx(6.07562943520949e-4).epsilon(1e-12));
  CHECK_THROWS_AS(compressor_work_constant(1.0, 0.505, 288.7), DomainError);
  CHECK_THROWS_AS(pipe_beta(0.01, 0.0, 0.9144, 0.01), DomainError);
}

TEST_CASE("nondimensional scales") {
  const NondimScales s = nondim_scales(1000.0, 1e6, 1.0 / 300.0, gas);
  CHECK(s.a0 == Approx(649.8174051223929).epsilon(1e-13));
  CHECK(s.rho0 == Approx(2.3681942419441016).epsilon(1e-13));
  CHECK(s.v0 == Approx(2.166058017074643).epsilon(1e-13));
  CHECK(s.flow() == Approx(5.1296461237530275).epsilon(1e-13));
  CHECK(s.kappa == Approx(s.v0 / 1000.0).epsilon(1e-15));
  CHECK_THROWS_AS(nondim_scales(0.0, 1e6, 0.01, gas), DomainError);
}

TEST_CASE("gas constants must be ordered") {
  GasConstants bad = gas;
  bad.a_h2 = 300.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = gas;
  bad.r_h2 = 10.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("property: pressure from densities equals sound speed times total density") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int k = 0; k < 1000; ++k) {
    const double rh = u(rng);
    const double rn = u(rng) + 1e-3;
    const double p = eos_pressure(rh, rn, gas);
    const double q = mixture_sound_speed_sq(mass_fraction(rh, rn), gas) * (rh + rn);
    REQUIRE(std::abs(p - q) <= 1e-12 * p);
  }
}

TEST_CASE("property: partial pressures add") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.1, 40.0);
  for (int k = 0; k < 500; ++k) {
    const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    const double lhs = eos_pressure(a + c, b + d, gas);
    const double rhs = eos_pressure(a, b, gas) + eos_pressure(c, d, gas);
    REQUIRE(std::abs(lhs - rhs) <= 1e-12 * lhs);
    // linear in each partial density
    REQUIRE(std::abs(eos_pressure(2 * a, b, gas) - eos_pressure(a, b, gas) - gas.a_h2 * gas.a_h2 * a) <=
            1e-12 * lhs);
  }
}

TEST_CASE("property: energy grows with hydrogen content at fixed flow") {
  double prev = -1.0;
  for (int k = 0; k <= 100; ++k) {
    const double e = energy_rate(k / 100.0, 120.0, gas);
    REQUIRE(e > prev);
    prev = e;
  }
}

TEST_CASE("property: halving the Mach number quarters the friction resistance") {
  for (double m : {0.01, 1.0 / 300.0, 1e-4}) {
    const double full = pipe_beta(0.012, 7300.0, 0.6, m);
    CHECK(pipe_beta(0.012, 7300.0, 0.6, m / 2) == Approx(full / 4).epsilon(1e-14));
  }
}

TEST_CASE("state built from densities is self consistent") {
  const MixtureState s = make_state(1.7, 15.3, gas);
  CHECK(s.eta == Approx(0.1).epsilon(1e-14));
  CHECK(s.a2 * s.rho() == Approx(s.p).epsilon(1e-13));
}
