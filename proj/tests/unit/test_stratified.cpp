#include <gtest/gtest.h>

#include <random>

#include "molwg/error.hpp"
#include "molwg/stratified.hpp"
#include "support/oracles.hpp"

using namespace molwg;
using namespace molwg::stratified;

namespace {

constexpr double kLambda = 785.0;
const double kK0 = 2.0 * oracle::kPi / kLambda;

LayerStack device_stack(double h) { return LayerStack::make(1.0, {{1.8, h}, {2.0, 175.0}}, 1.51); }

DipoleSource dipole_at(std::size_t layer, double depth, std::array<double, 3> o = {1, 0, 0}) {
  return DipoleSource{kLambda, layer, depth, o};
}

LayerStack random_stack(std::mt19937_64& rng, std::size_t& source, double& depth) {
  std::uniform_real_distribution<double> idx(1.0, 2.2), thick(40.0, 400.0), u(0.0, 1.0);
  std::uniform_int_distribution<int> count(1, 4);
  const int n = count(rng);
  std::vector<std::pair<double, double>> interior;
  for (int i = 0; i < n; ++i) interior.emplace_back(idx(rng), thick(rng));
  source = 1 + static_cast<std::size_t>(u(rng) * n);
  if (source > static_cast<std::size_t>(n)) source = n;
  depth = (0.05 + 0.9 * u(rng)) * interior[source - 1].second;
  return LayerStack::make(idx(rng), interior, idx(rng));
}

}  // namespace

TEST(LayerStack, RejectsMalformedStacks) {
  EXPECT_THROW(LayerStack({{1.0, kSemiInfinite}}), StructuralError);
  EXPECT_THROW(LayerStack({{1.0, 100.0}, {1.5, kSemiInfinite}}), StructuralError);
  EXPECT_THROW(LayerStack({{1.0, kSemiInfinite}, {1.5, 0.0}, {1.5, kSemiInfinite}}), StructuralError);
  EXPECT_THROW(LayerStack({{0.9, kSemiInfinite}, {1.5, kSemiInfinite}}), StructuralError);
  EXPECT_NO_THROW(device_stack(100.0));
}

TEST(Fresnel, IdenticalMediaAreTransparent) {
  for (double kx : {0.0, 0.5 * 1.8 * kK0, 1.3 * 1.8 * kK0}) {
    for (auto pol : {Polarization::TE, Polarization::TM}) {
      const auto c = fresnel_interface(1.8, 1.8, kx, kLambda, pol);
      EXPECT_NEAR(std::abs(c.r), 0.0, 1e-15);
      EXPECT_NEAR(std::abs(c.t - 1.0), 0.0, 1e-15);
    }
  }
}

TEST(Fresnel, NormalIncidence) {
  const auto c = fresnel_interface(1.0, 2.0, 0.0, kLambda, Polarization::TE);
  EXPECT_NEAR(c.r.real(), -1.0 / 3.0, 1e-15);
  EXPECT_NEAR(c.r.imag(), 0.0, 1e-15);
}

TEST(Fresnel, TotalInternalReflectionMatchesDirectFormula) {
  const double kx = 1.51 * kK0 * std::sin(60.0 * oracle::kPi / 180.0);
  for (auto pol : {Polarization::TE, Polarization::TM}) {
    const auto c = fresnel_interface(1.51, 1.0, kx, kLambda, pol);
    const auto ref = pol == Polarization::TE ? oracle::fresnel_te(1.51, 1.0, kx, kK0)
                                             : oracle::fresnel_tm(1.51, 1.0, kx, kK0);
    EXPECT_NEAR(std::abs(c.r), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(c.r - ref), 0.0, 1e-12);
  }
}

TEST(Fresnel, PropagatingAmplitudesMatchDirectFormula) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> idx(1.0, 2.5), u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double n1 = idx(rng), n2 = idx(rng);
    const double kx = u(rng) * std::min(n1, n2) * kK0;
    EXPECT_NEAR(std::abs(fresnel_interface(n1, n2, kx, kLambda, Polarization::TE).r -
                         oracle::fresnel_te(n1, n2, kx, kK0)),
                0.0, 1e-12);
    EXPECT_NEAR(std::abs(fresnel_interface(n1, n2, kx, kLambda, Polarization::TM).r -
                         oracle::fresnel_tm(n1, n2, kx, kK0)),
                0.0, 1e-12);
  }
}

TEST(Fresnel, EnergyConservationForPropagatingWaves) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> idx(1.0, 2.5), u(0.0, 0.999);
  for (int k = 0; k < 500; ++k) {
    const double n1 = idx(rng), n2 = idx(rng);
    const double kx = u(rng) * std::min(n1, n2) * kK0;
    for (auto pol : {Polarization::TE, Polarization::TM}) {
      const auto c = fresnel_interface(n1, n2, kx, kLambda, pol);
      const double f = flux_factor(n1, n2, kx, kLambda, pol);
      EXPECT_NEAR(std::norm(c.r) + f * std::norm(c.t), 1.0, 1e-12);
      EXPECT_LE(std::abs(c.r), 1.0 + 1e-12);
    }
  }
}

TEST(StackReflection, SingleInterfaceEqualsFresnel) {
  const auto s = LayerStack::make(1.2, {}, 1.9);
  for (double kx : {0.0, 0.7 * kK0, 1.5 * kK0}) {
    for (auto pol : {Polarization::TE, Polarization::TM}) {
      EXPECT_NEAR(std::abs(stack_reflection(s, 0, Side::BelowSource, kx, kLambda, pol) -
                           fresnel_interface(1.2, 1.9, kx, kLambda, pol).r),
                  0.0, 1e-14);
    }
  }
}

TEST(StackReflection, SymmetricFilmMatchesAiry) {
  const double n = 1.45, d = 310.0;
  const auto s = LayerStack::make(n, {{1.8, d}}, n);
  for (double f : {0.0, 0.3, 0.8, 0.99, 1.1}) {
    const double kx = f * n * kK0;
    EXPECT_NEAR(std::abs(stack_reflection(s, 0, Side::BelowSource, kx, kLambda, Polarization::TE) -
                         oracle::airy(n, 1.8, d, n, kx, kK0, true)),
                0.0, 1e-12);
    EXPECT_NEAR(std::abs(stack_reflection(s, 0, Side::BelowSource, kx, kLambda, Polarization::TM) -
                         oracle::airy(n, 1.8, d, n, kx, kK0, false)),
                0.0, 1e-12);
  }
}

TEST(StackReflection, QuarterWaveAntireflection) {
  const auto s = LayerStack::make(1.0, {{1.5, kLambda / (4.0 * 1.5)}}, 2.25);
  EXPECT_NEAR(std::abs(stack_reflection(s, 0, Side::BelowSource, 0.0, kLambda, Polarization::TE)), 0.0,
              1e-12);
}

TEST(StackReflection, OutwardLookingSourceIsStructuralError) {
  const auto s = device_stack(100.0);
  EXPECT_THROW(stack_reflection(s, 0, Side::AboveSource, 0.0, kLambda, Polarization::TE), StructuralError);
  EXPECT_THROW(stack_reflection(s, 7, Side::AboveSource, 0.0, kLambda, Polarization::TE), StructuralError);
}

TEST(Dipole, ValidationRejectsBadSources) {
  const auto s = device_stack(100.0);
  EXPECT_THROW(validate(s, dipole_at(0, 0.0)), StructuralError);
  EXPECT_THROW(validate(s, dipole_at(1, 120.0)), DomainError);
  EXPECT_THROW(validate(s, dipole_at(1, 50.0, {1, 1, 0})), DomainError);
  EXPECT_NO_THROW(validate(s, dipole_at(1, 0.0)));
  EXPECT_NO_THROW(validate(s, dipole_at(1, 100.0)));
}

TEST(DecayRate, UniformStackIsOne) {
  for (auto o : {std::array<double, 3>{1, 0, 0}, {0, 1, 0}}) {
    EXPECT_NEAR(relative_decay_rate(LayerStack::uniform(1.8, 300.0), dipole_at(1, 120.0, o)), 1.0, 1e-6);
  }
}

TEST(DecayRate, SingleInterfaceMatchesDirectIntegration) {
  for (const auto& [n1, n2] : {std::pair{1.0, 1.51}, std::pair{1.8, 1.0}, std::pair{1.51, 2.0}}) {
    const double T = 3000.0;
    const auto s = LayerStack::make(n1, {{n1, T}}, n2);
    for (double z0 : {20.0, 150.0, 600.0, 1700.0}) {
      for (bool par : {true, false}) {
        const auto d = dipole_at(1, T - z0, par ? std::array<double, 3>{1, 0, 0} : std::array<double, 3>{0, 1, 0});
        const double ref = oracle::half_space_rate(n1, n2, z0, kLambda, par);
        EXPECT_NEAR(relative_decay_rate(s, d) / ref, 1.0, 1e-6)
            << "n1=" << n1 << " n2=" << n2 << " z0=" << z0 << " parallel=" << par;
      }
    }
  }
}

TEST(DecayRate, DistanceOscillationDecays) {
  const double T = 6000.0;
  const auto s = LayerStack::make(1.0, {{1.0, T}}, 1.51);
  auto amp = [&](double from, double to) {
    double lo = 1e9, hi = -1e9;
    for (double z = from; z <= to; z += kLambda / 40.0) {
      const double r = relative_decay_rate(s, dipole_at(1, T - z));
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    EXPECT_LT(lo, 1.0);
    EXPECT_GT(hi, 1.0);
    return hi - lo;
  };
  EXPECT_GT(amp(kLambda, 2.0 * kLambda), amp(4.0 * kLambda, 5.0 * kLambda));
}

TEST(DecayRate, OrientationAnisotropy) {
  const auto s = device_stack(100.0);
  const double par = relative_decay_rate(s, dipole_at(1, 50.0, {1, 0, 0}));
  const double perp = relative_decay_rate(s, dipole_at(1, 50.0, {0, 1, 0}));
  EXPECT_GT(std::abs(par - perp), 1e-3);
}

TEST(DecayRate, ReciprocityUnderFlip) {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 10; ++k) {
    std::size_t src;
    double depth;
    const auto s = random_stack(rng, src, depth);
    const auto f = s.flipped();
    const std::size_t fsrc = s.size() - 1 - src;
    const double fdepth = s.thickness(src) - depth;
    for (auto o : {std::array<double, 3>{1, 0, 0}, {0, 1, 0}}) {
      EXPECT_NEAR(relative_decay_rate(s, dipole_at(src, depth, o)) /
                      relative_decay_rate(f, dipole_at(fsrc, fdepth, o)),
                  1.0, 1e-6);
    }
  }
}

TEST(DecayRate, ScaleInvariance) {
  const auto s = device_stack(100.0);
  const auto d = dipole_at(1, 90.0);
  auto d2 = d;
  d2.wavelength_nm *= 2.5;
  d2.depth_nm *= 2.5;
  EXPECT_NEAR(relative_decay_rate(s, d), relative_decay_rate(s.scaled(2.5), d2), 1e-8);
  EXPECT_NEAR(collection_efficiency(s, d, 0.7), collection_efficiency(s.scaled(2.5), d2, 0.7), 1e-8);
}

TEST(RadiationPattern, UniformStackIsDipolePattern) {
  const auto s = LayerStack::uniform(1.0, 500.0);
  const auto d = dipole_at(1, 250.0);
  for (double th : {0.0, 0.3, 0.9, 1.4}) {
    for (double ph : {0.0, 0.7, 2.0, 4.5}) {
      const double sin2 = 1.0 - std::pow(std::sin(th) * std::cos(ph), 2);
      const double ref = 3.0 / (8.0 * oracle::kPi) * sin2;
      EXPECT_NEAR(power_per_sr(s, d, Hemisphere::Up, th, ph), ref, 1e-10);
      EXPECT_NEAR(power_per_sr(s, d, Hemisphere::Down, th, ph), ref, 1e-10);
    }
  }
  Options coarse;
  coarse.theta_step_deg = 0.5;
  coarse.phi_step_deg = 1.0;
  const auto [up, down] = radiation_pattern(s, d, coarse);
  EXPECT_NEAR(up.integrate() + down.integrate(), 1.0, 1e-3);
}

TEST(RadiationPattern, SamplesAreNonNegative) {
  const auto [up, down] = radiation_pattern(device_stack(100.0), dipole_at(1, 90.0));
  for (double v : up.power_per_sr) EXPECT_GE(v, 0.0);
  for (double v : down.power_per_sr) EXPECT_GE(v, 0.0);
}

TEST(RadiationPattern, DeviceStackRadiatesMostlyIntoGlass) {
  const auto b = power_budget(device_stack(100.0), dipole_at(1, 90.0));
  EXPECT_GT(b.down, b.up);
}

TEST(RadiationPattern, HighIndexMirrorAsymmetryAndBookkeeping) {
  const auto s = LayerStack::make(1.0, {{1.0, 100.0}, {3.5, 80.0}, {1.45, 80.0}, {3.5, 80.0}}, 1.45);
  const auto b = power_budget(s, dipole_at(1, 0.0));
  EXPECT_GT(b.up, 2.0 * b.down);
  EXPECT_LT(std::abs(b.residual()), 1e-3);
}

TEST(EnergyBookkeeping, RandomStacks) {
  std::mt19937_64 rng(99);
  for (int k = 0; k < 8; ++k) {
    std::size_t src;
    double depth;
    const auto s = random_stack(rng, src, depth);
    const auto b = power_budget(s, dipole_at(src, depth, {0.6, 0.8, 0.0}));
    EXPECT_LT(std::abs(b.residual()), 1e-3) << "stack " << k;
  }
}

TEST(Collection, UniformLimits) {
  const auto s = LayerStack::uniform(1.0, 200.0);
  for (auto o : {std::array<double, 3>{1, 0, 0}, {0, 1, 0}, {0.6, 0.8, 0.0}}) {
    EXPECT_NEAR(collection_efficiency(s, dipole_at(1, 100.0, o), 1.0), 0.5, 1e-6);
    EXPECT_LT(collection_efficiency(s, dipole_at(1, 100.0, o), 1e-3), 1e-5);
  }
}

TEST(Collection, MonotoneInNumericalAperture) {
  const auto s = device_stack(100.0);
  const auto d = dipole_at(1, 90.0);
  double prev = 0.0;
  for (double na = 0.05; na <= 1.0; na += 0.05) {
    const double eta = collection_efficiency(s, d, na);
    EXPECT_GE(eta, prev - 1e-12);
    EXPECT_LE(eta, 1.0);
    prev = eta;
  }
  EXPECT_THROW(collection_efficiency(s, d, 1.2), DomainError);
  EXPECT_THROW(collection_efficiency(s, d, 0.0), DomainError);
}
