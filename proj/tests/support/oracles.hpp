#pragma once

// Independent reference implementations used only by the tests.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using cd = std::complex<double>;
constexpr double kPi = 3.14159265358979323846;

/// Fundamental TE mode of an asymmetric slab (core nf, thickness d, claddings ns, nc),
/// by bisection on k d = atan(g/k) + atan(q/k).
inline double slab_te_neff(double wavelength_nm, double d_nm, double ns, double nf, double nc) {
  const double k0 = 2.0 * kPi / wavelength_nm;
  double lo = std::max(ns, nc) + 1e-14, hi = nf - 1e-14;
  auto f = [&](double n) {
    const double k = k0 * std::sqrt(nf * nf - n * n);
    const double g = k0 * std::sqrt(n * n - ns * ns);
    const double q = k0 * std::sqrt(n * n - nc * nc);
    return k * d_nm - std::atan(g / k) - std::atan(q / k);
  };
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (lo + hi);
    (f(m) > 0.0 ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

/// Group index of the slab mode from implicit differentiation of the dispersion
/// relation F(n, k0) = 0: dn/dk0 = -F_k0 / F_n and n_g = n + k0 dn/dk0.
inline double slab_te_group_index(double wavelength_nm, double d_nm, double ns, double nf, double nc) {
  const double n = slab_te_neff(wavelength_nm, d_nm, ns, nf, nc);
  const double k0 = 2.0 * kPi / wavelength_nm;
  const double a = std::sqrt(nf * nf - n * n), b = std::sqrt(n * n - ns * ns),
               c = std::sqrt(n * n - nc * nc);
  // F = k0 a d - atan(b/a) - atan(c/a); atan terms depend on n only.
  const double F_k0 = a * d_nm;
  const double da = -n / a, db = n / b, dc = n / c;
  auto datan = [](double num, double den, double dnum, double dden) {
    return (dnum * den - num * dden) / (den * den + num * num);
  };
  const double F_n = k0 * d_nm * da - datan(b, a, db, da) - datan(c, a, dc, da);
  const double dn_dk0 = -F_k0 / F_n;
  return n + k0 * dn_dk0;
}

inline cd kz(double n, double kx, double k0) {
  cd v = std::sqrt(cd(n * n * k0 * k0 - kx * kx, 0.0));
  if (v.imag() < 0.0) v = -v;
  return v;
}

/// TE reflection for the tangential electric field.
inline cd fresnel_te(double n1, double n2, double kx, double k0) {
  const cd a = kz(n1, kx, k0), b = kz(n2, kx, k0);
  return (a - b) / (a + b);
}

/// TM reflection for the tangential magnetic field.
inline cd fresnel_tm(double n1, double n2, double kx, double k0) {
  const cd a = kz(n1, kx, k0), b = kz(n2, kx, k0);
  return (n2 * n2 * a - n1 * n1 * b) / (n2 * n2 * a + n1 * n1 * b);
}

/// Airy reflection of a single film (index nf, thickness d) between n1 and n3,
/// referenced at the n1/nf interface.
inline cd airy(double n1, double nf, double d_nm, double n3, double kx, double k0, bool te) {
  const cd r12 = te ? fresnel_te(n1, nf, kx, k0) : fresnel_tm(n1, nf, kx, k0);
  const cd r23 = te ? fresnel_te(nf, n3, kx, k0) : fresnel_tm(nf, n3, kx, k0);
  const cd ph = std::exp(cd(0.0, 2.0) * kz(nf, kx, k0) * d_nm);
  return (r12 + r23 * ph) / (1.0 + r12 * r23 * ph);
}

/// Decay rate of a dipole in medium n1 at distance z0 from a half-space n2,
/// relative to the unbounded medium n1. Direct quadrature of the one-interface
/// Sommerfeld integrals, split into propagating (s = sin t) and evanescent
/// (s = sqrt(1 + u^2)) parts; s is the in-plane wavevector over n1 k0.
inline double half_space_rate(double n1, double n2, double z0_nm, double wavelength_nm,
                              bool parallel) {
  using boost::math::quadrature::gauss_kronrod;
  const double k1 = 2.0 * kPi * n1 / wavelength_nm;
  const double m = n2 / n1;
  auto coeffs = [&](cd sz1, double s) {
    cd sz2 = std::sqrt(cd(m * m - s * s, 0.0));
    if (sz2.imag() < 0.0) sz2 = -sz2;
    const cd rs = (sz1 - sz2) / (sz1 + sz2);
    const cd rp = (m * m * sz1 - sz2) / (m * m * sz1 + sz2);
    return std::pair<cd, cd>{rs, rp};
  };
  auto prop = [&](double t) {
    const double s = std::sin(t), c = std::cos(t);
    const auto [rs, rp] = coeffs(cd(c, 0.0), s);
    const cd ph = std::exp(cd(0.0, 2.0 * k1 * z0_nm * c));
    if (parallel) return (0.75 * s * (rs - c * c * rp) * ph).real();
    return (1.5 * s * s * s * rp * ph).real();
  };
  auto evan = [&](double u) {
    const double s = std::sqrt(1.0 + u * u);
    const cd sz1(0.0, u);
    const auto [rs, rp] = coeffs(sz1, s);
    const double ph = std::exp(-2.0 * k1 * z0_nm * u);
    // (s/sz1) ds = -i du and (s^3/sz1) ds = -i s^2 du.
    if (parallel) return (0.75 * cd(0.0, -1.0) * (rs - sz1 * sz1 * rp) * ph).real();
    return (1.5 * cd(0.0, -1.0) * s * s * rp * ph).real();
  };
  double total = 1.0 + gauss_kronrod<double, 61>::integrate(prop, 0.0, kPi / 2.0, 15, 1e-13);
  const double u_kink = m > 1.0 ? std::sqrt(m * m - 1.0) : 0.0;
  const double u_end = 40.0 / (2.0 * k1 * z0_nm);
  if (u_kink > 0.0) total += gauss_kronrod<double, 61>::integrate(evan, 0.0, u_kink, 15, 1e-13);
  total += gauss_kronrod<double, 61>::integrate(evan, u_kink, u_kink + u_end, 15, 1e-13);
  return total;
}

/// Monte Carlo standard deviation of f over independent Gaussian inputs.
inline double mc_sigma(const std::function<double(const std::vector<double>&)>& f,
                       const std::vector<double>& mean, const std::vector<double>& sigma,
                       int samples, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(mean.size());
  double s1 = 0.0, s2 = 0.0;
  for (int k = 0; k < samples; ++k) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = mean[i] + sigma[i] * normal(rng);
    const double v = f(x);
    s1 += v;
    s2 += v * v;
  }
  const double mu = s1 / samples;
  return std::sqrt(std::max(0.0, s2 / samples - mu * mu));
}

}  // namespace oracle
