#include "molwg/stratified.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "molwg/error.hpp"
#include "molwg/quadrature.hpp"

namespace molwg::stratified {

namespace {

constexpr double kPi = std::numbers::pi;

// Longitudinal wavenumber with the outgoing/decaying branch: Im > 0, or Re >= 0 on the real axis.
cd kz_branch(cd z) {
  cd r = std::sqrt(z);
  if (r.imag() < 0.0 || (r.imag() == 0.0 && r.real() < 0.0)) r = -r;
  return r;
}

// Source-layer wavenumber choices. The reflected-field integrand is not even in
// the source kz, so contour work around a real-axis point needs the branch that
// is analytic there: principal for a propagating source, decaying otherwise.
enum class SourceBranch { Outgoing, Propagating, Decaying };

cd source_kz(cd z, SourceBranch b) {
  switch (b) {
    case SourceBranch::Propagating:
      return std::sqrt(z);
    case SourceBranch::Decaying:
      return cd(0.0, 1.0) * std::sqrt(-z);
    default:
      return kz_branch(z);
  }
}

cd wave_admittance(double n, cd kz, Polarization pol) {
  return pol == Polarization::TE ? kz : kz / (n * n);
}

struct Mat2 {
  cd a, b, c, d;
  Mat2 operator*(const Mat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  double max_abs() const {
    return std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d)});
  }
};

// Interface matrix relating (forward, backward) amplitudes just before the
// interface to those just after it.
Mat2 interface_matrix(cd eta_a, cd eta_b) {
  const cd inv = 1.0 / (2.0 * eta_a);
  return {(eta_a + eta_b) * inv, (eta_a - eta_b) * inv, (eta_a - eta_b) * inv,
          (eta_a + eta_b) * inv};
}

void check_wavelength(double wavelength_nm) {
  if (!(wavelength_nm > 0.0)) throw DomainError("wavelength must be > 0");
}

// Reflection/transmission seen from the source layer toward one side, at complex
// normalized in-plane wavevector u = kx / (n_source k0), including the phase
// to and from the source plane located `distance` from that interface.
struct SideResponse {
  cd r_te, t_te, r_tm, t_tm;  // t is tangential E (TE) / tangential H (TM) into the outer medium
};

struct Geometry {
  const LayerStack* stack;
  std::size_t layer;
  double k0;
  double n_s;
  double above;  // distance to upper interface
  double below;  // distance to lower interface
  double n_par2;  // in-plane orientation squared (x^2 + z^2)
  double n_perp2;  // along stack normal (y^2)
  double dx, dy, dz;
  SourceBranch branch = SourceBranch::Outgoing;
};

Geometry make_geometry(const LayerStack& stack, const DipoleSource& dp) {
  validate(stack, dp);
  Geometry g{};
  g.stack = &stack;
  g.layer = dp.layer;
  g.k0 = 2.0 * kPi / dp.wavelength_nm;
  g.n_s = stack.index(dp.layer);
  g.above = dp.depth_nm;
  g.below = stack.thickness(dp.layer) - dp.depth_nm;
  g.dx = dp.orientation[0];
  g.dy = dp.orientation[1];
  g.dz = dp.orientation[2];
  g.n_par2 = g.dx * g.dx + g.dz * g.dz;
  g.n_perp2 = g.dy * g.dy;
  return g;
}

Coefficients side_coefficients(const LayerStack& stack, std::size_t src, Side side, cd kx, double k0,
                               Polarization pol, SourceBranch branch = SourceBranch::Outgoing) {
  const std::size_t n = stack.size();
  std::vector<std::size_t> seq;
  if (side == Side::AboveSource) {
    for (std::size_t j = src + 1; j-- > 0;) seq.push_back(j);
  } else {
    for (std::size_t j = src; j < n; ++j) seq.push_back(j);
  }
  auto kz_of = [&](std::size_t j) {
    const double nj = stack.index(j);
    const cd z = cd(nj * nj) - kx * kx / (k0 * k0);
    return k0 * (j == src ? source_kz(z, branch) : kz_branch(z));
  };
  Mat2 m{1.0, 0.0, 0.0, 1.0};
  double log_scale = 0.0;
  cd kz_prev = kz_of(seq[0]);
  cd eta_prev = wave_admittance(stack.index(seq[0]), kz_prev, pol);
  for (std::size_t q = 1; q < seq.size(); ++q) {
    const std::size_t j = seq[q];
    const cd kz = kz_of(j);
    const cd eta = wave_admittance(stack.index(j), kz, pol);
    m = m * interface_matrix(eta_prev, eta);
    if (q + 1 < seq.size()) {
      const cd phase = kz * stack.thickness(j);
      const cd i(0.0, 1.0);
      m = m * Mat2{std::exp(-i * phase), 0.0, 0.0, std::exp(i * phase)};
    }
    const double s = m.max_abs();
    if (s > 1e100 || s < 1e-100) {
      m = Mat2{m.a / s, m.b / s, m.c / s, m.d / s};
      log_scale += std::log(s);
    }
    eta_prev = eta;
    kz_prev = kz;
  }
  Coefficients out;
  out.r = m.c / m.a;
  out.t = std::exp(-log_scale) / m.a;
  return out;
}

SideResponse side_response(const Geometry& g, Side side, cd u) {
  const cd kx = u * g.n_s * g.k0;
  const Coefficients te = side_coefficients(*g.stack, g.layer, side, kx, g.k0, Polarization::TE, g.branch);
  const Coefficients tm = side_coefficients(*g.stack, g.layer, side, kx, g.k0, Polarization::TM, g.branch);
  const cd w = source_kz(1.0 - u * u, g.branch);
  const double dist = side == Side::AboveSource ? g.above : g.below;
  const cd i(0.0, 1.0);
  const cd ph1 = std::exp(i * g.n_s * g.k0 * w * dist);
  const cd ph2 = ph1 * ph1;
  return {te.r * ph2, te.t * ph1, tm.r * ph2, tm.t * ph1};
}

// Integrand of the reflected-field part of the decay rate, in u.
cd decay_integrand(const Geometry& g, cd u) {
  const SideResponse up = side_response(g, Side::AboveSource, u);
  const SideResponse dn = side_response(g, Side::BelowSource, u);
  const cd w = source_kz(1.0 - u * u, g.branch);
  const cd u2 = u * u;
  const cd w2 = w * w;
  const cd ds = 1.0 - up.r_te * dn.r_te;
  const cd dp = 1.0 - up.r_tm * dn.r_tm;
  const cd ss = (up.r_te + dn.r_te + 2.0 * up.r_te * dn.r_te) / ds;
  const cd pp = ((up.r_tm + dn.r_tm) * (u2 * g.n_perp2 - 0.5 * w2 * g.n_par2) +
                 2.0 * up.r_tm * dn.r_tm * (u2 * g.n_perp2 + 0.5 * w2 * g.n_par2)) /
                dp;
  return (u / w) * (0.5 * g.n_par2 * ss + pp);
}

// Real dispersion function of the whole stack at effective index n, for
// n above both outer indices: the mismatch of the decaying top solution after
// integrating the decaying bottom solution upward. Zeros are guided modes.
double dispersion(const LayerStack& stack, double k0, double n, Polarization pol) {
  const std::size_t last = stack.size() - 1;
  auto weight = [&](std::size_t j) {
    return pol == Polarization::TE ? 1.0 : 1.0 / (stack.index(j) * stack.index(j));
  };
  auto q = [&](std::size_t j) { return n * n - stack.index(j) * stack.index(j); };
  double field = 1.0;
  double flux = weight(last) * k0 * std::sqrt(q(last));
  for (std::size_t j = last - 1; j >= 1; --j) {
    const double d = stack.thickness(j), p = weight(j), qj = q(j);
    double c, s_over_k, k_s;
    if (qj > 0.0) {
      const double kappa = k0 * std::sqrt(qj);
      c = std::cosh(kappa * d);
      s_over_k = std::sinh(kappa * d) / kappa;
      k_s = kappa * std::sinh(kappa * d);
    } else if (qj < 0.0) {
      const double k = k0 * std::sqrt(-qj);
      c = std::cos(k * d);
      s_over_k = std::sin(k * d) / k;
      k_s = -k * std::sin(k * d);
    } else {
      c = 1.0;
      s_over_k = d;
      k_s = 0.0;
    }
    const double f2 = c * field + s_over_k / p * flux;
    const double g2 = p * k_s * field + c * flux;
    const double scale = std::max(std::abs(f2), std::abs(g2));
    field = f2 / scale;
    flux = g2 / scale;
  }
  return flux + weight(0) * k0 * std::sqrt(q(0)) * field;
}

// Outgoing-hemisphere bookkeeping at polar angle theta in the outer medium.
struct HemisphereAmplitudes {
  double factor = 0.0;  // (3/8pi) (n_o/n_s)^3 cos^2 / |w|^2
  cd te;                // multiplies a_s
  cd tm_perp;           // multiplies the normal dipole component
  cd tm_par;            // multiplies the in-plane projection c
};

HemisphereAmplitudes hemisphere_amplitudes(const Geometry& g, Hemisphere hemi, double theta) {
  const std::size_t outer = hemi == Hemisphere::Up ? 0 : g.stack->size() - 1;
  const double n_o = g.stack->index(outer);
  const double ratio = n_o / g.n_s;
  const double u = ratio * std::sin(theta);
  const double c = std::cos(theta);
  const cd w = kz_branch(cd((1.0 - ratio * ratio) + ratio * ratio * c * c));
  const SideResponse up = side_response(g, Side::AboveSource, cd(u));
  const SideResponse dn = side_response(g, Side::BelowSource, cd(u));
  const cd ds = 1.0 - up.r_te * dn.r_te;
  const cd dp = 1.0 - up.r_tm * dn.r_tm;
  HemisphereAmplitudes h;
  h.factor = 3.0 / (8.0 * kPi) * ratio * ratio * ratio * c * c / std::norm(w);
  const double e_ratio = g.n_s / n_o;
  if (hemi == Hemisphere::Up) {
    h.te = up.t_te * (1.0 + dn.r_te) / ds;
    h.tm_perp = up.t_tm * e_ratio * u * (1.0 + dn.r_tm) / dp;
    h.tm_par = -up.t_tm * e_ratio * w * (1.0 - dn.r_tm) / dp;
  } else {
    h.te = dn.t_te * (1.0 + up.r_te) / ds;
    h.tm_perp = dn.t_tm * e_ratio * u * (1.0 + up.r_tm) / dp;
    h.tm_par = dn.t_tm * e_ratio * w * (1.0 - up.r_tm) / dp;
  }
  return h;
}

double azimuthal_average(const Geometry& g, const HemisphereAmplitudes& h) {
  return h.factor * (std::norm(h.te) * 0.5 * g.n_par2 + std::norm(h.tm_perp) * g.n_perp2 +
                     std::norm(h.tm_par) * 0.5 * g.n_par2);
}

double directional(const Geometry& g, const HemisphereAmplitudes& h, double phi) {
  const double a_s = g.dx * std::sin(phi) - g.dz * std::cos(phi);
  const double c = g.dx * std::cos(phi) + g.dz * std::sin(phi);
  return h.factor * (std::norm(h.te * a_s) + std::norm(h.tm_perp * g.dy + h.tm_par * c));
}

std::vector<double> angular_breaks(const LayerStack& stack, double n_s, double n_o) {
  std::vector<double> b;
  auto add = [&](double n) {
    if (n < n_o) b.push_back(std::asin(n / n_o));
  };
  add(n_s);
  add(stack.index(0));
  add(stack.index(stack.size() - 1));
  return b;
}

}  // namespace

// ---------------------------------------------------------------------------

LayerStack::LayerStack(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.size() < 2) throw StructuralError("layer stack needs at least 2 layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    if (!(l.index >= 1.0))
      throw StructuralError("layer " + std::to_string(i) + ": index must be >= 1");
    const bool outer = i == 0 || i + 1 == layers_.size();
    if (outer && std::isfinite(l.thickness_nm))
      throw StructuralError("outer layer " + std::to_string(i) + " must be semi-infinite");
    if (!outer && !(l.thickness_nm > 0.0 && std::isfinite(l.thickness_nm)))
      throw StructuralError("interior layer " + std::to_string(i) +
                            " needs a finite thickness > 0");
  }
}

LayerStack LayerStack::make(double top_index,
                            const std::vector<std::pair<double, double>>& interior,
                            double bottom_index) {
  std::vector<Layer> l{{top_index, kSemiInfinite}};
  for (const auto& [n, d] : interior) l.push_back({n, d});
  l.push_back({bottom_index, kSemiInfinite});
  return LayerStack(std::move(l));
}

LayerStack LayerStack::uniform(double n, double thickness_nm) {
  return make(n, {{n, thickness_nm}}, n);
}

double LayerStack::max_index() const {
  double m = 0.0;
  for (const auto& l : layers_) m = std::max(m, l.index);
  return m;
}

LayerStack LayerStack::flipped() const {
  return LayerStack(std::vector<Layer>(layers_.rbegin(), layers_.rend()));
}

LayerStack LayerStack::scaled(double factor) const {
  std::vector<Layer> l = layers_;
  for (auto& x : l) x.thickness_nm *= factor;
  return LayerStack(std::move(l));
}

// ---------------------------------------------------------------------------

Coefficients fresnel_interface(double n1, double n2, double kx, double wavelength_nm,
                               Polarization pol) {
  check_wavelength(wavelength_nm);
  if (!(n1 >= 1.0 && n2 >= 1.0)) throw DomainError("fresnel_interface: indices must be >= 1");
  const double k0 = 2.0 * kPi / wavelength_nm;
  const cd kz1 = k0 * kz_branch(cd(n1 * n1 - kx * kx / (k0 * k0)));
  const cd kz2 = k0 * kz_branch(cd(n2 * n2 - kx * kx / (k0 * k0)));
  const cd e1 = wave_admittance(n1, kz1, pol);
  const cd e2 = wave_admittance(n2, kz2, pol);
  return {(e1 - e2) / (e1 + e2), 2.0 * e1 / (e1 + e2)};
}

double flux_factor(double n1, double n2, double kx, double wavelength_nm, Polarization pol) {
  check_wavelength(wavelength_nm);
  const double k0 = 2.0 * kPi / wavelength_nm;
  const cd kz1 = k0 * kz_branch(cd(n1 * n1 - kx * kx / (k0 * k0)));
  const cd kz2 = k0 * kz_branch(cd(n2 * n2 - kx * kx / (k0 * k0)));
  // TE: Re(kz2)/Re(kz1). TM (magnetic amplitudes): Re(kz2/eps2)/Re(kz1/eps1).
  const cd e1 = wave_admittance(n1, kz1, pol);
  const cd e2 = wave_admittance(n2, kz2, pol);
  if (e1.real() == 0.0) return 0.0;
  return e2.real() / e1.real();
}

Coefficients stack_response(const LayerStack& stack, std::size_t source_layer, Side side, cd kx,
                            double wavelength_nm, Polarization pol) {
  check_wavelength(wavelength_nm);
  if (source_layer >= stack.size())
    throw StructuralError("source layer " + std::to_string(source_layer) + " out of range");
  const bool looks_outward = (side == Side::AboveSource && source_layer == 0) ||
                             (side == Side::BelowSource && source_layer + 1 == stack.size());
  if (looks_outward)
    throw StructuralError("source layer " + std::to_string(source_layer) +
                          " has no interface on the requested side");
  const double k0 = 2.0 * kPi / wavelength_nm;
  return side_coefficients(stack, source_layer, side, kx, k0, pol);
}

cd stack_reflection(const LayerStack& stack, std::size_t source_layer, Side side, double kx,
                    double wavelength_nm, Polarization pol) {
  return stack_response(stack, source_layer, side, cd(kx), wavelength_nm, pol).r;
}

void validate(const LayerStack& stack, const DipoleSource& dp) {
  check_wavelength(dp.wavelength_nm);
  if (!stack.is_interior(dp.layer))
    throw StructuralError("dipole must sit in an interior layer (got layer " +
                          std::to_string(dp.layer) + ")");
  const auto& o = dp.orientation;
  const double norm = std::sqrt(o[0] * o[0] + o[1] * o[1] + o[2] * o[2]);
  if (std::abs(norm - 1.0) > 1e-12) throw DomainError("dipole orientation must be a unit vector");
  if (!(dp.depth_nm >= 0.0 && dp.depth_nm <= stack.thickness(dp.layer)))
    throw DomainError("dipole depth outside its hosting layer");
}

// ---------------------------------------------------------------------------

// The grazing sample is the limit from inside the hemisphere.
constexpr double kGrazing = 0.5 * kPi - 1e-6;

double RadiationPattern::integrate() const {
  const double dth = theta_step_deg * kPi / 180.0;
  const double dph = phi_step_deg * kPi / 180.0;
  double total = 0.0;
  for (std::size_t it = 0; it < n_theta; ++it) {
    double ring = 0.0;
    for (std::size_t ip = 0; ip < n_phi; ++ip) ring += at(it, ip);
    const double wgt = (it == 0 || it + 1 == n_theta) ? 0.5 : 1.0;
    total += wgt * ring * dph * std::sin(theta_deg(it) * kPi / 180.0);
  }
  return total * dth;
}

double power_per_sr(const LayerStack& stack, const DipoleSource& dipole, Hemisphere hemisphere,
                    double theta, double phi) {
  const Geometry g = make_geometry(stack, dipole);
  if (theta > 0.5 * kPi) throw DomainError("polar angle must lie in [0, pi/2]");
  return directional(g, hemisphere_amplitudes(g, hemisphere, std::min(theta, kGrazing)), phi);
}

std::pair<RadiationPattern, RadiationPattern> radiation_pattern(const LayerStack& stack,
                                                                const DipoleSource& dipole,
                                                                const Options& opt) {
  const Geometry g = make_geometry(stack, dipole);
  auto build = [&](Hemisphere hemi) {
    RadiationPattern p;
    p.hemisphere = hemi;
    p.theta_step_deg = opt.theta_step_deg;
    p.phi_step_deg = opt.phi_step_deg;
    p.n_theta = static_cast<std::size_t>(std::lround(90.0 / opt.theta_step_deg)) + 1;
    p.n_phi = static_cast<std::size_t>(std::lround(360.0 / opt.phi_step_deg));
    p.power_per_sr.assign(p.n_theta * p.n_phi, 0.0);
    for (std::size_t it = 0; it < p.n_theta; ++it) {
      const double th = std::min(p.theta_deg(it) * kPi / 180.0, kGrazing);
      const HemisphereAmplitudes h = hemisphere_amplitudes(g, hemi, th);
      for (std::size_t ip = 0; ip < p.n_phi; ++ip)
        p.power_per_sr[it * p.n_phi + ip] = directional(g, h, p.phi_deg(ip) * kPi / 180.0);
    }
    return p;
  };
  return {build(Hemisphere::Up), build(Hemisphere::Down)};
}

double hemisphere_power(const LayerStack& stack, const DipoleSource& dipole,
                        Hemisphere hemisphere, double max_theta, const Options& opt) {
  const Geometry g = make_geometry(stack, dipole);
  const double top = std::min(max_theta, 0.5 * kPi);
  if (top <= 0.0) return 0.0;
  const double n_o = stack.index(hemisphere == Hemisphere::Up ? 0 : stack.size() - 1);
  auto f = [&](double th) {
    return 2.0 * kPi * azimuthal_average(g, hemisphere_amplitudes(g, hemisphere, th)) *
           std::sin(th);
  };
  quad::Options qo;
  qo.rel_tol = opt.rel_tol;
  qo.abs_tol = 1e-15;
  return quad::integrate_real(f, 0.0, top, angular_breaks(stack, g.n_s, n_o), qo);
}

double relative_decay_rate(const LayerStack& stack, const DipoleSource& dipole,
                           const Options& opt) {
  const Geometry g = make_geometry(stack, dipole);
  const double u_end = stack.max_index() / g.n_s * (1.0 + opt.light_line_margin);
  const double depth = opt.contour_depth * u_end;
  // Half-ellipse from 0 to u_end through the lower half plane, passing below
  // the real-axis guided-mode poles.
  auto f = [&](double t) {
    const cd u(0.5 * u_end * (1.0 - std::cos(t)), -depth * std::sin(t));
    const cd du(0.5 * u_end * std::sin(t), -depth * std::cos(t));
    return decay_integrand(g, u) * du;
  };
  quad::Options qo;
  qo.rel_tol = opt.rel_tol;
  qo.abs_tol = 1e-14;
  const quad::Result r = quad::integrate(f, 0.0, kPi, {}, qo);
  // Beyond u_end every medium is evanescent and the integrand is purely
  // imaginary for lossless stacks, so it adds nothing to the rate.
  return 1.0 + 1.5 * r.value.real();
}

double guided_power(const LayerStack& stack, const DipoleSource& dipole, const Options& opt) {
  const Geometry g = make_geometry(stack, dipole);
  const double n_outer = std::max(stack.index(0), stack.index(stack.size() - 1));
  const double n_max = stack.max_index();
  if (n_max <= n_outer) return 0.0;

  // Guided modes are the zeros of the real full-stack dispersion function; they
  // do not depend on where the source sits.
  std::vector<double> roots;
  for (Polarization pol : {Polarization::TE, Polarization::TM}) {
    auto f = [&](double n) { return dispersion(stack, g.k0, n, pol); };
    const int samples = 4000;
    const double a = n_outer, b = n_max, eps = 1e-10 * (b - a);
    double x_prev = a + eps, f_prev = f(x_prev);
    for (int k = 1; k <= samples; ++k) {
      const double x = k == samples ? b - eps : a + (b - a) * k / samples;
      const double fx = f(x);
      if ((f_prev < 0.0) != (fx < 0.0)) {
        double lo = x_prev, hi = x, flo = f_prev;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
          const double mid = 0.5 * (lo + hi);
          const double fm = f(mid);
          if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        roots.push_back(0.5 * (lo + hi) / g.n_s);
      }
      x_prev = x;
      f_prev = fx;
    }
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double x, double y) { return std::abs(x - y) < 1e-12 * y; }),
              roots.end());

  // Residue of the full integrand by a trapezoidal contour integral on a circle
  // well clear of neighbouring poles and of the branch points at u = 1 and the
  // outer light line.
  const double u_lo = n_outer / g.n_s;
  double total = 0.0;
  for (std::size_t k = 0; k < roots.size(); ++k) {
    const double up = roots[k];
    double gap = std::min(std::abs(up - u_lo), std::abs(up - 1.0) > 0.0 ? std::abs(up - 1.0) : 1.0);
    if (k > 0) gap = std::min(gap, up - roots[k - 1]);
    if (k + 1 < roots.size()) gap = std::min(gap, roots[k + 1] - up);
    const double radius = std::min(0.25 * gap, 1e-2 * up);
    const int points = 64;
    Geometry local = g;
    local.branch = up < 1.0 ? SourceBranch::Propagating : SourceBranch::Decaying;
    cd residue = 0.0;
    for (int j = 0; j < points; ++j) {
      const cd e = std::polar(1.0, 2.0 * kPi * (j + 0.5) / points);
      residue += decay_integrand(local, up + radius * e) * e;
    }
    residue *= radius / static_cast<double>(points);
    total += 1.5 * (cd(0.0, kPi) * residue).real();
  }
  (void)opt;
  return total;
}

double collection_efficiency(const LayerStack& stack, const DipoleSource& dipole,
                             double numerical_aperture, const Options& opt, Hemisphere side) {
  const double n_o = stack.index(side == Hemisphere::Up ? 0 : stack.size() - 1);
  if (!(numerical_aperture > 0.0 && numerical_aperture <= n_o))
    throw DomainError("numerical aperture must lie in (0, n_outer]");
  const double cone = std::asin(std::min(1.0, numerical_aperture / n_o));
  return hemisphere_power(stack, dipole, side, cone, opt) / relative_decay_rate(stack, dipole, opt);
}

PowerBudget power_budget(const LayerStack& stack, const DipoleSource& dipole, const Options& opt) {
  PowerBudget b;
  b.up = hemisphere_power(stack, dipole, Hemisphere::Up, 0.5 * kPi, opt);
  b.down = hemisphere_power(stack, dipole, Hemisphere::Down, 0.5 * kPi, opt);
  b.guided = guided_power(stack, dipole, opt);
  b.total = relative_decay_rate(stack, dipole, opt);
  return b;
}

void write_pattern_csv(std::ostream& os, const RadiationPattern& up, const RadiationPattern& down) {
  os << "hemisphere,theta_deg,phi_deg,power_per_sr\n";
  auto dump = [&](const RadiationPattern& p) {
    const char* name = p.hemisphere == Hemisphere::Up ? "up" : "down";
    char buf[128];
    for (std::size_t it = 0; it < p.n_theta; ++it)
      for (std::size_t ip = 0; ip < p.n_phi; ++ip) {
        std::snprintf(buf, sizeof buf, "%s,%.6g,%.6g,%.10e\n", name, p.theta_deg(it),
                      p.phi_deg(ip), p.at(it, ip));
        os << buf;
      }
  };
  dump(up);
  dump(down);
}

}  // namespace molwg::stratified
