#include "molwg/modesolver.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "molwg/error.hpp"

namespace molwg::modes {

namespace {

constexpr double kPi = std::numbers::pi;

using SpMat = Eigen::SparseMatrix<double>;

class Factorization {
 public:
  bool compute(const SpMat& a) {
    lu_.compute(a);
    return lu_.info() == Eigen::Success;
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return lu_.solve(b); }

 private:
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
};

// Walls sit on multiples of the step from the origin, clipped to the window, so
// the lattice does not shift when the window grows.
Grid make_grid(const CrossSection& cs, const SolverOptions& opt) {
  if (!(opt.dx_nm > 0.0 && opt.dy_nm > 0.0)) throw StructuralError("grid steps must be > 0");
  auto snap = [](double lo, double hi, double d) {
    const double a = std::ceil(lo / d - 1e-9), b = std::floor(hi / d + 1e-9);
    return std::pair<double, long>{a * d, static_cast<long>(b - a)};
  };
  const auto [x0, cells_x] = snap(cs.x0(), cs.x1(), opt.dx_nm);
  const auto [y0, cells_y] = snap(cs.y0(), cs.y1(), opt.dy_nm);
  if (cells_x < 3 || cells_y < 3) throw StructuralError("window too small for the grid step");
  Grid g;
  g.x0 = x0;
  g.y0 = y0;
  g.dx = opt.dx_nm;
  g.dy = opt.dy_nm;
  g.nx = static_cast<std::size_t>(cells_x - 1);
  g.ny = static_cast<std::size_t>(cells_y - 1);
  return g;
}

// Cell-averaged permittivity from an 8x8 subsample of the index map.
std::vector<double> sample_permittivity(const CrossSection& cs, const Grid& g) {
  constexpr int kSub = 8;
  std::vector<double> eps(g.size());
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      double acc = 0.0;
      for (int a = 0; a < kSub; ++a)
        for (int b = 0; b < kSub; ++b) {
          const double x = g.x(i) + ((a + 0.5) / kSub - 0.5) * g.dx;
          const double y = g.y(j) + ((b + 0.5) / kSub - 0.5) * g.dy;
          const double n = cs.index_at(x, y);
          acc += n * n;
        }
      eps[g.index(i, j)] = acc / (kSub * kSub);
    }
  return eps;
}

// Semi-vectorial operator. The dominant field component is normal to material
// walls along `normal` (x for quasi-TE, y for quasi-TM) and is discretized in
// flux form d/dn (1/eps) d/dn (eps E); the other direction is a plain Laplacian.
SpMat assemble(const Grid& g, const std::vector<double>& eps, double k0, Family fam) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(g.size() * 5);
  const double ix2 = 1.0 / (g.dx * g.dx);
  const double iy2 = 1.0 / (g.dy * g.dy);
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      const auto p = static_cast<int>(g.index(i, j));
      const double e = eps[p];
      double diag = k0 * k0 * e;
      auto flux = [&](bool has_next, std::size_t q_next, bool has_prev, std::size_t q_prev,
                      double inv2) {
        const double e_next = has_next ? eps[q_next] : e;
        const double e_prev = has_prev ? eps[q_prev] : e;
        const double f_next = 0.5 * (e + e_next);
        const double f_prev = 0.5 * (e + e_prev);
        if (has_next) t.emplace_back(p, static_cast<int>(q_next), inv2 * e_next / f_next);
        if (has_prev) t.emplace_back(p, static_cast<int>(q_prev), inv2 * e_prev / f_prev);
        diag -= inv2 * e * (1.0 / f_next + 1.0 / f_prev);
      };
      auto plain = [&](bool has_next, std::size_t q_next, bool has_prev, std::size_t q_prev,
                       double inv2) {
        if (has_next) t.emplace_back(p, static_cast<int>(q_next), inv2);
        if (has_prev) t.emplace_back(p, static_cast<int>(q_prev), inv2);
        diag -= 2.0 * inv2;
      };
      const bool xn = i + 1 < g.nx, xp = i > 0, yn = j + 1 < g.ny, yp = j > 0;
      const std::size_t qxn = xn ? g.index(i + 1, j) : 0, qxp = xp ? g.index(i - 1, j) : 0;
      const std::size_t qyn = yn ? g.index(i, j + 1) : 0, qyp = yp ? g.index(i, j - 1) : 0;
      if (fam == Family::QuasiTE) {
        flux(xn, qxn, xp, qxp, ix2);
        plain(yn, qyn, yp, qyp, iy2);
      } else {
        plain(xn, qxn, xp, qxp, ix2);
        flux(yn, qyn, yp, qyp, iy2);
      }
      t.emplace_back(p, p, diag);
    }
  SpMat a(static_cast<int>(g.size()), static_cast<int>(g.size()));
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

// Largest propagation constant squared of the 1D vertical (quasi-TE) or
// lateral (quasi-TM) slab formed by a single grid column/row of the window edge.
double edge_slab_max(const std::vector<double>& eps, const Grid& g, double k0, Family fam,
                     bool first) {
  // The slab of the outer column: vertical for both families. Its operator is
  // the restriction of the 2D operator to that column without x-coupling.
  const std::size_t i = first ? 0 : g.nx - 1;
  const auto n = static_cast<Eigen::Index>(g.ny);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  const double iy2 = 1.0 / (g.dy * g.dy);
  for (std::size_t j = 0; j < g.ny; ++j) {
    const double e = eps[g.index(i, j)];
    const auto r = static_cast<Eigen::Index>(j);
    m(r, r) = k0 * k0 * e;
    if (fam == Family::QuasiTE) {
      m(r, r) -= 2.0 * iy2;
      if (j + 1 < g.ny) m(r, r + 1) = iy2;
      if (j > 0) m(r, r - 1) = iy2;
    } else {
      const double en = j + 1 < g.ny ? eps[g.index(i, j + 1)] : e;
      const double ep = j > 0 ? eps[g.index(i, j - 1)] : e;
      const double fn = 0.5 * (e + en), fp = 0.5 * (e + ep);
      if (j + 1 < g.ny) m(r, r + 1) = iy2 * en / fn;
      if (j > 0) m(r, r - 1) = iy2 * ep / fp;
      m(r, r) -= iy2 * e * (1.0 / fn + 1.0 / fp);
    }
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  return es.eigenvalues().real().maxCoeff();
}

double threshold_from(const CrossSection& cs, const Grid& g, const std::vector<double>& eps,
                      double k0, Family fam) {
  double t = std::max(cs.index_at(cs.x0(), cs.y0()), cs.index_at(cs.x0(), cs.y1()));
  t = std::max(t, std::max(cs.index_at(cs.x1(), cs.y0()), cs.index_at(cs.x1(), cs.y1())));
  for (bool first : {true, false}) {
    const double lam = edge_slab_max(eps, g, k0, fam, first);
    if (lam > 0.0) t = std::max(t, std::sqrt(lam) / k0);
  }
  return t;
}

struct Ritz {
  double theta;
  Eigen::VectorXd vec;
  double residual;
};

// Shift-invert Arnoldi with explicit restarts. Returns up to `nev` Ritz pairs
// of (A - sigma)^-1 with the largest |theta|. `tolerance_for` gives the
// residual each Ritz value must reach; values far below the guided threshold
// only need to be resolved well enough to be rejected.
std::vector<Ritz> arnoldi(const Factorization& lu, Eigen::Index n, int nev, const Eigen::VectorXd& start,
                          const std::function<double(double)>& tolerance_for, const SolverOptions& opt,
                          int& iterations) {
  const int m = std::min<Eigen::Index>(std::max(opt.krylov_dim, 2 * nev + 10), n);
  Eigen::VectorXd v0 = start.normalized();
  std::vector<Ritz> out;
  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    Eigen::MatrixXd V(n, m + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    V.col(0) = v0;
    int k = m;
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXd w = lu.solve(V.col(j));
      ++iterations;
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i <= j; ++i) {
          const double h = V.col(i).dot(w);
          H(i, j) += h;
          w -= h * V.col(i);
        }
      const double beta = w.norm();
      H(j + 1, j) = beta;
      if (beta < 1e-14 * H.col(j).norm()) {
        k = j + 1;
        break;
      }
      V.col(j + 1) = w / beta;
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(H.topLeftCorner(k, k));
    const Eigen::VectorXcd vals = es.eigenvalues();
    const Eigen::MatrixXcd vecs = es.eigenvectors();
    std::vector<int> order(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return std::abs(vals[a]) > std::abs(vals[b]); });
    out.clear();
    bool converged = true;
    double worst = 0.0;
    const double h_last = k < m ? 0.0 : H(k, k - 1);
    for (int q = 0; q < std::min(nev, k); ++q) {
      const int idx = order[static_cast<std::size_t>(q)];
      Eigen::VectorXcd y = vecs.col(idx);
      y /= y.norm();
      const double res = std::abs(h_last * y[k - 1]) / std::abs(vals[idx]);
      worst = std::max(worst, res);
      if (res > tolerance_for(vals[idx].real())) converged = false;
      Eigen::VectorXd x = V.leftCols(k) * y.real();
      if (x.norm() < 1e-8) x = V.leftCols(k) * y.imag();
      out.push_back({vals[idx].real(), x.normalized(), res});
    }
    if (converged) return out;
    if (restart == opt.max_restarts)
      throw ConvergenceError("shift-invert Arnoldi did not converge", worst, iterations);
    v0 = Eigen::VectorXd::Zero(n);
    for (const auto& r : out) v0 += r.vec;
    v0.normalize();
  }
  return out;
}

ModeField build_mode(const Grid& g, const std::vector<double>& eps, const Eigen::VectorXd& v,
                     double beta, double k0, double wavelength, Family fam) {
  ModeField m;
  m.grid = g;
  m.eps = eps;
  m.wavelength_nm = wavelength;
  m.family = fam;
  m.n_eff = beta / k0;
  m.E.assign(g.size(), Vec3c{0.0, 0.0, 0.0});
  const int dom = fam == Family::QuasiTE ? 0 : 1;
  for (std::size_t p = 0; p < g.size(); ++p) m.E[p][dom] = v[static_cast<Eigen::Index>(p)];
  // Longitudinal component from div(eps E) = 0: Ez = i d(eps E_dom)/d(dom) / (beta eps).
  const cd i_unit(0.0, 1.0);
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      auto d_at = [&](long ii, long jj) -> double {
        if (ii < 0 || jj < 0 || ii >= static_cast<long>(g.nx) || jj >= static_cast<long>(g.ny))
          return 0.0;
        const std::size_t q = g.index(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj));
        return eps[q] * m.E[q][dom].real();
      };
      const long li = static_cast<long>(i), lj = static_cast<long>(j);
      const double deriv = fam == Family::QuasiTE
                               ? (d_at(li + 1, lj) - d_at(li - 1, lj)) / (2.0 * g.dx)
                               : (d_at(li, lj + 1) - d_at(li, lj - 1)) / (2.0 * g.dy);
      const std::size_t p = g.index(i, j);
      m.E[p][2] = i_unit * deriv / (beta * eps[p]);
    }
  // Normalize and fix the sign so the dominant component peaks positive.
  const double norm = energy_norm(m);
  double peak = 0.0;
  double sign = 1.0;
  for (const auto& e : m.E)
    if (std::abs(e[dom]) > peak) {
      peak = std::abs(e[dom]);
      sign = e[dom].real() >= 0.0 ? 1.0 : -1.0;
    }
  const double scale = sign / std::sqrt(norm);
  for (auto& e : m.E)
    for (auto& c : e) c *= scale;
  double edge = 0.0, top = 0.0;
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      const auto& e = m.E[g.index(i, j)];
      const double a = std::sqrt(std::norm(e[0]) + std::norm(e[1]) + std::norm(e[2]));
      top = std::max(top, a);
      if (i == 0 || j == 0 || i + 1 == g.nx || j + 1 == g.ny) edge = std::max(edge, a);
    }
  m.boundary_ratio = top > 0.0 ? edge / top : 0.0;
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

CrossSection::CrossSection(double x0, double x1, double y0, double y1, double background_index)
    : x0_(x0), x1_(x1), y0_(y0), y1_(y1), background_(background_index) {
  if (!(x1 > x0 && y1 > y0)) throw StructuralError("cross-section window is empty");
  if (!(background_index >= 1.0)) throw StructuralError("indices must be >= 1");
}

CrossSection CrossSection::ridge(const RidgeGeometry& g) {
  if (!(g.ridge_width_nm > 0.0 && g.ridge_thickness_nm > 0.0 && g.film_thickness_nm >= 0.0))
    throw StructuralError("ridge dimensions must be positive");
  if (g.margin_side_nm < 1000.0 || g.margin_top_nm < 1000.0 || g.margin_bottom_nm < 1000.0)
    throw StructuralError("window margins must be at least 1 um around the ridge");
  const double half = 0.5 * g.ridge_width_nm;
  const double h = g.film_thickness_nm;
  const double x0 = -half - h - g.margin_side_nm;
  const double x1 = half + h + g.margin_side_nm;
  const double y0 = -g.margin_bottom_nm;
  const double y1 = g.ridge_thickness_nm + h + g.margin_top_nm;
  CrossSection cs(x0, x1, y0, y1, g.n_cover);
  cs.add({g.n_substrate, x0, x1, y0, 0.0});
  if (h > 0.0) {
    cs.add({g.n_film, x0, x1, 0.0, h});
    cs.add({g.n_film, -half - h, half + h, 0.0, g.ridge_thickness_nm + h});
  }
  cs.add({g.n_core, -half, half, 0.0, g.ridge_thickness_nm});
  return cs;
}

void CrossSection::add(const Rect& r) {
  if (!(r.n >= 1.0)) throw StructuralError("indices must be >= 1");
  if (!(r.x1 > r.x0 && r.y1 > r.y0)) throw StructuralError("empty rectangle");
  rects_.push_back(r);
}

double CrossSection::index_at(double x, double y) const {
  for (auto it = rects_.rbegin(); it != rects_.rend(); ++it)
    if (x >= it->x0 && x <= it->x1 && y >= it->y0 && y <= it->y1) return it->n;
  return background_;
}

double CrossSection::max_index() const {
  double m = background_;
  for (const auto& r : rects_) m = std::max(m, r.n);
  return m;
}

double guided_threshold(const CrossSection& cs, double wavelength_nm, const SolverOptions& opt) {
  const Grid g = make_grid(cs, opt);
  const auto eps = sample_permittivity(cs, g);
  return threshold_from(cs, g, eps, 2.0 * kPi / wavelength_nm, opt.family);
}

std::vector<ModeField> solve_modes(const CrossSection& cs, double wavelength_nm,
                                   std::size_t max_modes, const SolverOptions& opt) {
  if (!(wavelength_nm > 0.0)) throw DomainError("wavelength must be > 0");
  if (max_modes == 0) return {};
  const Grid g = make_grid(cs, opt);
  const auto eps = sample_permittivity(cs, g);
  const double k0 = 2.0 * kPi / wavelength_nm;
  const double threshold = threshold_from(cs, g, eps, k0, opt.family);
  const double eps_max = *std::max_element(eps.begin(), eps.end());
  const double sigma = k0 * k0 * eps_max;

  SpMat a = assemble(g, eps, k0, opt.family);
  SpMat shifted = a;
  for (int k = 0; k < shifted.rows(); ++k) shifted.coeffRef(k, k) -= sigma;
  shifted.makeCompressed();
  Factorization lu;
  if (!lu.compute(shifted)) throw ConvergenceError("sparse LU factorization failed", 0.0, 0);

  // Deterministic start: weight by permittivity excess so the core dominates.
  const double eps_min = *std::min_element(eps.begin(), eps.end());
  Eigen::VectorXd start(static_cast<Eigen::Index>(g.size()));
  for (std::size_t p = 0; p < g.size(); ++p)
    start[static_cast<Eigen::Index>(p)] = 1e-3 + (eps[p] - eps_min);

  int iterations = 0;
  const int nev = static_cast<int>(max_modes) + 2;
  const double theta_min = 1.0 / (k0 * k0 * threshold * threshold - sigma);
  const auto tolerance_for = [&](double theta) {
    // Eigenvalues below the shift have theta < 0; guided ones have theta < theta_min.
    // Unguided values only need a residual small against their gap to the threshold.
    if (theta >= theta_min) return std::clamp(0.1 * (theta - theta_min) / std::abs(theta),
                                              opt.tolerance, 1e-3);
    return opt.tolerance;
  };
  const auto ritz =
      arnoldi(lu, static_cast<Eigen::Index>(g.size()), nev, start, tolerance_for, opt, iterations);

  std::vector<ModeField> modes;
  for (const auto& r : ritz) {
    const double lambda = sigma + 1.0 / r.theta;
    if (lambda <= 0.0) continue;
    const double n_eff = std::sqrt(lambda) / k0;
    if (n_eff <= threshold) continue;
    ModeField m = build_mode(g, eps, r.vec, std::sqrt(lambda), k0, wavelength_nm, opt.family);
    if (m.boundary_ratio > opt.confinement) continue;
    modes.push_back(std::move(m));
  }
  std::sort(modes.begin(), modes.end(),
            [](const ModeField& a, const ModeField& b) { return a.n_eff > b.n_eff; });
  if (modes.size() > max_modes) modes.resize(max_modes);
  return modes;
}

double group_index_from(const std::function<double(double)>& n_eff, double wavelength_nm,
                        double delta_nm) {
  if (!(delta_nm >= 0.1 && delta_nm <= 5.0)) throw DomainError("delta must lie in [0.1, 5] nm");
  const double slope = (n_eff(wavelength_nm + delta_nm) - n_eff(wavelength_nm - delta_nm)) /
                       (2.0 * delta_nm);
  return n_eff(wavelength_nm) - wavelength_nm * slope;
}

double group_index(const CrossSection& cs, double wavelength_nm, double delta_nm,
                   const SolverOptions& opt) {
  auto fundamental = [&](double lam) {
    const auto m = solve_modes(cs, lam, 1, opt);
    if (m.empty())
      throw DomainError("guided mode disappears at " + std::to_string(lam) +
                        " nm; reduce delta");
    return m.front().n_eff;
  };
  return group_index_from(fundamental, wavelength_nm, delta_nm);
}

Vec3c field_at(const ModeField& mode, double x, double y) {
  const Grid& g = mode.grid;
  const double fx = (x - g.x0) / g.dx - 1.0;  // fractional node index; walls at -1 and nx
  const double fy = (y - g.y0) / g.dy - 1.0;
  const double eps = 1e-9;
  if (fx < -1.0 - eps || fy < -1.0 - eps || fx > static_cast<double>(g.nx) + eps ||
      fy > static_cast<double>(g.ny) + eps)
    throw DomainError("field_at: point outside the mode window");
  auto node = [&](long i, long j) -> Vec3c {
    if (i < 0 || j < 0 || i >= static_cast<long>(g.nx) || j >= static_cast<long>(g.ny))
      return {0.0, 0.0, 0.0};
    return mode.E[g.index(static_cast<std::size_t>(i), static_cast<std::size_t>(j))];
  };
  const double cx = std::clamp(fx, -1.0, static_cast<double>(g.nx));
  const double cy = std::clamp(fy, -1.0, static_cast<double>(g.ny));
  long i0 = static_cast<long>(std::floor(cx));
  long j0 = static_cast<long>(std::floor(cy));
  i0 = std::min(i0, static_cast<long>(g.nx) - 1);
  j0 = std::min(j0, static_cast<long>(g.ny) - 1);
  const double tx = cx - static_cast<double>(i0);
  const double ty = cy - static_cast<double>(j0);
  const Vec3c a = node(i0, j0), b = node(i0 + 1, j0), c = node(i0, j0 + 1), d = node(i0 + 1, j0 + 1);
  Vec3c out;
  for (int k = 0; k < 3; ++k)
    out[k] = (1 - tx) * (1 - ty) * a[k] + tx * (1 - ty) * b[k] + (1 - tx) * ty * c[k] +
             tx * ty * d[k];
  return out;
}

double energy_norm(const ModeField& mode) {
  double s = 0.0;
  for (std::size_t p = 0; p < mode.E.size(); ++p) {
    const auto& e = mode.E[p];
    s += mode.eps[p] * (std::norm(e[0]) + std::norm(e[1]) + std::norm(e[2]));
  }
  return s * mode.grid.dx * mode.grid.dy;
}

cd overlap(const ModeField& a, const ModeField& b) {
  if (a.E.size() != b.E.size()) throw StructuralError("overlap: modes on different grids");
  cd s = 0.0;
  for (std::size_t p = 0; p < a.E.size(); ++p)
    for (int k = 0; k < 3; ++k) s += a.eps[p] * a.E[p][k] * std::conj(b.E[p][k]);
  return s * a.grid.dx * a.grid.dy;
}

double effective_area(const ModeField& mode, double x, double y,
                      const std::array<double, 3>& orientation) {
  const Vec3c e = field_at(mode, x, y);
  const cd proj = orientation[0] * e[0] + orientation[1] * e[1] + orientation[2] * e[2];
  const double p2 = std::norm(proj);
  if (p2 == 0.0) return std::numeric_limits<double>::infinity();
  return energy_norm(mode) / p2;
}

void write_mode_csv(std::ostream& os, const ModeField& mode) {
  os << "x_nm,y_nm,ReEx,ImEx,ReEy,ImEy,ReEz,ImEz\n";
  char buf[256];
  const Grid& g = mode.grid;
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      const auto& e = mode.at(i, j);
      std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e\n", g.x(i), g.y(j),
                    e[0].real(), e[0].imag(), e[1].real(), e[1].imag(), e[2].real(), e[2].imag());
      os << buf;
    }
}

void write_mode_header(std::ostream& os, const ModeField& mode) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "{\n  \"n_eff\": %.12f,\n  \"n_g\": %.12f,\n  \"wavelength_nm\": %.6f,\n"
                "  \"family\": \"%s\",\n  \"grid\": {\"x0_nm\": %.6f, \"y0_nm\": %.6f, "
                "\"dx_nm\": %.6f, \"dy_nm\": %.6f, \"nx\": %zu, \"ny\": %zu}\n}\n",
                mode.n_eff, std::isnan(mode.n_g) ? 0.0 : mode.n_g, mode.wavelength_nm,
                mode.family == Family::QuasiTE ? "quasi-TE" : "quasi-TM", mode.grid.x0,
                mode.grid.y0, mode.grid.dx, mode.grid.dy, mode.grid.nx, mode.grid.ny);
  os << buf;
}

}  // namespace molwg::modes
