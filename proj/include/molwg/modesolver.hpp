#pragma once

// Semi-vectorial finite-difference eigenmode solver for dielectric waveguide
// cross-sections. Coordinates: x lateral, y vertical (up), z along the guide.
// Lengths in nanometers.

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <ostream>
#include <vector>

namespace molwg::modes {

using cd = std::complex<double>;
using Vec3c = std::array<cd, 3>;

struct Rect {
  double n = 1.0;
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
};

/// Ridge-on-substrate geometry with an optional conformal cover film.
///
/// Substrate fills y < 0, the ridge spans |x| <= width/2, 0 <= y <= thickness,
/// and the film (thickness h) coats the substrate and wraps the ridge top and
/// sidewalls. Everything else is cover medium.
struct RidgeGeometry {
  double ridge_width_nm = 500.0;
  double ridge_thickness_nm = 175.0;
  double film_thickness_nm = 100.0;
  double n_substrate = 1.51;
  double n_core = 2.0;
  double n_film = 1.8;
  double n_cover = 1.0;
  double margin_side_nm = 1500.0;
  double margin_bottom_nm = 1500.0;
  double margin_top_nm = 1000.0;
};

/// Index map painted from rectangles over a bounded window (later rectangles win).
class CrossSection {
 public:
  CrossSection(double x0, double x1, double y0, double y1, double background_index);

  static CrossSection ridge(const RidgeGeometry& g);

  void add(const Rect& r);
  double index_at(double x, double y) const;

  double x0() const { return x0_; }
  double x1() const { return x1_; }
  double y0() const { return y0_; }
  double y1() const { return y1_; }
  double max_index() const;
  const std::vector<Rect>& rects() const { return rects_; }
  double background() const { return background_; }

 private:
  double x0_, x1_, y0_, y1_;
  double background_;
  std::vector<Rect> rects_;
};

/// Uniform grid of unknowns. Node (i, j) sits at (x0 + (i+1) dx, y0 + (j+1) dy);
/// the window edges x0, x0 + (nx+1) dx, ... carry the zero-field walls.
struct Grid {
  double x0 = 0.0, y0 = 0.0;
  double dx = 10.0, dy = 10.0;
  std::size_t nx = 0, ny = 0;

  double x(std::size_t i) const { return x0 + static_cast<double>(i + 1) * dx; }
  double y(std::size_t j) const { return y0 + static_cast<double>(j + 1) * dy; }
  std::size_t index(std::size_t i, std::size_t j) const { return j * nx + i; }
  std::size_t size() const { return nx * ny; }
};

enum class Family { QuasiTE, QuasiTM };

struct ModeField {
  Grid grid;
  std::vector<Vec3c> E;        ///< per node, (Ex, Ey, Ez)
  std::vector<double> eps;     ///< relative permittivity per node
  double n_eff = 0.0;
  double n_g = std::numeric_limits<double>::quiet_NaN();
  double wavelength_nm = 0.0;
  Family family = Family::QuasiTE;
  double boundary_ratio = 0.0;  ///< max |E| on the outermost node ring over max |E|

  const Vec3c& at(std::size_t i, std::size_t j) const { return E[grid.index(i, j)]; }
};

struct SolverOptions {
  double dx_nm = 10.0;
  double dy_nm = 10.0;
  Family family = Family::QuasiTE;
  double tolerance = 1e-12;     ///< relative Ritz residual
  int max_restarts = 30;
  int krylov_dim = 60;
  double confinement = 1e-3;    ///< required boundary_ratio
};

/// Guided modes sorted by descending n_eff. Modes must lie above the cladding
/// threshold (substrate, cover and the outer columns' slab index) and pass the
/// confinement check. Throws ConvergenceError if the eigen-iteration stalls.
std::vector<ModeField> solve_modes(const CrossSection& cs, double wavelength_nm,
                                   std::size_t max_modes, const SolverOptions& opt = {});

/// Lowest n_eff a mode must exceed to count as guided for this cross-section.
double guided_threshold(const CrossSection& cs, double wavelength_nm, const SolverOptions& opt = {});

/// n_g = n_eff - lambda dn_eff/dlambda by centered difference of the fundamental mode.
double group_index(const CrossSection& cs, double wavelength_nm, double delta_nm,
                   const SolverOptions& opt = {});

/// Same centered difference applied to an arbitrary n_eff(lambda).
double group_index_from(const std::function<double(double)>& n_eff, double wavelength_nm,
                        double delta_nm);

/// Bilinear interpolation of the field; exact at nodes, zero on the walls.
Vec3c field_at(const ModeField& mode, double x, double y);

/// A_eff = (integral eps |E|^2 dA) / |o . E(x, y)|^2 in nm^2; +inf for zero projection.
double effective_area(const ModeField& mode, double x, double y,
                      const std::array<double, 3>& orientation);

/// Integral of eps |E|^2 over the cross-section (1 for solver output).
double energy_norm(const ModeField& mode);

/// Integral of eps E_a . conj(E_b) over the cross-section.
cd overlap(const ModeField& a, const ModeField& b);

/// CSV columns: x_nm,y_nm,ReEx,ImEx,ReEy,ImEy,ReEz,ImEz
void write_mode_csv(std::ostream& os, const ModeField& mode);
/// JSON header: n_eff, n_g, wavelength, grid.
void write_mode_header(std::ostream& os, const ModeField& mode);

}  // namespace molwg::modes
