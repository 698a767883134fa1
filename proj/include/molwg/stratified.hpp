#pragma once

// Radiation of a point dipole embedded in a planar multilayer.
//
// Layers are ordered top to bottom. Layer 0 and the last layer are
// semi-infinite; "up" means toward layer 0. All lengths are nanometers and
// all media are lossless dielectrics. Rates are normalized to the same dipole
// in an unbounded medium with the index of the hosting layer.

#include <array>
#include <complex>
#include <cstddef>
#include <limits>
#include <ostream>
#include <utility>
#include <vector>

namespace molwg::stratified {

using cd = std::complex<double>;

inline constexpr double kSemiInfinite = std::numeric_limits<double>::infinity();

struct Layer {
  double index = 1.0;
  double thickness_nm = kSemiInfinite;
};

class LayerStack {
 public:
  /// Validates: >= 2 layers, only the outer two semi-infinite, interior
  /// thicknesses > 0, all indices >= 1.
  explicit LayerStack(std::vector<Layer> layers);

  /// Convenience: top medium, interior (index, thickness) pairs, bottom medium.
  static LayerStack make(double top_index, const std::vector<std::pair<double, double>>& interior,
                         double bottom_index);

  /// Uniform medium of index n with one interior layer of the given thickness.
  static LayerStack uniform(double n, double thickness_nm = 1000.0);

  std::size_t size() const { return layers_.size(); }
  const Layer& operator[](std::size_t i) const { return layers_[i]; }
  const std::vector<Layer>& layers() const { return layers_; }
  double index(std::size_t i) const { return layers_[i].index; }
  double thickness(std::size_t i) const { return layers_[i].thickness_nm; }
  double max_index() const;
  bool is_interior(std::size_t i) const { return i > 0 && i + 1 < layers_.size(); }

  /// Same stack upside down.
  LayerStack flipped() const;
  /// All thicknesses multiplied by factor.
  LayerStack scaled(double factor) const;

 private:
  std::vector<Layer> layers_;
};

enum class Polarization { TE, TM };
enum class Side { AboveSource, BelowSource };
enum class Hemisphere { Up, Down };

/// Reflection and transmission amplitudes. TE coefficients refer to the
/// tangential electric field, TM coefficients to the tangential magnetic field.
struct Coefficients {
  cd r;
  cd t;
};

/// Single-interface Fresnel coefficients for a plane wave going from n1 into n2
/// with in-plane wavevector kx (1/nm). Evanescent kx is allowed.
Coefficients fresnel_interface(double n1, double n2, double kx, double wavelength_nm,
                               Polarization pol);

/// Factor F such that |r|^2 + F |t|^2 = 1 for propagating waves between lossless media.
double flux_factor(double n1, double n2, double kx, double wavelength_nm, Polarization pol);

/// Generalized reflection (and transmission into the outer medium) of the stack seen
/// from inside `source_layer` toward `side`, via 2x2 transfer-matrix composition.
/// Reflection is referenced at the source layer's interface on that side.
Coefficients stack_response(const LayerStack& stack, std::size_t source_layer, Side side, cd kx,
                            double wavelength_nm, Polarization pol);

cd stack_reflection(const LayerStack& stack, std::size_t source_layer, Side side, double kx,
                    double wavelength_nm, Polarization pol);

struct DipoleSource {
  double wavelength_nm = 785.0;
  std::size_t layer = 1;
  double depth_nm = 0.0;  ///< below the hosting layer's upper interface
  std::array<double, 3> orientation{1.0, 0.0, 0.0};
};

/// Throws StructuralError / DomainError if the dipole does not sit inside an
/// interior layer with a unit orientation.
void validate(const LayerStack& stack, const DipoleSource& dipole);

struct Options {
  double rel_tol = 1e-10;
  /// Deformed-contour end point in units of n_max k0: (1 + light_line_margin).
  double light_line_margin = 0.1;
  /// Depth of the elliptical contour below the real axis, relative to its length.
  double contour_depth = 0.05;
  /// Angular sampling of exported patterns.
  double theta_step_deg = 1.0;
  double phi_step_deg = 1.0;
};

/// Far-field power per unit solid angle in the top (Up) or bottom (Down)
/// semi-infinite medium. theta is measured from the outward normal.
struct RadiationPattern {
  Hemisphere hemisphere = Hemisphere::Up;
  double theta_step_deg = 1.0;
  double phi_step_deg = 1.0;
  std::size_t n_theta = 0;  ///< samples at 0, step, ..., 90 deg
  std::size_t n_phi = 0;    ///< samples at 0, step, ..., < 360 deg
  std::vector<double> power_per_sr;

  double at(std::size_t it, std::size_t ip) const { return power_per_sr[it * n_phi + ip]; }
  double theta_deg(std::size_t it) const { return static_cast<double>(it) * theta_step_deg; }
  double phi_deg(std::size_t ip) const { return static_cast<double>(ip) * phi_step_deg; }
  /// Trapezoidal integral over the sampled hemisphere.
  double integrate() const;
};

double power_per_sr(const LayerStack& stack, const DipoleSource& dipole, Hemisphere hemisphere,
                    double theta, double phi);

std::pair<RadiationPattern, RadiationPattern> radiation_pattern(const LayerStack& stack,
                                                                const DipoleSource& dipole,
                                                                const Options& opt = {});

/// Power radiated into the hemisphere within polar angle max_theta (adaptive quadrature).
double hemisphere_power(const LayerStack& stack, const DipoleSource& dipole,
                        Hemisphere hemisphere, double max_theta, const Options& opt = {});

/// Total decay rate relative to the unbounded host, including evanescent and
/// guided channels, from a deformed-contour in-plane wavevector integral.
double relative_decay_rate(const LayerStack& stack, const DipoleSource& dipole,
                           const Options& opt = {});

/// Power coupled into guided modes of the stack, from the residues of the
/// real-axis poles of the layered Green's function.
double guided_power(const LayerStack& stack, const DipoleSource& dipole, const Options& opt = {});

/// Fraction of the total emitted power leaving through the chosen hemisphere
/// within the cone asin(NA / n_outer).
double collection_efficiency(const LayerStack& stack, const DipoleSource& dipole,
                             double numerical_aperture, const Options& opt = {},
                             Hemisphere side = Hemisphere::Up);

struct PowerBudget {
  double up = 0.0;
  double down = 0.0;
  double guided = 0.0;
  double total = 0.0;  ///< relative_decay_rate

  double residual() const { return (up + down + guided - total) / total; }
};

PowerBudget power_budget(const LayerStack& stack, const DipoleSource& dipole,
                         const Options& opt = {});

/// CSV: hemisphere,theta_deg,phi_deg,power_per_sr
void write_pattern_csv(std::ostream& os, const RadiationPattern& up, const RadiationPattern& down);

}  // namespace molwg::stratified
