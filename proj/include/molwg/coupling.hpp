#pragma once

// Emitter-to-waveguide coupling: combines a guided mode with the planar-stack
// emission of the same dipole into the fraction beta of decays that feed the
// waveguide. Rates are relative to the same dipole in vacuum.

#include <array>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "molwg/modesolver.hpp"
#include "molwg/stratified.hpp"

namespace molwg::coupling {

struct CouplingResult {
  double gamma_wg_rel = 0.0;    ///< both propagation directions
  double gamma_free_rel = 0.0;
  double gamma_nr_rel = 0.0;
  double beta = 0.0;
  double total_rate_rel = 0.0;
};

/// 3 n_g lambda^2 / (4 pi A_eff). Zero when the orientation has no projection on E.
double gamma_wg_relative(const modes::ModeField& mode, double x_nm, double y_nm,
                         const std::array<double, 3>& orientation);

/// {gamma_free_rel, gamma_nr_rel}: n_host times the stack-modified rate, and
/// n_host (1/QY - 1) for the non-radiative channel.
std::pair<double, double> gamma_free_relative(const stratified::LayerStack& stack,
                                              const stratified::DipoleSource& dipole,
                                              double quantum_yield,
                                              const stratified::Options& opt = {});

/// Assembles the three channels. The mode is sampled at (x_nm, y_nm) with the
/// dipole's orientation.
CouplingResult beta_factor(const modes::ModeField& mode, double x_nm, double y_nm,
                           const stratified::LayerStack& stack,
                           const stratified::DipoleSource& dipole, double quantum_yield,
                           const stratified::Options& opt = {});

/// Device description shared by single evaluations and maps.
struct DeviceModel {
  modes::RidgeGeometry geometry;  ///< film_thickness_nm is overridden per map row
  double wavelength_nm = 785.0;
  std::array<double, 3> orientation{1.0, 0.0, 0.0};
  double lateral_offset_nm = 0.0;
  double quantum_yield = 0.95;
  double group_index_delta_nm = 1.0;
  modes::SolverOptions solver;
  stratified::Options stack_options;
};

/// Planar stack above the ridge top: cover / film h / core / substrate.
stratified::LayerStack ridge_stack(const modes::RidgeGeometry& g);
/// Same stack without the core, i.e. the film on bare substrate away from the ridge.
stratified::LayerStack bare_stack(const modes::RidgeGeometry& g);
/// Dipole in the film, d_y above the ridge top (d_y <= h).
stratified::DipoleSource film_dipole(const modes::RidgeGeometry& g, double dy_nm,
                                     const std::array<double, 3>& orientation,
                                     double wavelength_nm);

/// Fundamental mode with its group index filled in.
modes::ModeField solve_fundamental(const modes::RidgeGeometry& g, double wavelength_nm,
                                   double delta_nm, const modes::SolverOptions& opt);

/// Thread-safe memo of fundamental modes keyed by geometry, wavelength and grid.
class ModeCache {
 public:
  std::shared_ptr<const modes::ModeField> get(const modes::RidgeGeometry& g, double wavelength_nm,
                                              double delta_nm, const modes::SolverOptions& opt);
  std::size_t size() const;

 private:
  using Key = std::vector<double>;
  mutable std::mutex mu_;
  std::map<Key, std::shared_ptr<const modes::ModeField>> cache_;
};

CouplingResult evaluate(const DeviceModel& model, const modes::ModeField& mode, double h_nm,
                        double dy_nm);

struct MapCell {
  double h_nm = 0.0;
  double dy_nm = 0.0;
  CouplingResult result;
  std::string error;  ///< empty when the cell evaluated
  bool ok() const { return error.empty(); }
};

/// One row per h (outer) and d_y (inner), in input order. One mode solve per h;
/// failures are recorded per cell. `threads` <= 1 runs serially.
std::vector<MapCell> beta_map(const DeviceModel& model, const std::vector<double>& dy_values,
                              const std::vector<double>& h_values, unsigned threads = 1,
                              ModeCache* cache = nullptr);

/// Total rate next to the waveguide (d_y = 10 nm by default) over the bare-film
/// rate at the same depth away from the ridge.
struct TotalRateRatio {
  double near_rel = 0.0;
  double far_rel = 0.0;
  double ratio = 0.0;
  bool within_band = false;  ///< ratio in [0.9, 1.5]
};

TotalRateRatio total_rate_ratio(const DeviceModel& model, const modes::ModeField& mode,
                                double h_nm, double dy_nm = 10.0);

/// CSV: h_nm,dy_nm,beta,gamma_wg_rel,gamma_free_rel,total_rate_rel
void write_map_csv(std::ostream& os, const std::vector<MapCell>& cells);
/// Scatter of beta versus d_y, one color per h.
void write_map_svg(std::ostream& os, const std::vector<MapCell>& cells);

}  // namespace molwg::coupling
