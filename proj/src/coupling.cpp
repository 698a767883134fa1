#include "molwg/coupling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <functional>
#include <thread>

#include "molwg/error.hpp"

namespace molwg::coupling {

namespace {

constexpr double kPi = std::numbers::pi;

void check_qy(double qy) {
  if (!(qy > 0.0 && qy <= 1.0)) throw DomainError("quantum yield must lie in (0, 1]");
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

double gamma_wg_relative(const modes::ModeField& mode, double x_nm, double y_nm,
                         const std::array<double, 3>& orientation) {
  if (!(mode.n_g > 0.0)) throw DomainError("mode has no valid group index");
  const double a_eff = modes::effective_area(mode, x_nm, y_nm, orientation);
  if (std::isinf(a_eff)) return 0.0;
  const double lam = mode.wavelength_nm;
  return 3.0 * mode.n_g * lam * lam / (4.0 * kPi * a_eff);
}

std::pair<double, double> gamma_free_relative(const stratified::LayerStack& stack,
                                              const stratified::DipoleSource& dipole,
                                              double quantum_yield,
                                              const stratified::Options& opt) {
  check_qy(quantum_yield);
  const double n_host = stack.index(dipole.layer);
  const double free = n_host * stratified::relative_decay_rate(stack, dipole, opt);
  const double nr = n_host * (1.0 / quantum_yield - 1.0);
  return {free, nr};
}

CouplingResult beta_factor(const modes::ModeField& mode, double x_nm, double y_nm,
                           const stratified::LayerStack& stack,
                           const stratified::DipoleSource& dipole, double quantum_yield,
                           const stratified::Options& opt) {
  CouplingResult r;
  r.gamma_wg_rel = gamma_wg_relative(mode, x_nm, y_nm, dipole.orientation);
  std::tie(r.gamma_free_rel, r.gamma_nr_rel) = gamma_free_relative(stack, dipole, quantum_yield, opt);
  r.total_rate_rel = r.gamma_wg_rel + r.gamma_free_rel + r.gamma_nr_rel;
  r.beta = r.gamma_wg_rel / r.total_rate_rel;
  return r;
}

stratified::LayerStack ridge_stack(const modes::RidgeGeometry& g) {
  return stratified::LayerStack::make(
      g.n_cover, {{g.n_film, g.film_thickness_nm}, {g.n_core, g.ridge_thickness_nm}},
      g.n_substrate);
}

stratified::LayerStack bare_stack(const modes::RidgeGeometry& g) {
  return stratified::LayerStack::make(g.n_cover, {{g.n_film, g.film_thickness_nm}}, g.n_substrate);
}

stratified::DipoleSource film_dipole(const modes::RidgeGeometry& g, double dy_nm,
                                     const std::array<double, 3>& orientation,
                                     double wavelength_nm) {
  if (!(dy_nm >= 0.0 && dy_nm <= g.film_thickness_nm))
    throw DomainError("dipole height must lie within the film (0 <= d_y <= h)");
  stratified::DipoleSource d;
  d.wavelength_nm = wavelength_nm;
  d.layer = 1;
  d.depth_nm = g.film_thickness_nm - dy_nm;
  d.orientation = orientation;
  return d;
}

modes::ModeField solve_fundamental(const modes::RidgeGeometry& g, double wavelength_nm,
                                   double delta_nm, const modes::SolverOptions& opt) {
  const auto cs = modes::CrossSection::ridge(g);
  auto center = modes::solve_modes(cs, wavelength_nm, 1, opt);
  if (center.empty()) throw DomainError("cross-section supports no guided mode");
  modes::ModeField mode = std::move(center.front());
  auto n_eff = [&](double lam) {
    if (lam == wavelength_nm) return mode.n_eff;
    const auto m = modes::solve_modes(cs, lam, 1, opt);
    if (m.empty()) throw DomainError("guided mode disappears near the wavelength; reduce delta");
    return m.front().n_eff;
  };
  mode.n_g = modes::group_index_from(n_eff, wavelength_nm, delta_nm);
  return mode;
}

std::shared_ptr<const modes::ModeField> ModeCache::get(const modes::RidgeGeometry& g,
                                                       double wavelength_nm, double delta_nm,
                                                       const modes::SolverOptions& opt) {
  const Key key{g.ridge_width_nm,   g.ridge_thickness_nm, g.film_thickness_nm, g.n_substrate,
                g.n_core,           g.n_film,             g.n_cover,           g.margin_side_nm,
                g.margin_bottom_nm, g.margin_top_nm,      wavelength_nm,       delta_nm,
                opt.dx_nm,          opt.dy_nm,            static_cast<double>(opt.family)};
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  auto mode = std::make_shared<const modes::ModeField>(solve_fundamental(g, wavelength_nm, delta_nm, opt));
  std::lock_guard lock(mu_);
  return cache_.emplace(key, std::move(mode)).first->second;
}

std::size_t ModeCache::size() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

CouplingResult evaluate(const DeviceModel& model, const modes::ModeField& mode, double h_nm,
                        double dy_nm) {
  modes::RidgeGeometry g = model.geometry;
  g.film_thickness_nm = h_nm;
  const auto stack = ridge_stack(g);
  const auto dipole = film_dipole(g, dy_nm, model.orientation, model.wavelength_nm);
  return beta_factor(mode, model.lateral_offset_nm, g.ridge_thickness_nm + dy_nm, stack, dipole,
                     model.quantum_yield, model.stack_options);
}

std::vector<MapCell> beta_map(const DeviceModel& model, const std::vector<double>& dy_values,
                              const std::vector<double>& h_values, unsigned threads,
                              ModeCache* cache) {
  if (dy_values.empty() || h_values.empty()) throw DomainError("beta_map needs d_y and h values");
  check_qy(model.quantum_yield);
  ModeCache local;
  ModeCache& modes_for = cache ? *cache : local;

  // Mode solves first (one per distinct h), then the cheap per-cell work.
  std::vector<std::shared_ptr<const modes::ModeField>> row_mode(h_values.size());
  std::vector<std::string> row_error(h_values.size());
  auto solve_row = [&](std::size_t r) {
    try {
      modes::RidgeGeometry g = model.geometry;
      g.film_thickness_nm = h_values[r];
      row_mode[r] = modes_for.get(g, model.wavelength_nm, model.group_index_delta_nm, model.solver);
    } catch (const std::exception& e) {
      row_error[r] = e.what();
    }
  };

  std::vector<MapCell> cells(h_values.size() * dy_values.size());
  auto eval_cell = [&](std::size_t k) {
    const std::size_t r = k / dy_values.size();
    MapCell& c = cells[k];
    c.h_nm = h_values[r];
    c.dy_nm = dy_values[k % dy_values.size()];
    const double nan = std::numeric_limits<double>::quiet_NaN();
    c.result = {nan, nan, nan, nan, nan};
    if (!row_error[r].empty()) {
      c.error = row_error[r];
      return;
    }
    try {
      c.result = evaluate(model, *row_mode[r], c.h_nm, c.dy_nm);
    } catch (const std::exception& e) {
      c.error = e.what();
    }
  };

  auto run = [threads](std::size_t n, const std::function<void(std::size_t)>& job) {
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (workers == 1) {
      for (std::size_t k = 0; k < n; ++k) job(k);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < n; k = next++) job(k);
      });
    for (auto& t : pool) t.join();
  };

  run(h_values.size(), solve_row);
  run(cells.size(), eval_cell);
  return cells;
}

TotalRateRatio total_rate_ratio(const DeviceModel& model, const modes::ModeField& mode,
                                double h_nm, double dy_nm) {
  TotalRateRatio out;
  out.near_rel = evaluate(model, mode, h_nm, dy_nm).total_rate_rel;
  modes::RidgeGeometry g = model.geometry;
  g.film_thickness_nm = h_nm;
  const auto dipole = film_dipole(g, dy_nm, model.orientation, model.wavelength_nm);
  const auto [free, nr] =
      gamma_free_relative(bare_stack(g), dipole, model.quantum_yield, model.stack_options);
  out.far_rel = free + nr;
  out.ratio = out.near_rel / out.far_rel;
  out.within_band = out.ratio >= 0.9 && out.ratio <= 1.5;
  return out;
}

void write_map_csv(std::ostream& os, const std::vector<MapCell>& cells) {
  os << "h_nm,dy_nm,beta,gamma_wg_rel,gamma_free_rel,total_rate_rel\n";
  for (const auto& c : cells)
    os << fmt(c.h_nm) << ',' << fmt(c.dy_nm) << ',' << fmt(c.result.beta) << ','
       << fmt(c.result.gamma_wg_rel) << ',' << fmt(c.result.gamma_free_rel) << ','
       << fmt(c.result.total_rate_rel) << '\n';
}

void write_map_svg(std::ostream& os, const std::vector<MapCell>& cells) {
  const double W = 640, H = 440, left = 70, right = 150, top = 30, bottom = 60;
  double x_max = 0.0, y_max = 0.0;
  std::vector<double> hs;
  for (const auto& c : cells) {
    if (!c.ok()) continue;
    x_max = std::max(x_max, c.dy_nm);
    y_max = std::max(y_max, c.result.beta);
    if (std::find(hs.begin(), hs.end(), c.h_nm) == hs.end()) hs.push_back(c.h_nm);
  }
  x_max = x_max > 0.0 ? std::ceil(x_max / 10.0) * 10.0 : 100.0;
  y_max = y_max > 0.0 ? std::ceil(y_max * 20.0) / 20.0 : 1.0;
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + pw * x / x_max; };
  auto py = [&](double y) { return top + ph * (1.0 - y / y_max); };
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  char buf[256];
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
                "stroke=\"black\"/>\n",
                left, top, pw, ph);
  os << buf;
  for (int k = 0; k <= 5; ++k) {
    const double xv = x_max * k / 5.0, yv = y_max * k / 5.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%g</text>\n"
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.2f</text>\n",
                  px(xv), top + ph + 18, xv, left - 6, py(yv) + 4, yv);
    os << buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">dipole height above ridge "
                "d_y (nm)</text>\n<text x=\"18\" y=\"%.1f\" text-anchor=\"middle\" "
                "transform=\"rotate(-90 18 %.1f)\">beta</text>\n",
                left + pw / 2, H - 18, top + ph / 2, top + ph / 2);
  os << buf;
  for (std::size_t s = 0; s < hs.size(); ++s) {
    const char* color = palette[s % 8];
    for (const auto& c : cells) {
      if (!c.ok() || c.h_nm != hs[s]) continue;
      std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"%s\"/>\n",
                    px(c.dy_nm), py(c.result.beta), color);
      os << buf;
    }
    const double ly = top + 16.0 * static_cast<double>(s) + 10;
    std::snprintf(buf, sizeof buf,
                  "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"4\" fill=\"%s\"/><text x=\"%.1f\" "
                  "y=\"%.1f\">h = %g nm</text>\n",
                  W - right + 20, ly, color, W - right + 30, ly + 4, hs[s]);
    os << buf;
  }
  os << "</svg>\n";
}

}  // namespace molwg::coupling
