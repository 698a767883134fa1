// Acceptance checks, one per criterion: `acceptance N` runs criterion N and
// prints a single PASS/FAIL line; exit status is nonzero on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "molwg/budget.hpp"
#include "molwg/config.hpp"
#include "molwg/coupling.hpp"
#include "molwg/modesolver.hpp"
#include "molwg/photostats.hpp"
#include "molwg/runner.hpp"
#include "molwg/stratified.hpp"
#include "support/oracles.hpp"

using namespace molwg;
namespace fs = std::filesystem;

namespace {

constexpr double kLambda = 785.0;

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [FAIL]");
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

config::ExperimentConfig shipped_config() {
  return config::parse_config(std::string(MOLWG_CONFIG_DIR) + "/paper_device.cfg");
}

fs::path scratch_dir(const std::string& tag) {
  const fs::path d = fs::temp_directory_path() / ("molwg_acceptance_" + tag + "_" +
                                                  std::to_string(std::random_device{}()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Row value from a budget_report.csv file: table,key,"description",value,...
double csv_value(const std::string& csv, int table, const std::string& key) {
  std::istringstream is(csv);
  std::string line;
  const std::string prefix = std::to_string(table) + "," + key + ",";
  while (std::getline(is, line)) {
    if (line.rfind(prefix, 0) != 0) continue;
    const auto close = line.find("\",", prefix.size() + 1);
    return std::stod(line.substr(close + 2));
  }
  return std::nan("");
}

Outcome budget_reproduction() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = scratch_dir("budget");
  cli::RunOptions opt;
  opt.out_dir = dir.string();
  cli::run_command("budget-report", shipped_config(), opt);
  const auto csv = slurp(dir / "budget_report.csv");
  fs::remove_all(dir);
  const double beta = csv_value(csv, 1, "beta_est");
  const double p = csv_value(csv, 1, "p");
  const double sat = csv_value(csv, 2, "S_on_sat");
  const double br = csv_value(csv, 2, "BR_off_sat");
  o.check(beta >= 0.14 && beta <= 0.19, fmt("beta_est %.4f in [0.14, 0.19]", beta));
  o.check(std::abs(p - 0.79) <= 0.01, fmt("p %.4f = 0.79 +- 0.01", p));
  o.check(std::abs(sat - 24e6) <= 1.5e6, fmt("S_on_sat %.3f MHz = 24 +- 1.5", sat * 1e-6));
  o.check(std::abs(br - 0.16) <= 0.015, fmt("BR_off_sat %.4f = 0.16 +- 0.015", br));
  const double t = seconds_since(t0);
  o.check(t < 1.0, fmt("%.3f s < 1 s", t));
  return o;
}

Outcome on_chip_purity_formula() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto g = photostats::on_chip_purity({0.50}, {48e3}, {10e3});
  o.check(std::abs(g.value - 0.199) <= 1e-3, fmt("on_chip_purity %.5f = 0.199 +- 1e-3", g.value));
  const auto report = budget::build_report(shipped_config().device, shipped_config().best_device);
  bool noted = false;
  for (const auto& n : report.notes) noted |= n.find("0.02 +- 0.12") != std::string::npos;
  o.check(noted, "report carries the discrepancy note");
  const double t = seconds_since(t0);
  o.check(t < 1.0, fmt("%.3f s < 1 s", t));
  return o;
}

Outcome mode_solver_oracle() {
  Outcome o;
  // Lateral variation of a 20 um ridge is negligible, so the lateral step is coarse.
  modes::RidgeGeometry wide;
  wide.ridge_width_nm = 20000.0;
  wide.film_thickness_nm = 0.0;
  modes::SolverOptions slab_opt;
  slab_opt.dx_nm = 50.0;
  slab_opt.dy_nm = 10.0;
  const auto slab_modes = modes::solve_modes(modes::CrossSection::ridge(wide), kLambda, 1, slab_opt);
  const double slab = oracle::slab_te_neff(kLambda, 175.0, 1.51, 2.0, 1.0);
  const double fd = slab_modes.empty() ? std::nan("") : slab_modes[0].n_eff;
  o.check(std::abs(fd - slab) < 1e-3, fmt("wide ridge %.6f vs slab %.6f", fd, slab));

  const auto t0 = std::chrono::steady_clock::now();
  modes::SolverOptions opt;
  opt.dx_nm = opt.dy_nm = 10.0;
  const auto found = modes::solve_modes(modes::CrossSection::ridge({}), kLambda, 4, opt);
  const double t = seconds_since(t0);
  o.check(found.size() == 1, "guided modes: " + std::to_string(found.size()));
  if (!found.empty()) {
    const auto& m = found[0];
    double ex = 0.0, ey = 0.0;
    for (const auto& e : m.E) {
      ex = std::max(ex, std::abs(e[0]));
      ey = std::max(ey, std::abs(e[1]));
    }
    o.check(m.n_eff > 1.51 && m.n_eff < 2.0, fmt("n_eff %.6f in (1.51, 2)", m.n_eff));
    o.check(ex > 10.0 * ey, "E_x dominant");
  }
  o.check(t < 60.0, fmt("device geometry %.1f s < 60 s", t));
  return o;
}

Outcome stratified_energy_bookkeeping() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> idx(1.0, 2.2), thick(40.0, 400.0), u(0.0, 1.0);
  std::uniform_int_distribution<int> count(1, 4);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const int n = count(rng);
    std::vector<std::pair<double, double>> interior;
    for (int i = 0; i < n; ++i) interior.emplace_back(idx(rng), thick(rng));
    const auto src = static_cast<std::size_t>(std::min(n, 1 + static_cast<int>(u(rng) * n)));
    const double depth = (0.05 + 0.9 * u(rng)) * interior[src - 1].second;
    const auto stack = stratified::LayerStack::make(idx(rng), interior, idx(rng));
    const double th = std::acos(2.0 * u(rng) - 1.0), ph = 2.0 * oracle::kPi * u(rng);
    const std::array<double, 3> dir{std::sin(th) * std::cos(ph), std::cos(th), std::sin(th) * std::sin(ph)};
    const stratified::DipoleSource d{kLambda, src, depth, dir};
    const double up = stratified::hemisphere_power(stack, d, stratified::Hemisphere::Up, 0.5 * oracle::kPi);
    const double down = stratified::hemisphere_power(stack, d, stratified::Hemisphere::Down, 0.5 * oracle::kPi);
    const double trapped = stratified::guided_power(stack, d);
    const double total = stratified::relative_decay_rate(stack, d);
    worst = std::max(worst, std::abs(up + down + trapped - total) / total);
  }
  o.check(worst < 1e-3, fmt("worst relative residual %.2e < 1e-3", worst));
  double uniform_err = 0.0;
  for (double n : {1.0, 1.5, 2.0})
    for (const std::array<double, 3>& dir : {std::array<double, 3>{1, 0, 0}, {0, 1, 0}}) {
      const stratified::DipoleSource d{kLambda, 1, 300.0, dir};
      uniform_err = std::max(uniform_err,
                             std::abs(stratified::relative_decay_rate(stratified::LayerStack::uniform(n), d) - 1.0));
    }
  o.check(uniform_err < 1e-6, fmt("uniform-stack |rate - 1| %.2e < 1e-6", uniform_err));
  const double t = seconds_since(t0);
  o.check(t < 120.0, fmt("%.1f s < 120 s", t));
  return o;
}

Outcome collection_efficiency_band() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  double best = 0.0, lo = 1.0, hi = 0.0;
  std::string where;
  int hits = 0;
  for (double h : {50.0, 100.0, 150.0}) {
    modes::RidgeGeometry g;
    g.film_thickness_nm = h;
    const auto stack = coupling::ridge_stack(g);
    for (double dy = 10.0; dy <= 60.0 && dy <= h; dy += 10.0) {
      const auto d = coupling::film_dipole(g, dy, {1.0, 0.0, 0.0}, kLambda);
      for (double na : {0.6, 0.7, 0.8, 0.9}) {
        const double eta = stratified::collection_efficiency(stack, d, na);
        lo = std::min(lo, eta);
        hi = std::max(hi, eta);
        if (eta >= 0.035 && eta <= 0.065) {
          ++hits;
          if (std::abs(eta - 0.05) < std::abs(best - 0.05)) {
            best = eta;
            where = "h " + std::to_string(static_cast<int>(h)) + " d_y " +
                    std::to_string(static_cast<int>(dy)) + " NA " + fmt("%.1f", na);
          }
        }
      }
    }
  }
  o.check(hits > 0, fmt("eta_f spans [%.4f, %.4f]", lo, hi) + ", " + std::to_string(hits) +
                        " configurations in [0.035, 0.065]" +
                        (hits ? fmt(", closest %.4f", best) + " at " + where : ""));
  const double t = seconds_since(t0);
  o.check(t < 120.0, fmt("%.1f s < 120 s", t));
  return o;
}

Outcome beta_behavior() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = shipped_config();
  auto model = cfg.device_model;
  model.quantum_yield = cfg.device.QY.value;
  const std::vector<double> dy{10, 20, 30, 40, 50, 60, 70, 80, 90};
  const std::vector<double> h{50, 100, 150, 200};
  coupling::ModeCache cache;
  const auto cells = coupling::beta_map(model, dy, h, 1, &cache);
  double max_beta = 0.0;
  bool decreasing = true;
  double prev = INFINITY;
  int in_film = 0;
  for (const auto& c : cells) {
    if (!c.ok()) continue;
    ++in_film;
    max_beta = std::max(max_beta, c.result.beta);
    if (c.h_nm == 100.0) {
      decreasing = decreasing && c.result.beta < prev;
      prev = c.result.beta;
    }
  }
  o.check(decreasing, "beta strictly decreasing in d_y at h = 100");
  o.check(max_beta >= 0.10 && max_beta <= 0.60,
          fmt("max beta %.4f in [0.10, 0.60] over ", max_beta) + std::to_string(in_film) + " cells");

  // Far from the core: a film thick enough to host the emitter 500 nm up.
  double far_max = 0.0;
  for (const auto& c : coupling::beta_map(model, {500.0, 550.0, 600.0}, {600.0}, 1, &cache)) {
    if (!c.ok()) {
      o.check(false, "far cell failed: " + c.error);
      continue;
    }
    far_max = std::max(far_max, c.result.beta);
  }
  o.check(far_max <= 0.02, fmt("beta %.4f <= 0.02 for d_y >= 500 nm", far_max));
  const double t = seconds_since(t0);
  o.check(t < 600.0, fmt("%.1f s < 600 s", t));
  return o;
}

Outcome photon_statistics_end_to_end() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  photostats::EmitterParams p;
  p.lifetime_ns = 4.2;
  p.saturation = 0.2;
  const double duration_ns = 1e7;
  const auto s = photostats::simulate_emitter(p, duration_ns, 1);

  const double mean_cycle = 1.0 / p.pump_rate() + p.lifetime_ns;
  const double var_cycle = 1.0 / (p.pump_rate() * p.pump_rate()) + p.lifetime_ns * p.lifetime_ns;
  const double rate = s.rate_hz();
  const double sigma_rate =
      std::sqrt(duration_ns / mean_cycle * var_cycle / (mean_cycle * mean_cycle)) / (duration_ns * 1e-9);
  const double formula = 1e9 / (2.0 * p.lifetime_ns) * p.saturation / (1.0 + p.saturation);
  o.check(std::abs(rate - formula) <= 3.0 * sigma_rate,
          fmt("rate %.4f MHz vs %.4f MHz", rate * 1e-6, formula * 1e-6) + fmt(" (3 sigma %.4f)", 3e-6 * sigma_rate));

  const auto [a, b] = photostats::hbt_split(s, 3);
  const auto clean = photostats::fit_g2(photostats::g2_histogram(a, b, 500.0, 60.0));
  o.check(clean.g2_zero < 0.1, fmt("clean g2(0) %.4f < 0.1", clean.g2_zero));

  const double fraction = 0.79;
  const double background = rate * (1.0 - fraction) / fraction;
  const auto noisy = photostats::apply_detection(s, 1.0, background, 0.0, 2);
  const auto [na, nb] = photostats::hbt_split(noisy, 3);
  const auto fit = photostats::fit_g2(photostats::g2_histogram(na, nb, 500.0, 60.0));
  const double target = 1.0 - fraction * fraction;
  o.check(std::abs(fit.g2_zero - target) <= 0.05, fmt("mixed g2(0) %.4f = %.4f +- 0.05", fit.g2_zero, target));
  const auto on_chip = photostats::on_chip_purity({fit.g2_zero, fit.sigma_g2_zero},
                                                  {noisy.rate_hz()}, {background});
  o.check(on_chip.value < 0.1, fmt("recovered on-chip g2(0) %.4f < 0.1", on_chip.value));
  const double t = seconds_since(t0);
  o.check(t < 60.0, fmt("%.1f s < 60 s", t));
  return o;
}

Outcome determinism() {
  Outcome o;
  auto cfg = shipped_config();
  cfg.duration_ns = 2e6;
  cfg.device_model.solver.dx_nm = cfg.device_model.solver.dy_nm = 20.0;
  cfg.sweep_dy_nm = {10.0, 40.0};
  cfg.sweep_h_nm = {100.0, 150.0};
  const auto dir = scratch_dir("determinism");
  for (const std::string command : {"simulate-hbt", "beta-map"}) {
    std::map<std::string, std::string> first;
    for (int run = 0; run < 2; ++run) {
      cli::RunOptions opt;
      opt.out_dir = (dir / (command + std::to_string(run))).string();
      opt.threads = run == 0 ? 1 : 2;
      const auto m = cli::run_command(command, cfg, opt);
      int same = 0, total = 0;
      for (const auto& out : m.outputs) {
        const auto bytes = slurp(fs::path(opt.out_dir) / out.path);
        if (run == 0) {
          first[out.path] = bytes;
        } else {
          ++total;
          same += first.count(out.path) && first[out.path] == bytes;
        }
      }
      if (run == 1)
        o.check(total > 0 && same == total,
                command + ": " + std::to_string(same) + "/" + std::to_string(total) + " outputs identical");
    }
  }
  fs::remove_all(dir);
  return o;
}

Outcome error_propagation_audit() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = shipped_config();
  const auto& b = cfg.device;
  const auto& best = cfg.best_device;
  const int n = 100000;
  auto audit = [&](const std::string& name, const Quantity& q,
                   const std::function<double(const std::vector<double>&)>& f,
                   const std::vector<Quantity>& in, unsigned seed) {
    std::vector<double> mean, sigma;
    for (const auto& x : in) {
      mean.push_back(x.value);
      sigma.push_back(x.sigma);
    }
    const double mc = oracle::mc_sigma(f, mean, sigma, n, seed);
    const double rel = std::abs(q.sigma - mc) / mc;
    o.check(rel <= 0.10, name + fmt(" %.1f%%", 100.0 * rel));
  };
  audit("beta_from_count_rate", budget::beta_from_count_rate(b),
        [](const std::vector<double>& x) {
          return (x[0] - x[1]) * 2.0 * x[2] * 1e-9 * (x[3] + 1.0) / x[3] / (x[4] * x[5] * x[6] * x[7]);
        },
        {b.S_c, b.B, b.tau, b.s, b.QY, b.eta_c, b.eta_opt, b.eta_det}, 11);
  audit("beta_from_images", budget::beta_from_images(b.S_coupler_image, b.S_free_image, b.eta_c, b.eta_f),
        [](const std::vector<double>& x) {
          const double c = x[0] / x[2], f = x[1] / x[3];
          return c / (c + f);
        },
        {b.S_coupler_image, b.S_free_image, b.eta_c, b.eta_f}, 12);
  audit("saturation_on_chip_rate", budget::saturation_on_chip_rate(best.tau, best.QY, best.beta),
        [](const std::vector<double>& x) { return x[1] * x[2] / (4.0 * x[0] * 1e-9); },
        {best.tau, best.QY, best.beta}, 13);
  audit("off_chip_brightness", budget::off_chip_brightness(best.QY, best.beta, best.eta_c),
        [](const std::vector<double>& x) { return x[0] * x[1] * x[2]; }, {best.QY, best.beta, best.eta_c}, 14);
  const Quantity beta = budget::beta_from_count_rate(b);
  audit("expected_detected_rate", budget::expected_detected_rate(b, beta),
        [](const std::vector<double>& x) {
          return x[6] / (2.0 * x[0] * 1e-9) * x[1] / (1.0 + x[1]) * x[2] * x[3] * x[4] * x[5];
        },
        {b.tau, b.s, b.QY, b.eta_c, b.eta_opt, b.eta_det, beta}, 15);
  audit("signal_fraction", budget::signal_fraction(b.S_c, b.B),
        [](const std::vector<double>& x) { return (x[0] - x[1]) / x[0]; }, {b.S_c, b.B}, 16);
  audit("coupler_efficiency_from_throughput", budget::coupler_efficiency_from_throughput({0.0625, 0.01}),
        [](const std::vector<double>& x) { return std::sqrt(x[0]); }, {{0.0625, 0.01}}, 17);
  audit("on_chip_purity", photostats::on_chip_purity(b.g2_zero, b.S_c, b.B),
        [](const std::vector<double>& x) {
          const double p = (x[1] - x[2]) / x[1];
          return 1.0 + (x[0] - 1.0) / (p * p);
        },
        {b.g2_zero, b.S_c, b.B}, 18);
  const double t = seconds_since(t0);
  o.check(t < 30.0, fmt("%.1f s < 30 s", t));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria{
      {1, {"budget reproduction", budget_reproduction}},
      {2, {"on-chip purity formula", on_chip_purity_formula}},
      {3, {"mode solver oracle", mode_solver_oracle}},
      {4, {"stratified energy bookkeeping", stratified_energy_bookkeeping}},
      {5, {"collection efficiency band", collection_efficiency_band}},
      {6, {"beta behavior", beta_behavior}},
      {7, {"photon statistics end to end", photon_statistics_end_to_end}},
      {8, {"determinism", determinism}},
      {9, {"error propagation audit", error_propagation_audit}},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty())
    for (const auto& [k, v] : criteria) selected.push_back(k);

  int failures = 0;
  for (int k : selected) {
    const auto it = criteria.find(k);
    if (it == criteria.end()) {
      std::printf("criterion %d: FAIL unknown criterion\n", k);
      ++failures;
      continue;
    }
    Outcome r;
    try {
      r = it->second.second();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    std::printf("criterion %d (%s): %s %s\n", k, it->second.first.c_str(), r.pass ? "PASS" : "FAIL",
                r.detail.c_str());
    std::fflush(stdout);
    failures += r.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
