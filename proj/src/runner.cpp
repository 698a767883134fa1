#include "molwg/runner.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "molwg/budget.hpp"
#include "molwg/coupling.hpp"
#include "molwg/modesolver.hpp"
#include "molwg/photostats.hpp"
#include "molwg/stratified.hpp"

#ifndef MOLWG_VERSION
#define MOLWG_VERSION "0.0.0"
#endif

namespace molwg::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

const std::string kManifestSuffix = ".manifest.json";

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Outputs are staged in memory and only written once the whole command has
// succeeded, so a failure never leaves unmanifested files behind.
class Staging {
 public:
  void add(const std::string& name, std::string bytes) { files_.emplace_back(name, std::move(bytes)); }
  template <typename F>
  void add_stream(const std::string& name, F&& fill) {
    std::ostringstream os(std::ios::binary);
    fill(os);
    add(name, os.str());
  }
  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

void write_atomic(const fs::path& dir, const std::string& name, const std::string& bytes) {
  const fs::path target = dir / name;
  const fs::path tmp = dir / ("." + name + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CommandError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw CommandError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw CommandError("cannot rename into '" + target.string() + "': " + ec.message());
  }
}

// Runs one module operation and rethrows failures with command/operation context.
template <typename F>
auto step(const std::string& command, const std::string& op, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const CommandError&) {
    throw;
  } catch (const std::exception& e) {
    throw CommandError(command + ": " + op + ": " + e.what());
  }
}

json quantity_json(const Quantity& q) {
  return json{{"value", q.value}, {"sigma", q.sigma}, {"unit", q.unit}};
}

json coupling_json(const coupling::CouplingResult& r) {
  return json{{"beta", r.beta},
              {"gamma_wg_rel", r.gamma_wg_rel},
              {"gamma_free_rel", r.gamma_free_rel},
              {"gamma_nr_rel", r.gamma_nr_rel},
              {"total_rate_rel", r.total_rate_rel}};
}

json fit_json(const photostats::G2Fit& f) {
  return json{{"g2_zero", f.g2_zero},         {"sigma_g2_zero", f.sigma_g2_zero},
              {"b", f.b},                     {"sigma_b", f.sigma_b},
              {"T_ns", f.T_ns},               {"sigma_T_ns", f.sigma_T_ns},
              {"reduced_chi2", f.reduced_chi2}, {"iterations", f.iterations}};
}

struct Context {
  const std::string& command;
  const config::ExperimentConfig& cfg;
  std::map<std::string, std::uint64_t> seeds;
  unsigned threads;
  std::vector<std::string>& warnings;
  Staging staging;

  template <typename F>
  auto run(const std::string& op, F&& f) -> decltype(f()) {
    return step(command, op, std::forward<F>(f));
  }
  std::uint64_t seed(const std::string& name) const {
    const auto it = seeds.find(name);
    if (it == seeds.end()) throw CommandError(command + ": missing seed '" + name + "'");
    return it->second;
  }
};

coupling::DeviceModel device_model(const config::ExperimentConfig& cfg) {
  coupling::DeviceModel m = cfg.device_model;
  m.quantum_yield = cfg.device.QY.value;
  return m;
}

void cmd_modes(Context& c) {
  const auto& g = c.cfg.device_model.geometry;
  const double lambda = c.cfg.device_model.wavelength_nm;
  const auto& opt = c.cfg.device_model.solver;
  const auto cs = c.run("modesolver.cross_section", [&] { return modes::CrossSection::ridge(g); });
  const double threshold = c.run("modesolver.guided_threshold",
                                 [&] { return modes::guided_threshold(cs, lambda, opt); });
  auto found = c.run("modesolver.solve_modes",
                     [&] { return modes::solve_modes(cs, lambda, c.cfg.max_modes, opt); });
  if (found.empty()) c.warnings.push_back("modes: no guided mode found");
  if (!found.empty()) {
    found[0].n_g = c.run("modesolver.group_index", [&] {
      return modes::group_index(cs, lambda, c.cfg.device_model.group_index_delta_nm, opt);
    });
  }

  json list = json::array();
  for (std::size_t i = 0; i < found.size(); ++i) {
    const auto& m = found[i];
    json entry{{"index", i}, {"n_eff", m.n_eff}, {"boundary_ratio", m.boundary_ratio},
               {"field_csv", "modes_field_" + std::to_string(i) + ".csv"}};
    if (!std::isnan(m.n_g)) entry["n_g"] = m.n_g;
    list.push_back(entry);
    c.staging.add_stream(entry["field_csv"].get<std::string>(),
                         [&](std::ostream& os) { modes::write_mode_csv(os, m); });
  }
  json doc{{"wavelength_nm", lambda},
           {"family", opt.family == modes::Family::QuasiTE ? "quasi-TE" : "quasi-TM"},
           {"grid_nm", opt.dx_nm},
           {"guided_threshold", threshold},
           {"modes", list}};
  c.staging.add("modes.json", doc.dump(2) + "\n");
}

void cmd_radiate(Context& c) {
  const auto& cfg = c.cfg;
  const auto& g = cfg.device_model.geometry;
  const double lambda = cfg.device_model.wavelength_nm;
  const auto& sopt = cfg.device_model.stack_options;
  json doc{{"dy_nm", cfg.dy_nm}, {"numerical_aperture", cfg.numerical_aperture},
           {"collection_side", cfg.collection_side == stratified::Hemisphere::Up ? "up" : "down"}};
  const std::pair<const char*, stratified::LayerStack> stacks[] = {
      {"on_ridge", coupling::ridge_stack(g)}, {"bare_film", coupling::bare_stack(g)}};
  for (const auto& [label, stack] : stacks) {
    const auto dipole = c.run("stratified.dipole", [&] {
      return coupling::film_dipole(g, cfg.dy_nm, cfg.device_model.orientation, lambda);
    });
    const auto b = c.run("stratified.power_budget",
                         [&] { return stratified::power_budget(stack, dipole, sopt); });
    const double eta = c.run("stratified.collection_efficiency", [&] {
      return stratified::collection_efficiency(stack, dipole, cfg.numerical_aperture, sopt,
                                               cfg.collection_side);
    });
    doc[label] = json{{"relative_decay_rate", b.total}, {"up", b.up},
                      {"down", b.down},                 {"guided", b.guided},
                      {"residual", b.residual()},       {"collection_efficiency", eta}};
    if (std::string(label) == "on_ridge") {
      const auto pattern = c.run("stratified.radiation_pattern",
                                 [&] { return stratified::radiation_pattern(stack, dipole, sopt); });
      c.staging.add_stream("radiate_pattern.csv", [&](std::ostream& os) {
        stratified::write_pattern_csv(os, pattern.first, pattern.second);
      });
    }
  }
  c.staging.add("radiate.json", doc.dump(2) + "\n");
}

void cmd_beta_map(Context& c) {
  const auto model = device_model(c.cfg);
  coupling::ModeCache cache;
  const auto cells = c.run("coupling.beta_map", [&] {
    return coupling::beta_map(model, c.cfg.sweep_dy_nm, c.cfg.sweep_h_nm, c.threads, &cache);
  });
  std::size_t outside = 0;
  json failed = json::array();
  double best = -1.0;
  json best_cell;
  for (const auto& cell : cells) {
    if (cell.ok()) {
      if (cell.result.beta > best) {
        best = cell.result.beta;
        best_cell = json{{"h_nm", cell.h_nm}, {"dy_nm", cell.dy_nm}, {"beta", cell.result.beta}};
      }
    } else if (cell.dy_nm > cell.h_nm) {
      ++outside;
    } else {
      failed.push_back(json{{"h_nm", cell.h_nm}, {"dy_nm", cell.dy_nm}, {"error", cell.error}});
    }
  }
  if (!failed.empty())
    throw CommandError("beta-map: coupling.beta_map: " + std::to_string(failed.size()) +
                       " cell(s) failed, first: " + failed[0]["error"].get<std::string>());
  if (outside > 0)
    c.warnings.push_back("beta-map: " + std::to_string(outside) +
                         " cell(s) with dy_nm > h_nm lie outside the film and are reported as nan");
  c.staging.add_stream("beta_map.csv", [&](std::ostream& os) { coupling::write_map_csv(os, cells); });
  c.staging.add_stream("beta_map.svg", [&](std::ostream& os) { coupling::write_map_svg(os, cells); });
  json doc{{"cells", cells.size()}, {"outside_film", outside}, {"max", best_cell}};
  c.staging.add("beta_map.json", doc.dump(2) + "\n");
}

struct HbtOutcome {
  photostats::G2Histogram hist;
  photostats::G2Fit fit;
  json summary;
};

HbtOutcome simulate_hbt(Context& c, const std::string& prefix) {
  const auto& cfg = c.cfg;
  const auto& det = cfg.detection;
  const auto emitted = c.run("photostats.simulate_emitter", [&] {
    return photostats::simulate_emitter(cfg.emitter, cfg.duration_ns, c.seed("emitter"), &c.warnings);
  });
  double background_hz = det.background_hz;
  if (det.signal_fraction > 0.0) {
    const double signal = emitted.rate_hz() * det.efficiency;
    background_hz = signal * (1.0 - det.signal_fraction) / det.signal_fraction;
  }
  const auto detected = c.run("photostats.apply_detection", [&] {
    return photostats::apply_detection(emitted, det.efficiency, background_hz, det.dead_time_ns,
                                       c.seed("detection"));
  });
  const auto [d1, d2] =
      c.run("photostats.hbt_split", [&] { return photostats::hbt_split(detected, c.seed("split")); });

  const std::string tags = prefix + "timetags." + (det.timetag_format == "csv" ? "csv" : "bin");
  c.staging.add_stream(tags, [&](std::ostream& os) {
    if (det.timetag_format == "csv")
      photostats::write_timetags_csv(os, {d1, d2});
    else
      photostats::write_timetags(os, {d1, d2});
  });

  HbtOutcome out;
  out.hist = c.run("photostats.g2_histogram", [&] {
    return photostats::g2_histogram(d1, d2, det.bin_width_ps, det.window_ns, c.threads);
  });
  for (const auto& w : out.hist.warnings) c.warnings.push_back(w);
  c.staging.add_stream(prefix + "g2.csv",
                       [&](std::ostream& os) { photostats::write_histogram_csv(os, out.hist); });
  out.fit = c.run("photostats.fit_g2", [&] { return photostats::fit_g2(out.hist); });

  const double duration_s = static_cast<double>(detected.duration_ps) * 1e-12;
  const double total_hz = static_cast<double>(detected.size()) / duration_s;
  json purity;
  if (background_hz < total_hz) {
    const auto q = c.run("photostats.on_chip_purity", [&] {
      return photostats::on_chip_purity(Quantity(out.fit.g2_zero, out.fit.sigma_g2_zero),
                                        Quantity(total_hz), Quantity(background_hz));
    });
    purity = quantity_json(q);
  } else {
    c.warnings.push_back("simulate-hbt: background exceeds the detected rate; on-chip purity skipped");
  }
  out.summary = json{{"emitted_photons", emitted.size()},
                     {"emission_rate_hz", emitted.rate_hz()},
                     {"expected_emission_rate_hz", cfg.emitter.expected_rate_hz()},
                     {"detected_rate_hz", total_hz},
                     {"background_hz", background_hz},
                     {"signal_fraction", (total_hz - background_hz) / total_hz},
                     {"detector_1_events", d1.size()},
                     {"detector_2_events", d2.size()},
                     {"fit", fit_json(out.fit)},
                     {"on_chip_purity", purity}};
  return out;
}

void cmd_simulate_hbt(Context& c) {
  const auto out = simulate_hbt(c, "hbt_");
  c.staging.add("hbt_summary.json", out.summary.dump(2) + "\n");
}

void stage_report(Context& c, const std::string& prefix, const budget::Report& report) {
  for (const auto& n : report.notes) c.warnings.push_back(n);
  c.staging.add_stream(prefix + ".csv", [&](std::ostream& os) { budget::write_report_csv(os, report); });
  c.staging.add_stream(prefix + ".txt", [&](std::ostream& os) { budget::write_report_text(os, report); });
}

void cmd_budget_report(Context& c) {
  const auto report = c.run("budget.build_report",
                            [&] { return budget::build_report(c.cfg.device, c.cfg.best_device); });
  stage_report(c, "budget_report", report);
  c.staging.add("budget_inputs.json", budget::to_json(c.cfg.device));
}

void cmd_reproduce_paper(Context& c) {
  const auto& cfg = c.cfg;
  const auto model = device_model(cfg);
  const auto& g = model.geometry;
  const auto mode = c.run("coupling.solve_fundamental", [&] {
    return coupling::solve_fundamental(g, model.wavelength_nm, model.group_index_delta_nm, model.solver);
  });
  const auto beta = c.run("coupling.evaluate",
                          [&] { return coupling::evaluate(model, mode, g.film_thickness_nm, cfg.dy_nm); });
  const auto ratio = c.run("coupling.total_rate_ratio",
                           [&] { return coupling::total_rate_ratio(model, mode, g.film_thickness_nm); });
  if (!ratio.within_band)
    c.warnings.push_back("reproduce-paper: total-rate ratio " + std::to_string(ratio.ratio) +
                         " lies outside [0.9, 1.5]");
  const double eta_f = c.run("stratified.collection_efficiency", [&] {
    const auto dipole = coupling::film_dipole(g, cfg.dy_nm, model.orientation, model.wavelength_nm);
    return stratified::collection_efficiency(coupling::bare_stack(g), dipole, cfg.numerical_aperture,
                                             model.stack_options, cfg.collection_side);
  });
  const auto hbt = simulate_hbt(c, "reproduce_hbt_");
  const auto report = c.run("budget.build_report",
                            [&] { return budget::build_report(cfg.device, cfg.best_device); });
  stage_report(c, "reproduce_report", report);

  json rows = json::object();
  for (const auto& r : report.rows)
    rows[std::string(r.table == 1 ? "table1." : "table2.") + r.key] = quantity_json(r.value);
  json doc{{"mode", json{{"n_eff", mode.n_eff}, {"n_g", mode.n_g}, {"boundary_ratio", mode.boundary_ratio}}},
           {"reference_point", json{{"h_nm", g.film_thickness_nm}, {"dy_nm", cfg.dy_nm}}},
           {"coupling", coupling_json(beta)},
           {"total_rate_ratio", json{{"near_rel", ratio.near_rel}, {"far_rel", ratio.far_rel},
                                     {"ratio", ratio.ratio}, {"within_band", ratio.within_band}}},
           {"free_space_collection_efficiency", eta_f},
           {"hbt", hbt.summary},
           {"report", rows},
           {"notes", report.notes}};
  c.staging.add("reproduce_summary.json", doc.dump(2) + "\n");
}

using Handler = void (*)(Context&);

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h{
      {"modes", cmd_modes},
      {"radiate", cmd_radiate},
      {"beta-map", cmd_beta_map},
      {"simulate-hbt", cmd_simulate_hbt},
      {"budget-report", cmd_budget_report},
      {"reproduce-paper", cmd_reproduce_paper},
  };
  return h;
}

}  // namespace

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"modes",         "radiate",       "beta-map",
                                          "simulate-hbt", "budget-report", "reproduce-paper"};
  return c;
}

std::string tool_version() { return MOLWG_VERSION; }

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

std::string RunManifest::to_json() const {
  json outs = json::array();
  for (const auto& o : outputs) outs.push_back(json{{"path", o.path}, {"sha256", o.sha256}});
  json s = json::object();
  for (const auto& [k, v] : seeds) s[k] = v;
  json doc{{"command", command},   {"config_digest", config_digest}, {"seeds", s},
           {"tool_version", tool_version}, {"timestamp", timestamp}, {"outputs", outs}};
  return doc.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  const json doc = json::parse(text);
  RunManifest m;
  m.command = doc.at("command").get<std::string>();
  m.config_digest = doc.at("config_digest").get<std::string>();
  for (const auto& [k, v] : doc.at("seeds").items()) m.seeds[k] = v.get<std::uint64_t>();
  m.tool_version = doc.at("tool_version").get<std::string>();
  m.timestamp = doc.at("timestamp").get<std::string>();
  for (const auto& o : doc.at("outputs"))
    m.outputs.push_back({o.at("path").get<std::string>(), o.at("sha256").get<std::string>()});
  return m;
}

RunManifest run_command(const std::string& command, const config::ExperimentConfig& cfg,
                        const RunOptions& opt, std::vector<std::string>* warnings) {
  const auto it = handlers().find(command);
  if (it == handlers().end()) throw CommandError("unknown command '" + command + "'");

  std::vector<std::string> local;
  std::vector<std::string>& warn = warnings ? *warnings : local;
  auto seeds = cfg.seeds;
  for (const auto& [k, v] : opt.seed_overrides) {
    if (!seeds.count(k)) warn.push_back("seed '" + k + "' is not used by any command");
    seeds[k] = v;
  }
  Context ctx{command, cfg, seeds, std::max(1u, opt.threads), warn, {}};
  it->second(ctx);

  const fs::path dir = opt.out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(opt.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CommandError("cannot create output directory '" + dir.string() + "': " + ec.message());

  RunManifest m;
  m.command = command;
  m.config_digest = sha256_hex(cfg.source_text);
  m.seeds = seeds;
  m.tool_version = tool_version();
  m.timestamp = utc_now();
  for (const auto& [name, bytes] : ctx.staging.files()) {
    write_atomic(dir, name, bytes);
    m.outputs.push_back({name, sha256_hex(bytes)});
  }
  write_atomic(dir, command + kManifestSuffix, m.to_json());
  return m;
}

AuditReport audit(const std::string& dir) {
  AuditReport rep;
  const fs::path root(dir);
  if (!fs::is_directory(root)) {
    rep.problems.push_back("'" + dir + "' is not a directory");
    return rep;
  }
  std::vector<fs::path> manifests, files;
  for (const auto& e : fs::directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name.size() > kManifestSuffix.size() &&
        name.compare(name.size() - kManifestSuffix.size(), kManifestSuffix.size(), kManifestSuffix) == 0)
      manifests.push_back(e.path());
    else
      files.push_back(e.path());
  }
  std::sort(manifests.begin(), manifests.end());
  std::sort(files.begin(), files.end());

  std::map<std::string, std::vector<std::string>> owners;
  for (const auto& mp : manifests) {
    const std::string mname = mp.filename().string();
    RunManifest m;
    try {
      std::ifstream in(mp, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      m = RunManifest::from_json(ss.str());
    } catch (const std::exception& e) {
      rep.problems.push_back(mname + ": unreadable manifest: " + e.what());
      continue;
    }
    ++rep.manifests;
    for (const auto& o : m.outputs) {
      owners[o.path].push_back(mname);
      const fs::path p = root / o.path;
      if (!fs::is_regular_file(p)) {
        rep.problems.push_back(mname + ": missing output '" + o.path + "'");
        continue;
      }
      if (sha256_file(p.string()) != o.sha256)
        rep.problems.push_back(mname + ": digest mismatch for '" + o.path + "'");
    }
  }
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    ++rep.outputs;
    const auto it = owners.find(name);
    if (it == owners.end()) {
      rep.problems.push_back("orphan output '" + name + "' is not referenced by any manifest");
    } else if (it->second.size() > 1) {
      std::string who;
      for (const auto& o : it->second) who += (who.empty() ? "" : ", ") + o;
      rep.problems.push_back("output '" + name + "' is referenced by several manifests: " + who);
    }
  }
  return rep;
}

}  // namespace molwg::cli
