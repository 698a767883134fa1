#include "molwg/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "molwg/error.hpp"

namespace molwg::config {

namespace {

using Errors = std::vector<std::string>;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("'" + t + "' is not a number");
  }
  if (used != t.size()) throw std::invalid_argument("'" + t + "' is not a number");
  if (!std::isfinite(v)) throw std::invalid_argument("'" + t + "' is not finite");
  return v;
}

struct Range {
  double lo = -kInf, hi = kInf;
  bool lo_open = false, hi_open = false;

  bool contains(double v) const {
    return (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
  }
  std::string str() const {
    std::ostringstream os;
    os << (lo_open ? "(" : "[") << lo << ", " << hi << (hi_open ? ")" : "]");
    return os.str();
  }
};

const Range kPositive{0.0, kInf, true, false};
const Range kNonNegative{0.0, kInf, false, false};
const Range kFraction{0.0, 1.0, false, false};
const Range kOpenFraction{0.0, 1.0, true, false};
const Range kIndex{1.0, kInf, false, false};

struct Field {
  std::string section;
  std::string key;
  bool required = false;
  std::function<void(const std::string&, ExperimentConfig&)> apply;  // throws on bad input
};

std::string where(const Field& f) { return "[" + f.section + "] " + f.key; }

template <typename Get>
Field number(std::string section, std::string key, Range range, Get get, bool required = false) {
  return {section, key, required, [range, get](const std::string& text, ExperimentConfig& c) {
            const double v = to_double(text);
            if (!range.contains(v))
              throw std::out_of_range("value " + trim(text) + " is out of range " + range.str());
            get(c) = v;
          }};
}

// Uncertain inputs: "value" or "value +- sigma". A bare value gets the default
// relative sigma.
template <typename Get>
Field quantity(std::string section, std::string key, Range range, Get get, bool required,
               double default_rel_sigma = 0.0) {
  return {section, key, required,
          [range, get, default_rel_sigma](const std::string& text, ExperimentConfig& c) {
            auto [v, s] = parse_value(text);
            if (!range.contains(v)) {
              std::ostringstream os;
              os << "value " << v << " is out of range " << range.str();
              throw std::out_of_range(os.str());
            }
            const bool has_sigma = text.find("+-") != std::string::npos ||
                                   text.find("\xC2\xB1") != std::string::npos;
            if (!has_sigma) s = default_rel_sigma * std::abs(v);
            Quantity& q = get(c);
            q = Quantity(v, s, q.unit);
          }};
}

std::vector<double> parse_list(const std::string& text) {
  std::string t = text;
  for (auto& ch : t)
    if (ch == ',') ch = ' ';
  std::istringstream is(t);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) out.push_back(to_double(tok));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

std::vector<Field> schema() {
  std::vector<Field> f;
  auto geo = [](ExperimentConfig& c) -> modes::RidgeGeometry& { return c.device_model.geometry; };
  f.push_back(number("geometry", "ridge_width_nm", kPositive, [=](ExperimentConfig& c) -> double& { return geo(c).ridge_width_nm; }));
  f.push_back(number("geometry", "ridge_thickness_nm", kPositive, [=](ExperimentConfig& c) -> double& { return geo(c).ridge_thickness_nm; }));
  f.push_back(number("geometry", "film_thickness_nm", kNonNegative, [=](ExperimentConfig& c) -> double& { return geo(c).film_thickness_nm; }));
  f.push_back(number("geometry", "n_substrate", kIndex, [=](ExperimentConfig& c) -> double& { return geo(c).n_substrate; }));
  f.push_back(number("geometry", "n_core", kIndex, [=](ExperimentConfig& c) -> double& { return geo(c).n_core; }));
  f.push_back(number("geometry", "n_film", kIndex, [=](ExperimentConfig& c) -> double& { return geo(c).n_film; }));
  f.push_back(number("geometry", "n_cover", kIndex, [=](ExperimentConfig& c) -> double& { return geo(c).n_cover; }));
  f.push_back(number("geometry", "margin_side_nm", {1000.0, kInf}, [=](ExperimentConfig& c) -> double& { return geo(c).margin_side_nm; }));
  f.push_back(number("geometry", "margin_bottom_nm", {1000.0, kInf}, [=](ExperimentConfig& c) -> double& { return geo(c).margin_bottom_nm; }));
  f.push_back(number("geometry", "margin_top_nm", {1000.0, kInf}, [=](ExperimentConfig& c) -> double& { return geo(c).margin_top_nm; }));
  f.push_back(number("geometry", "wavelength_nm", kPositive, [](ExperimentConfig& c) -> double& { return c.device_model.wavelength_nm; }));
  f.push_back(number("geometry", "grid_nm", {0.5, 200.0}, [](ExperimentConfig& c) -> double& { return c.device_model.solver.dx_nm; }));
  f.push_back(number("geometry", "group_index_delta_nm", {0.1, 5.0}, [](ExperimentConfig& c) -> double& { return c.device_model.group_index_delta_nm; }));
  f.push_back({"geometry", "max_modes", false, [](const std::string& t, ExperimentConfig& c) {
                 const double v = to_double(t);
                 if (v < 1 || v > 50 || v != std::floor(v)) throw std::out_of_range("must be an integer in [1, 50]");
                 c.max_modes = static_cast<std::size_t>(v);
               }});
  f.push_back({"geometry", "family", false, [](const std::string& t, ExperimentConfig& c) {
                 const std::string v = trim(t);
                 if (v == "quasi-TE") c.device_model.solver.family = modes::Family::QuasiTE;
                 else if (v == "quasi-TM") c.device_model.solver.family = modes::Family::QuasiTM;
                 else throw std::invalid_argument("expected quasi-TE or quasi-TM, got '" + v + "'");
               }});

  f.push_back(number("dipole", "dy_nm", kNonNegative, [](ExperimentConfig& c) -> double& { return c.dy_nm; }));
  f.push_back(number("dipole", "lateral_offset_nm", {}, [](ExperimentConfig& c) -> double& { return c.device_model.lateral_offset_nm; }));
  f.push_back({"dipole", "orientation", false, [](const std::string& t, ExperimentConfig& c) {
                 const auto v = parse_list(t);
                 if (v.size() != 3) throw std::invalid_argument("expected three components");
                 const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
                 if (!(n > 0.0)) throw std::invalid_argument("orientation must be nonzero");
                 c.device_model.orientation = {v[0] / n, v[1] / n, v[2] / n};
               }});
  f.push_back(number("collection", "numerical_aperture", kPositive, [](ExperimentConfig& c) -> double& { return c.numerical_aperture; }));
  f.push_back({"collection", "side", false, [](const std::string& t, ExperimentConfig& c) {
                 const std::string v = trim(t);
                 if (v == "up") c.collection_side = stratified::Hemisphere::Up;
                 else if (v == "down") c.collection_side = stratified::Hemisphere::Down;
                 else throw std::invalid_argument("expected up or down, got '" + v + "'");
               }});

  f.push_back(number("emitter", "lifetime_ns", kPositive, [](ExperimentConfig& c) -> double& { return c.emitter.lifetime_ns; }, true));
  f.push_back(number("emitter", "saturation", kNonNegative, [](ExperimentConfig& c) -> double& { return c.emitter.saturation; }, true));
  f.push_back(number("emitter", "quantum_yield", kOpenFraction, [](ExperimentConfig& c) -> double& { return c.emitter.quantum_yield; }));
  f.push_back(number("emitter", "isc_yield", kFraction, [](ExperimentConfig& c) -> double& { return c.emitter.isc_yield; }));
  f.push_back(number("emitter", "triplet_lifetime_ns", kPositive, [](ExperimentConfig& c) -> double& { return c.emitter.triplet_lifetime_ns; }));
  f.push_back(number("emitter", "duration_ns", kPositive, [](ExperimentConfig& c) -> double& { return c.duration_ns; }));

  f.push_back(number("detection", "efficiency", kFraction, [](ExperimentConfig& c) -> double& { return c.detection.efficiency; }));
  f.push_back(number("detection", "background_hz", kNonNegative, [](ExperimentConfig& c) -> double& { return c.detection.background_hz; }));
  f.push_back(number("detection", "signal_fraction", kOpenFraction, [](ExperimentConfig& c) -> double& { return c.detection.signal_fraction; }));
  f.push_back(number("detection", "dead_time_ns", kNonNegative, [](ExperimentConfig& c) -> double& { return c.detection.dead_time_ns; }));
  f.push_back(number("detection", "bin_width_ps", {1.0, kInf}, [](ExperimentConfig& c) -> double& { return c.detection.bin_width_ps; }));
  f.push_back(number("detection", "window_ns", kPositive, [](ExperimentConfig& c) -> double& { return c.detection.window_ns; }));
  f.push_back({"detection", "timetag_format", false, [](const std::string& t, ExperimentConfig& c) {
                 const std::string v = trim(t);
                 if (v != "binary" && v != "csv") throw std::invalid_argument("expected binary or csv");
                 c.detection.timetag_format = v;
               }});

  // Device budget. Entries known only approximately default to 10 % relative sigma.
  auto dev = [&f](std::string key, Range r, Quantity budget::EfficiencyBudget::*m, double rel = 0.0) {
    f.push_back(quantity("device", key, r, [m](ExperimentConfig& c) -> Quantity& { return c.device.*m; }, true, rel));
  };
  dev("tau", kPositive, &budget::EfficiencyBudget::tau);
  dev("QY", kOpenFraction, &budget::EfficiencyBudget::QY, 0.10);
  dev("s", kPositive, &budget::EfficiencyBudget::s, 0.10);
  dev("eta_c", kOpenFraction, &budget::EfficiencyBudget::eta_c);
  dev("eta_opt", kOpenFraction, &budget::EfficiencyBudget::eta_opt, 0.10);
  dev("eta_det", kOpenFraction, &budget::EfficiencyBudget::eta_det, 0.10);
  dev("eta_f", kOpenFraction, &budget::EfficiencyBudget::eta_f);
  dev("S_c", kNonNegative, &budget::EfficiencyBudget::S_c);
  dev("B", kNonNegative, &budget::EfficiencyBudget::B);
  dev("g2_zero", kNonNegative, &budget::EfficiencyBudget::g2_zero);
  f.push_back(quantity("device", "S_coupler_image", kNonNegative, [](ExperimentConfig& c) -> Quantity& { return c.device.S_coupler_image; }, false));
  f.push_back(quantity("device", "S_free_image", kNonNegative, [](ExperimentConfig& c) -> Quantity& { return c.device.S_free_image; }, false));

  auto best = [&f](std::string key, Range r, Quantity budget::SaturationProfile::*m, double rel = 0.0) {
    f.push_back(quantity("best_device", key, r, [m](ExperimentConfig& c) -> Quantity& { return c.best_device.*m; }, false, rel));
  };
  best("tau", kPositive, &budget::SaturationProfile::tau);
  best("QY", kOpenFraction, &budget::SaturationProfile::QY, 0.10);
  best("eta_c", kOpenFraction, &budget::SaturationProfile::eta_c);
  best("beta", kFraction, &budget::SaturationProfile::beta);

  f.push_back({"sweep", "dy_nm", false, [](const std::string& t, ExperimentConfig& c) {
                 c.sweep_dy_nm = parse_list(t);
                 for (double v : c.sweep_dy_nm)
                   if (!(v >= 0.0)) throw std::out_of_range("heights must be >= 0");
               }});
  f.push_back({"sweep", "h_nm", false, [](const std::string& t, ExperimentConfig& c) {
                 c.sweep_h_nm = parse_list(t);
                 for (double v : c.sweep_h_nm)
                   if (!(v > 0.0)) throw std::out_of_range("thicknesses must be > 0");
               }});
  f.push_back({"output", "dir", false, [](const std::string& t, ExperimentConfig& c) {
                 c.output_dir = trim(t);
                 if (c.output_dir.empty()) throw std::invalid_argument("empty directory");
               }});
  return f;
}

std::uint64_t parse_seed(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
    throw std::invalid_argument("seed must be an unsigned 64-bit integer");
  try {
    return std::stoull(t);
  } catch (const std::out_of_range&) {
    throw std::out_of_range("seed exceeds 64 bits");
  }
}

}  // namespace

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::string msg = "invalid configuration (" + std::to_string(errors.size()) + " problem" +
                    (errors.size() == 1 ? "" : "s") + ")";
  for (const auto& e : errors) msg += "\n  " + e;
  return msg;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

std::pair<double, double> parse_value(const std::string& text) {
  std::string t = text;
  std::size_t pos = t.find("+-");
  std::size_t len = 2;
  if (pos == std::string::npos) {
    pos = t.find("\xC2\xB1");  // UTF-8 plus-minus sign
    len = 2;
  }
  if (pos == std::string::npos) return {to_double(t), 0.0};
  const double v = to_double(t.substr(0, pos));
  const double s = to_double(t.substr(pos + len));
  if (s < 0.0) throw std::out_of_range("sigma must be >= 0");
  return {v, s};
}

ExperimentConfig parse_config_text(const std::string& text, bool strict) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError({std::string("syntax: ") + e.message() + " (line " + std::to_string(e.line()) + ")"});
  }

  ExperimentConfig c;
  c.source_text = text;
  c.device_model.solver.dy_nm = c.device_model.solver.dx_nm;
  Errors errors;
  const auto fields = schema();
  std::set<std::pair<std::string, std::string>> known;
  for (const auto& f : fields) {
    known.emplace(f.section, f.key);
    const auto sec = tree.get_child_optional(f.section);
    const auto node = sec ? sec->get_child_optional(f.key) : boost::none;
    if (!node) {
      if (f.required) errors.push_back(where(f) + ": missing required key");
      continue;
    }
    try {
      f.apply(node->data(), c);
    } catch (const std::exception& e) {
      errors.push_back(where(f) + ": " + e.what());
    }
  }
  c.device_model.solver.dy_nm = c.device_model.solver.dx_nm;

  for (const auto& [section, body] : tree) {
    if (section == "seeds") {
      for (const auto& [key, node] : body) {
        try {
          c.seeds[key] = parse_seed(node.data());
        } catch (const std::exception& e) {
          errors.push_back("[seeds] " + key + ": " + e.what());
        }
      }
      continue;
    }
    if (body.empty() && !body.data().empty()) {
      (strict ? errors : c.warnings).push_back("key '" + section + "' outside any section");
      continue;
    }
    for (const auto& [key, node] : body) {
      if (known.count({section, key})) continue;
      const std::string msg = "unknown key [" + section + "] " + key;
      (strict ? errors : c.warnings).push_back(msg);
    }
  }

  // Cross-field checks, only meaningful once the fields themselves parsed.
  if (errors.empty()) {
    const auto& g = c.device_model.geometry;
    if (c.dy_nm > g.film_thickness_nm)
      errors.push_back("[dipole] dy_nm: must not exceed [geometry] film_thickness_nm");
    const double n_out = c.collection_side == stratified::Hemisphere::Up ? g.n_cover : g.n_substrate;
    if (c.numerical_aperture > n_out)
      errors.push_back("[collection] numerical_aperture: exceeds the index of the collection medium");
    try {
      c.device.validate();
    } catch (const std::exception& e) {
      errors.push_back(std::string("[device] ") + e.what());
    }
    if (c.device.B.value >= c.device.S_c.value)
      errors.push_back("[device] B: background must be below S_c");
    try {
      c.best_device.validate();
    } catch (const std::exception& e) {
      errors.push_back(std::string("[best_device] ") + e.what());
    }
    if (c.detection.window_ns * 1000.0 < 20.0 * c.detection.bin_width_ps)
      errors.push_back("[detection] window_ns: needs at least 20 bins per side");
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

ExperimentConfig parse_config(const std::string& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({"cannot open config file '" + path + "'"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), strict);
}

}  // namespace molwg::config
