#include "molwg/budget.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "molwg/error.hpp"
#include "molwg/photostats.hpp"

namespace molwg::budget {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw DomainError(msg);
}

void fraction(const Quantity& q, const char* name) {
  require(q.value >= 0.0 && q.value <= 1.0, std::string(name) + " must lie in [0, 1]");
}

void positive(const Quantity& q, const char* name) {
  require(q.value > 0.0, std::string(name) + " must be > 0");
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

// Field table shared by the JSON reader and writer.
template <typename Budget, typename F>
void for_each_field(Budget& b, F&& f) {
  f("tau", b.tau);
  f("QY", b.QY);
  f("s", b.s);
  f("eta_c", b.eta_c);
  f("eta_opt", b.eta_opt);
  f("eta_det", b.eta_det);
  f("eta_f", b.eta_f);
  f("S_c", b.S_c);
  f("B", b.B);
  f("g2_zero", b.g2_zero);
  f("S_coupler_image", b.S_coupler_image);
  f("S_free_image", b.S_free_image);
}

}  // namespace

void EfficiencyBudget::validate() const {
  positive(tau, "tau");
  fraction(QY, "QY");
  positive(QY, "QY");
  require(s.value >= 0.0, "s must be >= 0");
  fraction(eta_c, "eta_c");
  fraction(eta_opt, "eta_opt");
  fraction(eta_det, "eta_det");
  fraction(eta_f, "eta_f");
  require(S_c.value >= 0.0, "S_c must be >= 0");
  require(B.value >= 0.0, "B must be >= 0");
  require(g2_zero.value >= 0.0, "g2_zero must be >= 0");
  require(S_coupler_image.value >= 0.0, "S_coupler_image must be >= 0");
  require(S_free_image.value >= 0.0, "S_free_image must be >= 0");
}

void SaturationProfile::validate() const {
  positive(tau, "tau");
  fraction(QY, "QY");
  fraction(eta_c, "eta_c");
  fraction(beta, "beta");
}

Quantity coupler_efficiency_from_throughput(const Quantity& t) {
  require(t.value >= 0.0, "throughput must be >= 0");
  require(t.value <= 1.0, "throughput must be <= 1");
  const double v = std::sqrt(t.value);
  const double sigma = t.sigma == 0.0 ? 0.0 : (v > 0.0 ? t.sigma / (2.0 * v) : INFINITY);
  return {v, sigma, ""};
}

double coupler_response(const CouplerModel& m, double wavelength_nm) {
  require(wavelength_nm > 0.0, "wavelength must be > 0");
  require(m.bandwidth_fwhm_nm > 0.0, "coupler bandwidth must be > 0");
  fraction(m.peak_efficiency, "peak_efficiency");
  const double d = wavelength_nm - m.center_wavelength_nm;
  return m.peak_efficiency.value *
         std::exp(-4.0 * std::log(2.0) * d * d / (m.bandwidth_fwhm_nm * m.bandwidth_fwhm_nm));
}

double propagation_transmission(double length_cm, double loss_db_per_cm) {
  require(length_cm >= 0.0, "length must be >= 0");
  require(loss_db_per_cm >= 0.0, "loss must be >= 0");
  return std::pow(10.0, -loss_db_per_cm * length_cm / 10.0);
}

Quantity beta_from_count_rate(const EfficiencyBudget& b) {
  require(b.s.value > 0.0, "s must be > 0");
  const double den = b.QY.value * b.eta_c.value * b.eta_opt.value * b.eta_det.value;
  require(den > 0.0, "QY and all efficiencies must be > 0");
  require(b.tau.value > 0.0, "tau must be > 0");
  const double net = b.S_c.value - b.B.value;
  require(net >= 0.0, "background exceeds the count rate");
  const double s = b.s.value;
  const double beta = net * 2.0 * b.tau.value * 1e-9 * (s + 1.0) / s / den;
  // d beta / d(S_c - B), written without dividing by a possibly zero net rate.
  const double d_net = 2.0 * b.tau.value * 1e-9 * (s + 1.0) / s / den;
  const double sigma = propagate({{d_net, b.S_c.sigma},
                                  {-d_net, b.B.sigma},
                                  {beta / b.tau.value, b.tau.sigma},
                                  {-beta / (s * (s + 1.0)), b.s.sigma},
                                  {-beta / b.QY.value, b.QY.sigma},
                                  {-beta / b.eta_c.value, b.eta_c.sigma},
                                  {-beta / b.eta_opt.value, b.eta_opt.sigma},
                                  {-beta / b.eta_det.value, b.eta_det.sigma}});
  return {beta, sigma, ""};
}

Quantity beta_from_images(const Quantity& S_coupler, const Quantity& S_free, const Quantity& eta_c,
                          const Quantity& eta_f) {
  require(eta_c.value > 0.0 && eta_f.value > 0.0, "collection efficiencies must be > 0");
  require(S_coupler.value >= 0.0 && S_free.value >= 0.0, "image intensities must be >= 0");
  const double a = S_coupler.value / eta_c.value;
  const double c = S_free.value / eta_f.value;
  require(a + c > 0.0, "both image intensities are zero");
  const double beta = a / (a + c);
  const double da = c / ((a + c) * (a + c));
  const double dc = -a / ((a + c) * (a + c));
  const double sigma = propagate({{da / eta_c.value, S_coupler.sigma},
                                  {-da * a / eta_c.value, eta_c.sigma},
                                  {dc / eta_f.value, S_free.sigma},
                                  {-dc * c / eta_f.value, eta_f.sigma}});
  return {beta, sigma, ""};
}

Quantity saturation_on_chip_rate(const Quantity& tau_ns, const Quantity& QY, const Quantity& beta) {
  require(tau_ns.value > 0.0, "tau must be > 0");
  const double rate = QY.value * beta.value / (4.0 * tau_ns.value * 1e-9);
  const double sigma = propagate({{beta.value / (4.0 * tau_ns.value * 1e-9), QY.sigma},
                                  {QY.value / (4.0 * tau_ns.value * 1e-9), beta.sigma},
                                  {-rate / tau_ns.value, tau_ns.sigma}});
  return {rate, sigma, "Hz"};
}

Quantity off_chip_brightness(const Quantity& QY, const Quantity& beta, const Quantity& eta_c) {
  fraction(QY, "QY");
  fraction(beta, "beta");
  fraction(eta_c, "eta_c");
  const double v = QY.value * beta.value * eta_c.value;
  const double sigma = propagate({{beta.value * eta_c.value, QY.sigma},
                                  {QY.value * eta_c.value, beta.sigma},
                                  {QY.value * beta.value, eta_c.sigma}});
  return {v, sigma, ""};
}

Quantity expected_detected_rate(const EfficiencyBudget& b, const Quantity& beta) {
  require(b.tau.value > 0.0, "tau must be > 0");
  require(b.s.value >= 0.0, "s must be >= 0");
  const double s = b.s.value;
  const double chain = b.QY.value * b.eta_c.value * b.eta_opt.value * b.eta_det.value;
  const double base = 1.0 / (2.0 * b.tau.value * 1e-9);
  const double emit = base * s / (1.0 + s);
  const double rate = emit * chain * beta.value;
  const double k = emit * beta.value;  // rate per unit of the efficiency product
  const double sigma = propagate({{-rate / b.tau.value, b.tau.sigma},
                                  {base * chain * beta.value / ((1.0 + s) * (1.0 + s)), b.s.sigma},
                                  {emit * chain, beta.sigma},
                                  {k * b.eta_c.value * b.eta_opt.value * b.eta_det.value, b.QY.sigma},
                                  {k * b.QY.value * b.eta_opt.value * b.eta_det.value, b.eta_c.sigma},
                                  {k * b.QY.value * b.eta_c.value * b.eta_det.value, b.eta_opt.sigma},
                                  {k * b.QY.value * b.eta_c.value * b.eta_opt.value, b.eta_det.sigma}});
  return {rate, sigma, "Hz"};
}

Quantity signal_fraction(const Quantity& S_c, const Quantity& B) {
  require(S_c.value > 0.0, "S_c must be > 0");
  require(B.value >= 0.0 && B.value < S_c.value, "requires 0 <= B < S_c");
  const double p = (S_c.value - B.value) / S_c.value;
  const double sigma = propagate({{B.value / (S_c.value * S_c.value), S_c.sigma},
                                  {-1.0 / S_c.value, B.sigma}});
  return {p, sigma, ""};
}

const ReportRow& Report::row(const std::string& key) const {
  for (const auto& r : rows)
    if (r.key == key) return r;
  throw std::out_of_range("report has no row '" + key + "'");
}

Report build_report(const EfficiencyBudget& d, const SaturationProfile& best) {
  d.validate();
  best.validate();
  Report r;
  auto add = [&r](int table, std::string key, std::string desc, Quantity q, bool derived) {
    r.rows.push_back({table, std::move(key), std::move(desc), std::move(q), derived});
  };
  add(1, "g2_zero", "off-chip purity at the coupler", d.g2_zero, false);
  add(1, "S_c", "fluorescence signal", d.S_c, false);
  add(1, "B", "background", d.B, false);
  add(1, "tau", "lifetime", d.tau, false);
  add(1, "QY", "quantum yield", d.QY, false);
  add(1, "s", "saturation parameter", d.s, false);
  add(1, "eta_c", "coupler efficiency", d.eta_c, false);
  add(1, "eta_opt", "optics transmission", d.eta_opt, false);
  add(1, "eta_det", "detector efficiency", d.eta_det, false);
  add(1, "eta_f", "free-space collection efficiency", d.eta_f, false);
  const Quantity p = signal_fraction(d.S_c, d.B);
  add(1, "p", "guided-click probability (S_c - B)/S_c", p, true);
  const Quantity g2_on = photostats::on_chip_purity(d.g2_zero, d.S_c, d.B);
  add(1, "g2_on", "on-chip purity", g2_on, true);
  add(1, "beta_est", "coupling from count rate", beta_from_count_rate(d), true);
  add(1, "beta_meas", "coupling from images",
      beta_from_images(d.S_coupler_image, d.S_free_image, d.eta_c, d.eta_f), true);

  add(2, "eta_c", "coupler efficiency", best.eta_c, false);
  add(2, "beta_meas", "coupling from images", best.beta, false);
  add(2, "S_on_sat", "on-chip photon flux at saturation",
      saturation_on_chip_rate(best.tau, best.QY, best.beta), true);
  add(2, "BR_off_sat", "off-chip brightness at saturation",
      off_chip_brightness(best.QY, best.beta, best.eta_c), true);

  char buf[256];
  std::snprintf(buf, sizeof buf,
                "warning: on-chip purity from these inputs is %.4f +- %.4f (p = %.4f); the "
                "reference value 0.02 +- 0.12 is not reproduced by direct substitution",
                g2_on.value, g2_on.sigma, p.value);
  r.notes.emplace_back(buf);
  return r;
}

void write_report_csv(std::ostream& os, const Report& r) {
  os << "table,key,description,value,sigma,unit,kind\n";
  for (const auto& row : r.rows)
    os << row.table << ',' << row.key << ",\"" << row.description << "\"," << num(row.value.value)
       << ',' << num(row.value.sigma) << ',' << row.value.unit << ','
       << (row.derived ? "derived" : "input") << '\n';
}

void write_report_text(std::ostream& os, const Report& r) {
  for (int table : {1, 2}) {
    os << (table == 1 ? "Table 1: device performance and efficiencies\n"
                      : "Table 2: best device, extrapolated to saturation\n");
    char buf[256];
    for (const auto& row : r.rows) {
      if (row.table != table) continue;
      std::snprintf(buf, sizeof buf, "  %-11s %-40s %14.6g +- %-12.4g %-4s %s\n", row.key.c_str(),
                    row.description.c_str(), row.value.value, row.value.sigma,
                    row.value.unit.c_str(), row.derived ? "(derived)" : "");
      os << buf;
    }
    os << '\n';
  }
  for (const auto& n : r.notes) os << n << '\n';
}

std::string to_json(const EfficiencyBudget& b) {
  nlohmann::ordered_json j;
  for_each_field(b, [&j](const char* name, const Quantity& q) {
    j[name] = {{"value", q.value}, {"sigma", q.sigma}, {"unit", q.unit}};
  });
  return j.dump(2);
}

EfficiencyBudget budget_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw StructuralError(std::string("budget JSON: ") + e.what());
  }
  EfficiencyBudget b;
  for_each_field(b, [&j](const char* name, Quantity& q) {
    if (!j.contains(name)) return;  // keep the default
    const auto& f = j.at(name);
    try {
      if (f.is_number()) {
        q = Quantity(f.get<double>(), 0.0, q.unit);
      } else {
        q = Quantity(f.at("value").get<double>(), f.value("sigma", 0.0), f.value("unit", q.unit));
      }
    } catch (const nlohmann::json::exception& e) {
      throw StructuralError(std::string("budget JSON field '") + name + "': " + e.what());
    }
  });
  b.validate();
  return b;
}

}  // namespace molwg::budget
