#pragma once

// Efficiency-budget algebra for a waveguide-coupled single-photon source, with
// first-order propagation of independent Gaussian uncertainties.

#include <iosfwd>
#include <string>
#include <vector>

#include "molwg/quantity.hpp"

namespace molwg::budget {

/// Measured and assumed figures of one device. Rates in Hz, tau in ns,
/// efficiencies as fractions; image intensities in arbitrary camera units.
struct EfficiencyBudget {
  Quantity tau{4.2, 0.4, "ns"};
  Quantity QY{0.95, 0.095, ""};
  Quantity s{0.2, 0.02, ""};
  Quantity eta_c{0.25, 0.02, ""};
  Quantity eta_opt{0.10, 0.01, ""};
  Quantity eta_det{0.50, 0.05, ""};
  Quantity eta_f{0.05, 0.015, ""};
  Quantity S_c{48e3, 4e3, "Hz"};
  Quantity B{10e3, 2e3, "Hz"};
  Quantity g2_zero{0.50, 0.05, ""};
  Quantity S_coupler_image{250.0, 5.0, "counts"};
  Quantity S_free_image{200.0, 4.0, "counts"};

  /// Throws DomainError naming the first offending field.
  void validate() const;
};

/// Best-device figures used for the extrapolation to saturation.
struct SaturationProfile {
  Quantity tau{4.2, 0.4, "ns"};
  Quantity QY{0.95, 0.095, ""};
  Quantity eta_c{0.40, 0.02, ""};
  Quantity beta{0.42, 0.02, ""};

  void validate() const;
};

struct CouplerModel {
  Quantity peak_efficiency{0.35, 0.05, ""};
  double center_wavelength_nm = 785.0;
  double bandwidth_fwhm_nm = 50.0;
  double output_mode_fwhm_um = 4.0;
};

Quantity coupler_efficiency_from_throughput(const Quantity& throughput);
/// Gaussian spectral profile peak * exp(-4 ln2 (lambda - center)^2 / FWHM^2).
double coupler_response(const CouplerModel& model, double wavelength_nm);
/// 10^(-loss * length / 10).
double propagation_transmission(double length_cm, double loss_db_per_cm);

/// (S_c - B) 2 tau (s+1)/s / (QY eta_c eta_opt eta_det).
Quantity beta_from_count_rate(const EfficiencyBudget& b);
/// (S_c/eta_c) / (S_c/eta_c + S_f/eta_f) from image intensities.
Quantity beta_from_images(const Quantity& S_coupler, const Quantity& S_free, const Quantity& eta_c,
                          const Quantity& eta_f);
/// QY beta / (4 tau), in Hz.
Quantity saturation_on_chip_rate(const Quantity& tau_ns, const Quantity& QY, const Quantity& beta);
/// QY beta eta_c.
Quantity off_chip_brightness(const Quantity& QY, const Quantity& beta, const Quantity& eta_c);
/// (1/(2 tau)) (s/(1+s)) QY beta eta_c eta_opt eta_det, in Hz.
Quantity expected_detected_rate(const EfficiencyBudget& b, const Quantity& beta);
/// Signal-to-total ratio (S_c - B)/S_c.
Quantity signal_fraction(const Quantity& S_c, const Quantity& B);

struct ReportRow {
  int table = 1;
  std::string key;
  std::string description;
  Quantity value;
  bool derived = false;
};

struct Report {
  std::vector<ReportRow> rows;
  std::vector<std::string> notes;

  const ReportRow& row(const std::string& key) const;
};

/// Inputs and derived figures of both tables, plus notes on known discrepancies.
Report build_report(const EfficiencyBudget& device, const SaturationProfile& best);

/// CSV: table,key,description,value,sigma,unit,kind
void write_report_csv(std::ostream& os, const Report& r);
/// Aligned two-table plain-text rendering with notes.
void write_report_text(std::ostream& os, const Report& r);

std::string to_json(const EfficiencyBudget& b);
EfficiencyBudget budget_from_json(const std::string& text);

}  // namespace molwg::budget
