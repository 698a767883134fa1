#pragma once

// Photon streams from a single three-level emitter, a simple detection chain,
// Hanbury Brown-Twiss splitting and g2(tau) analysis. Timestamps are integer
// picoseconds.

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "molwg/quantity.hpp"

namespace molwg::photostats {

struct EmitterParams {
  double lifetime_ns = 4.2;
  double saturation = 0.2;           ///< s = pump / saturation pump
  double isc_yield = 0.0;            ///< triplet branching per decay
  double triplet_lifetime_ns = 5000.0;
  double quantum_yield = 1.0;

  /// Throws DomainError on out-of-range values.
  void validate() const;
  /// Pump rate (1/ns) giving a steady-state emission rate (1/(2 tau)) s/(1+s).
  double pump_rate() const;
  /// Expected photon rate in Hz, ignoring triplet shelving.
  double expected_rate_hz() const;
  /// Antibunching recovery time 1/(pump + 1/tau) in ns.
  double recovery_time_ns() const;
};

struct TimestampStream {
  std::uint8_t detector_id = 0;
  std::vector<std::uint64_t> timestamps_ps;  ///< strictly increasing
  std::uint64_t duration_ps = 0;
  std::map<std::string, std::string> metadata;

  std::size_t size() const { return timestamps_ps.size(); }
  double rate_hz() const;
  /// Strictly increasing and within [0, duration].
  bool well_formed() const;
};

/// Event-by-event kinetic Monte Carlo over ground, excited and triplet states.
/// Appends a note to `warnings` (if given) when the run is short compared with tau.
TimestampStream simulate_emitter(const EmitterParams& params, double duration_ns,
                                 std::uint64_t seed, std::vector<std::string>* warnings = nullptr);

/// Bernoulli thinning, Poisson background, then non-paralyzable dead time.
TimestampStream apply_detection(const TimestampStream& in, double efficiency,
                                double background_hz, double dead_time_ns, std::uint64_t seed);

/// 50/50 random routing to detectors 1 and 2.
std::pair<TimestampStream, TimestampStream> hbt_split(const TimestampStream& in, std::uint64_t seed);

struct G2Histogram {
  double bin_width_ps = 0.0;
  double window_ns = 0.0;
  std::vector<double> delays_ps;              ///< bin centers, t2 - t1
  std::vector<std::uint64_t> raw_coincidences;
  std::vector<double> normalized;
  double rate1_hz = 0.0;
  double rate2_hz = 0.0;
  double duration_ps = 0.0;
  std::vector<std::string> warnings;
};

/// Pair counting of all |t2 - t1| <= window into bins centered on multiples of
/// the bin width, normalized by r1 r2 bin_width (T - |tau|).
G2Histogram g2_histogram(const TimestampStream& s1, const TimestampStream& s2,
                         double bin_width_ps, double window_ns, unsigned threads = 1);

struct G2Fit {
  double g2_zero = 0.0;
  double b = 0.0;
  double T_ns = 0.0;
  double sigma_g2_zero = 0.0;
  double sigma_b = 0.0;
  double sigma_T_ns = 0.0;
  double reduced_chi2 = 0.0;
  int iterations = 0;
};

/// Weighted Levenberg-Marquardt fit of 1 - b exp(-|tau|/T). Poisson weights
/// when raw counts are present, uniform otherwise. Throws FitError.
G2Fit fit_g2(const G2Histogram& hist);

/// 1 + (g2 - 1)/p^2 with p = (S_c - B)/S_c and first-order error propagation.
Quantity on_chip_purity(const Quantity& g2_zero, const Quantity& signal_hz,
                        const Quantity& background_hz);

// Time-tag files: 16-byte header (8-byte magic, u32 version, u32 flags), then
// packed little-endian records (u8 detector, u64 time_ps) sorted by time.
void write_timetags(std::ostream& os, const std::vector<TimestampStream>& streams);
/// Streams grouped by detector id; durations default to last timestamp + 1 ps.
std::vector<TimestampStream> read_timetags(std::istream& is);
/// CSV alternative: header "detector,time_ps".
void write_timetags_csv(std::ostream& os, const std::vector<TimestampStream>& streams);
std::vector<TimestampStream> read_timetags_csv(std::istream& is);

/// CSV: delay_ps,raw,normalized
void write_histogram_csv(std::ostream& os, const G2Histogram& hist);
void write_fit_json(std::ostream& os, const G2Fit& fit);

}  // namespace molwg::photostats
