#include "molwg/photostats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <limits>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <thread>

#include "molwg/error.hpp"

namespace molwg::photostats {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'L', 'W', 'G', 'T', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

// Uniform in (0, 1) from the top 53 bits; portable across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53; }
  double exponential(double rate) { return -std::log(uniform()) / rate; }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 eng_;
};

std::uint64_t to_ps(double t_ns) { return static_cast<std::uint64_t>(std::llround(t_ns * 1000.0)); }

// Keeps timestamps strictly increasing when rounding to picoseconds collides.
void push_increasing(std::vector<std::uint64_t>& v, std::uint64_t t) {
  if (!v.empty() && t <= v.back()) t = v.back() + 1;
  v.push_back(t);
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

void EmitterParams::validate() const {
  if (!(lifetime_ns > 0.0)) throw DomainError("lifetime must be > 0");
  if (!(saturation >= 0.0)) throw DomainError("saturation parameter must be >= 0");
  if (!(isc_yield >= 0.0 && isc_yield <= 1.0)) throw DomainError("isc_yield must lie in [0, 1]");
  if (!(triplet_lifetime_ns > 0.0)) throw DomainError("triplet lifetime must be > 0");
  if (!(quantum_yield > 0.0 && quantum_yield <= 1.0))
    throw DomainError("quantum yield must lie in (0, 1]");
}

double EmitterParams::pump_rate() const {
  return saturation / ((2.0 + saturation) * lifetime_ns);
}

double EmitterParams::expected_rate_hz() const {
  return 1e9 / (2.0 * lifetime_ns) * saturation / (1.0 + saturation) * quantum_yield;
}

double EmitterParams::recovery_time_ns() const { return 1.0 / (pump_rate() + 1.0 / lifetime_ns); }

double TimestampStream::rate_hz() const {
  return duration_ps == 0 ? 0.0 : static_cast<double>(size()) / (static_cast<double>(duration_ps) * 1e-12);
}

bool TimestampStream::well_formed() const {
  for (std::size_t k = 0; k < timestamps_ps.size(); ++k) {
    if (timestamps_ps[k] > duration_ps) return false;
    if (k > 0 && timestamps_ps[k] <= timestamps_ps[k - 1]) return false;
  }
  return true;
}

TimestampStream simulate_emitter(const EmitterParams& p, double duration_ns, std::uint64_t seed,
                                 std::vector<std::string>* warnings) {
  p.validate();
  if (!(duration_ns > 0.0)) throw DomainError("duration must be > 0");
  if (warnings && duration_ns < 1e4 * p.lifetime_ns)
    warnings->push_back("simulation shorter than 1e4 lifetimes; statistics will be poor");

  TimestampStream out;
  out.duration_ps = to_ps(duration_ns);
  out.metadata = {{"generator", "three-level kinetic Monte Carlo"},
                  {"seed", std::to_string(seed)},
                  {"lifetime_ns", num(p.lifetime_ns)},
                  {"saturation", num(p.saturation)},
                  {"isc_yield", num(p.isc_yield)},
                  {"triplet_lifetime_ns", num(p.triplet_lifetime_ns)},
                  {"quantum_yield", num(p.quantum_yield)}};
  const double pump = p.pump_rate();
  if (pump == 0.0) return out;

  Rng rng(seed);
  const double decay = 1.0 / p.lifetime_ns;
  const double release = 1.0 / p.triplet_lifetime_ns;
  out.timestamps_ps.reserve(static_cast<std::size_t>(p.expected_rate_hz() * duration_ns * 1e-9 * 1.05) + 16);
  double t = 0.0;
  for (;;) {
    t += rng.exponential(pump);  // ground -> excited
    if (t > duration_ns) break;
    t += rng.exponential(decay);
    if (t > duration_ns) break;
    if (p.isc_yield > 0.0 && rng.bernoulli(p.isc_yield)) {
      t += rng.exponential(release);
      continue;
    }
    if (p.quantum_yield >= 1.0 || rng.bernoulli(p.quantum_yield)) {
      const std::uint64_t ps = to_ps(t);
      if (ps <= out.duration_ps) push_increasing(out.timestamps_ps, ps);
    }
  }
  // A bump past the end can only come from a collision at the last picosecond.
  while (!out.timestamps_ps.empty() && out.timestamps_ps.back() > out.duration_ps)
    out.timestamps_ps.pop_back();
  return out;
}

TimestampStream apply_detection(const TimestampStream& in, double efficiency,
                                double background_hz, double dead_time_ns, std::uint64_t seed) {
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw DomainError("efficiency must lie in [0, 1]");
  if (!(background_hz >= 0.0)) throw DomainError("background rate must be >= 0");
  if (!(dead_time_ns >= 0.0)) throw DomainError("dead time must be >= 0");
  Rng rng(seed);
  std::vector<std::uint64_t> kept;
  kept.reserve(in.size());
  for (auto t : in.timestamps_ps)
    if (efficiency >= 1.0 || rng.bernoulli(efficiency)) kept.push_back(t);

  std::vector<std::uint64_t> background;
  if (background_hz > 0.0) {
    const double rate_per_ps = background_hz * 1e-12;
    double t = 0.0;
    for (;;) {
      t += rng.exponential(rate_per_ps);
      if (t > static_cast<double>(in.duration_ps)) break;
      background.push_back(static_cast<std::uint64_t>(std::llround(t)));
    }
  }
  std::vector<std::uint64_t> merged(kept.size() + background.size());
  std::merge(kept.begin(), kept.end(), background.begin(), background.end(), merged.begin());

  TimestampStream out;
  out.detector_id = in.detector_id;
  out.duration_ps = in.duration_ps;
  out.metadata = in.metadata;
  out.metadata["detection_efficiency"] = num(efficiency);
  out.metadata["background_hz"] = num(background_hz);
  out.metadata["dead_time_ns"] = num(dead_time_ns);
  out.metadata["detection_seed"] = std::to_string(seed);
  const auto dead = static_cast<std::uint64_t>(std::llround(dead_time_ns * 1000.0));
  out.timestamps_ps.reserve(merged.size());
  for (auto t : merged) {
    if (!out.timestamps_ps.empty()) {
      const auto last = out.timestamps_ps.back();
      if (t == last) continue;  // coincident tags register once
      if (dead > 0 && t - last < dead) continue;
    }
    out.timestamps_ps.push_back(t);
  }
  return out;
}

std::pair<TimestampStream, TimestampStream> hbt_split(const TimestampStream& in, std::uint64_t seed) {
  Rng rng(seed);
  TimestampStream a, b;
  a.detector_id = 1;
  b.detector_id = 2;
  a.duration_ps = b.duration_ps = in.duration_ps;
  a.metadata = b.metadata = in.metadata;
  a.metadata["split_seed"] = b.metadata["split_seed"] = std::to_string(seed);
  for (auto t : in.timestamps_ps) (rng.bernoulli(0.5) ? a : b).timestamps_ps.push_back(t);
  return {std::move(a), std::move(b)};
}

G2Histogram g2_histogram(const TimestampStream& s1, const TimestampStream& s2,
                         double bin_width_ps, double window_ns, unsigned threads) {
  if (s1.timestamps_ps.empty() || s2.timestamps_ps.empty())
    throw DomainError("g2_histogram: empty stream");
  if (!(bin_width_ps >= 1.0)) throw DomainError("bin width must be >= 1 ps");
  if (!(window_ns * 1000.0 >= bin_width_ps)) throw DomainError("window must exceed one bin");
  const double duration = static_cast<double>(std::min(s1.duration_ps, s2.duration_ps));
  if (!(duration > 0.0)) throw DomainError("g2_histogram: streams do not overlap in time");

  const auto half = static_cast<long>(std::floor(window_ns * 1000.0 / bin_width_ps));
  const std::size_t nbins = static_cast<std::size_t>(2 * half + 1);
  const auto reach = static_cast<std::int64_t>(std::llround((static_cast<double>(half) + 0.5) * bin_width_ps));
  const auto& a = s1.timestamps_ps;
  const auto& b = s2.timestamps_ps;

  auto count = [&](std::size_t lo, std::size_t hi, std::vector<std::uint64_t>& bins,
                   std::uint64_t& zero_hits) {
    auto first = std::lower_bound(b.begin(), b.end(), a[lo] > static_cast<std::uint64_t>(reach)
                                                          ? a[lo] - static_cast<std::uint64_t>(reach)
                                                          : 0);
    for (std::size_t i = lo; i < hi; ++i) {
      const auto t1 = static_cast<std::int64_t>(a[i]);
      while (first != b.end() && static_cast<std::int64_t>(*first) < t1 - reach) ++first;
      for (auto it = first; it != b.end(); ++it) {
        const std::int64_t d = static_cast<std::int64_t>(*it) - t1;
        if (d > reach) break;
        if (d == 0) ++zero_hits;
        const auto k = static_cast<long>(std::lround(static_cast<double>(d) / bin_width_ps));
        if (k < -half || k > half) continue;
        ++bins[static_cast<std::size_t>(k + half)];
      }
    }
  };

  std::vector<std::uint64_t> raw(nbins, 0);
  std::uint64_t zero_hits = 0;
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(a.size() / 4096 + 1)));
  if (workers == 1) {
    count(0, a.size(), raw, zero_hits);
  } else {
    std::vector<std::vector<std::uint64_t>> parts(workers, std::vector<std::uint64_t>(nbins, 0));
    std::vector<std::uint64_t> zeros(workers, 0);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        const std::size_t lo = a.size() * w / workers, hi = a.size() * (w + 1) / workers;
        if (lo < hi) count(lo, hi, parts[w], zeros[w]);
      });
    for (auto& t : pool) t.join();
    for (unsigned w = 0; w < workers; ++w) {
      for (std::size_t k = 0; k < nbins; ++k) raw[k] += parts[w][k];
      zero_hits += zeros[w];
    }
  }

  G2Histogram h;
  h.bin_width_ps = bin_width_ps;
  h.window_ns = window_ns;
  h.duration_ps = duration;
  h.rate1_hz = static_cast<double>(a.size()) / (duration * 1e-12);
  h.rate2_hz = static_cast<double>(b.size()) / (duration * 1e-12);
  h.raw_coincidences = std::move(raw);
  h.delays_ps.resize(nbins);
  h.normalized.resize(nbins);
  const double r1 = h.rate1_hz * 1e-12, r2 = h.rate2_hz * 1e-12;  // per ps
  for (std::size_t k = 0; k < nbins; ++k) {
    const double tau = (static_cast<double>(k) - static_cast<double>(half)) * bin_width_ps;
    h.delays_ps[k] = tau;
    const double expect = r1 * r2 * bin_width_ps * (duration - std::abs(tau));
    h.normalized[k] = expect > 0.0 ? static_cast<double>(h.raw_coincidences[k]) / expect : 0.0;
  }
  if (zero_hits * 2 > std::min(a.size(), b.size()))
    h.warnings.push_back(
        "most events coincide exactly across the two inputs; the same stream was likely "
        "correlated with itself");
  return h;
}

G2Fit fit_g2(const G2Histogram& hist) {
  const std::size_t n = hist.normalized.size();
  if (n < 20) throw FitError("fit_g2: need at least 20 bins, got " + std::to_string(n));
  if (hist.delays_ps.size() != n) throw FitError("fit_g2: delays and values differ in length");
  const bool poisson = hist.raw_coincidences.size() == n &&
                       std::any_of(hist.raw_coincidences.begin(), hist.raw_coincidences.end(),
                                   [](std::uint64_t c) { return c > 0; });
  if (poisson) {
    const std::size_t wing = std::max<std::size_t>(1, n / 10);
    std::uint64_t lo = 0, hi = 0;
    for (std::size_t k = 0; k < wing; ++k) {
      lo += hist.raw_coincidences[k];
      hi += hist.raw_coincidences[n - 1 - k];
    }
    if (lo == 0 || hi == 0) throw FitError("fit_g2: no coincidences in the histogram wings");
  }

  // Per-bin normalization so that sigma = sqrt(counts) / norm, floored at one count.
  const double r1 = hist.rate1_hz * 1e-12, r2 = hist.rate2_hz * 1e-12;
  Eigen::VectorXd tau(n), y(n), w(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    tau[i] = std::abs(hist.delays_ps[k]) * 1e-3;  // ns
    y[i] = hist.normalized[k];
    w[i] = 1.0;
    if (poisson) {
      const double norm =
          r1 * r2 * hist.bin_width_ps * (hist.duration_ps - std::abs(hist.delays_ps[k]));
      if (!(norm > 0.0)) throw FitError("fit_g2: histogram lacks rate and duration data");
      const double c = std::max<double>(1.0, static_cast<double>(hist.raw_coincidences[k]));
      w[i] = norm * norm / c;
    }
  }

  // Initial guess: depth from the minimum, decay from the 1/e crossing.
  const double ymin = y.minCoeff();
  double b = std::clamp(1.0 - ymin, 0.05, 1.2);
  double t_guess = tau.maxCoeff() / 10.0;
  {
    const double level = 1.0 - b / std::exp(1.0);
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i)
      if (tau[i] > 0.0 && std::abs(y[i] - level) < best) {
        best = std::abs(y[i] - level);
        t_guess = tau[i];
      }
  }
  double logT = std::log(std::max(t_guess, 1e-3));

  auto residuals = [&](double bb, double lt, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    const double T = std::exp(lt);
    double chi2 = 0.0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
      const double e = std::exp(-tau[i] / T);
      const double sw = std::sqrt(w[i]);
      r[i] = sw * (y[i] - (1.0 - bb * e));
      chi2 += r[i] * r[i];
      if (jac) {
        (*jac)(i, 0) = sw * e;                         // d r / d b
        (*jac)(i, 1) = sw * bb * e * (tau[i] / T);     // d r / d log T
      }
    }
    return chi2;
  };

  Eigen::VectorXd r(n);
  Eigen::MatrixXd J(n, 2);
  double chi2 = residuals(b, logT, r, &J);
  double lambda = 1e-3;
  int it = 0;
  bool converged = false;
  for (; it < 200; ++it) {
    const Eigen::Matrix2d JtJ = J.transpose() * J;
    const Eigen::Vector2d g = J.transpose() * r;
    Eigen::Matrix2d A = JtJ;
    A.diagonal() *= (1.0 + lambda);
    const Eigen::Vector2d step = -A.ldlt().solve(g);  // r depends on params with a minus sign
    Eigen::VectorXd r_new(n);
    const double chi2_new = residuals(b + step[0], logT + step[1], r_new, nullptr);
    if (chi2_new <= chi2) {
      const double rel = (chi2 - chi2_new) / std::max(chi2, 1e-300);
      b += step[0];
      logT += step[1];
      chi2 = residuals(b, logT, r, &J);
      lambda = std::max(lambda / 10.0, 1e-12);
      if (rel < 1e-14 || step.norm() < 1e-12 * (1.0 + std::abs(b) + std::abs(logT))) {
        converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) {
        converged = true;  // no further descent possible: at the minimum to precision
        break;
      }
    }
  }
  std::ostringstream diag;
  diag << " (b = " << b << ", T = " << std::exp(logT) << " ns, chi2 = " << chi2
       << ", iterations = " << it << ")";
  if (!converged) throw FitError("fit_g2 did not converge" + diag.str());
  if (!(b >= -0.5 && b <= 1.5)) throw FitError("fit_g2: b outside [-0.5, 1.5]" + diag.str());

  const double dof = std::max<double>(1.0, static_cast<double>(n) - 2.0);
  Eigen::Matrix2d cov = (J.transpose() * J).inverse();
  if (!poisson) cov *= chi2 / dof;
  G2Fit f;
  f.b = b;
  f.T_ns = std::exp(logT);
  f.g2_zero = 1.0 - b;
  f.sigma_b = std::sqrt(std::max(0.0, cov(0, 0)));
  f.sigma_g2_zero = f.sigma_b;
  f.sigma_T_ns = f.T_ns * std::sqrt(std::max(0.0, cov(1, 1)));
  f.reduced_chi2 = chi2 / dof;
  f.iterations = it;
  return f;
}

Quantity on_chip_purity(const Quantity& g2_zero, const Quantity& signal_hz,
                        const Quantity& background_hz) {
  const double S = signal_hz.value, B = background_hz.value, g = g2_zero.value;
  if (!(B >= 0.0 && B < S)) throw DomainError("on_chip_purity requires 0 <= B < S_c");
  const double p = (S - B) / S;
  const double value = 1.0 + (g - 1.0) / (p * p);
  const double d_dp = -2.0 * (g - 1.0) / (p * p * p);
  const double sigma = propagate({{1.0 / (p * p), g2_zero.sigma},
                                  {d_dp * B / (S * S), signal_hz.sigma},
                                  {d_dp * (-1.0 / S), background_hz.sigma}});
  return {value, sigma, ""};
}

void write_timetags(std::ostream& os, const std::vector<TimestampStream>& streams) {
  std::vector<std::pair<std::uint64_t, std::uint8_t>> events;
  for (const auto& s : streams)
    for (auto t : s.timestamps_ps) events.emplace_back(t, s.detector_id);
  std::stable_sort(events.begin(), events.end());
  os.write(kMagic, sizeof kMagic);
  auto put_le = [&os](std::uint64_t v, int bytes) {
    char buf[8];
    for (int k = 0; k < bytes; ++k) buf[k] = static_cast<char>((v >> (8 * k)) & 0xff);
    os.write(buf, bytes);
  };
  put_le(kVersion, 4);
  put_le(0, 4);
  for (const auto& [t, d] : events) {
    put_le(d, 1);
    put_le(t, 8);
  }
  if (!os) throw std::runtime_error("write_timetags: stream error");
}

namespace {

std::vector<TimestampStream> group(const std::vector<std::pair<std::uint8_t, std::uint64_t>>& ev) {
  std::map<std::uint8_t, TimestampStream> by_id;
  for (const auto& [d, t] : ev) {
    auto& s = by_id[d];
    s.detector_id = d;
    if (!s.timestamps_ps.empty() && t <= s.timestamps_ps.back())
      throw StructuralError("time-tag records for a detector are not strictly increasing");
    s.timestamps_ps.push_back(t);
  }
  std::vector<TimestampStream> out;
  for (auto& [d, s] : by_id) {
    s.duration_ps = s.timestamps_ps.empty() ? 0 : s.timestamps_ps.back() + 1;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<TimestampStream> read_timetags(std::istream& is) {
  char head[16];
  if (!is.read(head, 16)) throw StructuralError("time-tag file shorter than its header");
  if (std::memcmp(head, kMagic, sizeof kMagic) != 0) throw StructuralError("not a time-tag file");
  auto le = [](const unsigned char* p, int bytes) {
    std::uint64_t v = 0;
    for (int k = bytes - 1; k >= 0; --k) v = (v << 8) | p[k];
    return v;
  };
  const auto version = le(reinterpret_cast<const unsigned char*>(head) + 8, 4);
  if (version != kVersion) throw StructuralError("unsupported time-tag version " + std::to_string(version));
  std::vector<std::pair<std::uint8_t, std::uint64_t>> ev;
  unsigned char rec[9];
  while (is.read(reinterpret_cast<char*>(rec), 9)) ev.emplace_back(rec[0], le(rec + 1, 8));
  if (is.gcount() != 0) throw StructuralError("truncated time-tag record");
  return group(ev);
}

void write_timetags_csv(std::ostream& os, const std::vector<TimestampStream>& streams) {
  std::vector<std::pair<std::uint64_t, std::uint8_t>> events;
  for (const auto& s : streams)
    for (auto t : s.timestamps_ps) events.emplace_back(t, s.detector_id);
  std::stable_sort(events.begin(), events.end());
  os << "detector,time_ps\n";
  for (const auto& [t, d] : events) os << static_cast<unsigned>(d) << ',' << t << '\n';
}

std::vector<TimestampStream> read_timetags_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("detector,time_ps", 0) != 0)
    throw StructuralError("time-tag CSV must start with 'detector,time_ps'");
  std::vector<std::pair<std::uint8_t, std::uint64_t>> ev;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("missing comma");
      const unsigned long d = std::stoul(line.substr(0, comma));
      const unsigned long long t = std::stoull(line.substr(comma + 1));
      if (d > 255) throw std::out_of_range("detector id");
      ev.emplace_back(static_cast<std::uint8_t>(d), t);
    } catch (const std::exception&) {
      throw StructuralError("time-tag CSV line " + std::to_string(lineno) + " is malformed");
    }
  }
  return group(ev);
}

void write_histogram_csv(std::ostream& os, const G2Histogram& h) {
  os << "delay_ps,raw,normalized\n";
  for (std::size_t k = 0; k < h.normalized.size(); ++k)
    os << num(h.delays_ps[k]) << ',' << (k < h.raw_coincidences.size() ? h.raw_coincidences[k] : 0)
       << ',' << num(h.normalized[k]) << '\n';
}

void write_fit_json(std::ostream& os, const G2Fit& f) {
  const nlohmann::ordered_json j = {
      {"g2_zero", f.g2_zero},       {"sigma_g2_zero", f.sigma_g2_zero},
      {"b", f.b},                   {"sigma_b", f.sigma_b},
      {"T_ns", f.T_ns},             {"sigma_T_ns", f.sigma_T_ns},
      {"reduced_chi2", f.reduced_chi2}, {"iterations", f.iterations}};
  os << j.dump(2) << '\n';
}

}  // namespace molwg::photostats
