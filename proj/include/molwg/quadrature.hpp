#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <queue>
#include <vector>

#include "molwg/error.hpp"

namespace molwg::quad {

struct Options {
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  int max_intervals = 4000;
};

struct Result {
  std::complex<double> value;
  double error = 0.0;
  int intervals = 0;
};

namespace detail {

// Gauss-Kronrod 7/15 nodes on [-1, 1].
inline constexpr std::array<double, 8> kXk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
std::pair<std::complex<double>, double> gk15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  std::complex<double> fc = f(c);
  std::complex<double> kron = fc * kWk[7];
  std::complex<double> gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXk[j];
    const std::complex<double> s = f(c - dx) + f(c + dx);
    kron += kWk[j] * s;
    if (j % 2 == 1) gauss += kWg[j / 2] * s;
  }
  return {kron * h, std::abs((kron - gauss) * h)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) integration of a complex-valued
/// function over [a, b], split at the given interior breakpoints.
template <class F>
Result integrate(const F& f, double a, double b, std::vector<double> breaks = {},
                 const Options& opt = {}) {
  struct Piece {
    double a, b;
    std::complex<double> v;
    double e;
    bool operator<(const Piece& o) const { return e < o.e; }
  };
  std::vector<double> pts{a};
  std::sort(breaks.begin(), breaks.end());
  for (double x : breaks)
    if (x > a && x < b && x > pts.back()) pts.push_back(x);
  pts.push_back(b);

  std::priority_queue<Piece> heap;
  std::complex<double> total = 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    auto [v, e] = detail::gk15(f, pts[i], pts[i + 1]);
    heap.push({pts[i], pts[i + 1], v, e});
    total += v;
    err += e;
  }
  int count = static_cast<int>(heap.size());
  while (err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total))) {
    if (count >= opt.max_intervals)
      throw ConvergenceError("adaptive quadrature did not converge", err, count);
    Piece p = heap.top();
    heap.pop();
    const double m = 0.5 * (p.a + p.b);
    auto [v1, e1] = detail::gk15(f, p.a, m);
    auto [v2, e2] = detail::gk15(f, m, p.b);
    total += v1 + v2 - p.v;
    err += e1 + e2 - p.e;
    heap.push({p.a, m, v1, e1});
    heap.push({m, p.b, v2, e2});
    ++count;
  }
  // Re-sum to shed accumulated rounding from the incremental updates.
  total = 0.0;
  err = 0.0;
  while (!heap.empty()) {
    total += heap.top().v;
    err += heap.top().e;
    heap.pop();
  }
  return {total, err, count};
}

/// Real-valued convenience wrapper.
template <class F>
double integrate_real(const F& f, double a, double b, std::vector<double> breaks = {},
                      const Options& opt = {}) {
  auto g = [&](double x) { return std::complex<double>(f(x), 0.0); };
  return integrate(g, a, b, std::move(breaks), opt).value.real();
}

}  // namespace molwg::quad
