#pragma once

// Globally adaptive 21-point Gauss-Kronrod quadrature (QUADPACK QAG scheme).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

namespace crm::detail {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
  bool converged = true;
};

namespace gk21 {

inline constexpr std::array<double, 11> xgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};

inline constexpr std::array<double, 11> wgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7, 9).
inline constexpr std::array<double, 5> wg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

}  // namespace gk21

struct Segment {
  double a = 0.0;
  double b = 0.0;
  double value = 0.0;
  double error = 0.0;
  bool operator<(const Segment& other) const { return error < other.error; }
};

template <class F>
Segment gk21_segment(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double f_center = f(center);
  double result_kronrod = f_center * gk21::wgk[10];
  double result_gauss = 0.0;
  double result_abs = std::abs(result_kronrod);
  std::array<double, 10> f1{};
  std::array<double, 10> f2{};
  for (int j = 0; j < 10; ++j) {
    const double dx = half * gk21::xgk[j];
    const double lo = f(center - dx);
    const double hi = f(center + dx);
    f1[j] = lo;
    f2[j] = hi;
    result_kronrod += gk21::wgk[j] * (lo + hi);
    result_abs += gk21::wgk[j] * (std::abs(lo) + std::abs(hi));
    if (j % 2 == 1) result_gauss += gk21::wg[j / 2] * (lo + hi);
  }
  const double mean = 0.5 * result_kronrod;
  double result_asc = gk21::wgk[10] * std::abs(f_center - mean);
  for (int j = 0; j < 10; ++j) {
    result_asc += gk21::wgk[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));
  }
  result_kronrod *= half;
  result_abs *= std::abs(half);
  result_asc *= std::abs(half);
  double err = std::abs((result_kronrod - result_gauss * half));
  if (result_asc != 0.0 && err != 0.0) {
    err = result_asc * std::min(1.0, std::pow(200.0 * err / result_asc, 1.5));
  }
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (result_abs > std::numeric_limits<double>::min() / (50.0 * eps)) {
    err = std::max(eps * 50.0 * result_abs, err);
  }
  return {a, b, result_kronrod, err};
}

/// Integrates f over [a, b] until the summed error estimate is below
/// max(abs_tol, rel_tol * |I|). `converged` is false if the subdivision budget
/// runs out first. Non-finite integrand values poison the result (NaN).
template <class F>
QuadResult integrate(F&& f, double a, double b, double abs_tol, double rel_tol,
                     int max_subdivisions = 200) {
  QuadResult out;
  if (a == b) return out;
  std::priority_queue<Segment> heap;
  heap.push(gk21_segment(f, a, b));
  out.evaluations = 21;
  double total = heap.top().value;
  double total_err = heap.top().error;
  int subdivisions = 1;
  while (total_err > std::max(abs_tol, rel_tol * std::abs(total))) {
    if (!std::isfinite(total) || !std::isfinite(total_err)) {
      out.converged = false;
      break;
    }
    if (subdivisions >= max_subdivisions) {
      out.converged = false;
      break;
    }
    Segment worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      out.converged = false;
      break;
    }
    heap.pop();
    const Segment left = gk21_segment(f, worst.a, mid);
    const Segment right = gk21_segment(f, mid, worst.b);
    out.evaluations += 42;
    ++subdivisions;
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    // Re-sum every so often to keep the running totals free of drift.
    if (subdivisions % 32 == 0) {
      std::vector<Segment> all;
      all.reserve(heap.size());
      total = 0.0;
      total_err = 0.0;
      while (!heap.empty()) {
        all.push_back(heap.top());
        heap.pop();
      }
      for (const auto& s : all) {
        total += s.value;
        total_err += s.error;
        heap.push(s);
      }
    }
  }
  // Final compensated sum over the segments.
  double sum = 0.0;
  double comp = 0.0;
  double err = 0.0;
  while (!heap.empty()) {
    const Segment s = heap.top();
    heap.pop();
    const double y = s.value - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    err += s.error;
  }
  out.value = sum;
  out.error = err;
  if (!std::isfinite(sum)) out.converged = false;
  return out;
}

}  // namespace crm::detail
