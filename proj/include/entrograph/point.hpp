#pragma once

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>

namespace entrograph {

// Point of the compactified line.
struct LinePoint {
  double t = 0;
  bool operator==(const LinePoint&) const = default;
};

// Point x of [0,1] stored by its base-2 log-odds tau = log2(x/(1-x)); the
// endpoints are tau = -inf and +inf.  The north-south map x/(2-x) is tau - 1.
struct IntervalPoint {
  double tau = 0;
  bool operator==(const IntervalPoint&) const = default;
};

// Point k / 2^52 of the circle R/Z.  Integer storage keeps rotations exact
// isometries.
struct CirclePoint {
  std::uint64_t k = 0;
  bool operator==(const CirclePoint&) const = default;
};

// Plane, or the closed disk in complex coordinates x + iy.
struct PlanePoint {
  double x = 0;
  double y = 0;
  bool operator==(const PlanePoint&) const = default;
};

struct InfinityPoint {
  bool operator==(const InfinityPoint&) const = default;
};

// Double-arrow point (x, side) with exact rational x.
struct SplitPoint {
  mpq_class x;
  bool upper = false;
  bool operator==(const SplitPoint& o) const { return upper == o.upper && x == o.x; }
};

using Point = std::variant<LinePoint, IntervalPoint, CirclePoint, PlanePoint, InfinityPoint, SplitPoint>;

inline bool point_less(const Point& a, const Point& b) {
  if (a.index() != b.index()) return a.index() < b.index();
  switch (a.index()) {
    case 0: return std::get<0>(a).t < std::get<0>(b).t;
    case 1: return std::get<1>(a).tau < std::get<1>(b).tau;
    case 2: return std::get<2>(a).k < std::get<2>(b).k;
    case 3: {
      const auto &p = std::get<3>(a), &q = std::get<3>(b);
      return p.x != q.x ? p.x < q.x : p.y < q.y;
    }
    case 4: return false;
    default: {
      const auto &p = std::get<5>(a), &q = std::get<5>(b);
      const int c = cmp(p.x, q.x);
      return c != 0 ? c < 0 : (!p.upper && q.upper);
    }
  }
}

// ---- interval helpers ----

inline double interval_x(double tau) {
  if (tau == -std::numeric_limits<double>::infinity()) return 0.0;
  if (tau == std::numeric_limits<double>::infinity()) return 1.0;
  return 1.0 / (1.0 + std::exp2(-tau));
}

// 1 - x without cancellation.
inline double interval_one_minus_x(double tau) { return interval_x(-tau); }

inline double interval_tau(double x) {
  if (x <= 0) return -std::numeric_limits<double>::infinity();
  if (x >= 1) return std::numeric_limits<double>::infinity();
  return std::log2(x / (1.0 - x));
}

inline IntervalPoint interval_point(double x) { return {interval_tau(x)}; }

// log2(x / (1 - x)) of an exact rational in [0, 1].
inline double rational_tau(const mpq_class& x) {
  if (sgn(x) <= 0) return -std::numeric_limits<double>::infinity();
  if (cmp(x, 1) >= 0) return std::numeric_limits<double>::infinity();
  const mpz_class p = x.get_num();
  const mpz_class r = x.get_den() - x.get_num();
  long ep = 0, er = 0;
  const double dp = mpz_get_d_2exp(&ep, p.get_mpz_t());
  const double dr = mpz_get_d_2exp(&er, r.get_mpz_t());
  return (std::log2(dp) - std::log2(dr)) + static_cast<double>(ep - er);
}

// ---- circle helpers ----

inline constexpr std::uint64_t kCircleScale = std::uint64_t{1} << 52;

inline CirclePoint circle_point(double x) {
  double f = x - std::floor(x);
  auto k = static_cast<std::uint64_t>(std::llround(f * static_cast<double>(kCircleScale)));
  return {k % kCircleScale};
}

inline double circle_value(const CirclePoint& p) {
  return static_cast<double>(p.k) / static_cast<double>(kCircleScale);
}

// Arc-length distance on R/Z.
inline double circle_distance(const CirclePoint& a, const CirclePoint& b) {
  const std::uint64_t d = a.k > b.k ? a.k - b.k : b.k - a.k;
  const std::uint64_t m = std::min(d, kCircleScale - d);
  return static_cast<double>(m) / static_cast<double>(kCircleScale);
}

inline std::string describe(const Point& p) {
  char buf[96];
  switch (p.index()) {
    case 0: std::snprintf(buf, sizeof buf, "t=%.9g", std::get<0>(p).t); return buf;
    case 1: std::snprintf(buf, sizeof buf, "x=%.9g (tau=%.9g)", interval_x(std::get<1>(p).tau), std::get<1>(p).tau); return buf;
    case 2: std::snprintf(buf, sizeof buf, "x=%.9g", circle_value(std::get<2>(p))); return buf;
    case 3: std::snprintf(buf, sizeof buf, "(%.9g,%.9g)", std::get<3>(p).x, std::get<3>(p).y); return buf;
    case 4: return "inf";
    default: {
      const auto& s = std::get<5>(p);
      return "(" + s.x.get_str() + "," + (s.upper ? "1" : "0") + ")";
    }
  }
}

}  // namespace entrograph
