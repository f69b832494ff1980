#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "entrograph/error.hpp"

namespace entrograph {

// Finite-horizon representative of an order of growth.  Values are a(1..N),
// stored in long double so that e^{3n} survives to n = 256.
class GrowthSeries {
 public:
  GrowthSeries() = default;

  explicit GrowthSeries(std::vector<long double> values) : v_(std::move(values)) {
    if (v_.empty()) throw InvalidArgument("growth series needs a positive horizon");
    for (std::size_t i = 0; i < v_.size(); ++i) {
      if (!(v_[i] >= 0)) {
        throw InvalidArgument("negative value at n=" + std::to_string(i + 1));
      }
      if (i > 0 && v_[i] < v_[i - 1]) {
        throw InvalidArgument("series decreases at n=" + std::to_string(i + 1));
      }
    }
  }

  template <class Int>
  static GrowthSeries from_counts(const std::vector<Int>& counts) {
    std::vector<long double> v(counts.begin(), counts.end());
    return GrowthSeries(std::move(v));
  }

  std::size_t horizon() const { return v_.size(); }
  // 1-based, a(n) for 1 <= n <= horizon.
  long double operator()(std::size_t n) const { return v_.at(n - 1); }
  const std::vector<long double>& values() const { return v_; }

  // a(1..m) for m <= horizon.
  GrowthSeries truncated(std::size_t m) const {
    if (m == 0 || m > v_.size()) throw InvalidArgument("truncation outside horizon");
    return GrowthSeries(std::vector<long double>(v_.begin(), v_.begin() + m));
  }

  bool operator==(const GrowthSeries& o) const { return v_ == o.v_; }

 private:
  std::vector<long double> v_;
};

enum class Relation { equivalent, less, greater, incomparable_at_horizon };

inline const char* to_string(Relation r) {
  switch (r) {
    case Relation::equivalent: return "equivalent";
    case Relation::less: return "less";
    case Relation::greater: return "greater";
    case Relation::incomparable_at_horizon: return "incomparable_at_horizon";
  }
  return "?";
}

struct ComparisonVerdict {
  Relation relation = Relation::incomparable_at_horizon;
  // smallest C with a(n) <= C max(b(n),1) over the horizon, when a is dominated
  std::optional<double> witness_constant;
  // same for b against a
  std::optional<double> reverse_witness;
};

struct CompareOptions {
  // Allowed relative growth of the ratio from the first to the second half of
  // the tail.
  double ratio_tolerance = 0.05;
};

namespace detail {

inline long double ratio(long double a, long double b) { return a / std::max<long double>(b, 1); }

// Constant on each half of [tail_start, N]; true when the second half does not
// need a larger constant than the first.
inline bool dominated(const GrowthSeries& a, const GrowthSeries& b, std::size_t tail_start,
                      double tol) {
  const std::size_t n_end = a.horizon();
  const std::size_t mid = tail_start + (n_end - tail_start) / 2;
  long double c1 = 0, c2 = 0;
  for (std::size_t n = tail_start; n <= mid; ++n) c1 = std::max(c1, ratio(a(n), b(n)));
  for (std::size_t n = mid + 1; n <= n_end; ++n) c2 = std::max(c2, ratio(a(n), b(n)));
  if (std::isinf(c2)) return false;
  return c2 <= c1 * (1.0L + tol);
}

inline double full_ratio(const GrowthSeries& a, const GrowthSeries& b) {
  long double c = 0;
  for (std::size_t n = 1; n <= a.horizon(); ++n) c = std::max(c, ratio(a(n), b(n)));
  return static_cast<double>(c);
}

}  // namespace detail

inline std::size_t default_tail_start(std::size_t horizon) {
  return std::max<std::size_t>(1, horizon / 4);
}

inline ComparisonVerdict compare(const GrowthSeries& a, const GrowthSeries& b,
                                 std::size_t tail_start, const CompareOptions& opt = {}) {
  if (a.horizon() != b.horizon()) throw InvalidArgument("horizon mismatch");
  const std::size_t n = a.horizon();
  if (tail_start < 1 || 2 * tail_start > n) throw InvalidArgument("tail_start out of range");
  const bool ab = detail::dominated(a, b, tail_start, opt.ratio_tolerance);
  const bool ba = detail::dominated(b, a, tail_start, opt.ratio_tolerance);
  ComparisonVerdict v;
  if (ab) v.witness_constant = detail::full_ratio(a, b);
  if (ba) v.reverse_witness = detail::full_ratio(b, a);
  if (ab && ba) v.relation = Relation::equivalent;
  else if (ab) v.relation = Relation::less;
  else if (ba) v.relation = Relation::greater;
  else v.relation = Relation::incomparable_at_horizon;
  return v;
}

inline ComparisonVerdict compare(const GrowthSeries& a, const GrowthSeries& b) {
  return compare(a, b, default_tail_start(a.horizon()));
}

inline GrowthSeries sup(const std::vector<GrowthSeries>& list) {
  if (list.empty()) throw InvalidArgument("sup of an empty list");
  std::vector<long double> v = list.front().values();
  for (const auto& s : list) {
    if (s.horizon() != v.size()) throw InvalidArgument("horizon mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(v[i], s.values()[i]);
  }
  return GrowthSeries(std::move(v));
}

struct LineFit {
  double slope = 0;
  double residual = 0;  // root mean square of the fit residuals
};

namespace detail {

inline std::size_t tail_begin(std::size_t horizon, double tail_fraction) {
  if (!(tail_fraction > 0 && tail_fraction <= 1)) {
    throw InvalidArgument("tail_fraction must lie in (0,1]");
  }
  const auto len = static_cast<std::size_t>(std::floor(tail_fraction * horizon));
  if (len < 3) throw InvalidArgument("degenerate tail (fewer than 3 points)");
  return horizon - len + 1;
}

// log a(n) with log 0 read as log 1.
inline long double log_value(long double a) { return std::log(std::max<long double>(a, 1)); }

inline LineFit least_squares(const std::vector<long double>& xs, const std::vector<long double>& ys) {
  const long double m = xs.size();
  long double sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const long double mx = sx / m, my = sy / m;
  long double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  LineFit f;
  const long double slope = sxy / sxx;
  long double ss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const long double r = ys[i] - (my + slope * (xs[i] - mx));
    ss += r * r;
  }
  f.slope = static_cast<double>(slope);
  f.residual = static_cast<double>(std::sqrt(ss / m));
  return f;
}

inline LineFit tail_fit(const GrowthSeries& a, double tail_fraction, bool log_abscissa) {
  const std::size_t n0 = tail_begin(a.horizon(), tail_fraction);
  std::vector<long double> xs, ys;
  for (std::size_t n = n0; n <= a.horizon(); ++n) {
    if (std::isinf(a(n))) {
      return {std::numeric_limits<double>::infinity(), 0.0};
    }
    xs.push_back(log_abscissa ? std::log(static_cast<long double>(n)) : static_cast<long double>(n));
    ys.push_back(log_value(a(n)));
  }
  return least_squares(xs, ys);
}

}  // namespace detail

inline LineFit fit_poly(const GrowthSeries& a, double tail_fraction = 0.5) {
  return detail::tail_fit(a, tail_fraction, true);
}

inline LineFit fit_exp(const GrowthSeries& a, double tail_fraction = 0.5) {
  return detail::tail_fit(a, tail_fraction, false);
}

// Slope of log a(n) against log n over the tail; +infinity if the series
// overflows.
inline double project_poly(const GrowthSeries& a, double tail_fraction = 0.5) {
  return std::max(0.0, fit_poly(a, tail_fraction).slope);
}

// Slope of log a(n) against n over the tail.
inline double project_exp(const GrowthSeries& a, double tail_fraction = 0.5) {
  return std::max(0.0, fit_exp(a, tail_fraction).slope);
}

enum class GrowthLabel { bounded, linear, polynomial, exponential };

inline const char* to_string(GrowthLabel l) {
  switch (l) {
    case GrowthLabel::bounded: return "bounded";
    case GrowthLabel::linear: return "linear";
    case GrowthLabel::polynomial: return "polynomial";
    case GrowthLabel::exponential: return "exponential";
  }
  return "?";
}

struct GrowthClass {
  GrowthLabel label = GrowthLabel::bounded;
  double degree = 0;
  double rate = 0;
  double fit_residual = 0;
};

struct ClassifyBands {
  double tail_fraction = 0.5;
  double linear_low = 0.75;
  double linear_high = 1.25;
  double bounded_degree = 0.25;
  double exp_threshold = 0.1;
};

inline GrowthClass classify(const GrowthSeries& a, const ClassifyBands& bands = {}) {
  if (a.horizon() < 16) throw InvalidArgument("classify needs horizon >= 16");
  const LineFit pf = fit_poly(a, bands.tail_fraction);
  const LineFit ef = fit_exp(a, bands.tail_fraction);
  GrowthClass c;
  c.degree = std::max(0.0, pf.slope);
  c.rate = std::max(0.0, ef.slope);
  // A large exponential slope alone is not enough at short horizons (n^2 has
  // log-slope 2/n); the exponential fit must also be the better one.
  if (c.rate > bands.exp_threshold && (ef.residual < pf.residual || std::isinf(pf.slope))) {
    c.label = GrowthLabel::exponential;
    c.fit_residual = ef.residual;
    return c;
  }
  c.fit_residual = pf.residual;
  const std::size_t n0 = detail::tail_begin(a.horizon(), bands.tail_fraction);
  bool constant_tail = true;
  for (std::size_t n = n0; n <= a.horizon(); ++n) constant_tail = constant_tail && a(n) == a(n0);
  if (c.degree <= bands.bounded_degree && constant_tail) {
    c.label = GrowthLabel::bounded;
    c.degree = 0;
  } else if (c.degree >= bands.linear_low && c.degree <= bands.linear_high) {
    c.label = GrowthLabel::linear;
  } else {
    c.label = GrowthLabel::polynomial;
  }
  return c;
}

struct InvarianceResult {
  bool invariant = false;
  ComparisonVerdict verdict;
};

// [a(n)] = [a(mn)] over the common sub-horizon N/m.
inline InvarianceResult is_linearly_invariant(const GrowthSeries& a, std::size_t m) {
  if (m < 2) throw InvalidArgument("m must be >= 2");
  const std::size_t sub = a.horizon() / m;
  if (sub < 8) throw InvalidArgument("horizon too short for the chosen m");
  std::vector<long double> base(sub), scaled(sub);
  for (std::size_t n = 1; n <= sub; ++n) {
    base[n - 1] = a(n);
    scaled[n - 1] = a(m * n);
  }
  InvarianceResult r;
  r.verdict = compare(GrowthSeries(base), GrowthSeries(scaled));
  r.invariant = r.verdict.relation == Relation::equivalent;
  return r;
}

// Rank used by the power-monotonicity check: bounded < linear/polynomial
// (ordered by degree) < exponential.
inline bool class_leq(const GrowthClass& a, const GrowthClass& b, double degree_tolerance = 0.25) {
  auto tier = [](const GrowthClass& c) {
    switch (c.label) {
      case GrowthLabel::bounded: return 0;
      case GrowthLabel::linear:
      case GrowthLabel::polynomial: return 1;
      case GrowthLabel::exponential: return 2;
    }
    return 0;
  };
  if (tier(a) != tier(b)) return tier(a) < tier(b);
  if (tier(a) == 1) return a.degree <= b.degree + degree_tolerance;
  if (tier(a) == 2) return a.rate <= b.rate * 1.1 + 1e-12;
  return true;
}

}  // namespace entrograph
