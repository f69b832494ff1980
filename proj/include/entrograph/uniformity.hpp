#pragma once

#include <gmpxx.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "entrograph/error.hpp"
#include "entrograph/point.hpp"

namespace entrograph {

using Features = std::array<double, 3>;

// How membership is read off embedded features.
//   euclidean: |a - b| < radius(k) in R^dim
//   cyclic:    arc distance on R/Z < radius(k), dim 1
//   cells:     same partition cell at level k (feature = finest rank)
enum class Geometry { euclidean, cyclic, cells };

// Indexed base of a uniformity.  Level k is finer as k grows.
struct EntourageFamily {
  std::string kind;  // "metric" or "partition"
  int min_level = 0;
  int max_level = 0;
  double eps0 = 1;
  int dim = 0;  // 0 when only `relation` is available
  Geometry geometry = Geometry::euclidean;
  std::function<Features(const Point&)> embed;
  std::vector<std::vector<std::uint32_t>> cell_tables;  // cells: by k - min_level, rank -> cell
  std::vector<double> cell_width;                       // cells: widest cell in x, by level
  std::function<bool(int, const Point&, const Point&)> relation;
  std::function<int(int)> sqrt_level;

  bool embedded() const { return dim > 0; }

  void check_level(int k) const {
    if (k < min_level || k > max_level) {
      throw InvalidArgument("level " + std::to_string(k) + " outside [" + std::to_string(min_level) +
                            "," + std::to_string(max_level) + "]");
    }
  }

  double radius(int k) const { return std::ldexp(eps0, -k); }

  std::uint32_t cell(int k, double rank) const {
    return cell_tables[static_cast<std::size_t>(k - min_level)][static_cast<std::size_t>(rank)];
  }

  bool member_features(int k, const double* a, const double* b) const {
    switch (geometry) {
      case Geometry::cells: return cell(k, a[0]) == cell(k, b[0]);
      case Geometry::cyclic: {
        double d = std::fabs(a[0] - b[0]);
        d = std::min(d, 1.0 - d);
        return d < radius(k);
      }
      case Geometry::euclidean: {
        double s = 0;
        for (int i = 0; i < dim; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s) < radius(k);
      }
    }
    return false;
  }

  bool member(int k, const Point& p, const Point& q) const {
    check_level(k);
    if (!embedded()) return relation(k, p, q);
    const Features a = embed(p), b = embed(q);
    return member_features(k, a.data(), b.data());
  }
};

// d(p,q) < eps0 2^-k from a plain distance function.
inline EntourageFamily metric_family(std::function<double(const Point&, const Point&)> metric,
                                     double eps0, int min_level = 0, int max_level = 30) {
  if (!(eps0 > 0)) throw InvalidArgument("eps0 must be positive");
  EntourageFamily f;
  f.kind = "metric";
  f.min_level = min_level;
  f.max_level = max_level;
  f.eps0 = eps0;
  f.relation = [metric, eps0](int k, const Point& p, const Point& q) {
    return metric(p, q) < std::ldexp(eps0, -k);
  };
  f.sqrt_level = [](int k) { return k + 1; };
  return f;
}

// Metric family whose distance is the euclidean (or arc) distance between
// embedded features.  Enables the bucketed counting engine.
inline EntourageFamily embedded_metric_family(std::function<Features(const Point&)> embed, int dim,
                                              Geometry geometry, double eps0, int min_level,
                                              int max_level) {
  if (!(eps0 > 0)) throw InvalidArgument("eps0 must be positive");
  EntourageFamily f;
  f.kind = "metric";
  f.min_level = min_level;
  f.max_level = max_level;
  f.eps0 = eps0;
  f.dim = dim;
  f.geometry = geometry;
  f.embed = std::move(embed);
  f.sqrt_level = [](int k) { return k + 1; };
  return f;
}

namespace detail {

// Cut c lies below (x, side): c < x, or c == x on the upper side.
// The approximations are log-odds, accurate far below the 1e-9 margin.
inline bool cut_below(const mpq_class& c, double c_tau, const SplitPoint& p, double x_tau) {
  if (c_tau < x_tau - 1e-9) return true;
  if (c_tau > x_tau + 1e-9) return false;
  const int s = cmp(c, p.x);
  return s < 0 || (s == 0 && p.upper);
}

}  // namespace detail

// Clopen partitions of the double arrow.  cuts_per_level[i] holds the cut set
// of level min_level + i; cut sets must be nested.
inline EntourageFamily partition_family(std::vector<std::vector<mpq_class>> cuts_per_level,
                                        int min_level = 0) {
  if (cuts_per_level.empty()) throw InvalidArgument("no cut levels");
  for (const auto& cuts : cuts_per_level) {
    for (std::size_t i = 0; i < cuts.size(); ++i) {
      if (cuts[i] <= 0 || cuts[i] >= 1) throw InvalidArgument("cut outside (0,1)");
      if (i > 0 && cuts[i] <= cuts[i - 1]) throw InvalidArgument("cuts not strictly ascending");
    }
  }
  const auto& finest = cuts_per_level.back();
  EntourageFamily f;
  f.kind = "partition";
  f.min_level = min_level;
  f.max_level = min_level + static_cast<int>(cuts_per_level.size()) - 1;
  f.eps0 = 1;
  f.dim = 1;
  f.geometry = Geometry::cells;
  for (std::size_t level = 0; level < cuts_per_level.size(); ++level) {
    const auto& cuts = cuts_per_level[level];
    if (level + 1 < cuts_per_level.size()) {
      const auto& next = cuts_per_level[level + 1];
      if (!std::includes(next.begin(), next.end(), cuts.begin(), cuts.end())) {
        throw InvalidArgument("non-nested cut sets at level " + std::to_string(min_level + level));
      }
    }
    std::vector<std::uint32_t> table(finest.size() + 1, 0);
    std::size_t j = 0;
    for (std::size_t r = 0; r < finest.size(); ++r) {
      if (j < cuts.size() && cuts[j] == finest[r]) ++j;
      table[r + 1] = static_cast<std::uint32_t>(j);
    }
    f.cell_tables.push_back(std::move(table));
    mpq_class widest(0), prev(0);
    for (const auto& c : cuts) {
      widest = std::max<mpq_class>(widest, c - prev);
      prev = c;
    }
    widest = std::max<mpq_class>(widest, 1 - prev);
    f.cell_width.push_back(widest.get_d());
  }
  auto cuts = std::make_shared<std::vector<mpq_class>>(finest);
  auto approx = std::make_shared<std::vector<double>>();
  for (const auto& c : *cuts) approx->push_back(rational_tau(c));
  f.embed = [cuts, approx](const Point& p) -> Features {
    const auto* s = std::get_if<SplitPoint>(&p);
    if (!s) throw InvalidArgument("partition family needs double-arrow points");
    const double xa = rational_tau(s->x);
    std::size_t lo = 0, hi = cuts->size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (detail::cut_below((*cuts)[mid], (*approx)[mid], *s, xa)) lo = mid + 1;
      else hi = mid;
    }
    return {static_cast<double>(lo), 0, 0};
  };
  f.sqrt_level = [](int k) { return k; };
  return f;
}

struct SampledCompact {
  std::string label;
  std::vector<Point> points;
  int density_level = 0;
};

inline SampledCompact make_compact(std::string label, std::vector<Point> points, int density_level) {
  if (points.empty()) throw InvalidArgument("compact '" + label + "' is empty");
  std::vector<std::size_t> idx(points.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return point_less(points[a], points[b]); });
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (points[idx[i]] == points[idx[i - 1]]) {
      throw InvalidArgument("compact '" + label + "' has a duplicate point " + describe(points[idx[i]]));
    }
  }
  return SampledCompact{std::move(label), std::move(points), density_level};
}

// Drops duplicates, keeping first occurrences in order.
inline std::vector<Point> unique_points(const std::vector<Point>& pts) {
  std::vector<std::size_t> idx(pts.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return point_less(pts[a], pts[b]); });
  std::vector<char> keep(pts.size(), 1);
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (pts[idx[i]] == pts[idx[i - 1]]) keep[idx[i]] = 0;
  }
  std::vector<Point> out;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (keep[i]) out.push_back(pts[i]);
  return out;
}

inline std::vector<Point> ball(const EntourageFamily& f, const Point& p, int k,
                               const SampledCompact& universe) {
  f.check_level(k);
  std::vector<Point> out;
  for (const auto& q : universe.points)
    if (f.member(k, p, q)) out.push_back(q);
  return out;
}

inline bool is_small(const EntourageFamily& f, const std::vector<Point>& s, int k) {
  f.check_level(k);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j)
      if (!f.member(k, s[i], s[j])) return false;
  return true;
}

struct AxiomViolation {
  std::string axiom;
  int level = 0;
  std::size_t p = 0, q = 0, r = 0;
};

// Exhaustive check of symmetry, reflexivity, nesting and the composition
// contract over the given points.  Cubic in the number of points.
inline std::optional<AxiomViolation> family_axiom_violation(const EntourageFamily& f,
                                                           const std::vector<Point>& pts) {
  const std::size_t m = pts.size();
  for (int k = f.min_level; k <= f.max_level; ++k) {
    std::vector<char> rel(m * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) rel[i * m + j] = f.member(k, pts[i], pts[j]);
    for (std::size_t i = 0; i < m; ++i) {
      if (!rel[i * m + i]) return AxiomViolation{"reflexivity", k, i, i, i};
      for (std::size_t j = 0; j < m; ++j) {
        if (rel[i * m + j] != rel[j * m + i]) return AxiomViolation{"symmetry", k, i, j, j};
        if (k < f.max_level && f.member(k + 1, pts[i], pts[j]) && !rel[i * m + j]) {
          return AxiomViolation{"nesting", k, i, j, j};
        }
      }
    }
    const int ks = f.sqrt_level(k);
    if (ks > f.max_level) continue;
    std::vector<char> fine(m * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) fine[i * m + j] = f.member(ks, pts[i], pts[j]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        if (!fine[i * m + j]) continue;
        for (std::size_t l = 0; l < m; ++l)
          if (fine[j * m + l] && !rel[i * m + l]) return AxiomViolation{"composition", k, i, j, l};
      }
  }
  return std::nullopt;
}

}  // namespace entrograph
