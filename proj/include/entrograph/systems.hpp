#pragma once

#include <gmpxx.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "entrograph/brouwer.hpp"
#include "entrograph/error.hpp"
#include "entrograph/growth.hpp"
#include "entrograph/point.hpp"
#include "entrograph/shapes.hpp"
#include "entrograph/uniformity.hpp"

namespace entrograph {

// Exact order-coordinate dynamics for line-like systems.  The map is
// increasing and moves every interior point in the same direction.
struct ExactLine {
  // sign of f^m(a) - b
  std::function<int(const mpq_class& a, long m, const mpq_class& b)> shift_compare;
  std::function<mpq_class(const mpq_class& a, long m)> iterate;
  int direction = 1;  // +1 when f(x) > x on the interior
  std::function<Point(const mpq_class& a)> point;
};

struct SystemInstance {
  std::string name;
  std::function<Point(const Point&)> step;
  std::function<Point(const Point&)> step_inv;  // empty for non-invertible maps
  EntourageFamily family;
  SampledCompact default_compact;
  std::map<std::string, SampledCompact> compacts;  // declared sub-compacts
  std::vector<Point> non_wandering;
  bool non_wandering_everything = false;
  std::optional<GrowthLabel> expected_label;  // documentation only

  // Coding support.
  std::string shape_kind;
  std::function<bool(const Point&, const Shape&)> contains;
  std::function<double(const Point&, const Shape&)> distance_lb;
  std::function<std::vector<Point>(const Shape&, double resolution)> sample_shape;
  std::optional<ExactLine> exact_line;

  std::map<std::string, std::string> metadata;

  bool invertible() const { return static_cast<bool>(step_inv); }

  Point iterate(Point p, long m) const {
    if (m < 0 && !invertible()) throw InvalidArgument(name + " has no inverse");
    for (long i = 0; i < m; ++i) p = step(p);
    for (long i = 0; i > m; --i) p = step_inv(p);
    return p;
  }

  const SampledCompact& compact(const std::string& label) const {
    if (label.empty() || label == "default" || label == default_compact.label) return default_compact;
    auto it = compacts.find(label);
    if (it == compacts.end()) throw InvalidArgument("unknown compact '" + label + "' for " + name);
    return it->second;
  }
};

// Sample-grid knobs.  Zero means the system's default.
struct SystemOptions {
  std::size_t grid = 0;  // target number of grid points
  double span = 0;       // half width of the grid in the natural coordinate
  double alpha = 0.6180339887498949;  // rotation angle
  double eps0 = 0;       // base radius of the metric family
};

namespace detail {

inline double pick(double v, double dflt) { return v > 0 ? v : dflt; }

inline int density_from_gap(double eps0, double gap) {
  if (!(gap > 0)) return 0;
  return static_cast<int>(std::floor(std::log2(eps0 / gap)));
}

// Uniform grid of `count` points on [lo, hi].
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> v;
  if (count == 1) return {0.5 * (lo + hi)};
  for (std::size_t i = 0; i < count; ++i) v.push_back(lo + (hi - lo) * static_cast<double>(i) / (count - 1));
  return v;
}

inline bool in_interval(const mpq_class& a, const mpq_class& b, double t) {
  return cmp(a, t) <= 0 && cmp(b, t) >= 0;
}

inline double line_chordal(double t, double s) {
  return 2.0 * std::fabs(t - s) / std::sqrt((1.0 + t * t) * (1.0 + s * s));
}

inline Features line_embed(const Point& p) {
  if (std::holds_alternative<InfinityPoint>(p)) return {0, 1, 0};
  const double t = std::get<LinePoint>(p).t;
  if (std::fabs(t) > 1e150) return {2.0 / t, 1, 0};
  const double d = t * t + 1.0;
  return {2.0 * t / d, (t * t - 1.0) / d, 0};
}

inline Features sphere_features(const Point& p) {
  Features f{0, 0, 1};
  if (const auto* q = std::get_if<PlanePoint>(&p)) brouwer::sphere_embed(q->x, q->y, f.data());
  return f;
}

inline double rect_distance(double x, double y, const RectShape& r) {
  const double dx = std::max({r.x0 - x, 0.0, x - r.x1});
  const double dy = std::max({r.y0 - y, 0.0, y - r.y1});
  return std::hypot(dx, dy);
}

inline bool in_rect(const Point& p, const Shape& s) {
  const auto* q = std::get_if<PlanePoint>(&p);
  const auto* r = std::get_if<RectShape>(&s);
  return q && r && q->x >= r->x0 && q->x <= r->x1 && q->y >= r->y0 && q->y <= r->y1;
}

inline std::vector<Point> rect_grid(const RectShape& r, double h) {
  std::vector<Point> out;
  const auto nx = static_cast<std::size_t>(std::floor((r.x1 - r.x0) / h + 1e-9)) + 1;
  const auto ny = static_cast<std::size_t>(std::floor((r.y1 - r.y0) / h + 1e-9)) + 1;
  for (double y : linspace(r.y0, r.y1, ny))
    for (double x : linspace(r.x0, r.x1, nx)) out.push_back(PlanePoint{x, y});
  return out;
}

inline std::vector<Point> interval_grid_line(const IntervalShape& s, double h) {
  const double a = s.a.get_d(), b = s.b.get_d();
  const auto n = static_cast<std::size_t>(std::floor((b - a) / h + 1e-9)) + 1;
  std::vector<Point> out;
  for (double t : linspace(a, b, std::max<std::size_t>(n, 2))) out.push_back(LinePoint{t});
  return out;
}

inline bool on_arc(double x, double a, double b) {
  const double len = b - a - std::floor(b - a);
  const double off = x - a - std::floor(x - a);
  return off <= len + 1e-15;
}

inline SampledCompact filter_compact(const SampledCompact& base, const std::string& label,
                                     const std::function<bool(const Point&)>& keep) {
  std::vector<Point> pts;
  for (const auto& p : base.points)
    if (keep(p)) pts.push_back(p);
  return make_compact(label, std::move(pts), base.density_level);
}

}  // namespace detail

// ---------------------------------------------------------------- line

inline SystemInstance translation_line_compactified(const SystemOptions& opt = {}) {
  SystemInstance s;
  s.name = "translation-line";
  s.step = [](const Point& p) -> Point {
    if (const auto* q = std::get_if<LinePoint>(&p)) return LinePoint{q->t + 1};
    return p;
  };
  s.step_inv = [](const Point& p) -> Point {
    if (const auto* q = std::get_if<LinePoint>(&p)) return LinePoint{q->t - 1};
    return p;
  };
  const double eps0 = detail::pick(opt.eps0, 1.0);
  s.family = embedded_metric_family(detail::line_embed, 2, Geometry::euclidean, eps0, 0, 16);
  const double span = detail::pick(opt.span, 640);
  const std::size_t count = opt.grid > 0 ? opt.grid - 1 : static_cast<std::size_t>(2 * span / 0.125) + 1;
  std::vector<Point> pts;
  for (double t : detail::linspace(-span, span, count)) pts.push_back(LinePoint{t});
  pts.push_back(InfinityPoint{});
  const double h = 2 * span / static_cast<double>(count - 1);
  const double gap = std::max(2 * h, 2.0 / std::sqrt(1 + span * span));
  s.default_compact = make_compact("grid", std::move(pts), detail::density_from_gap(eps0, gap));
  s.compacts["infinity-ball"] = detail::filter_compact(s.default_compact, "infinity-ball", [](const Point& p) {
    const auto f = detail::line_embed(p);
    return std::hypot(f[0], f[1] - 1.0) <= 0.3;
  });
  s.compacts["core"] = detail::filter_compact(s.default_compact, "core", [](const Point& p) {
    const auto* q = std::get_if<LinePoint>(&p);
    return q && std::fabs(q->t) <= 4;
  });
  s.non_wandering = {InfinityPoint{}};
  s.expected_label = GrowthLabel::linear;
  s.shape_kind = "interval";
  s.contains = [](const Point& p, const Shape& sh) {
    const auto* q = std::get_if<LinePoint>(&p);
    const auto* iv = std::get_if<IntervalShape>(&sh);
    return q && iv && detail::in_interval(iv->a, iv->b, q->t);
  };
  s.distance_lb = [](const Point& p, const Shape& sh) {
    const auto& iv = std::get<IntervalShape>(sh);
    const double a = iv.a.get_d(), b = iv.b.get_d();
    if (std::holds_alternative<InfinityPoint>(p)) {
      return std::min(2.0 / std::sqrt(1 + a * a), 2.0 / std::sqrt(1 + b * b));
    }
    const double t = std::get<LinePoint>(p).t;
    if (t >= a && t <= b) return 0.0;
    return std::min(detail::line_chordal(t, a), detail::line_chordal(t, b)) * (1 - 1e-12);
  };
  s.sample_shape = [](const Shape& sh, double h) {
    return detail::interval_grid_line(std::get<IntervalShape>(sh), h);
  };
  s.exact_line = ExactLine{[](const mpq_class& a, long m, const mpq_class& b) { return sgn(mpq_class(a + m - b)); },
                           [](const mpq_class& a, long m) { return mpq_class(a + m); }, 1,
                           [](const mpq_class& a) -> Point { return LinePoint{a.get_d()}; }};
  s.metadata["grid_step"] = std::to_string(h);
  s.metadata["span"] = std::to_string(span);
  return s;
}

// ---------------------------------------------------------------- interval

inline SystemInstance north_south_interval(const SystemOptions& opt = {}) {
  SystemInstance s;
  s.name = "north-south-interval";
  // x/(2-x) halves the odds x/(1-x): tau -> tau - 1.
  s.step = [](const Point& p) -> Point { return IntervalPoint{std::get<IntervalPoint>(p).tau - 1}; };
  s.step_inv = [](const Point& p) -> Point { return IntervalPoint{std::get<IntervalPoint>(p).tau + 1}; };
  const double eps0 = detail::pick(opt.eps0, 0.5);
  s.family = embedded_metric_family(
      [](const Point& p) -> Features { return {interval_x(std::get<IntervalPoint>(p).tau), 0, 0}; }, 1,
      Geometry::euclidean, eps0, 0, 24);
  const double span = detail::pick(opt.span, 640);
  const std::size_t count = opt.grid > 2 ? opt.grid - 2 : static_cast<std::size_t>(2 * span / 0.125) + 1;
  std::vector<Point> pts;
  const double inf = std::numeric_limits<double>::infinity();
  pts.push_back(IntervalPoint{-inf});
  for (double t : detail::linspace(-span, span, count)) pts.push_back(IntervalPoint{t});
  pts.push_back(IntervalPoint{inf});
  const double h = 2 * span / static_cast<double>(count - 1);
  // x = sigma(tau) has slope at most ln2/4 in tau.
  s.default_compact = make_compact("logit-grid", std::move(pts),
                                   detail::density_from_gap(eps0, std::log(2.0) / 4 * h));
  s.compacts["interior"] = detail::filter_compact(s.default_compact, "interior", [](const Point& p) {
    const double x = interval_x(std::get<IntervalPoint>(p).tau);
    return x >= 0.1 && x <= 0.9;
  });
  {
    std::vector<Point> fine;
    for (int i = 0; i <= 800; ++i) fine.push_back(interval_point(0.1 + i * 1e-3));
    s.compacts["interior-fine"] = make_compact("interior-fine", std::move(fine),
                                               detail::density_from_gap(eps0, 1e-3));
  }
  {
    std::vector<Point> uni;
    const std::size_t m = std::size_t{1} << 12;
    for (std::size_t i = 0; i <= m; ++i) uni.push_back(interval_point(static_cast<double>(i) / m));
    s.compacts["uniform-x"] = make_compact("uniform-x", std::move(uni),
                                           detail::density_from_gap(eps0, 1.0 / m));
  }
  s.non_wandering = {IntervalPoint{-inf}, IntervalPoint{inf}};
  s.expected_label = GrowthLabel::linear;
  s.shape_kind = "interval";
  s.contains = [](const Point& p, const Shape& sh) {
    const auto* q = std::get_if<IntervalPoint>(&p);
    const auto* iv = std::get_if<IntervalShape>(&sh);
    if (!q || !iv) return false;
    return q->tau >= rational_tau(iv->a) && q->tau <= rational_tau(iv->b);
  };
  s.distance_lb = [](const Point& p, const Shape& sh) {
    const auto& iv = std::get<IntervalShape>(sh);
    const double x = interval_x(std::get<IntervalPoint>(p).tau);
    const double d = std::max({iv.a.get_d() - x, 0.0, x - iv.b.get_d()});
    return std::max(0.0, d - 1e-15);
  };
  s.sample_shape = [](const Shape& sh, double h) {
    const auto& iv = std::get<IntervalShape>(sh);
    const double a = iv.a.get_d(), b = iv.b.get_d();
    const auto n = static_cast<std::size_t>(std::floor((b - a) / h + 1e-9)) + 1;
    std::vector<Point> out;
    for (double x : detail::linspace(a, b, std::max<std::size_t>(n, 2))) out.push_back(interval_point(x));
    return out;
  };
  // Odds t = x/(1-x) scale by 2^-m.
  s.exact_line = ExactLine{[](const mpq_class& a, long m, const mpq_class& b) {
    mpq_class ta = a / (1 - a), tb = b / (1 - b);
    if (m >= 0) mpq_mul_2exp(tb.get_mpq_t(), tb.get_mpq_t(), static_cast<unsigned long>(m));
    else mpq_mul_2exp(ta.get_mpq_t(), ta.get_mpq_t(), static_cast<unsigned long>(-m));
    return cmp(ta, tb) < 0 ? -1 : (cmp(ta, tb) > 0 ? 1 : 0);
  },
                           [](const mpq_class& a, long m) {
                             mpq_class t = a / (1 - a);
                             if (m >= 0) mpq_div_2exp(t.get_mpq_t(), t.get_mpq_t(), static_cast<unsigned long>(m));
                             else mpq_mul_2exp(t.get_mpq_t(), t.get_mpq_t(), static_cast<unsigned long>(-m));
                             return mpq_class(t / (1 + t));
                           },
                           -1, [](const mpq_class& a) -> Point { return IntervalPoint{rational_tau(a)}; }};
  s.metadata["grid_step_logit"] = std::to_string(h);
  s.metadata["span"] = std::to_string(span);
  return s;
}

// ---------------------------------------------------------------- circle

namespace detail {

inline SystemInstance circle_system(const std::string& name, std::size_t grid, double eps0) {
  SystemInstance s;
  s.name = name;
  s.family = embedded_metric_family(
      [](const Point& p) -> Features { return {circle_value(std::get<CirclePoint>(p)), 0, 0}; }, 1,
      Geometry::cyclic, eps0, 0, 24);
  std::vector<Point> pts;
  for (std::size_t i = 0; i < grid; ++i) pts.push_back(circle_point(static_cast<double>(i) / grid));
  s.default_compact = make_compact("grid", unique_points(pts), density_from_gap(eps0, 1.0 / grid));
  s.shape_kind = "arc";
  s.contains = [](const Point& p, const Shape& sh) {
    const auto* q = std::get_if<CirclePoint>(&p);
    const auto* a = std::get_if<ArcShape>(&sh);
    return q && a && on_arc(circle_value(*q), a->a, a->b);
  };
  s.distance_lb = [](const Point& p, const Shape& sh) {
    const auto& a = std::get<ArcShape>(sh);
    const double x = circle_value(std::get<CirclePoint>(p));
    if (on_arc(x, a.a, a.b)) return 0.0;
    auto arcd = [](double u, double v) {
      double d = std::fabs(u - v);
      d -= std::floor(d);
      return std::min(d, 1 - d);
    };
    return std::max(0.0, std::min(arcd(x, a.a), arcd(x, a.b)) - 1e-15);
  };
  s.sample_shape = [](const Shape& sh, double h) {
    const auto& a = std::get<ArcShape>(sh);
    double len = a.b - a.a;
    len -= std::floor(len);
    std::vector<Point> out;
    const auto n = static_cast<std::size_t>(std::floor(len / h + 1e-9)) + 1;
    for (std::size_t i = 0; i < std::max<std::size_t>(n, 2); ++i)
      out.push_back(circle_point(a.a + len * static_cast<double>(i) / (std::max<std::size_t>(n, 2) - 1)));
    return unique_points(out);
  };
  return s;
}

}  // namespace detail

inline SystemInstance circle_rotation(double alpha, const SystemOptions& opt = {}) {
  if (!(alpha >= 0 && alpha < 1)) throw InvalidArgument("rotation angle must lie in [0,1)");
  const std::size_t grid = opt.grid > 0 ? opt.grid : 1000;
  SystemInstance s = detail::circle_system("rotation", grid, detail::pick(opt.eps0, 1.0));
  const std::uint64_t shift = circle_point(alpha).k;
  s.step = [shift](const Point& p) -> Point {
    return CirclePoint{(std::get<CirclePoint>(p).k + shift) % kCircleScale};
  };
  s.step_inv = [shift](const Point& p) -> Point {
    return CirclePoint{(std::get<CirclePoint>(p).k + kCircleScale - shift) % kCircleScale};
  };
  s.non_wandering_everything = true;
  s.expected_label = GrowthLabel::bounded;
  s.metadata["alpha"] = std::to_string(alpha);
  return s;
}

inline SystemInstance doubling_map(const SystemOptions& opt = {}) {
  const std::size_t grid = opt.grid > 0 ? opt.grid : 100000;
  SystemInstance s = detail::circle_system("doubling", grid, detail::pick(opt.eps0, 1.0));
  s.step = [](const Point& p) -> Point { return CirclePoint{(2 * std::get<CirclePoint>(p).k) % kCircleScale}; };
  s.non_wandering_everything = true;
  s.expected_label = GrowthLabel::exponential;
  return s;
}

// ---------------------------------------------------------------- disk

inline SystemInstance parabolic_disk(const SystemOptions& opt = {}) {
  using C = std::complex<double>;
  SystemInstance s;
  s.name = "parabolic-disk";
  // Cayley conjugate of w -> w + 1 on the upper half-plane.
  s.step = [](const Point& p) -> Point {
    const auto& q = std::get<PlanePoint>(p);
    const C z(q.x, q.y);
    const C r = (1.0 + C(-1, 2) * z) / (C(1, 2) - z);
    return PlanePoint{r.real(), r.imag()};
  };
  s.step_inv = [](const Point& p) -> Point {
    const auto& q = std::get<PlanePoint>(p);
    const C z(q.x, q.y);
    const C r = (-1.0 + C(1, 2) * z) / (C(-1, 2) + z);
    return PlanePoint{r.real(), r.imag()};
  };
  // The fixed point itself is a 0/0 of the formulas.
  auto fixed_guard = [](std::function<Point(const Point&)> f) {
    return [f](const Point& p) -> Point {
      const auto& q = std::get<PlanePoint>(p);
      if (q.x == 1.0 && q.y == 0.0) return p;
      return f(p);
    };
  };
  s.step = fixed_guard(s.step);
  s.step_inv = fixed_guard(s.step_inv);
  const double eps0 = detail::pick(opt.eps0, 1.0);
  s.family = embedded_metric_family(
      [](const Point& p) -> Features {
        const auto& q = std::get<PlanePoint>(p);
        return {q.x, q.y, 0};
      },
      2, Geometry::euclidean, eps0, 0, 20);
  const double span = detail::pick(opt.span, 640);
  const std::vector<double> rows = {0.0, 0.5, 1.0, 2.0};
  const std::size_t per_row =
      opt.grid > 1 ? (opt.grid - 1) / rows.size() : static_cast<std::size_t>(2 * span / 0.5) + 1;
  std::vector<Point> pts;
  for (double v : rows)
    for (double u : detail::linspace(-span, span, per_row)) {
      const C w(u, v);
      const C z = (w - C(0, 1)) / (w + C(0, 1));
      pts.push_back(PlanePoint{z.real(), z.imag()});
    }
  pts.push_back(PlanePoint{1.0, 0.0});
  const double h = 2 * span / static_cast<double>(per_row - 1);
  s.default_compact = make_compact("halfplane-grid", std::move(pts), detail::density_from_gap(eps0, 2 * h));
  s.compacts["near-fixed"] = detail::filter_compact(s.default_compact, "near-fixed", [](const Point& p) {
    const auto& q = std::get<PlanePoint>(p);
    return std::hypot(q.x - 1.0, q.y) <= 0.3;
  });
  s.non_wandering = {PlanePoint{1.0, 0.0}};
  s.expected_label = GrowthLabel::linear;
  s.shape_kind = "rect";
  s.contains = detail::in_rect;
  s.distance_lb = [](const Point& p, const Shape& sh) {
    const auto& q = std::get<PlanePoint>(p);
    return std::max(0.0, detail::rect_distance(q.x, q.y, std::get<RectShape>(sh)) - 1e-15);
  };
  s.sample_shape = [](const Shape& sh, double h) {
    std::vector<Point> out;
    for (const auto& p : detail::rect_grid(std::get<RectShape>(sh), h)) {
      const auto& q = std::get<PlanePoint>(p);
      if (q.x * q.x + q.y * q.y <= 1.0) out.push_back(p);
    }
    return out;
  };
  s.metadata["span"] = std::to_string(span);
  return s;
}

// ---------------------------------------------------------------- sphere

struct BrouwerGrid {
  double span = 256;    // entry offsets a = 0..span along x = -a
  double c_step = 0.9;  // spacing of curve constants
  double line_step = 0.5;
};

namespace detail {

// Points of the upper strip whose curve constant is c, entering x = 0 after
// about a steps; plus a patch near the origin, the two invariant lines, a ring
// of large radius and infinity.
inline std::vector<Point> brouwer_samples(const BrouwerGrid& g) {
  std::vector<Point> pts;
  for (int a = 0; a <= static_cast<int>(g.span); ++a) {
    const double c_max = 4.5 + (g.span - a) / 2;
    for (double c = 4.5; c <= c_max + 1e-9; c += g.c_step) {
      const auto st = brouwer::on_curve(c, -a, true);
      pts.push_back(PlanePoint{st.x, st.y});
    }
  }
  for (const auto& p : rect_grid(RectShape{-2, 2, -1, 2}, 0.125)) pts.push_back(p);
  const auto nl = static_cast<std::size_t>(2 * g.span / g.line_step) + 1;
  for (double x : linspace(-g.span, g.span, nl)) {
    pts.push_back(PlanePoint{x, 1.0});
    pts.push_back(PlanePoint{x, 0.0});
  }
  const double pi = std::acos(-1.0);
  for (double r : {g.span / 4, g.span / 2, g.span, 2 * g.span, 4 * g.span})
    for (int j = 0; j < 64; ++j) pts.push_back(PlanePoint{r * std::cos(2 * pi * j / 64), r * std::sin(2 * pi * j / 64)});
  pts.push_back(InfinityPoint{});
  return unique_points(pts);
}

}  // namespace detail

inline SystemInstance brouwer_sphere(const SystemOptions& opt = {}, BrouwerGrid grid = {}) {
  SystemInstance s;
  s.name = "brouwer-sphere";
  s.step = [](const Point& p) -> Point {
    if (const auto* q = std::get_if<PlanePoint>(&p)) {
      const auto r = brouwer::step({q->x, q->y});
      return PlanePoint{r.x, r.y};
    }
    return p;
  };
  s.step_inv = [](const Point& p) -> Point {
    if (const auto* q = std::get_if<PlanePoint>(&p)) {
      const auto r = brouwer::step_inv({q->x, q->y});
      return PlanePoint{r.x, r.y};
    }
    return p;
  };
  const double eps0 = detail::pick(opt.eps0, 16.0);
  s.family = embedded_metric_family(detail::sphere_features, 3, Geometry::euclidean, eps0, 0, 12);
  if (opt.span > 0) grid.span = opt.span;
  if (opt.grid > 0) {
    // Scale the curve spacing so the foliation part has about `grid` points.
    const double tri = (grid.span + 1) * (grid.span / 4 + 1);
    grid.c_step = std::max(0.05, tri / static_cast<double>(opt.grid));
  }
  s.default_compact = make_compact("foliation-grid", detail::brouwer_samples(grid),
                                   detail::density_from_gap(eps0, 2 * grid.c_step));
  s.compacts["square"] = make_compact("square", detail::rect_grid(RectShape{0, 1, 0, 1}, 1.0 / 32), 0);
  s.non_wandering = {InfinityPoint{}};
  s.expected_label = GrowthLabel::polynomial;
  s.shape_kind = "rect";
  s.contains = detail::in_rect;
  // Chordal distance is at least 2 |p - q| / sqrt((1+|p|^2)(1+|q|^2)); bound
  // |q| by the farthest corner of the rectangle.
  s.distance_lb = [](const Point& p, const Shape& sh) {
    const auto& r = std::get<RectShape>(sh);
    const double m2 = std::max(r.x0 * r.x0, r.x1 * r.x1) + std::max(r.y0 * r.y0, r.y1 * r.y1);
    if (std::holds_alternative<InfinityPoint>(p)) return 2.0 / std::sqrt(1 + m2) * (1 - 1e-12);
    const auto& q = std::get<PlanePoint>(p);
    const double d = detail::rect_distance(q.x, q.y, r);
    return 2.0 * d / std::sqrt((1 + q.x * q.x + q.y * q.y) * (1 + m2)) * (1 - 1e-12);
  };
  // Rows follow the foliation: evenly spaced curve constants, three columns.
  s.sample_shape = [](const Shape& sh, double c_step) {
    const auto& r = std::get<RectShape>(sh);
    std::vector<Point> out;
    for (double x : detail::linspace(r.x0, r.x1, 3)) {
      for (double y : detail::linspace(r.y0, r.y1, 7)) out.push_back(PlanePoint{x, y});
      for (double c = x + 4.0 + c_step; c <= x + 400.0; c += c_step) {
        for (bool upper : {true, false}) {
          const auto st = brouwer::on_curve(c, x, upper);
          if (st.y >= r.y0 && st.y <= r.y1) out.push_back(PlanePoint{st.x, st.y});
        }
      }
    }
    return unique_points(out);
  };
  s.metadata["span"] = std::to_string(grid.span);
  s.metadata["c_step"] = std::to_string(grid.c_step);
  s.metadata["shape_resolution"] = "0.5";
  return s;
}

// ---------------------------------------------------------------- double arrow

namespace detail {

// (x, s) -> (x/(2-x), s) on canonical rationals; gcd(p, 2q-p) is 1 or 2.
inline SplitPoint split_step(const SplitPoint& p) {
  SplitPoint r;
  r.upper = p.upper;
  mpz_class num = p.x.get_num();
  mpz_class den = 2 * p.x.get_den() - num;
  if (mpz_even_p(num.get_mpz_t()) && sgn(num) != 0) {
    num /= 2;
    den /= 2;
  }
  if (sgn(num) == 0) den = 1;
  mpz_swap(mpq_numref(r.x.get_mpq_t()), num.get_mpz_t());
  mpz_swap(mpq_denref(r.x.get_mpq_t()), den.get_mpz_t());
  return r;
}

// inverse 2x/(1+x)
inline SplitPoint split_step_inv(const SplitPoint& p) {
  SplitPoint r;
  r.upper = p.upper;
  mpz_class num = 2 * p.x.get_num();
  mpz_class den = p.x.get_den() + p.x.get_num();
  if (mpz_even_p(den.get_mpz_t())) {
    num /= 2;
    den /= 2;
  }
  if (sgn(num) == 0) den = 1;
  mpz_swap(mpq_numref(r.x.get_mpq_t()), num.get_mpz_t());
  mpz_swap(mpq_denref(r.x.get_mpq_t()), den.get_mpz_t());
  return r;
}

inline std::vector<mpq_class> dyadic_cuts(int level) {
  std::vector<mpq_class> cuts;
  const long m = 1L << level;
  for (long j = 1; j < m; ++j) {
    mpq_class c(j, m);
    c.canonicalize();
    cuts.push_back(c);
  }
  return cuts;
}

}  // namespace detail

struct DoubleArrowGrid {
  int dyadic_level = 8;  // generation level G
  double span = 640;     // log-odds window of the geometric samples
};

inline SystemInstance double_arrow_north_south(const SystemOptions& opt = {}, DoubleArrowGrid grid = {}) {
  SystemInstance s;
  s.name = "double-arrow";
  s.step = [](const Point& p) -> Point { return detail::split_step(std::get<SplitPoint>(p)); };
  s.step_inv = [](const Point& p) -> Point { return detail::split_step_inv(std::get<SplitPoint>(p)); };
  if (opt.span > 0) grid.span = opt.span;
  const int G = grid.dyadic_level;
  std::vector<Point> pts;
  const long top = 1L << G;
  for (long j = 0; j <= top; ++j) {
    mpq_class x(j, top);
    x.canonicalize();
    if (j > 0) pts.push_back(SplitPoint{x, false});
    if (j < top) pts.push_back(SplitPoint{x, true});
  }
  // Odds m 2^j with m = 8..15: eight samples per unit of log-odds.
  const int octaves = static_cast<int>(grid.span);
  const int per_octave = opt.grid > 0 ? std::max<int>(1, static_cast<int>(opt.grid / (4.0 * octaves))) : 8;
  for (int j = -octaves; j < octaves; ++j) {
    for (int i = 0; i < per_octave; ++i) {
      const long m = per_octave + i;
      mpz_class odds_num = m, odds_den = per_octave;
      const int e = j;
      if (e >= 0) odds_num <<= e;
      else odds_den <<= -e;
      mpq_class x(odds_num, odds_num + odds_den);
      x.canonicalize();
      pts.push_back(SplitPoint{x, false});
      pts.push_back(SplitPoint{x, true});
    }
  }
  pts = unique_points(pts);
  std::vector<std::vector<mpq_class>> cuts;
  for (int k = 0; k <= G; ++k) cuts.push_back(detail::dyadic_cuts(k));
  {
    std::vector<mpq_class> all = cuts.back();
    for (const auto& p : pts) {
      const auto& x = std::get<SplitPoint>(p).x;
      if (sgn(x) > 0 && cmp(x, 1) < 0) all.push_back(x);
    }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    // Midpoints separate (x', 1) from (x, 0) for consecutive coordinates.
    std::vector<mpq_class> with_mid;
    mpq_class prev(0);
    for (const auto& c : all) {
      with_mid.push_back((prev + c) / 2);
      with_mid.push_back(c);
      prev = c;
    }
    with_mid.push_back((prev + 1) / 2);
    cuts.push_back(std::move(with_mid));
  }
  s.family = partition_family(std::move(cuts), 0);
  s.default_compact = make_compact("dyadic-and-geometric", std::move(pts), G);
  mpq_class zero(0), one(1);
  s.non_wandering = {SplitPoint{zero, true}, SplitPoint{one, false}};
  s.expected_label = GrowthLabel::linear;
  s.shape_kind = "interval";
  s.contains = [](const Point& p, const Shape& sh) {
    const auto* q = std::get_if<SplitPoint>(&p);
    const auto* iv = std::get_if<IntervalShape>(&sh);
    return q && iv && cmp(q->x, iv->a) >= 0 && cmp(q->x, iv->b) <= 0;
  };
  s.metadata["dyadic_level"] = std::to_string(G);
  s.metadata["span"] = std::to_string(grid.span);
  return s;
}

// Projection (x, s) -> x onto the interval system; exact form.
inline mpq_class split_projection_exact(const Point& p) { return std::get<SplitPoint>(p).x; }

// x/(2-x) on rationals, written independently of the lifted step.
inline mpq_class interval_step_exact(const mpq_class& x) {
  mpq_class r = x / (2 - x);
  return r;
}

struct Semiconjugacy {
  std::function<Point(const Point&)> project;
  SystemInstance target;
};

inline Semiconjugacy semiconjugacy_projection(const SystemInstance& double_arrow) {
  if (double_arrow.name != "double-arrow") throw InvalidArgument("projection needs the double-arrow system");
  Semiconjugacy sc;
  sc.project = [](const Point& p) -> Point {
    return IntervalPoint{rational_tau(std::get<SplitPoint>(p).x)};
  };
  sc.target = north_south_interval();
  std::vector<Point> image;
  for (const auto& p : double_arrow.default_compact.points) image.push_back(sc.project(p));
  sc.target.default_compact = make_compact("projected", unique_points(image), 0);
  sc.target.compacts.clear();
  return sc;
}

// f^r with the same family and compacts.
inline SystemInstance power_system(const SystemInstance& base, int r) {
  if (r < 1) throw InvalidArgument("power must be >= 1");
  SystemInstance s = base;
  s.name = base.name + "^" + std::to_string(r);
  auto f = base.step;
  s.step = [f, r](const Point& p) {
    Point q = p;
    for (int i = 0; i < r; ++i) q = f(q);
    return q;
  };
  if (base.invertible()) {
    auto g = base.step_inv;
    s.step_inv = [g, r](const Point& p) {
      Point q = p;
      for (int i = 0; i < r; ++i) q = g(q);
      return q;
    };
  }
  s.exact_line.reset();
  return s;
}

inline const std::vector<std::string>& system_names() {
  static const std::vector<std::string> names = {"north-south-interval", "rotation",       "doubling",
                                                 "brouwer-sphere",       "parabolic-disk", "double-arrow",
                                                 "translation-line"};
  return names;
}

inline SystemInstance make_system(const std::string& name, const SystemOptions& opt = {}) {
  if (name == "north-south-interval") return north_south_interval(opt);
  if (name == "rotation") return circle_rotation(opt.alpha, opt);
  if (name == "doubling") return doubling_map(opt);
  if (name == "brouwer-sphere") return brouwer_sphere(opt);
  if (name == "parabolic-disk") return parabolic_disk(opt);
  if (name == "double-arrow") return double_arrow_north_south(opt);
  if (name == "translation-line") return translation_line_compactified(opt);
  throw UnknownSystem("unknown system '" + name + "'");
}

}  // namespace entrograph
