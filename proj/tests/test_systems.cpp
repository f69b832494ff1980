#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "entrograph/systems.hpp"

using namespace entrograph;

namespace {

double x_of(const Point& p) { return interval_x(std::get<IntervalPoint>(p).tau); }

// Composite 8-point Gauss-Legendre on [a, b] with `panels` equal panels.
template <class F>
double gauss_legendre(F f, double a, double b, int panels) {
  static const double xs[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
  static const double ws[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
  const double h = (b - a) / panels;
  double total = 0;
  for (int i = 0; i < panels; ++i) {
    const double mid = a + (i + 0.5) * h, half = 0.5 * h;
    for (int j = 0; j < 4; ++j) total += ws[j] * half * (f(mid - half * xs[j]) + f(mid + half * xs[j]));
  }
  return total;
}

// Arc length of x = c + 1/(y(y-1)) between heights y_lo < y_hi, from the
// plain derivative formula.
double arc_between(double y_lo, double y_hi) {
  auto integrand = [](double t) {
    const double d = -(2 * t - 1) / std::pow(t * (t - 1), 2);
    return std::sqrt(1 + d * d);
  };
  return gauss_legendre(integrand, y_lo, y_hi, 4096);
}

double chordal_plane(const Point& p, const Point& q) {
  double a[3] = {0, 0, 1}, b[3] = {0, 0, 1};
  if (auto* u = std::get_if<PlanePoint>(&p)) brouwer::sphere_embed(u->x, u->y, a);
  if (auto* v = std::get_if<PlanePoint>(&q)) brouwer::sphere_embed(v->x, v->y, b);
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

}  // namespace

TEST(NorthSouth, FrozenExamples) {
  auto s = north_south_interval();
  EXPECT_EQ(x_of(s.step(interval_point(0))), 0.0);
  EXPECT_EQ(x_of(s.step(interval_point(1))), 1.0);
  EXPECT_NEAR(x_of(s.step(interval_point(0.5))), 1.0 / 3.0, 1e-15);
  for (double x : {0.01, 0.2, 0.5, 0.77, 0.999}) {
    EXPECT_NEAR(x_of(s.step(interval_point(x))), x / (2 - x), 1e-15);
    EXPECT_NEAR(x_of(s.step_inv(interval_point(x))), 2 * x / (1 + x), 1e-15);
  }
  for (const auto& p : s.default_compact.points) {
    const double x = x_of(p);
    if (x > 0 && x < 1) {
      EXPECT_LT(x / (2 - x), x);
    }
  }
  EXPECT_GE(s.default_compact.points.size(), 10000u);
}

TEST(Rotation, FrozenExamples) {
  auto s = circle_rotation(0.25);
  for (const auto& p : s.default_compact.points) EXPECT_EQ(s.iterate(p, 4), p);
  EXPECT_NEAR(circle_distance(circle_point(0.1), circle_point(0.9)), 0.2, 1e-15);
  const auto& pts = s.default_compact.points;
  for (std::size_t i = 0; i + 7 < pts.size(); i += 7) {
    const auto a = std::get<CirclePoint>(pts[i]), b = std::get<CirclePoint>(pts[i + 7]);
    EXPECT_EQ(circle_distance(std::get<CirclePoint>(s.step(a)), std::get<CirclePoint>(s.step(b))),
              circle_distance(a, b));
  }
  EXPECT_THROW(circle_rotation(1.5), InvalidArgument);
}

TEST(Doubling, FrozenExamples) {
  auto s = doubling_map();
  EXPECT_NEAR(circle_value(std::get<CirclePoint>(s.step(circle_point(0.3)))), 0.6, 1e-15);
  EXPECT_EQ(circle_value(std::get<CirclePoint>(s.step(circle_point(0.75)))), 0.5);
  EXPECT_FALSE(s.invertible());
  EXPECT_THROW(s.iterate(circle_point(0.1), -1), InvalidArgument);
  EXPECT_EQ(s.default_compact.points.size(), 100000u);
}

TEST(Brouwer, TranslationZones) {
  auto s = brouwer_sphere({}, BrouwerGrid{16, 2.0, 1.0});
  EXPECT_EQ(s.step(PlanePoint{5, 2}), Point(PlanePoint{6, 2}));
  EXPECT_EQ(s.step(PlanePoint{5, -1}), Point(PlanePoint{4, -1}));
  EXPECT_EQ(s.step(PlanePoint{5, 1}), Point(PlanePoint{6, 1}));
  EXPECT_EQ(s.step(PlanePoint{5, 0}), Point(PlanePoint{4, 0}));
  EXPECT_EQ(s.step_inv(PlanePoint{5, 2}), Point(PlanePoint{4, 2}));
  EXPECT_EQ(s.step(InfinityPoint{}), Point(InfinityPoint{}));
}

TEST(Brouwer, StripStepHasUnitArcLength) {
  const std::vector<std::pair<double, double>> starts = {
      {0, 0.5}, {0, 0.9}, {0, 0.1}, {-3, 0.99}, {2, 0.01}, {10, 0.7}, {-50, 0.999}, {1, 0.3}, {0.2, 0.6}};
  for (auto [x, y] : starts) {
    const auto r = brouwer::step({x, y});
    ASSERT_LT(r.y, y);
    EXPECT_NEAR(arc_between(r.y, y), 1.0, 1e-6) << x << "," << y;
    const double c0 = x + 1 / (y * (1 - y)), c1 = r.x + 1 / (r.y * (1 - r.y));
    EXPECT_NEAR(c1, c0, 1e-9 * std::max(1.0, std::fabs(c0)));
    const auto back = brouwer::step_inv(r);
    EXPECT_NEAR(back.x, x, 1e-9);
    EXPECT_NEAR(back.y, y, 1e-9);
  }
}

TEST(Brouwer, InverseAndMonotonicityOnSamples) {
  auto s = brouwer_sphere({}, BrouwerGrid{32, 1.0, 1.0});
  for (const auto& p : s.default_compact.points) {
    const Point q = s.step(p);
    EXPECT_LT(chordal_plane(s.step_inv(q), p), 1e-9) << describe(p);
    if (const auto* u = std::get_if<PlanePoint>(&p)) {
      const auto& v = std::get<PlanePoint>(q);
      if (u->y > 0 && u->y < 1) {
        EXPECT_LT(v.y, u->y);
      }
      if (u->y >= 1) {
        EXPECT_EQ(v.x, u->x + 1);
      }
      if (u->y <= 0) {
        EXPECT_EQ(v.x, u->x - 1);
      }
    }
  }
}

TEST(Brouwer, DefaultGridSize) {
  auto s = brouwer_sphere();
  EXPECT_GE(s.default_compact.points.size(), 20000u);
}

TEST(ParabolicDisk, FixedPointDiskAndInverse) {
  auto s = parabolic_disk();
  EXPECT_EQ(s.step(PlanePoint{1, 0}), Point(PlanePoint{1, 0}));
  std::size_t checked = 0;
  for (const auto& p : s.default_compact.points) {
    const auto q = std::get<PlanePoint>(s.step(p));
    EXPECT_LE(std::hypot(q.x, q.y), 1.0 + 1e-12);
    const auto b = std::get<PlanePoint>(s.step_inv(Point(q)));
    const auto& o = std::get<PlanePoint>(p);
    EXPECT_LT(std::hypot(b.x - o.x, b.y - o.y), 1e-12);
    ++checked;
  }
  EXPECT_GE(checked, 10000u);
}

// Conjugation check: the disk step equals C(C^-1(z) + 1).
TEST(ParabolicDisk, MatchesCayleyConjugate) {
  using C = std::complex<double>;
  auto s = parabolic_disk();
  for (double u : {-3.0, 0.0, 0.7, 12.0})
    for (double v : {0.0, 0.3, 2.0}) {
      const C w(u, v), i(0, 1);
      const C z = (w - i) / (w + i);
      const C expect = (w + 1.0 - i) / (w + 1.0 + i);
      const auto got = std::get<PlanePoint>(s.step(PlanePoint{z.real(), z.imag()}));
      EXPECT_NEAR(got.x, expect.real(), 1e-12);
      EXPECT_NEAR(got.y, expect.imag(), 1e-12);
    }
}

TEST(DoubleArrow, StepPreservesSidesAndOrder) {
  SystemOptions opt;
  opt.span = 40;
  auto s = double_arrow_north_south(opt);
  const auto half0 = std::get<SplitPoint>(s.step(SplitPoint{mpq_class(1, 2), false}));
  const auto half1 = std::get<SplitPoint>(s.step(SplitPoint{mpq_class(1, 2), true}));
  EXPECT_EQ(half0.x, mpq_class(1, 3));
  EXPECT_FALSE(half0.upper);
  EXPECT_EQ(half1.x, mpq_class(1, 3));
  EXPECT_TRUE(half1.upper);
  auto pts = s.default_compact.points;
  std::sort(pts.begin(), pts.end(), point_less);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Point a = s.step(pts[i]), b = s.step(pts[i + 1]);
    ASSERT_TRUE(point_less(a, b)) << describe(pts[i]);
    EXPECT_EQ(std::get<SplitPoint>(a).upper, std::get<SplitPoint>(pts[i]).upper);
    EXPECT_EQ(std::get<SplitPoint>(a).x, std::get<SplitPoint>(pts[i]).x / (2 - std::get<SplitPoint>(pts[i]).x));
    EXPECT_EQ(s.step_inv(a), pts[i]);
  }
}

TEST(DoubleArrow, DefaultGridSize) {
  auto s = double_arrow_north_south();
  EXPECT_GE(s.default_compact.points.size(), 10000u);
}

TEST(TranslationLine, FrozenExamples) {
  auto s = translation_line_compactified();
  EXPECT_EQ(s.step(LinePoint{0}), Point(LinePoint{1}));
  auto dist_inf = [&](double t) {
    auto a = s.family.embed(LinePoint{t}), b = s.family.embed(InfinityPoint{});
    return std::hypot(a[0] - b[0], a[1] - b[1]);
  };
  double prev = 3;
  for (double n : {1.0, 10.0, 100.0, 1000.0, 1e6}) {
    EXPECT_LT(dist_inf(n), prev);
    prev = dist_inf(n);
  }
  EXPECT_LT(prev, 1e-5);
  // [0,1] enters the eps-ball at infinity once n > sqrt(4/eps^2 - 1).
  for (double eps : {0.5, 0.1, 0.03}) {
    const int predicted = static_cast<int>(std::floor(std::sqrt(4 / (eps * eps) - 1))) + 1;
    int n0 = 0;
    for (int n = 0;; ++n) {
      bool all_in = true;
      for (int j = 0; j <= 64; ++j) all_in = all_in && dist_inf(n + j / 64.0) < eps;
      if (all_in) {
        n0 = n;
        break;
      }
    }
    EXPECT_EQ(n0, predicted) << eps;
  }
}

TEST(Catalog, NonWanderingPointsAreFixed) {
  for (const auto& name : system_names()) {
    SystemOptions opt;
    opt.grid = 200;
    opt.span = 8;
    auto s = make_system(name, opt);
    for (const auto& p : s.non_wandering) EXPECT_EQ(s.step(p), p) << name;
  }
  EXPECT_THROW(make_system("no-such-system"), UnknownSystem);
}

TEST(Catalog, InverseOnSamples) {
  for (const auto& name : system_names()) {
    SystemOptions opt;
    opt.grid = 2000;
    opt.span = 32;
    auto s = make_system(name, opt);
    if (!s.invertible()) continue;
    for (const auto& p : s.default_compact.points) {
      const Point back = s.step_inv(s.step(p));
      const auto a = s.family.embed(p), b = s.family.embed(back);
      if (s.family.geometry == Geometry::cells) {
        EXPECT_EQ(back, p) << name;
      } else {
        EXPECT_LT(std::hypot(std::hypot(a[0] - b[0], a[1] - b[1]), a[2] - b[2]), 1e-9) << name;
      }
    }
  }
}

TEST(Semiconjugacy, ExactEquivarianceOnSamples) {
  SystemOptions opt;
  opt.span = 64;
  auto da = double_arrow_north_south(opt);
  auto sc = semiconjugacy_projection(da);
  EXPECT_EQ(split_projection_exact(SplitPoint{mpq_class(1, 2), false}), mpq_class(1, 2));
  EXPECT_EQ(split_projection_exact(SplitPoint{mpq_class(1, 2), true}), mpq_class(1, 2));
  for (const auto& p : da.default_compact.points) {
    EXPECT_EQ(split_projection_exact(da.step(p)), interval_step_exact(split_projection_exact(p)));
  }
  EXPECT_EQ(sc.target.default_compact.points.size(), da.default_compact.points.size() / 2 + 1);
  EXPECT_EQ(sc.project(SplitPoint{mpq_class(1, 2), true}), Point(IntervalPoint{0}));
  EXPECT_THROW(semiconjugacy_projection(translation_line_compactified()), InvalidArgument);
}

TEST(ExactLine, ShiftCompareMatchesDirectIteration) {
  auto tl = translation_line_compactified();
  EXPECT_EQ(tl.exact_line->shift_compare(mpq_class(0), 10, mpq_class(10)), 0);
  EXPECT_EQ(tl.exact_line->shift_compare(mpq_class(1, 2), 9, mpq_class(10)), -1);
  auto ns = north_south_interval();
  for (int m = -5; m <= 5; ++m) {
    mpq_class a(3, 10), b(1, 7);
    mpq_class fa = a;
    for (int i = 0; i < m; ++i) fa = fa / (2 - fa);
    for (int i = 0; i > m; --i) fa = 2 * fa / (1 + fa);
    const int expect = fa < b ? -1 : (fa > b ? 1 : 0);
    EXPECT_EQ(ns.exact_line->shift_compare(a, m, b), expect) << m;
  }
}
