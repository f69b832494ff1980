#include <gtest/gtest.h>

#include <cmath>

#include "entrograph/entropy.hpp"

using namespace entrograph;

namespace {

// Plain greedy straight from the definition: orbits as points, membership
// through the family, seeds carried from n - 1.
std::vector<std::vector<std::size_t>> naive_greedy(const SystemInstance& sys, const std::vector<Point>& pts, int k,
                                                   std::size_t horizon) {
  std::vector<std::vector<Point>> orbit(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Point p = pts[i];
    for (std::size_t t = 0; t < horizon; ++t) {
      orbit[i].push_back(p);
      p = sys.step(p);
    }
  }
  auto separated = [&](std::size_t a, std::size_t b, std::size_t n) {
    for (std::size_t t = 0; t < n; ++t)
      if (!sys.family.member(k, orbit[a][t], orbit[b][t])) return true;
    return false;
  };
  std::vector<std::vector<std::size_t>> sets;
  std::vector<std::size_t> chosen;
  std::vector<char> in(pts.size(), 0);
  for (std::size_t n = 1; n <= horizon; ++n) {
    for (std::size_t p = 0; p < pts.size(); ++p) {
      if (in[p]) continue;
      bool ok = true;
      for (std::size_t a : chosen) ok = ok && separated(p, a, n);
      if (ok) {
        chosen.push_back(p);
        in[p] = 1;
      }
    }
    auto sorted = chosen;
    std::sort(sorted.begin(), sorted.end());
    sets.push_back(sorted);
  }
  return sets;
}

std::vector<Point> subsample(const std::vector<Point>& pts, std::size_t count) {
  std::vector<Point> out;
  const std::size_t stride = std::max<std::size_t>(1, pts.size() / count);
  for (std::size_t i = 0; i < pts.size(); i += stride) out.push_back(pts[i]);
  return out;
}

SystemInstance small_system(const std::string& name) {
  SystemOptions opt;
  opt.grid = 300;
  opt.span = 12;
  return make_system(name, opt);
}

}  // namespace

TEST(GreedySeparated, MatchesNaiveGreedyOnAllCatalogSystems) {
  for (const auto& name : system_names()) {
    auto sys = small_system(name);
    const auto pts = subsample(sys.default_compact.points, 250);
    const std::size_t H = 24;
    const OrbitTable o = build_orbits(sys, pts, H);
    for (int k : {sys.family.min_level + 2, sys.family.min_level + 5, sys.family.min_level + 8}) {
      if (k > sys.family.max_level) continue;
      const auto scan = greedy_separated(sys.family, k, o, H);
      const auto oracle = naive_greedy(sys, pts, k, H);
      for (std::size_t n = 1; n <= H; ++n) {
        const auto got = scan.members(n);
        ASSERT_EQ(got.size(), oracle[n - 1].size()) << name << " k=" << k << " n=" << n;
        EXPECT_TRUE(std::equal(got.begin(), got.end(), oracle[n - 1].begin())) << name << " k=" << k;
        EXPECT_EQ(scan.counts[n - 1], got.size());
      }
    }
  }
}

// A maximal separated set is a generator: every sample lies in the dynamical
// ball of a member.
TEST(GreedySeparated, MaximalSetCoversSamples) {
  for (const auto& name : {"north-south-interval", "doubling", "brouwer-sphere", "double-arrow"}) {
    auto sys = small_system(name);
    const auto pts = subsample(sys.default_compact.points, 200);
    const std::size_t H = 16;
    const OrbitTable o = build_orbits(sys, pts, H);
    const int k = sys.family.min_level + 4;
    const auto scan = greedy_separated(sys.family, k, o, H);
    for (std::size_t n : {std::size_t{1}, std::size_t{7}, H}) {
      const auto members = scan.members(n);
      for (std::size_t p = 0; p < pts.size(); ++p) {
        bool covered = false;
        for (auto a : members) covered = covered || first_split(sys.family, k, o, p, a, 0, n) == n;
        EXPECT_TRUE(covered) << name << " n=" << n << " p=" << p;
      }
    }
  }
}

TEST(GreedySeparated, MonotoneInLevelAndTime) {
  for (const auto& name : system_names()) {
    auto sys = small_system(name);
    CountEngine e(sys, sys.default_compact, 32);
    std::vector<std::size_t> prev;
    for (int k = sys.family.min_level; k <= std::min(sys.family.max_level, sys.family.min_level + 10); ++k) {
      const auto& c = e.separated(k).counts;
      for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LE(c[i - 1], c[i]) << name;
      for (std::size_t i = 0; i < prev.size(); ++i) EXPECT_LE(prev[i], c[i]) << name << " k=" << k;
      prev = c;
    }
  }
}

TEST(GreedySeparated, IsometryAndIdentityExamples) {
  auto rot = circle_rotation(0.6180339887498949);
  CountEngine e(rot, rot.default_compact, 64);
  for (int k = 0; k <= 12; ++k) {
    const auto& c = e.separated(k).counts;
    for (auto v : c) EXPECT_EQ(v, c[0]) << k;
  }
  auto id = circle_rotation(0.0);
  const auto two = make_compact("two", {circle_point(0.0), circle_point(0.4)}, 0);
  const auto s = separated_count(id, two, 2, 20);
  for (std::size_t n = 1; n <= 20; ++n) EXPECT_EQ(s(n), 2);
  EXPECT_THROW(separated_count(id, two, 99, 20), InvalidArgument);
}

TEST(GreedySeparated, ShuffledOrderStillSeparatedAndMaximal) {
  auto sys = small_system("north-south-interval");
  CountEngine e(sys, sys.default_compact, 32);
  const auto plain = e.separated(5).counts;
  const auto shuffled = e.shuffled(5, 12345);
  ASSERT_EQ(plain.size(), shuffled.size());
  for (std::size_t i = 1; i < shuffled.size(); ++i) EXPECT_LE(shuffled[i - 1], shuffled[i]);
  // Both sit between the optimum generator and separated sizes at the coarse
  // and fine level respectively.
  const auto& g = e.generators(6);
  const auto& coarse = e.separated(4).counts;
  for (std::size_t i = 0; i < plain.size(); ++i) {
    EXPECT_GE(shuffled[i], coarse[i]);
    EXPECT_LE(g[i], e.separated(6).counts[i]);
  }
}

// Doubling ball around 0 at eps = 1/8 and n = 3: every point stays within
// 1/8 of 0 for three steps, so |x| < 1/32 in arc distance.
TEST(DynamicalBall, Examples) {
  auto dbl = doubling_map(SystemOptions{2000, 0, 0, 0});
  const auto ball3 = dynamical_ball(dbl, circle_point(0.0), 3, 3, dbl.default_compact);
  ASSERT_FALSE(ball3.empty());
  for (const auto& p : ball3) EXPECT_LT(circle_distance(std::get<CirclePoint>(p), circle_point(0.0)), 1.0 / 32);
  const auto ball1 = dynamical_ball(dbl, circle_point(0.25), 1, 4, dbl.default_compact);
  EXPECT_EQ(ball1, ball(dbl.family, circle_point(0.25), 4, dbl.default_compact));
  auto id = circle_rotation(0.0, SystemOptions{500, 0, 0, 0});
  EXPECT_EQ(dynamical_ball(id, circle_point(0.5), 9, 5, id.default_compact),
            dynamical_ball(id, circle_point(0.5), 1, 5, id.default_compact));
  EXPECT_THROW(dynamical_ball(id, circle_point(0.5), 0, 5, id.default_compact), InvalidArgument);
}

TEST(GeneratorCount, Examples) {
  auto ns = north_south_interval(SystemOptions{800, 24, 0, 0});
  // Radius 1/2 on a unit-diameter interval: two centres always suffice.
  const auto g0 = generator_count(ns, ns.default_compact, 0, 4);
  EXPECT_LE(g0(1), 2);
  auto rot = circle_rotation(0.3, SystemOptions{400, 0, 0, 0});
  const auto gr = generator_count(rot, rot.default_compact, 4, 32);
  for (std::size_t n = 1; n <= 32; ++n) EXPECT_EQ(gr(n), gr(1));
  auto tiny = make_compact("one", {circle_point(0.2)}, 0);
  EXPECT_EQ(generator_count(rot, tiny, 4, 16)(16), 1);
  // g <= s at eps = 1/16 (level 3 with eps0 = 1/2), N = 64.
  const auto s = separated_count(ns, ns.default_compact, 3, 64);
  const auto g = generator_count(ns, ns.default_compact, 3, 64);
  for (std::size_t n = 1; n <= 64; ++n) EXPECT_LE(g(n), s(n));
}

TEST(GeneratorCount, CoverIsCheckedAgainstBalls) {
  auto sys = small_system("parabolic-disk");
  const auto pts = subsample(sys.default_compact.points, 150);
  const auto c = make_compact("sub", pts, 0);
  const OrbitTable o = build_orbits(sys, pts, 12);
  const auto g = greedy_cover_counts(sys.family, 3, o, 12);
  // Lower bound: points pairwise separated at the doubled radius need
  // distinct centres.
  const auto s_coarse = greedy_separated(sys.family, 2, o, 12).counts;
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_GE(g[i], s_coarse[i]);
    if (i) {
      EXPECT_LE(g[i - 1], g[i]);
    }
  }
}

TEST(Sandwich, HoldsOnCatalogSystems) {
  for (const auto& name : system_names()) {
    auto sys = small_system(name);
    for (int k = sys.family.min_level; k <= std::min(sys.family.max_level - 1, sys.family.min_level + 8); k += 2) {
      const auto r = sandwich_check(sys, sys.default_compact, k, 24);
      EXPECT_TRUE(r.ok) << name << " k=" << k << " n=" << r.first_violation.value_or(0);
    }
  }
}

TEST(Sandwich, PartitionForcesEquality) {
  auto da = small_system("double-arrow");
  const auto r = sandwich_check(da, da.default_compact, 4, 20);
  EXPECT_EQ(r.fine_level, 4);
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(r.g_fine, r.s_fine);
  auto single = make_compact("one", {da.default_compact.points[3]}, 0);
  const auto one = sandwich_check(da, single, 2, 8);
  EXPECT_TRUE(one.ok);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(one.g_fine[i], 1u);
}

TEST(Profile, AggregatesOverTheTwoFinestLevels) {
  auto rot = circle_rotation(0.6180339887498949);
  const auto p = entropy_profile(rot, rot.default_compact, {4, 5, 6, 7, 8}, 128);
  ASSERT_TRUE(p.aggregate.has_value());
  EXPECT_EQ(p.aggregate->label, GrowthLabel::bounded);
  EXPECT_EQ(p.status, "stable");
  EXPECT_EQ(p.levels.size(), 5u);
  EXPECT_THROW(entropy_profile(rot, rot.default_compact, {}, 64), InvalidArgument);
  // Labels that disagree leave the aggregate open.
  CountProfile mixed;
  LevelCounts a, b;
  a.k = 1;
  a.growth = GrowthClass{GrowthLabel::linear, 1, 0, 0};
  b.k = 2;
  b.growth = GrowthClass{GrowthLabel::polynomial, 2, 0, 0};
  mixed.levels = {a, b};
  aggregate_profile(mixed);
  EXPECT_FALSE(mixed.aggregate.has_value());
  EXPECT_EQ(mixed.status, "unstable_at_levels");
  EXPECT_EQ(mixed.unstable_levels, (std::vector<int>{1, 2}));
}

// A short grid reaches the attracting end within the horizon, so only the
// sandwich is checked here; growth labels need the full catalog grid.
TEST(Profile, NorthSouthGeneratorsAreSandwiched) {
  auto ns = north_south_interval(SystemOptions{600, 12, 0, 0});
  CountOptions opt;
  opt.generators = true;
  const auto p = entropy_profile(ns, ns.default_compact, {3, 4}, 128, opt);
  for (const auto& l : p.levels) {
    ASSERT_TRUE(l.sandwich_ok.has_value());
    EXPECT_TRUE(*l.sandwich_ok) << l.k;
    ASSERT_TRUE(l.g_series.has_value());
    EXPECT_EQ(l.s_series(128), l.s_series(64));
  }
}

TEST(Restricted, UnionBoundAndSelectors) {
  auto tl = translation_line_compactified(SystemOptions{2000, 64, 0, 0});
  const auto r = restricted_profile(tl, "core+infinity-ball", {3, 5}, 32);
  ASSERT_EQ(r.pieces.size(), 2u);
  for (std::size_t i = 0; i < r.profile.levels.size(); ++i) {
    const auto& u = r.profile.levels[i].s_series;
    for (std::size_t n = 1; n <= 32; ++n) {
      EXPECT_LE(r.piece_sup[i](n), u(n));
      EXPECT_LE(u(n), r.pieces[0].levels[i].s_series(n) + r.pieces[1].levels[i].s_series(n));
    }
  }
  EXPECT_THROW(restricted_profile(tl, "nowhere", {3}, 16), InvalidArgument);
}

TEST(Lyapunov, Examples) {
  auto rot = circle_rotation(0.6180339887498949);
  const auto r = lyapunov_probe(rot, rot.default_compact, 4, 64);
  EXPECT_TRUE(r.stable);
  EXPECT_EQ(r.witness_level, 4);

  auto dbl = doubling_map();
  const auto d = lyapunov_probe(dbl, dbl.default_compact, 3, 16);
  EXPECT_FALSE(d.stable);
  ASSERT_TRUE(d.counterexample.has_value());
  const auto& [p, q] = *d.counterexample;
  EXPECT_TRUE(dbl.family.member(dbl.family.max_level - 8, p, q));
  EXPECT_FALSE(dbl.family.member(3, dbl.iterate(p, static_cast<long>(*d.split_time)),
                                 dbl.iterate(q, static_cast<long>(*d.split_time))));

  auto ns = north_south_interval();
  const auto& k = ns.compact("interior-fine");
  EXPECT_TRUE(lyapunov_probe(ns, k, 3, 128).stable);
  EXPECT_TRUE(lyapunov_probe(inverse_system(ns), k, 3, 128).stable);
}

TEST(Regularity, Examples) {
  auto tl = translation_line_compactified();
  const auto r = regularity_probe(tl, LinePoint{0}, 1, 64, tl.default_compact);
  EXPECT_TRUE(r.regular);
  // Grid spacing 1/8 leaves no sampled neighbour within 1/8 of 0.
  const auto bare = regularity_probe(tl, LinePoint{0}, 3, 64, tl.default_compact);
  EXPECT_FALSE(bare.regular);
  EXPECT_FALSE(bare.counterexample.has_value());
  EXPECT_FALSE(bare.unresolved_levels.empty());
  auto rot = circle_rotation(0.0);
  EXPECT_TRUE(regularity_probe(rot, circle_point(0.0), 4, 16, rot.default_compact).regular);
  EXPECT_THROW(regularity_probe(doubling_map(), circle_point(0.0), 3, 8, doubling_map().default_compact),
               InvalidArgument);
  EXPECT_THROW(regularity_probe(tl, LinePoint{0.01}, 3, 8, tl.default_compact), InvalidArgument);
}

TEST(AlphaLimit, TranslationLineGrowsLinearly) {
  auto tl = translation_line_compactified(SystemOptions{4000, 128, 0, 0});
  const auto r = alpha_limit_check(tl, tl.default_compact, LinePoint{0}, 4, 64);
  EXPECT_TRUE(r.exits);
  EXPECT_TRUE(r.ok);
}

TEST(Semiconjugacy, ProjectionInequalityAndLevelMatch) {
  SystemOptions opt;
  opt.span = 24;
  auto da = double_arrow_north_south(opt);
  const auto sc = semiconjugacy_projection(da);
  EXPECT_EQ(matching_partition_level(da.family, sc.target.family.radius(3)), 5);
  const auto r = semiconjugacy_inequality_check(da, sc, {0, 1, 2, 3, 4, 5, 6}, 32);
  EXPECT_TRUE(r.ok);
  EXPECT_THROW(semiconjugacy_inequality_check(da, sc, {20}, 8), InvalidArgument);
}

TEST(Power, MonotoneExamples) {
  auto rot = circle_rotation(0.25);
  const auto c = power_monotonicity_check(rot, rot.default_compact, 6, 64, 4);
  EXPECT_TRUE(c.ok);
  EXPECT_EQ(c.powered.label, GrowthLabel::bounded);
  auto ns = north_south_interval(SystemOptions{2000, 160, 0, 0});
  const auto n2 = power_monotonicity_check(ns, ns.default_compact, 4, 64, 2);
  EXPECT_TRUE(n2.ok);
  EXPECT_EQ(n2.base.label, GrowthLabel::linear);
  EXPECT_EQ(n2.powered.label, GrowthLabel::linear);
  EXPECT_THROW(power_monotonicity_check(ns, ns.default_compact, 4, 64, 1), InvalidArgument);
}

TEST(Threads, EnvironmentCapIsRead) {
  setenv("ENTROGRAPH_THREADS", "3", 1);
  EXPECT_EQ(worker_count(), 3u);
  setenv("ENTROGRAPH_THREADS", "1", 1);
  auto sys = small_system("brouwer-sphere");
  const auto serial = build_orbits(sys, sys.default_compact.points, 8);
  setenv("ENTROGRAPH_THREADS", "4", 1);
  const auto parallel = build_orbits(sys, sys.default_compact.points, 8);
  unsetenv("ENTROGRAPH_THREADS");
  for (std::size_t s = 0; s < serial.samples(); ++s)
    for (std::size_t t = 0; t < 8; ++t)
      for (int d = 0; d < 3; ++d) EXPECT_EQ(serial.at(s, t)[d], parallel.at(s, t)[d]);
}
