#include <gtest/gtest.h>

#include "entrograph/coding.hpp"

using namespace entrograph;

namespace {

std::string family_path(const std::string& name) { return std::string(ENTROGRAPH_DATA_DIR) + "/families/" + name; }

CodingMember interval_member(const std::string& label, mpq_class a, mpq_class b) {
  return CodingMember{label, {IntervalShape{a, b}}, true};
}

CodingFamily family_of(std::vector<CodingMember> members, bool disjoint = true) {
  CodingFamily f;
  f.members = std::move(members);
  f.disjoint = disjoint;
  return f;
}

CodingOptions sampled() {
  CodingOptions o;
  o.prefer_exact = false;
  return o;
}

// Dense coding of the orbit segment of p, letters by direct membership.
std::vector<int> direct_coding(const SystemInstance& sys, const CodingFamily& f, Point p, std::size_t n) {
  std::vector<int> w;
  for (std::size_t t = 0; t < n; ++t) {
    int letter = kInfinityLetter;
    for (std::size_t r = 0; r < f.members.size(); ++r)
      for (const auto& s : f.members[r].pieces)
        if (sys.contains(p, s)) letter = static_cast<int>(r);
    w.push_back(letter);
    p = sys.step(p);
  }
  return w;
}

}  // namespace

TEST(FamilyFile, ParsesShippedFamilies) {
  const auto f = load_family(family_path("translation-pair.json"));
  ASSERT_EQ(f.members.size(), 2u);
  EXPECT_EQ(f.system, "translation-line");
  EXPECT_EQ(f.members[1].label, "Y2");
  EXPECT_EQ(std::get<IntervalShape>(f.members[1].pieces[0]).b, mpq_class(21, 2));
  const auto b = load_family(family_path("brouwer-pair.json"));
  EXPECT_DOUBLE_EQ(std::get<RectShape>(b.members[0].pieces[0]).y0, 0.7);
  const auto round = family_from_json(family_to_json(f));
  EXPECT_EQ(std::get<IntervalShape>(round.members[0].pieces[0]).b, mpq_class(1, 2));
}

TEST(FamilyFile, RationalsAndRejections) {
  EXPECT_EQ(detail::parse_rational_text("0.25"), mpq_class(1, 4));
  EXPECT_EQ(detail::parse_rational_text("-3/6"), mpq_class(-1, 2));
  EXPECT_EQ(detail::parse_rational_text("7"), mpq_class(7));
  for (const char* bad : {"1/0", "", "abc", "1e-3", "1.2.3", "--1"})
    EXPECT_THROW(detail::parse_rational_text(bad), FamilyError) << bad;
  using nlohmann::json;
  EXPECT_THROW(family_from_json(json::parse(R"({"members": [], "x": 1})")), FamilyError);
  EXPECT_THROW(family_from_json(json::parse(R"({"members": []})")), FamilyError);
  EXPECT_THROW(family_from_json(json::parse(R"({"members": [{"label": "a", "shape": {"interval": [1, 0]}}]})")),
               FamilyError);
  EXPECT_THROW(family_from_json(json::parse(R"({"members": [{"label": "a", "shape": {"disk": [0, 1]}}]})")),
               FamilyError);
  EXPECT_THROW(family_from_json(json::parse(
                   R"({"members": [{"label": "a", "shape": {"interval": [0, 1]}},
                                   {"label": "a", "shape": {"interval": [2, 3]}}]})")),
               FamilyError);
  EXPECT_THROW(family_from_json(json::parse(R"({"members": [{"label": "a"}]})")), FamilyError);
  EXPECT_THROW(load_family("/nonexistent/family.json"), FamilyError);
}

TEST(FamilyValidation, KindsNonWanderingAndDisjointness) {
  auto tl = translation_line_compactified(SystemOptions{2000, 64, 0, 0});
  auto ns = north_south_interval(SystemOptions{2000, 64, 0, 0});
  auto rot = circle_rotation(0.25, SystemOptions{200, 0, 0, 0});
  auto br = brouwer_sphere(SystemOptions{0, 16, 0, 0});
  EXPECT_NO_THROW(validate_family(tl, load_family(family_path("translation-single.json"))));
  EXPECT_THROW(validate_family(br, load_family(family_path("translation-single.json"))), FamilyError);
  EXPECT_THROW(validate_family(ns, family_of({interval_member("Y", 0, mpq_class(1, 2))})), FamilyError);
  EXPECT_THROW(validate_family(rot, family_of({CodingMember{"A", {ArcShape{0.1, 0.2}}, true}})), FamilyError);
  const auto overlap = family_of({interval_member("A", 0, mpq_class(1, 2)), interval_member("B", mpq_class(1, 4), 1)});
  EXPECT_THROW(validate_family(tl, overlap), FamilyError);
  auto declared = overlap;
  declared.disjoint = false;
  EXPECT_NO_THROW(validate_family(tl, declared));
  const auto rects = family_of({CodingMember{"a", {RectShape{-0.25, 0.25, 0.5, 1}}, true},
                                CodingMember{"b", {RectShape{-0.25, 0.25, 0.0, 0.6}}, true}});
  EXPECT_THROW(validate_family(br, rects), FamilyError);
}

TEST(Codings, SingleWanderingIntervalCountsPositions) {
  auto tl = translation_line_compactified();
  const auto f = load_family(family_path("translation-single.json"));
  const auto exact = codings_count(tl, f, 128, tl.default_compact);
  const auto grid = codings_count(tl, f, 128, tl.default_compact, sampled());
  EXPECT_TRUE(exact.exact);
  EXPECT_FALSE(grid.exact);
  for (std::size_t n = 1; n <= 128; ++n) {
    EXPECT_EQ(exact.counts[n - 1], n + 1) << n;
    EXPECT_EQ(grid.counts[n - 1], n + 1) << n;
  }
}

TEST(Codings, UnvisitedFamilyIsConstantOne) {
  auto tl = translation_line_compactified();
  const auto f = family_of({interval_member("far", 1000, 1001)});
  const auto c = codings_count(tl, f, 64, tl.compact("core"), sampled());
  for (auto v : c.counts) EXPECT_EQ(v, 1u);
}

// Y2 = Y1 + 10: Y1 at p (with Y2 at p + 10 when inside), Y2 alone at q < 10,
// or nothing.
TEST(Codings, ShiftedPairClosedForm) {
  auto tl = translation_line_compactified();
  const auto f = load_family(family_path("translation-pair.json"));
  const auto exact = codings_count(tl, f, 48, tl.default_compact);
  const auto grid = codings_count(tl, f, 48, tl.default_compact, sampled());
  for (std::size_t n = 1; n <= 48; ++n) {
    EXPECT_EQ(exact.counts[n - 1], n + std::min<std::size_t>(10, n) + 1) << n;
    EXPECT_EQ(grid.counts[n - 1], exact.counts[n - 1]) << n;
  }
}

TEST(Codings, OverlapsEnumerateEveryLetterUpToTheCap) {
  auto tl = translation_line_compactified();
  const auto f = family_of({interval_member("A", 0, mpq_class(1, 2)), interval_member("B", mpq_class(1, 4), mpq_class(3, 4))},
                           false);
  const auto c = codings_count(tl, f, 32, tl.default_compact);
  for (std::size_t n = 1; n <= 32; ++n) EXPECT_EQ(c.counts[n - 1], 2 * n + 1);
  EXPECT_EQ(c.overflow_orbits, 0u);
  CodingOptions capped;
  capped.max_words_per_orbit = 1;
  const auto twins = family_of({interval_member("A", 0, mpq_class(1, 2)), interval_member("B", 0, mpq_class(1, 2))}, false);
  EXPECT_EQ(codings_count(tl, twins, 32, tl.default_compact).counts[31], 2 * 32 + 1);
  const auto one = codings_count(tl, twins, 32, tl.default_compact, capped);
  EXPECT_GT(one.overflow_orbits, 0u);
  for (std::size_t n = 1; n <= 32; ++n) EXPECT_EQ(one.counts[n - 1], n + 1);
}

TEST(Codings, WordsAreRealizedByTheirWitness) {
  auto tl = translation_line_compactified(SystemOptions{4000, 40, 0, 0});
  const auto f = load_family(family_path("translation-pair.json"));
  for (const auto& opt : {CodingOptions{}, sampled()}) {
    const auto words = coding_words(tl, f, 14, tl.default_compact, opt);
    EXPECT_EQ(words.size(), 14u + 10u + 1u);
    for (const auto& w : words) EXPECT_EQ(direct_coding(tl, f, w.witness, 14), w.letters) << word_string(w, f);
  }
}

TEST(Codings, MonotoneUnderInclusionAndAdditive) {
  auto tl = translation_line_compactified();
  const auto big = load_family(family_path("translation-pair.json"));
  const auto small = family_of({interval_member("A", 0, mpq_class(1, 4)), interval_member("B", 10, mpq_class(41, 4))});
  const auto cb = codings_count(tl, big, 128, tl.default_compact);
  const auto cs = codings_count(tl, small, 128, tl.default_compact);
  for (std::size_t n = 1; n <= 128; ++n) EXPECT_LE(cs.counts[n - 1], cb.counts[n - 1]);
  const auto cu = codings_count(tl, union_family(big), 128, tl.default_compact);
  EXPECT_EQ(compare(cu.series, cb.series).relation, Relation::equivalent);
}

TEST(Codings, DisjointRepresentativesSup) {
  auto tl = translation_line_compactified();
  const auto f = family_of({interval_member("A", 0, mpq_class(1, 2)),
                            interval_member("B", mpq_class(1, 4), mpq_class(3, 4)), interval_member("C", 10, 11)},
                           false);
  const auto s = disjoint_subfamily_sup(tl, f, 96, tl.default_compact);
  const auto full = codings_count(tl, f, 96, tl.default_compact);
  const auto ac = codings_count(tl, family_of({f.members[0], f.members[2]}), 96, tl.default_compact);
  for (std::size_t n = 1; n <= 96; ++n) EXPECT_GE(s(n), ac.series(n));
  EXPECT_EQ(compare(full.series, s).relation, Relation::equivalent);
}

TEST(Wandering, Examples) {
  auto tl = translation_line_compactified();
  const auto w = wandering_check(tl, interval_member("Y", 0, mpq_class(1, 2)), 512);
  EXPECT_TRUE(w.wandering);
  EXPECT_TRUE(w.exact);
  EXPECT_TRUE(wandering_check(tl, interval_member("Y", 0, mpq_class(1, 2)), 64, &tl.default_compact, sampled()).wandering);
  const auto wide = wandering_check(tl, interval_member("W", 0, 3), 64);
  ASSERT_FALSE(wide.wandering);
  EXPECT_EQ(*wide.first_return, 1);

  auto rot = circle_rotation(0.25, SystemOptions{400, 0, 0, 0});
  const auto arc = wandering_check(rot, CodingMember{"arc", {ArcShape{0.1, 0.12}}, true}, 64, &rot.default_compact);
  ASSERT_FALSE(arc.wandering);
  EXPECT_EQ(*arc.first_return, 4);

  auto br = brouwer_sphere(SystemOptions{0, 16, 0, 0});
  CodingOptions coarse;
  coarse.shape_resolution = 4;
  const auto top = wandering_check(br, CodingMember{"top", {RectShape{-0.25, 0.25, 0.7, 1}}, true}, 64, nullptr, coarse);
  EXPECT_TRUE(top.wandering);
  // (0,1) moves to (1,1) inside the unit square.
  const auto square = wandering_check(br, CodingMember{"sq", {RectShape{0, 1, 0, 1}}, true}, 16, nullptr, coarse);
  ASSERT_FALSE(square.wandering);
  EXPECT_EQ(*square.first_return, 1);
}

TEST(MaxVisits, Examples) {
  auto tl = translation_line_compactified();
  EXPECT_EQ(max_visits(tl, interval_member("Y", 0, mpq_class(1, 2)), 64, tl.default_compact).visits, 1u);
  const CodingMember two{"two", {IntervalShape{0, mpq_class(1, 2)}, IntervalShape{10, mpq_class(21, 2)}}, true};
  EXPECT_EQ(max_visits(tl, two, 64, tl.default_compact).visits, 2u);
  auto rot = circle_rotation(0.25, SystemOptions{400, 0, 0, 0});
  const CodingMember arc{"arc", {ArcShape{0.1, 0.12}}, true};
  EXPECT_LT(max_visits(rot, arc, 8, rot.default_compact).visits, max_visits(rot, arc, 16, rot.default_compact).visits);
  EXPECT_THROW(max_visits(doubling_map(SystemOptions{100, 0, 0, 0}), arc, 4, rot.default_compact), InvalidArgument);
}

TEST(Hitting, TranslationIntervals) {
  auto tl = translation_line_compactified();
  const auto f = load_family(family_path("translation-pair.json"));
  for (const auto& opt : {CodingOptions{}, sampled()}) {
    const auto h = hitting_sets(tl, f, 64, &tl.default_compact, opt);
    ASSERT_EQ(h.size(), 2u);
    EXPECT_EQ(h[0].from, 0u);
    EXPECT_EQ(h[0].hits, std::vector<long>{10});
    EXPECT_TRUE(h[1].hits.empty());
  }
  const auto shifted = family_of({interval_member("A", 0, mpq_class(1, 2)),
                                  interval_member("B", mpq_class(1, 4), mpq_class(3, 4))},
                                 false);
  EXPECT_EQ(hitting_sets(tl, shifted, 32)[0].hits, std::vector<long>{0});
  EXPECT_THROW(hitting_sets(tl, load_family(family_path("translation-single.json")), 8), InvalidArgument);
}

TEST(Hitting, DLowerBoundFormula) {
  HittingData all{0, 1, 300, {}};
  for (long m = 1; m <= 300; ++m) all.hits.push_back(m);
  const auto d = d_lower_bound_counts(all, 256);
  for (std::uint64_t n = 1; n <= 256; ++n) EXPECT_EQ(d[n - 1], n * (n - 1) / 2);
  const HittingData ten{0, 1, 64, {10}};
  const auto dt = d_lower_bound_counts(ten, 64);
  for (std::size_t n = 1; n <= 64; ++n) EXPECT_EQ(dt[n - 1], n > 10 ? n - 10 : 0);
  const HittingData none{0, 1, 64, {}};
  for (auto v : d_lower_bound_counts(none, 64)) EXPECT_EQ(v, 0u);
  // m = 0 is not a later position
  const HittingData zero{0, 1, 64, {0}};
  for (auto v : d_lower_bound_counts(zero, 64)) EXPECT_EQ(v, 0u);
  EXPECT_THROW(d_lower_bound_counts(ten, 65), InvalidArgument);
  EXPECT_EQ(d_lower_bound(ten, 64)(64), 54);
}

// Words of the form (inf.., Y1, inf.., Y2, inf..) counted directly.
TEST(Hitting, DMatchesWordCountOnTranslationPair) {
  auto tl = translation_line_compactified();
  const auto f = load_family(family_path("translation-pair.json"));
  const auto h = hitting_sets(tl, f, 40);
  const auto d = d_lower_bound_counts(h[0], 40);
  for (std::size_t n : {5u, 11u, 12u, 25u, 40u}) {
    std::size_t direct = 0;
    for (const auto& w : coding_words(tl, f, n, tl.default_compact)) {
      int first = kInfinityLetter;
      bool has_second = false;
      for (int l : w.letters) {
        if (first == kInfinityLetter && l != kInfinityLetter) first = l;
        if (l == 1) has_second = true;
      }
      if (first == 0 && has_second) ++direct;
    }
    EXPECT_EQ(direct, d[n - 1]) << n;
  }
}

TEST(Singularity, NorthSouthPairIsNotSingular) {
  auto ns = north_south_interval();
  const auto f = load_family(family_path("north-south-pair.json"));
  const auto r = mutually_singular_probe(ns, f, 64, 512);
  EXPECT_TRUE(r.exact);
  EXPECT_FALSE(r.singular);
  ASSERT_TRUE(r.certified_bound.has_value());
  // odds in [1, 3/2] halve per step; [1/9, 1/7] is reached only at m = 3
  EXPECT_EQ(*r.certified_bound, 3);
  EXPECT_EQ(*r.first_failure, 3);
  ASSERT_EQ(r.witnesses.size(), 3u);
  for (const auto& w : r.witnesses) {
    for (std::size_t i = 0; i < 2; ++i)
      EXPECT_TRUE(ns.contains(ns.iterate(w.start, w.times[i]), f.members[i].pieces[0])) << w.n0;
    EXPECT_GT(std::labs(w.times[0] - w.times[1]), w.n0);
  }
  auto overlapping = f;
  overlapping.disjoint = false;
  EXPECT_THROW(mutually_singular_probe(ns, overlapping, 4, 16), FamilyError);
}

TEST(Singularity, BrouwerPairWitnessesCheckOut) {
  auto br = brouwer_sphere(SystemOptions{0, 16, 0, 0});
  const auto f = load_family(family_path("brouwer-pair.json"));
  CodingOptions coarse;
  coarse.shape_resolution = 2;
  const auto r = mutually_singular_probe(br, f, 24, 96, nullptr, coarse);
  EXPECT_TRUE(r.singular);
  EXPECT_FALSE(r.exact);
  ASSERT_EQ(r.witnesses.size(), 25u);
  for (const auto& w : r.witnesses) {
    EXPECT_TRUE(br.contains(br.iterate(w.start, w.times[0]), f.members[0].pieces[0]));
    EXPECT_TRUE(br.contains(br.iterate(w.start, w.times[1]), f.members[1].pieces[0]));
    EXPECT_GT(std::labs(w.times[0] - w.times[1]), w.n0);
  }
}

TEST(CodingBound, TranslationSingleInterval) {
  auto tl = translation_line_compactified();
  const auto f = load_family(family_path("translation-single.json"));
  const auto r = coding_entropy_bound_check(tl, f, {0, 1, 2, 3, 4, 5, 6}, 128, tl.default_compact);
  EXPECT_TRUE(r.ok);
  EXPECT_TRUE(r.exact_codings);
  // nearest image is [1, 3/2]: chordal distance from 1 to 1/2
  EXPECT_NEAR(r.margin, 2 * 0.5 / std::sqrt(2 * 1.25), 1e-12);
  EXPECT_EQ(r.level, 1);
  EXPECT_EQ(r.factor, 2u);
  for (std::size_t n = 1; n <= 128; ++n) EXPECT_LE(r.c[n - 1], 2 * r.s[n - 1]);
  EXPECT_THROW(coding_entropy_bound_check(tl, f, {0}, 64, tl.default_compact), FamilyError);
  EXPECT_THROW(coding_entropy_bound_check(tl, family_of({interval_member("W", 0, 3)}), {0, 4}, 32, tl.default_compact),
               FamilyError);
}

TEST(CodingBound, SampledPathAgreesOnTranslation) {
  auto tl = translation_line_compactified(SystemOptions{0, 160, 0, 0});
  const auto f = load_family(family_path("translation-single.json"));
  CodingOptions opt = sampled();
  opt.shape_resolution = 1.0 / 16;
  const auto r = coding_entropy_bound_check(tl, f, {0, 1, 2, 3}, 64, tl.default_compact, opt);
  EXPECT_FALSE(r.exact_codings);
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(r.level, 1);
  // Orbits through the member, shifted back, realize n single-hit words.
  for (std::size_t n = 1; n <= 64; ++n) EXPECT_EQ(r.c[n - 1], n + 1);
}
