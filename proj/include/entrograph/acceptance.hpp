#pragma once

// The thirteen acceptance criteria as runnable checks.  Every tolerance is a
// named constant below; nothing is read from the environment except the
// worker cap.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "entrograph/coding.hpp"
#include "entrograph/entropy.hpp"
#include "entrograph/expression.hpp"
#include "entrograph/format.hpp"

namespace entrograph::acceptance {

namespace limits {
// 1: linear entropy of the parabolic and north-south systems
inline constexpr double kLinearLow = 0.75;
inline constexpr double kLinearHigh = 1.25;
inline constexpr std::size_t kParabolicHorizon = 512;
inline constexpr int kParabolicFirstLevel = 4;
inline constexpr int kParabolicLastLevel = 8;  // four dyadic refinements
inline constexpr std::size_t kParabolicMinGrid = 10000;
inline constexpr double kParabolicSeconds = 300;
// 2: quadratic entropy of the Brouwer system
inline constexpr double kQuadraticLow = 1.6;
inline constexpr double kQuadraticHigh = 2.4;
inline constexpr std::size_t kBrouwerHorizon = 256;
inline constexpr int kBrouwerFirstLevel = 3;
inline constexpr int kBrouwerLastLevel = 7;
inline constexpr std::size_t kBrouwerMinGrid = 20000;
inline constexpr double kBrouwerSeconds = 900;
// 3: isometry control
inline constexpr std::size_t kRotationHorizon = 128;
inline constexpr int kRotationLyapunovLevel = 4;
// 4: doubling map
inline constexpr std::size_t kDoublingHorizon = 12;
inline constexpr double kDoublingRelative = 0.10;
inline constexpr std::size_t kDoublingMinGrid = 100000;
// 5, 6: property sweeps on reduced grids
inline constexpr std::size_t kSweepGrid = 300;
inline constexpr double kSweepSpan = 12;
inline constexpr std::size_t kSweepHorizon = 24;
// 7, 8, 9: coding
inline constexpr std::size_t kCodingHorizon = 256;
inline constexpr long kSingularN0 = 64;
inline constexpr long kSingularSearch = 512;
inline constexpr long kNorthSouthN0 = 64;
// 10: semiconjugacy
inline constexpr std::size_t kSemiconjugacyHorizon = 64;
inline constexpr std::size_t kSemiconjugacyMinLevels = 4;
// 11: restricted profiles
inline constexpr std::size_t kRestrictedHorizon = 512;
// 12: powers
inline constexpr std::size_t kPowerHorizon = 128;
inline constexpr int kPowerLevel = 5;
inline constexpr std::size_t kPeriodicHorizon = 64;
inline constexpr int kPeriodicLevel = 6;
// 13: projections of exact sequences
inline constexpr std::size_t kProjectionHorizon = 256;
inline constexpr double kProjectionTolerance = 0.01;
}  // namespace limits

struct Outcome {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0;
};

// Separated counts seen so far, keyed by run label then level; criterion 6
// checks every run collected here.
struct Context {
  std::map<std::string, std::map<int, std::vector<std::size_t>>> runs;

  void record(const std::string& label, const CountProfile& p) {
    for (const auto& l : p.levels) {
      std::vector<std::size_t> v;
      for (auto x : l.s_series.values()) v.push_back(static_cast<std::size_t>(x));
      runs[label][l.k] = std::move(v);
    }
  }
};

namespace detail {

inline std::vector<int> level_range(int lo, int hi) {
  std::vector<int> v;
  for (int k = lo; k <= hi; ++k) v.push_back(k);
  return v;
}

inline std::string class_text(const std::optional<GrowthClass>& c) {
  if (!c) return "none";
  return std::string(to_string(c->label)) + " deg " + format_real(c->degree);
}

inline GrowthSeries identity_series(std::size_t horizon) {
  std::vector<long double> v(horizon);
  for (std::size_t n = 1; n <= horizon; ++n) v[n - 1] = static_cast<long double>(n);
  return GrowthSeries(std::move(v));
}

inline SystemInstance sweep_system(const std::string& name) {
  SystemOptions opt;
  opt.grid = limits::kSweepGrid;
  opt.span = limits::kSweepSpan;
  return make_system(name, opt);
}

inline std::string family_file(const std::string& name) {
  return std::string(ENTROGRAPH_DATA_DIR) + "/families/" + name;
}

inline bool member_hit(const SystemInstance& sys, const CodingMember& m, const Point& p) {
  for (const auto& s : m.pieces)
    if (sys.contains(p, s)) return true;
  return false;
}

// Iterates each witness and checks both visits and the gap.
inline bool witnesses_hold(const SystemInstance& sys, const CodingFamily& f, const SingularityResult& r) {
  for (const auto& w : r.witnesses) {
    if (w.times.size() < 2) return false;
    if (!member_hit(sys, f.members[0], sys.iterate(w.start, w.times[0]))) return false;
    if (!member_hit(sys, f.members[1], sys.iterate(w.start, w.times[1]))) return false;
    if (std::labs(w.times[0] - w.times[1]) <= w.n0) return false;
  }
  return true;
}

// d(n) summed pair by pair over (first visit, later visit) positions.
inline std::vector<std::uint64_t> d_by_pairs(const std::vector<long>& hits, std::size_t horizon) {
  std::vector<std::uint64_t> d(horizon, 0);
  for (std::size_t n = 1; n <= horizon; ++n)
    for (std::size_t first = 1; first < n; ++first)
      for (long m : hits)
        if (m >= 1 && first + static_cast<std::size_t>(m) <= n) ++d[n - 1];
  return d;
}

}  // namespace detail

inline Outcome parabolic_linear(Context& ctx, const std::vector<std::string>& systems) {
  Outcome o;
  o.pass = true;
  std::ostringstream msg;
  for (const auto& name : systems) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sys = make_system(name);
    const auto p = entropy_profile(sys, sys.default_compact,
                                   detail::level_range(limits::kParabolicFirstLevel, limits::kParabolicLastLevel),
                                   limits::kParabolicHorizon);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ctx.record(name, p);
    const bool ok = p.aggregate && p.aggregate->label == GrowthLabel::linear &&
                    p.aggregate->degree >= limits::kLinearLow && p.aggregate->degree <= limits::kLinearHigh &&
                    p.grid_size >= limits::kParabolicMinGrid && secs <= limits::kParabolicSeconds;
    o.pass = o.pass && ok;
    msg << name << ": " << detail::class_text(p.aggregate) << ", grid " << p.grid_size << ", "
        << format_real(std::round(secs * 10) / 10) << "s; ";
  }
  o.detail = msg.str();
  return o;
}

inline Outcome brouwer_quadratic(Context& ctx) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto sys = brouwer_sphere();
  const auto p = entropy_profile(sys, sys.default_compact,
                                 detail::level_range(limits::kBrouwerFirstLevel, limits::kBrouwerLastLevel),
                                 limits::kBrouwerHorizon);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ctx.record("brouwer-sphere", p);
  o.pass = p.aggregate && p.aggregate->label == GrowthLabel::polynomial &&
           p.aggregate->degree >= limits::kQuadraticLow && p.aggregate->degree <= limits::kQuadraticHigh &&
           p.grid_size >= limits::kBrouwerMinGrid && secs <= limits::kBrouwerSeconds;
  o.detail = "aggregate " + detail::class_text(p.aggregate) + ", grid " + std::to_string(p.grid_size) + ", " +
             format_real(std::round(secs * 10) / 10) + "s";
  return o;
}

inline Outcome rotation_constant(Context& ctx) {
  Outcome o;
  const auto rot = circle_rotation(SystemOptions{}.alpha);
  const auto p = entropy_profile(rot, rot.default_compact,
                                 detail::level_range(rot.family.min_level, rot.family.max_level),
                                 limits::kRotationHorizon);
  ctx.record("rotation", p);
  std::size_t broken = 0;
  for (const auto& l : p.levels)
    for (std::size_t n = 2; n <= limits::kRotationHorizon; ++n)
      if (l.s_series(n) != l.s_series(1)) {
        ++broken;
        break;
      }
  const auto stab = lyapunov_probe(rot, rot.default_compact, limits::kRotationLyapunovLevel, limits::kRotationHorizon);
  o.pass = broken == 0 && stab.stable;
  o.detail = std::to_string(p.levels.size()) + " levels, " + std::to_string(broken) + " non-constant, lyapunov " +
             (stab.stable ? "stable" : "unstable");
  return o;
}

inline Outcome doubling_rate(Context&) {
  Outcome o;
  const auto dbl = doubling_map();
  CountEngine engine(dbl, dbl.default_compact, limits::kDoublingHorizon);
  o.pass = dbl.default_compact.points.size() >= limits::kDoublingMinGrid;
  std::ostringstream msg;
  for (int k : {3, 4}) {  // radii 1/8 and 1/16
    const double rate = project_exp(GrowthSeries::from_counts(engine.separated(k).counts));
    const bool ok = std::fabs(rate - std::log(2.0)) <= limits::kDoublingRelative * std::log(2.0);
    o.pass = o.pass && ok;
    msg << "eps " << format_real(dbl.family.radius(k)) << ": rate " << format_real(rate) << "; ";
  }
  msg << "grid " << dbl.default_compact.points.size();
  o.detail = msg.str();
  return o;
}

inline Outcome sandwich_everywhere(Context& ctx) {
  Outcome o;
  std::size_t checks = 0, violations = 0;
  for (const auto& name : system_names()) {
    const auto sys = detail::sweep_system(name);
    for (int k = sys.family.min_level; k <= sys.family.max_level; ++k) {
      if (sys.family.sqrt_level(k) > sys.family.max_level) continue;
      const auto r = sandwich_check(sys, sys.default_compact, k, limits::kSweepHorizon);
      for (std::size_t i = 0; i < limits::kSweepHorizon; ++i) {
        ++checks;
        if (r.s_coarse[i] > r.g_fine[i] || r.g_fine[i] > r.s_fine[i]) ++violations;
      }
      ctx.runs["sweep:" + name][r.coarse_level] = r.s_coarse;
      ctx.runs["sweep:" + name][r.fine_level] = r.s_fine;
    }
  }
  o.pass = violations == 0 && checks > 0;
  o.detail = std::to_string(checks) + " (level, n) comparisons, " + std::to_string(violations) + " violations";
  return o;
}

inline Outcome level_monotone(Context& ctx) {
  Outcome o;
  for (const auto& name : system_names()) {
    const auto sys = detail::sweep_system(name);
    CountEngine engine(sys, sys.default_compact, limits::kSweepHorizon);
    for (int k = sys.family.min_level; k <= sys.family.max_level; ++k)
      ctx.runs["levels:" + name][k] = engine.separated(k).counts;
  }
  std::size_t checks = 0, violations = 0;
  for (const auto& [label, levels] : ctx.runs) {
    const std::vector<std::size_t>* prev = nullptr;
    for (const auto& [k, s] : levels) {
      if (prev)
        for (std::size_t i = 0; i < std::min(prev->size(), s.size()); ++i) {
          ++checks;
          if (s[i] < (*prev)[i]) ++violations;
        }
      prev = &s;
    }
  }
  o.pass = violations == 0 && checks > 0;
  o.detail = std::to_string(ctx.runs.size()) + " runs, " + std::to_string(checks) + " comparisons, " +
             std::to_string(violations) + " violations";
  return o;
}

inline Outcome coding_bound(Context&) {
  Outcome o;
  o.pass = true;
  std::ostringstream msg;
  const auto check = [&](const SystemInstance& sys, const std::string& file, int max_level) {
    const auto f = load_family(detail::family_file(file));
    const auto r = coding_entropy_bound_check(sys, f, detail::level_range(0, max_level), limits::kCodingHorizon,
                                              sys.default_compact);
    const std::size_t factor = std::size_t{1} << f.members.size();
    bool ok = r.c.size() == limits::kCodingHorizon && r.s.size() == limits::kCodingHorizon;
    for (std::size_t i = 0; ok && i < r.c.size(); ++i) ok = r.c[i] <= factor * r.s[i];
    o.pass = o.pass && ok && r.ok;
    msg << sys.name << ": level " << r.level << ", c(" << limits::kCodingHorizon << ")=" << r.c.back() << " <= "
        << factor << "*" << r.s.back() << "; ";
  };
  check(translation_line_compactified(), "translation-single.json", 8);
  check(brouwer_sphere(), "brouwer-pair.json", 12);
  o.detail = msg.str();
  return o;
}

inline Outcome quadratic_coding(Context&) {
  Outcome o;
  const std::size_t H = limits::kCodingHorizon;
  HittingData all{0, 1, static_cast<long>(H), {}};
  for (long m = 1; m <= static_cast<long>(H); ++m) all.hits.push_back(m);
  const auto d = d_lower_bound_counts(all, H);
  bool identity = true;
  for (std::size_t n = 1; n <= H; ++n) identity = identity && d[n - 1] == n * (n - 1) / 2;

  const auto br = brouwer_sphere();
  const auto f = load_family(detail::family_file("brouwer-pair.json"));
  const auto hits = hitting_sets(br, f, static_cast<long>(H), &br.default_compact);
  const auto d_br = d_lower_bound_counts(hits[0], H);
  identity = identity && d_br == detail::d_by_pairs(hits[0].hits, H);

  CodingOptions opt;
  opt.lead = H - 1;
  const auto universe = member_universe(br, f, &br.default_compact, opt);
  const auto c = codings_count(br, f, H, universe, opt);
  const auto rel = compare(c.series, detail::identity_series(H)).relation;
  bool dominated = true;
  for (std::size_t n = 1; n <= H; ++n) dominated = dominated && d_br[n - 1] <= c.counts[n - 1];
  o.pass = identity && rel == Relation::greater && dominated;
  o.detail = std::string("d identity ") + (identity ? "exact" : "broken") + ", brouwer c(" + std::to_string(H) +
             ")=" + std::to_string(c.counts.back()) + " d=" + std::to_string(d_br.back()) + ", compare(c, n) " +
             to_string(rel);
  return o;
}

inline Outcome mutual_singularity(Context&) {
  Outcome o;
  const auto br = brouwer_sphere();
  const auto bf = load_family(detail::family_file("brouwer-pair.json"));
  const auto b = mutually_singular_probe(br, bf, limits::kSingularN0, limits::kSingularSearch, &br.default_compact);
  const bool b_ok = b.singular && b.witnesses.size() == static_cast<std::size_t>(limits::kSingularN0 + 1) &&
                    detail::witnesses_hold(br, bf, b);

  const auto ns = north_south_interval();
  const auto nf = load_family(detail::family_file("north-south-pair.json"));
  const auto r = mutually_singular_probe(ns, nf, limits::kNorthSouthN0, limits::kSingularSearch);
  const bool n_ok = !r.singular && r.certified_bound.has_value() && detail::witnesses_hold(ns, nf, r);
  o.pass = b_ok && n_ok;
  o.detail = "brouwer singular=" + std::string(b.singular ? "true" : "false") + " with " +
             std::to_string(b.witnesses.size()) + " checked witnesses; north-south singular=" +
             (r.singular ? "true" : "false") + ", bound " + (r.certified_bound ? std::to_string(*r.certified_bound) : "none");
  return o;
}

inline Outcome semiconjugacy(Context&) {
  Outcome o;
  const auto da = double_arrow_north_south();
  const auto sc = semiconjugacy_projection(da);
  std::vector<int> levels;
  for (int k = sc.target.family.min_level; k <= sc.target.family.max_level; ++k)
    if (matching_partition_level(da.family, sc.target.family.radius(k))) levels.push_back(k);
  const auto r = semiconjugacy_inequality_check(da, sc, levels, limits::kSemiconjugacyHorizon);
  std::size_t violations = 0;
  for (const auto& m : r.levels)
    for (std::size_t i = 0; i < limits::kSemiconjugacyHorizon; ++i)
      if (m.s_target[i] > m.s_source[i]) ++violations;
  o.pass = violations == 0 && r.levels.size() >= limits::kSemiconjugacyMinLevels;
  o.detail = std::to_string(r.levels.size()) + " matched levels, " + std::to_string(violations) + " violations";
  return o;
}

inline Outcome concentration(Context& ctx) {
  Outcome o;
  const auto tl = translation_line_compactified();
  const auto levels = detail::level_range(limits::kParabolicFirstLevel, limits::kParabolicLastLevel);
  const auto near = restricted_profile(tl, "infinity-ball", levels, limits::kRestrictedHorizon).profile;
  const auto away = restricted_profile(tl, "core", levels, limits::kRestrictedHorizon).profile;
  ctx.record("translation-line:infinity-ball", near);
  ctx.record("translation-line:core", away);
  o.pass = near.aggregate && near.aggregate->label == GrowthLabel::linear && away.aggregate &&
           away.aggregate->label == GrowthLabel::bounded;
  o.detail = "near infinity " + detail::class_text(near.aggregate) + ", away " + detail::class_text(away.aggregate);
  return o;
}

inline Outcome power_order(Context&) {
  Outcome o;
  o.pass = true;
  std::ostringstream msg;
  for (const auto& name : {"rotation", "north-south-interval", "translation-line"}) {
    const auto sys = make_system(name);
    for (int r : {2, 3}) {
      const auto c = power_monotonicity_check(sys, sys.default_compact, limits::kPowerLevel, limits::kPowerHorizon, r);
      o.pass = o.pass && c.ok;
      msg << name << "^" << r << ": " << to_string(c.base.label) << " <= " << to_string(c.powered.label) << "; ";
    }
  }
  const auto quarter = circle_rotation(0.25);
  const auto c = power_monotonicity_check(quarter, quarter.default_compact, limits::kPeriodicLevel,
                                          limits::kPeriodicHorizon, 4);
  o.pass = o.pass && c.ok && c.powered.label == GrowthLabel::bounded;
  msg << "quarter rotation^4: " << to_string(c.powered.label);
  o.detail = msg.str();
  return o;
}

inline Outcome growth_exactness(Context&) {
  Outcome o;
  const std::size_t N = limits::kProjectionHorizon;
  double worst = 0;
  for (double t : {0.5, 1.0, 1.5, 2.0, 3.0}) {
    std::vector<long double> pw(N), ex(N);
    for (std::size_t n = 1; n <= N; ++n) {
      pw[n - 1] = std::pow(static_cast<long double>(n), static_cast<long double>(t));
      ex[n - 1] = std::exp(static_cast<long double>(t) * static_cast<long double>(n));
    }
    worst = std::max(worst, std::fabs(project_poly(GrowthSeries(pw)) - t));
    worst = std::max(worst, std::fabs(project_exp(GrowthSeries(ex)) - t));
  }
  std::ifstream in(std::string(ENTROGRAPH_DATA_DIR) + "/golden/parser.txt");
  std::stringstream golden;
  golden << in.rdbuf();
  const bool stable = in.is_open() && parser_transcript() == golden.str();
  o.pass = worst <= limits::kProjectionTolerance && stable;
  o.detail = "worst projection error " + format_real(worst) + ", parser transcript " + (stable ? "matches" : "differs");
  return o;
}

struct CriterionEntry {
  int id;
  const char* title;
  std::function<Outcome(Context&)> run;
};

inline const std::vector<CriterionEntry>& criteria() {
  static const std::vector<CriterionEntry> list = {
      {1, "linear entropy of parabolic and north-south systems",
       [](Context& c) {
         return parabolic_linear(c, {"north-south-interval", "parabolic-disk", "translation-line", "double-arrow"});
       }},
      {2, "quadratic entropy of the Brouwer system", brouwer_quadratic},
      {3, "rotation counts constant and Lyapunov stable", rotation_constant},
      {4, "doubling map exponential rate near ln 2", doubling_rate},
      {5, "sandwich s(u^2) <= g(u) <= s(u) on every catalog system", sandwich_everywhere},
      {6, "separated counts monotone in the level", level_monotone},
      {7, "coding bound c <= 2^#F s at the constructed level", coding_bound},
      {8, "quadratic coding lower bound", quadratic_coding},
      {9, "mutual singularity probe", mutual_singularity},
      {10, "semiconjugacy inequality for the double-arrow projection", semiconjugacy},
      {11, "entropy concentrates at the parabolic point", concentration},
      {12, "class order preserved under powers", power_order},
      {13, "growth projections and parser transcript", growth_exactness},
  };
  return list;
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"parabolic", "brouwer", "properties", "coding", "double-arrow", "all"};
  return names;
}

// Criterion ids per suite.  Level monotonicity runs last so it sees every
// profile computed before it.
inline std::vector<int> suite_criteria(const std::string& suite) {
  if (suite == "parabolic") return {1, 11};
  if (suite == "brouwer") return {2, 8, 9};
  if (suite == "properties") return {3, 4, 5, 10, 12, 13, 6};
  if (suite == "coding") return {7, 8, 9};
  if (suite == "double-arrow") return {101, 10};
  if (suite == "all") return {1, 2, 3, 4, 5, 7, 8, 9, 10, 11, 12, 13, 6};
  throw InvalidArgument("unknown suite '" + suite + "'");
}

inline Outcome run_criterion(int id, Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  const CriterionEntry* entry = nullptr;
  for (const auto& c : criteria())
    if (c.id == id || (id == 101 && c.id == 1)) entry = &c;
  if (!entry) throw InvalidArgument("unknown criterion " + std::to_string(id));
  try {
    o = id == 101 ? parabolic_linear(ctx, {"double-arrow"}) : entry->run(ctx);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("error: ") + e.what();
  }
  while (o.detail.size() >= 2 && o.detail.compare(o.detail.size() - 2, 2, "; ") == 0) o.detail.resize(o.detail.size() - 2);
  o.id = entry->id;
  o.title = id == 101 ? "linear entropy of the double arrow" : entry->title;
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return o;
}

inline std::string outcome_line(const Outcome& o) {
  std::ostringstream s;
  s << "criterion " << o.id << " " << (o.pass ? "PASS" : "FAIL") << ": " << o.title << " (" << o.detail << ") ["
    << format_real(std::round(o.seconds * 10) / 10) << "s]";
  return s.str();
}

}  // namespace entrograph::acceptance
