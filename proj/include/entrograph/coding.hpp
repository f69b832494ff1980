#pragma once

// Orbit codings relative to a finite family of sets: word counts, hitting
// times, visit counts and singularity probes.

#include <gmpxx.h>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "entrograph/entropy.hpp"
#include "entrograph/error.hpp"
#include "entrograph/growth.hpp"
#include "entrograph/shapes.hpp"
#include "entrograph/systems.hpp"

namespace entrograph {

struct CodingMember {
  std::string label;
  std::vector<Shape> pieces;  // the member is the union of these closed pieces
  bool declared_wandering = true;
};

struct CodingFamily {
  std::vector<CodingMember> members;
  bool disjoint = true;
  std::string system;  // host named by a family file, may be empty
};

inline constexpr int kInfinityLetter = -1;
inline constexpr std::size_t kMaxMembers = 16;

struct CodingWord {
  std::vector<int> letters;  // member index or kInfinityLetter
  Point witness;             // start of an orbit realizing the word
};

struct CodingOptions {
  std::size_t max_words_per_orbit = std::size_t{1} << 12;
  bool prefer_exact = true;
  double shape_resolution = 0;  // 0 picks the system default
  // Orbits also start at f^-s(y) for every sample y and 0 < s <= lead.
  std::size_t lead = 0;
};

struct CodingCount {
  GrowthSeries series;
  std::vector<std::size_t> counts;
  bool exact = false;
  std::size_t orbits = 0;
  std::size_t overflow_orbits = 0;  // orbits whose codings hit the cap
};

// ---------------------------------------------------------------- family files

namespace detail {

inline mpq_class parse_rational_text(const std::string& text) {
  auto fail = [&] { return FamilyError("not a rational number: '" + text + "'"); };
  if (text.empty()) throw fail();
  const auto dot = text.find('.');
  if (dot != std::string::npos) {
    std::string digits = text.substr(0, dot) + text.substr(dot + 1);
    if (digits.empty() || digits == "-" || digits.find_first_not_of("-0123456789") != std::string::npos ||
        digits.find('-', 1) != std::string::npos) {
      throw fail();
    }
    mpz_class num(digits, 10), den;
    mpz_ui_pow_ui(den.get_mpz_t(), 10, text.size() - dot - 1);
    mpq_class q(num, den);
    q.canonicalize();
    return q;
  }
  if (text.find_first_not_of("-0123456789/") != std::string::npos) throw fail();
  mpq_class q;
  if (q.set_str(text, 10) != 0) throw fail();
  if (sgn(q.get_den()) == 0) throw fail();
  q.canonicalize();
  return q;
}

inline mpq_class json_rational(const nlohmann::json& v) {
  if (v.is_string()) return parse_rational_text(v.get<std::string>());
  if (v.is_number_integer()) return mpq_class(v.get<long>());
  if (v.is_number()) {
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw FamilyError("endpoint is not finite");
    return mpq_class(d);
  }
  throw FamilyError("endpoint must be a number or a \"p/q\" string");
}

inline std::vector<mpq_class> json_numbers(const nlohmann::json& v, std::size_t count, const char* what) {
  if (!v.is_array() || v.size() != count) {
    throw FamilyError(std::string(what) + " needs " + std::to_string(count) + " endpoints");
  }
  std::vector<mpq_class> out;
  for (const auto& e : v) out.push_back(json_rational(e));
  return out;
}

inline Shape parse_shape(const nlohmann::json& j) {
  if (!j.is_object() || j.size() != 1) throw FamilyError("shape must be an object with one key");
  const auto& [key, v] = *j.items().begin();
  if (key == "interval") {
    auto e = json_numbers(v, 2, "interval");
    if (cmp(e[0], e[1]) > 0) throw FamilyError("interval endpoints out of order");
    return IntervalShape{e[0], e[1]};
  }
  if (key == "rect") {
    auto e = json_numbers(v, 4, "rect");
    if (cmp(e[0], e[1]) > 0 || cmp(e[2], e[3]) > 0) throw FamilyError("rect bounds out of order");
    return RectShape{e[0].get_d(), e[1].get_d(), e[2].get_d(), e[3].get_d()};
  }
  if (key == "arc") {
    auto e = json_numbers(v, 2, "arc");
    return ArcShape{e[0].get_d(), e[1].get_d()};
  }
  throw FamilyError("unknown shape kind '" + key + "'");
}

inline nlohmann::json shape_json(const Shape& s) {
  if (const auto* iv = std::get_if<IntervalShape>(&s)) return {{"interval", {iv->a.get_str(), iv->b.get_str()}}};
  if (const auto* r = std::get_if<RectShape>(&s)) return {{"rect", {r->x0, r->x1, r->y0, r->y1}}};
  const auto& a = std::get<ArcShape>(s);
  return {{"arc", {a.a, a.b}}};
}

}  // namespace detail

inline CodingFamily family_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FamilyError("family must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key != "members" && key != "disjoint" && key != "system") throw FamilyError("unknown family key '" + key + "'");
  }
  CodingFamily f;
  if (j.contains("system")) {
    if (!j["system"].is_string()) throw FamilyError("system must be a string");
    f.system = j["system"].get<std::string>();
  }
  if (j.contains("disjoint")) {
    if (!j["disjoint"].is_boolean()) throw FamilyError("disjoint must be a boolean");
    f.disjoint = j["disjoint"].get<bool>();
  }
  if (!j.contains("members") || !j["members"].is_array() || j["members"].empty()) {
    throw FamilyError("family needs a non-empty members array");
  }
  for (const auto& m : j["members"]) {
    if (!m.is_object()) throw FamilyError("member must be an object");
    for (const auto& [key, v] : m.items()) {
      if (key != "label" && key != "shape" && key != "shapes" && key != "wandering") {
        throw FamilyError("unknown member key '" + key + "'");
      }
    }
    CodingMember member;
    if (!m.contains("label") || !m["label"].is_string()) throw FamilyError("member needs a string label");
    member.label = m["label"].get<std::string>();
    if (m.contains("shape") == m.contains("shapes")) throw FamilyError("member needs exactly one of shape, shapes");
    if (m.contains("shape")) {
      member.pieces.push_back(detail::parse_shape(m["shape"]));
    } else {
      if (!m["shapes"].is_array() || m["shapes"].empty()) throw FamilyError("shapes must be a non-empty array");
      for (const auto& s : m["shapes"]) member.pieces.push_back(detail::parse_shape(s));
    }
    if (m.contains("wandering")) {
      if (!m["wandering"].is_boolean()) throw FamilyError("wandering must be a boolean");
      member.declared_wandering = m["wandering"].get<bool>();
    }
    for (const auto& other : f.members)
      if (other.label == member.label) throw FamilyError("duplicate label '" + member.label + "'");
    f.members.push_back(std::move(member));
  }
  if (f.members.size() > kMaxMembers) throw FamilyError("at most 16 members");
  return f;
}

inline CodingFamily load_family(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FamilyError("cannot open family file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FamilyError(path + ": " + e.what());
  }
  return family_from_json(j);
}

inline nlohmann::json family_to_json(const CodingFamily& f) {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : f.members) {
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& p : m.pieces) shapes.push_back(detail::shape_json(p));
    members.push_back({{"label", m.label}, {"shapes", shapes}, {"wandering", m.declared_wandering}});
  }
  nlohmann::json j = {{"members", members}, {"disjoint", f.disjoint}};
  if (!f.system.empty()) j["system"] = f.system;
  return j;
}

// The single-member family {union of all members}.
inline CodingFamily union_family(const CodingFamily& f) {
  CodingFamily u;
  u.system = f.system;
  CodingMember m;
  m.label = "union";
  for (const auto& x : f.members) m.pieces.insert(m.pieces.end(), x.pieces.begin(), x.pieces.end());
  u.members.push_back(std::move(m));
  return u;
}

inline std::string word_string(const CodingWord& w, const CodingFamily& f) {
  std::string s;
  for (std::size_t i = 0; i < w.letters.size(); ++i) {
    if (i) s += ' ';
    s += w.letters[i] == kInfinityLetter ? "inf" : f.members[static_cast<std::size_t>(w.letters[i])].label;
  }
  return s;
}

// ---------------------------------------------------------------- membership

namespace detail {

inline bool member_contains(const SystemInstance& sys, const CodingMember& m, const Point& p) {
  for (const auto& s : m.pieces)
    if (sys.contains(p, s)) return true;
  return false;
}

inline double member_distance_lb(const SystemInstance& sys, const CodingMember& m, const Point& p) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& s : m.pieces) d = std::min(d, sys.distance_lb(p, s));
  return d;
}

inline std::uint32_t letter_mask(const SystemInstance& sys, const CodingFamily& f, const Point& p) {
  std::uint32_t m = 0;
  for (std::size_t r = 0; r < f.members.size(); ++r)
    if (member_contains(sys, f.members[r], p)) m |= 1u << r;
  return m;
}

inline bool exact_path(const SystemInstance& sys, const CodingFamily& f) {
  if (!sys.exact_line) return false;
  for (const auto& m : f.members)
    for (const auto& p : m.pieces)
      if (!std::holds_alternative<IntervalShape>(p)) return false;
  return true;
}

inline double default_resolution(const SystemInstance& sys, const Shape& s, const CodingOptions& opt) {
  if (opt.shape_resolution > 0) return opt.shape_resolution;
  if (auto it = sys.metadata.find("shape_resolution"); it != sys.metadata.end()) return std::stod(it->second);
  double extent = 0;
  if (const auto* iv = std::get_if<IntervalShape>(&s)) extent = mpq_class(iv->b - iv->a).get_d();
  if (const auto* r = std::get_if<RectShape>(&s)) extent = std::min(r->x1 - r->x0, r->y1 - r->y0);
  if (const auto* a = std::get_if<ArcShape>(&s)) extent = a->b - a->a - std::floor(a->b - a->a);
  return extent > 0 ? extent / 32 : 1e-3;
}

// Shape samples of every member plus the universe points lying in one.
inline std::vector<Point> member_samples(const SystemInstance& sys, const CodingFamily& f,
                                         const SampledCompact* universe, const CodingOptions& opt) {
  std::vector<Point> pts;
  for (const auto& m : f.members) {
    for (const auto& s : m.pieces) {
      if (!sys.sample_shape) throw InvalidArgument(sys.name + " cannot sample shapes");
      for (auto& p : sys.sample_shape(s, default_resolution(sys, s, opt)))
        if (member_contains(sys, m, p)) pts.push_back(std::move(p));
    }
    if (universe)
      for (const auto& p : universe->points)
        if (member_contains(sys, m, p)) pts.push_back(p);
  }
  return unique_points(pts);
}

// Letter masks of f^t(sample) for t in [from, to].
struct MaskTable {
  long from = 0;
  std::size_t span = 0;
  std::size_t samples = 0;
  std::size_t members = 0;
  std::vector<std::uint32_t> masks;
  // Per sample and member r visited by the orbit: smallest distance bound from
  // an orbit point outside r to r.  Infinite when r is not visited.
  std::vector<double> margins;

  std::uint32_t at(std::size_t s, std::size_t i) const { return masks[s * span + i]; }
};

inline MaskTable scan_masks(const SystemInstance& sys, const CodingFamily& f, const std::vector<Point>& pts,
                            long from, long to, bool margins) {
  if (to < from) throw InvalidArgument("empty time window");
  if (from < 0 && !sys.invertible()) throw InvalidArgument(sys.name + " has no inverse");
  if (margins && !sys.distance_lb) throw InvalidArgument(sys.name + " has no distance bound for shapes");
  MaskTable t;
  t.from = from;
  t.span = static_cast<std::size_t>(to - from + 1);
  t.samples = pts.size();
  t.members = f.members.size();
  t.masks.assign(t.samples * t.span, 0);
  const double inf = std::numeric_limits<double>::infinity();
  if (margins) t.margins.assign(t.samples * t.members, inf);
  parallel_for(t.samples, [&](std::size_t s) {
    Point p = sys.iterate(pts[s], from);
    std::vector<double> lb(margins ? t.members * t.span : 0, inf);
    std::uint32_t seen = 0;
    for (std::size_t i = 0; i < t.span; ++i) {
      if (i) p = sys.step(p);
      const std::uint32_t m = letter_mask(sys, f, p);
      t.masks[s * t.span + i] = m;
      seen |= m;
      if (margins)
        for (std::size_t r = 0; r < t.members; ++r)
          if (!(m >> r & 1u)) lb[r * t.span + i] = member_distance_lb(sys, f.members[r], p);
    }
    if (margins)
      for (std::size_t r = 0; r < t.members; ++r)
        if (seen >> r & 1u)
          t.margins[s * t.members + r] = *std::min_element(lb.begin() + static_cast<long>(r * t.span),
                                                           lb.begin() + static_cast<long>((r + 1) * t.span));
  });
  return t;
}

struct ExactInterval {
  mpq_class lo, hi;
};

inline std::vector<ExactInterval> interval_pieces(const CodingMember& m) {
  std::vector<ExactInterval> out;
  for (const auto& p : m.pieces) {
    const auto& iv = std::get<IntervalShape>(p);
    out.push_back({iv.a, iv.b});
  }
  return out;
}

// f^m(A) meets B for closed intervals on an exact line.
inline bool image_meets(const ExactLine& line, const ExactInterval& a, long m, const ExactInterval& b) {
  return line.shift_compare(a.lo, m, b.hi) <= 0 && line.shift_compare(a.hi, m, b.lo) >= 0;
}

// Test points covering every cell cut out by the preimages f^-t(piece) for t
// in [0, horizon): the cut points, the midpoints between them and one point
// beyond each end.  The masks over [0, horizon) are exact.
inline MaskTable exact_masks(const SystemInstance& sys, const CodingFamily& f, std::size_t horizon,
                             std::vector<Point>& starts) {
  const ExactLine& line = *sys.exact_line;
  struct Cut {
    std::size_t t, r;
    ExactInterval iv;
  };
  std::vector<Cut> cuts;
  std::vector<mpq_class> ends;
  for (std::size_t r = 0; r < f.members.size(); ++r) {
    for (const auto& iv : interval_pieces(f.members[r])) {
      for (std::size_t t = 0; t < horizon; ++t) {
        const long m = -static_cast<long>(t);
        ExactInterval pre{line.iterate(iv.lo, m), line.iterate(iv.hi, m)};
        ends.push_back(pre.lo);
        ends.push_back(pre.hi);
        cuts.push_back({t, r, std::move(pre)});
      }
    }
  }
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
  std::vector<mpq_class> xs;
  xs.push_back(line.iterate(ends.front(), -line.direction));
  for (std::size_t i = 0; i < ends.size(); ++i) {
    if (i) xs.push_back(mpq_class((ends[i - 1] + ends[i]) / 2));
    xs.push_back(ends[i]);
  }
  xs.push_back(line.iterate(ends.back(), line.direction));
  MaskTable t;
  t.from = 0;
  t.span = horizon;
  t.samples = xs.size();
  t.members = f.members.size();
  t.masks.assign(t.samples * t.span, 0);
  parallel_for(xs.size(), [&](std::size_t s) {
    for (const auto& c : cuts)
      if (cmp(c.iv.lo, xs[s]) <= 0 && cmp(xs[s], c.iv.hi) <= 0) t.masks[s * t.span + c.t] |= 1u << c.r;
  });
  starts.clear();
  for (const auto& x : xs) starts.push_back(line.point(x));
  return t;
}

// Words as ascending events time * 32 + letter; absent times read infinity.
struct WordRef {
  std::size_t offset = 0;
  std::uint32_t length = 0;
  std::uint32_t sample = 0;
  std::uint32_t shift = 0;
};

struct WordSet {
  std::vector<std::uint32_t> pool;
  std::vector<WordRef> words;
  std::size_t horizon = 0;
  std::size_t overflow_orbits = 0;
  std::size_t orbits = 0;
};

inline std::uint32_t event_time(std::uint32_t e) { return e >> 5; }
inline std::uint32_t event_letter(std::uint32_t e) { return e & 31u; }

// All codings of the length-horizon orbit segments starting at f^-s(sample),
// 0 <= s <= lead, read from a table whose window starts at -lead.
inline WordSet collect_words(const MaskTable& t, std::size_t horizon, std::size_t lead, std::size_t cap) {
  if (t.from != -static_cast<long>(lead) || t.span < lead + horizon) throw InvalidArgument("mask window too short");
  WordSet ws;
  ws.horizon = horizon;
  std::vector<std::pair<std::size_t, std::uint32_t>> events;  // (index in table, mask)
  std::vector<std::size_t> choice;
  for (std::size_t s = 0; s < t.samples; ++s) {
    events.clear();
    for (std::size_t i = 0; i < t.span; ++i)
      if (const auto m = t.at(s, i)) events.emplace_back(i, m);
    std::size_t lo = 0;
    for (std::size_t shift = 0; shift <= lead; ++shift) {
      // window covers table indices [lead - shift, lead - shift + horizon)
      const std::size_t begin = lead - shift, end = begin + horizon;
      lo = 0;
      while (lo < events.size() && events[lo].first < begin) ++lo;
      std::size_t hi = lo;
      while (hi < events.size() && events[hi].first < end) ++hi;
      ++ws.orbits;
      choice.assign(hi - lo, 0);
      std::size_t emitted = 0;
      while (true) {
        if (emitted == cap) {
          ++ws.overflow_orbits;
          break;
        }
        WordRef w;
        w.offset = ws.pool.size();
        w.length = static_cast<std::uint32_t>(hi - lo);
        w.sample = static_cast<std::uint32_t>(s);
        w.shift = static_cast<std::uint32_t>(shift);
        for (std::size_t e = lo; e < hi; ++e) {
          std::uint32_t m = events[e].second;
          for (std::size_t c = 0; c < choice[e - lo]; ++c) m &= m - 1;
          const auto letter = static_cast<std::uint32_t>(__builtin_ctz(m));
          ws.pool.push_back(static_cast<std::uint32_t>(events[e].first - begin) << 5 | letter);
        }
        ws.words.push_back(w);
        ++emitted;
        // odometer over the letters of overlapping members
        std::size_t d = 0;
        while (d < choice.size()) {
          if (++choice[d] < static_cast<std::size_t>(__builtin_popcount(events[lo + d].second))) break;
          choice[d++] = 0;
        }
        if (d == choice.size()) break;
      }
    }
  }
  return ws;
}

// First position where the dense words differ (horizon when equal) and the
// sign of a - b with infinity below every member.
inline std::pair<std::size_t, int> word_diff(const WordSet& ws, const WordRef& a, const WordRef& b) {
  const std::uint32_t* pa = ws.pool.data() + a.offset;
  const std::uint32_t* pb = ws.pool.data() + b.offset;
  std::uint32_t i = 0;
  while (i < a.length && i < b.length && pa[i] == pb[i]) ++i;
  if (i == a.length && i == b.length) return {ws.horizon, 0};
  if (i == a.length) return {event_time(pb[i]), -1};
  if (i == b.length) return {event_time(pa[i]), 1};
  const auto ta = event_time(pa[i]), tb = event_time(pb[i]);
  if (ta < tb) return {ta, 1};
  if (tb < ta) return {tb, -1};
  return {ta, event_letter(pa[i]) < event_letter(pb[i]) ? -1 : 1};
}

inline void sort_words(WordSet& ws) {
  std::sort(ws.words.begin(), ws.words.end(),
            [&](const WordRef& a, const WordRef& b) { return word_diff(ws, a, b).second < 0; });
}

// c(n) for n = 1..horizon: distinct length-n prefixes of the sorted words.
inline std::vector<std::size_t> prefix_counts(const WordSet& ws) {
  std::vector<std::size_t> hist(ws.horizon + 1, 0);
  for (std::size_t i = 1; i < ws.words.size(); ++i) ++hist[word_diff(ws, ws.words[i - 1], ws.words[i]).first];
  std::vector<std::size_t> counts(ws.horizon, ws.words.empty() ? 0 : 1);
  std::size_t run = ws.words.empty() ? 0 : 1;
  for (std::size_t n = 1; n <= ws.horizon; ++n) {
    run += hist[n - 1];
    counts[n - 1] = run;
  }
  return counts;
}

struct CodingRun {
  MaskTable table;
  WordSet words;
  std::vector<Point> starts;
  std::size_t lead = 0;
  bool exact = false;
};

inline void validate_shapes(const SystemInstance& sys, const CodingFamily& f) {
  if (f.members.empty()) throw FamilyError("family has no members");
  if (f.members.size() > kMaxMembers) throw FamilyError("at most 16 members");
  if (!sys.contains) throw FamilyError(sys.name + " does not support coding families");
  for (const auto& m : f.members) {
    if (m.pieces.empty()) throw FamilyError("member '" + m.label + "' has no shape");
    for (const auto& p : m.pieces)
      if (shape_kind(p) != sys.shape_kind) {
        throw FamilyError("member '" + m.label + "' is a " + shape_kind(p) + " but " + sys.name + " takes " +
                          sys.shape_kind + " shapes");
      }
  }
}

}  // namespace detail

// Throws FamilyError when a member is of the wrong shape kind, meets the
// non-wandering set, or when a family declared disjoint is not.
inline void validate_family(const SystemInstance& sys, const CodingFamily& f, const SampledCompact* universe = nullptr,
                            const CodingOptions& opt = {}) {
  detail::validate_shapes(sys, f);
  if (sys.non_wandering_everything) throw FamilyError("every point of " + sys.name + " is non-wandering");
  for (const auto& m : f.members)
    for (const auto& p : sys.non_wandering)
      if (detail::member_contains(sys, m, p)) {
        throw FamilyError("member '" + m.label + "' contains the non-wandering point " + describe(p));
      }
  if (!f.disjoint) return;
  if (detail::exact_path(sys, f)) {
    for (std::size_t i = 0; i < f.members.size(); ++i)
      for (std::size_t j = i + 1; j < f.members.size(); ++j)
        for (const auto& a : detail::interval_pieces(f.members[i]))
          for (const auto& b : detail::interval_pieces(f.members[j]))
            if (cmp(a.lo, b.hi) <= 0 && cmp(b.lo, a.hi) <= 0) {
              throw FamilyError("members '" + f.members[i].label + "' and '" + f.members[j].label + "' overlap");
            }
    return;
  }
  for (const auto& p : detail::member_samples(sys, f, universe, opt)) {
    const auto m = detail::letter_mask(sys, f, p);
    if (m & (m - 1)) {
      throw FamilyError("family declared disjoint but " + describe(p) + " lies in two members");
    }
  }
}

namespace detail {

inline CodingRun coding_run(const SystemInstance& sys, const CodingFamily& f, std::size_t horizon,
                            const SampledCompact& universe, const CodingOptions& opt, bool margins) {
  if (horizon == 0) throw InvalidArgument("horizon must be >= 1");
  CodingRun run;
  if (opt.prefer_exact && !margins && exact_path(sys, f)) {
    run.exact = true;
    run.table = exact_masks(sys, f, horizon, run.starts);
  } else {
    run.lead = opt.lead;
    run.starts = universe.points;
    for (const auto& p : sys.non_wandering) run.starts.push_back(p);
    run.starts = unique_points(run.starts);
    if (run.starts.empty()) throw InvalidArgument("empty universe");
    run.table = scan_masks(sys, f, run.starts, -static_cast<long>(run.lead), static_cast<long>(horizon - 1), margins);
  }
  run.words = collect_words(run.table, horizon, run.lead, opt.max_words_per_orbit);
  sort_words(run.words);
  return run;
}

inline CodingCount to_count(const CodingRun& run) {
  CodingCount c;
  c.counts = prefix_counts(run.words);
  c.series = GrowthSeries::from_counts(c.counts);
  c.exact = run.exact;
  c.orbits = run.words.orbits;
  c.overflow_orbits = run.words.overflow_orbits;
  return c;
}

}  // namespace detail

// c(n) = number of distinct codings of orbit segments of length n, n <= horizon.
// Interval families on exact-line systems are counted over every point;
// otherwise over the universe samples (and the non-wandering points).
inline CodingCount codings_count(const SystemInstance& sys, const CodingFamily& f, std::size_t horizon,
                                 const SampledCompact& universe, const CodingOptions& opt = {}) {
  validate_family(sys, f, &universe, opt);
  return detail::to_count(detail::coding_run(sys, f, horizon, universe, opt, false));
}

// The distinct codings of length n with a realizing orbit start each.
inline std::vector<CodingWord> coding_words(const SystemInstance& sys, const CodingFamily& f, std::size_t n,
                                            const SampledCompact& universe, const CodingOptions& opt = {}) {
  validate_family(sys, f, &universe, opt);
  const auto run = detail::coding_run(sys, f, n, universe, opt, false);
  std::vector<CodingWord> out;
  const auto& ws = run.words;
  for (std::size_t i = 0; i < ws.words.size(); ++i) {
    if (i && detail::word_diff(ws, ws.words[i - 1], ws.words[i]).first >= n) continue;
    const auto& w = ws.words[i];
    CodingWord cw;
    cw.letters.assign(n, kInfinityLetter);
    for (std::uint32_t e = 0; e < w.length; ++e) {
      const auto ev = ws.pool[w.offset + e];
      cw.letters[detail::event_time(ev)] = static_cast<int>(detail::event_letter(ev));
    }
    cw.witness = sys.iterate(run.starts[w.sample], -static_cast<long>(w.shift));
    out.push_back(std::move(cw));
  }
  return out;
}

// Member samples as a compact; orbit segments through them, shifted back by
// up to horizon - 1 steps, realize every coding that visits the family.
inline SampledCompact member_universe(const SystemInstance& sys, const CodingFamily& f,
                                      const SampledCompact* extra = nullptr, const CodingOptions& opt = {}) {
  detail::validate_shapes(sys, f);
  return make_compact("member-samples", detail::member_samples(sys, f, extra, opt), 0);
}

// ---------------------------------------------------------------- wandering

struct WanderingResult {
  bool wandering = true;
  std::optional<long> first_return;
  std::optional<Point> witness;  // a point of the member returning at first_return
  bool exact = false;
};

inline WanderingResult wandering_check(const SystemInstance& sys, const CodingMember& member, long bound,
                                       const SampledCompact* universe = nullptr, const CodingOptions& opt = {}) {
  if (bound < 1) throw InvalidArgument("bound must be >= 1");
  CodingFamily single;
  single.members = {member};
  detail::validate_shapes(sys, single);
  WanderingResult r;
  if (opt.prefer_exact && detail::exact_path(sys, single)) {
    r.exact = true;
    const auto& line = *sys.exact_line;
    const auto pieces = detail::interval_pieces(member);
    for (long m = 1; m <= bound; ++m)
      for (const auto& a : pieces)
        for (const auto& b : pieces)
          if (detail::image_meets(line, a, m, b)) {
            const mpq_class pre = line.iterate(b.lo, -m);
            r.wandering = false;
            r.first_return = m;
            r.witness = line.point(cmp(pre, a.lo) > 0 ? pre : a.lo);
            return r;
          }
    return r;
  }
  const auto pts = detail::member_samples(sys, single, universe, opt);
  const auto t = detail::scan_masks(sys, single, pts, 0, bound, false);
  for (std::size_t i = 1; i < t.span; ++i)
    for (std::size_t s = 0; s < t.samples; ++s)
      if (t.at(s, i)) {
        r.wandering = false;
        r.first_return = static_cast<long>(i);
        r.witness = pts[s];
        return r;
      }
  return r;
}

struct VisitCount {
  std::size_t visits = 0;
  std::optional<Point> witness;
};

// Largest number of times in [-bound, bound] a sampled orbit spends in the member.
inline VisitCount max_visits(const SystemInstance& sys, const CodingMember& member, long bound,
                             const SampledCompact& universe, const CodingOptions& opt = {}) {
  if (!sys.invertible()) throw InvalidArgument(sys.name + " has no inverse");
  if (bound < 0) throw InvalidArgument("bound must be >= 0");
  CodingFamily single;
  single.members = {member};
  detail::validate_shapes(sys, single);
  auto pts = detail::member_samples(sys, single, &universe, opt);
  VisitCount v;
  if (pts.empty()) return v;
  const auto t = detail::scan_masks(sys, single, pts, -bound, bound, false);
  for (std::size_t s = 0; s < t.samples; ++s) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < t.span; ++i) c += t.at(s, i) ? 1 : 0;
    if (c > v.visits) {
      v.visits = c;
      v.witness = pts[s];
    }
  }
  return v;
}

// ---------------------------------------------------------------- hitting sets

struct HittingData {
  std::size_t from = 0, to = 0;  // member indices (i, j)
  long bound = 0;
  std::vector<long> hits;  // m in [0, bound] with f^m(Y_i) meeting Y_j
};

inline std::vector<HittingData> hitting_sets(const SystemInstance& sys, const CodingFamily& f, long bound,
                                             const SampledCompact* universe = nullptr, const CodingOptions& opt = {}) {
  if (f.members.size() < 2) throw InvalidArgument("hitting sets need at least two members");
  if (bound < 0) throw InvalidArgument("bound must be >= 0");
  detail::validate_shapes(sys, f);
  const std::size_t k = f.members.size();
  std::vector<std::vector<char>> hit(k * k, std::vector<char>(static_cast<std::size_t>(bound) + 1, 0));
  if (opt.prefer_exact && detail::exact_path(sys, f)) {
    const auto& line = *sys.exact_line;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        if (i == j) continue;
        for (const auto& a : detail::interval_pieces(f.members[i]))
          for (const auto& b : detail::interval_pieces(f.members[j]))
            for (long m = 0; m <= bound; ++m)
              if (detail::image_meets(line, a, m, b)) hit[i * k + j][static_cast<std::size_t>(m)] = 1;
      }
  } else {
    const auto pts = detail::member_samples(sys, f, universe, opt);
    if (!pts.empty()) {
      const auto t = detail::scan_masks(sys, f, pts, 0, bound, false);
      for (std::size_t s = 0; s < t.samples; ++s) {
        const auto start = t.at(s, 0);
        for (std::size_t m = 0; m < t.span; ++m) {
          const auto now = t.at(s, m);
          if (!now) continue;
          for (std::size_t i = 0; i < k; ++i)
            if (start >> i & 1u)
              for (std::size_t j = 0; j < k; ++j)
                if (j != i && (now >> j & 1u)) hit[i * k + j][m] = 1;
        }
      }
    }
  }
  std::vector<HittingData> out;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      HittingData h{i, j, bound, {}};
      for (long m = 0; m <= bound; ++m)
        if (hit[i * k + j][static_cast<std::size_t>(m)]) h.hits.push_back(m);
      out.push_back(std::move(h));
    }
  return out;
}

// d(n) = sum_{n'=1}^{n-1} #{m in hits : 1 <= m <= n - n'} for n = 1..horizon.
inline std::vector<std::uint64_t> d_lower_bound_counts(const HittingData& h, std::size_t horizon) {
  if (horizon == 0) throw InvalidArgument("horizon must be >= 1");
  if (h.bound < static_cast<long>(horizon)) throw InvalidArgument("hitting bound below the horizon");
  std::vector<std::uint64_t> upto(horizon + 1, 0);  // #{m in hits : 1 <= m <= j}
  for (long m : h.hits)
    if (m >= 1 && m <= static_cast<long>(horizon)) ++upto[static_cast<std::size_t>(m)];
  for (std::size_t j = 1; j <= horizon; ++j) upto[j] += upto[j - 1];
  std::vector<std::uint64_t> d(horizon, 0);
  std::uint64_t run = 0;
  for (std::size_t n = 2; n <= horizon; ++n) {
    run += upto[n - 1];
    d[n - 1] = run;
  }
  return d;
}

inline GrowthSeries d_lower_bound(const HittingData& h, std::size_t horizon) {
  return GrowthSeries::from_counts(d_lower_bound_counts(h, horizon));
}

// ---------------------------------------------------------------- singularity

struct SingularWitness {
  long n0 = 0;
  Point start;
  std::vector<long> times;  // visit time per member
};

struct SingularityResult {
  bool singular = false;
  std::vector<SingularWitness> witnesses;  // one per n0 that has one
  std::optional<long> first_failure;       // smallest n0 without a witness
  long largest_gap = -1;                   // best min pairwise gap found
  // Exact systems: no orbit has visit times more than this far apart.
  std::optional<long> certified_bound;
  bool exact = false;
};

namespace detail {

// Visit-time choice maximizing the smallest pairwise gap.
inline long best_spread(const std::vector<std::vector<long>>& visits, std::vector<long>& best) {
  const std::size_t k = visits.size();
  std::vector<std::vector<long>> lists = visits;
  std::size_t product = 1;
  for (const auto& l : lists) product = std::min<std::size_t>(product * l.size(), 1u << 20);
  if (product >= (1u << 20))
    for (auto& l : lists) l = {l.front(), l.back()};
  std::vector<std::size_t> idx(k, 0);
  long best_gap = -1;
  while (true) {
    long gap = std::numeric_limits<long>::max();
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b) gap = std::min(gap, std::labs(lists[a][idx[a]] - lists[b][idx[b]]));
    if (gap > best_gap) {
      best_gap = gap;
      best.clear();
      for (std::size_t a = 0; a < k; ++a) best.push_back(lists[a][idx[a]]);
    }
    std::size_t d = 0;
    while (d < k && ++idx[d] == lists[d].size()) idx[d++] = 0;
    if (d == k) break;
  }
  return best_gap;
}

}  // namespace detail

// Searches for orbits visiting every member with pairwise time gaps above n0,
// for each n0 in [0, n0_max], among visit times in [0, search_bound].
inline SingularityResult mutually_singular_probe(const SystemInstance& sys, const CodingFamily& f, long n0_max,
                                                 long search_bound, const SampledCompact* universe = nullptr,
                                                 const CodingOptions& opt = {}) {
  if (!f.disjoint) throw FamilyError("mutual singularity needs a disjoint family");
  if (f.members.size() < 2) throw InvalidArgument("mutual singularity needs at least two members");
  if (n0_max < 0 || search_bound < 1) throw InvalidArgument("n0_max must be >= 0 and search_bound >= 1");
  validate_family(sys, f, universe, opt);
  SingularityResult r;
  struct Candidate {
    long gap;
    Point start;
    std::vector<long> times;
  };
  std::vector<Candidate> found;
  if (opt.prefer_exact && detail::exact_path(sys, f) && f.members.size() == 2) {
    r.exact = true;
    const auto& line = *sys.exact_line;
    bool certified = true;
    for (std::size_t i = 0; i < 2; ++i) {
      const std::size_t j = 1 - i;
      for (const auto& a : detail::interval_pieces(f.members[i]))
        for (const auto& b : detail::interval_pieces(f.members[j])) {
          bool stopped = false;
          for (long m = 0; m <= search_bound; ++m) {
            // Once the image has passed b it never comes back.
            const bool past = line.direction > 0 ? line.shift_compare(a.lo, m, b.hi) > 0
                                                 : line.shift_compare(a.hi, m, b.lo) < 0;
            if (past) {
              stopped = true;
              break;
            }
            if (!detail::image_meets(line, a, m, b)) continue;
            const mpq_class pre = line.iterate(b.lo, -m);
            std::vector<long> times(2);
            times[i] = 0;
            times[j] = m;
            found.push_back({m, line.point(cmp(pre, a.lo) > 0 ? pre : a.lo), times});
          }
          certified = certified && stopped;
        }
    }
    long gap = -1;
    for (const auto& c : found) gap = std::max(gap, c.gap);
    if (certified) r.certified_bound = std::max(gap, 0L);
  } else {
    const auto pts = detail::member_samples(sys, f, universe, opt);
    if (!pts.empty()) {
      const auto t = detail::scan_masks(sys, f, pts, 0, search_bound, false);
      for (std::size_t s = 0; s < t.samples; ++s) {
        std::vector<std::vector<long>> visits(f.members.size());
        for (std::size_t m = 0; m < t.span; ++m)
          for (std::size_t i = 0; i < f.members.size(); ++i)
            if (t.at(s, m) >> i & 1u) visits[i].push_back(static_cast<long>(m));
        if (std::any_of(visits.begin(), visits.end(), [](const auto& v) { return v.empty(); })) continue;
        std::vector<long> times;
        const long gap = detail::best_spread(visits, times);
        found.push_back({gap, pts[s], times});
      }
    }
  }
  std::sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) { return a.gap < b.gap; });
  if (!found.empty()) r.largest_gap = found.back().gap;
  std::size_t next = 0;
  for (long n0 = 0; n0 <= n0_max; ++n0) {
    while (next < found.size() && found[next].gap <= n0) ++next;
    if (next == found.size()) {
      r.first_failure = n0;
      break;
    }
    r.witnesses.push_back({n0, found[next].start, found[next].times});
  }
  r.singular = !r.first_failure.has_value();
  return r;
}

// ---------------------------------------------------------------- coding bound

struct CodingBoundResult {
  bool ok = false;
  int level = 0;
  double radius = 0;
  // Smallest distance bound from a member to points, outside it, of orbits
  // that visit it within the horizon.
  double margin = 0;
  std::size_t factor = 1;  // 2^#family
  std::vector<std::size_t> c, s;
  std::optional<std::size_t> first_violation;  // n with c(n) > factor s(n)
  bool exact_codings = false;
};

// c(n) <= 2^#F s_u(n) where u is the coarsest given level whose entourage
// keeps every member apart from the rest of the orbits visiting it; s is
// counted on `universe`.
inline CodingBoundResult coding_entropy_bound_check(const SystemInstance& sys, const CodingFamily& f,
                                                    std::vector<int> levels, std::size_t horizon,
                                                    const SampledCompact& universe, const CodingOptions& opt = {}) {
  if (!f.disjoint) throw FamilyError("the coding bound needs a disjoint family");
  if (levels.empty()) throw InvalidArgument("no levels given");
  if (horizon == 0) throw InvalidArgument("horizon must be >= 1");
  if (!sys.distance_lb) throw InvalidArgument(sys.name + " has no distance bound for shapes");
  for (int k : levels) sys.family.check_level(k);
  std::sort(levels.begin(), levels.end());
  validate_family(sys, f, &universe, opt);
  const double inf = std::numeric_limits<double>::infinity();
  const long H = static_cast<long>(horizon);
  CodingBoundResult r;
  r.factor = std::size_t{1} << f.members.size();
  double margin = inf;
  if (opt.prefer_exact && detail::exact_path(sys, f)) {
    const auto& line = *sys.exact_line;
    for (std::size_t i = 0; i < f.members.size(); ++i) {
      const auto w = wandering_check(sys, f.members[i], H, nullptr, opt);
      if (!w.wandering) {
        throw FamilyError("member '" + f.members[i].label + "' returns after " + std::to_string(*w.first_return));
      }
      // Interval images: the nearest point to a member is an image endpoint.
      for (const auto& a : detail::interval_pieces(f.members[i]))
        for (long m = -(H - 1); m <= H - 1; ++m) {
          if (m == 0) continue;
          for (const auto& e : {a.lo, a.hi})
            margin = std::min(margin, detail::member_distance_lb(sys, f.members[i], line.point(line.iterate(e, m))));
        }
    }
    const auto count = codings_count(sys, f, horizon, universe, opt);
    r.c = count.counts;
    r.exact_codings = true;
  } else {
    CodingOptions o = opt;
    o.lead = horizon - 1;
    const auto starts = member_universe(sys, f, &universe, opt);
    auto run = detail::coding_run(sys, f, horizon, starts, o, true);
    const auto& t = run.table;
    // Wandering over the window: a member visited twice by one orbit fails.
    for (std::size_t s = 0; s < t.samples; ++s)
      for (std::size_t i = 0; i < f.members.size(); ++i) {
        long first = -1;
        for (std::size_t m = 0; m < t.span; ++m)
          if (t.at(s, m) >> i & 1u) {
            if (first >= 0) {
              throw FamilyError("member '" + f.members[i].label + "' is visited twice by the orbit of " +
                                describe(run.starts[s]));
            }
            first = static_cast<long>(m);
          }
      }
    for (double v : t.margins) margin = std::min(margin, v);
    r.c = detail::prefix_counts(run.words);
  }
  r.margin = margin;
  std::optional<int> level;
  for (int k : levels)
    if (sys.family.radius(k) <= margin) {
      level = k;
      break;
    }
  if (!level) throw FamilyError("members are not separable at the given levels");
  r.level = *level;
  r.radius = sys.family.radius(*level);
  CountEngine engine(sys, universe, horizon);
  r.s = engine.separated(*level).counts;
  for (std::size_t n = 1; n <= horizon; ++n)
    if (r.c[n - 1] > r.factor * r.s[n - 1]) {
      r.first_violation = n;
      break;
    }
  r.ok = !r.first_violation;
  return r;
}

// Pointwise sup of c over the disjoint subfamilies (at most 8 members).
inline GrowthSeries disjoint_subfamily_sup(const SystemInstance& sys, const CodingFamily& f, std::size_t horizon,
                                           const SampledCompact& universe, const CodingOptions& opt = {}) {
  if (f.members.size() > 8) throw InvalidArgument("subfamily enumeration is limited to 8 members");
  detail::validate_shapes(sys, f);
  const std::size_t k = f.members.size();
  auto overlap = [&](std::size_t i, std::size_t j) {
    CodingFamily pair;
    pair.members = {f.members[i], f.members[j]};
    try {
      validate_family(sys, pair, &universe, opt);
      return false;
    } catch (const FamilyError&) {
      return true;
    }
  };
  std::vector<char> clash(k * k, 0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) clash[i * k + j] = clash[j * k + i] = overlap(i, j) ? 1 : 0;
  std::vector<GrowthSeries> parts;
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    bool ok = true;
    for (std::size_t i = 0; i < k && ok; ++i)
      for (std::size_t j = i + 1; j < k && ok; ++j)
        if ((mask >> i & 1u) && (mask >> j & 1u) && clash[i * k + j]) ok = false;
    if (!ok) continue;
    CodingFamily sub;
    for (std::size_t i = 0; i < k; ++i)
      if (mask >> i & 1u) sub.members.push_back(f.members[i]);
    parts.push_back(codings_count(sys, sub, horizon, universe, opt).series);
  }
  return sup(parts);
}

}  // namespace entrograph
