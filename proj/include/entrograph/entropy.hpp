#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "entrograph/error.hpp"
#include "entrograph/growth.hpp"
#include "entrograph/systems.hpp"
#include "entrograph/uniformity.hpp"

namespace entrograph {

// ENTROGRAPH_THREADS if set to a positive number, else the hardware count.
inline unsigned worker_count() {
  if (const char* env = std::getenv("ENTROGRAPH_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs body(i) for i in [0, n) over contiguous chunks.
template <class F>
void parallel_for(std::size_t n, F body) {
  const std::size_t workers = std::min<std::size_t>(worker_count(), std::max<std::size_t>(1, n / 64));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w * n / workers; i < (w + 1) * n / workers; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Embedded features of step^(first + t)(sample) for t in [0, times).
class OrbitTable {
 public:
  OrbitTable() = default;
  OrbitTable(std::size_t samples, std::size_t times, int dim)
      : samples_(samples), times_(times), dim_(dim), data_(samples * times * static_cast<std::size_t>(dim)) {}

  std::size_t samples() const { return samples_; }
  std::size_t times() const { return times_; }
  int dim() const { return dim_; }

  const double* at(std::size_t s, std::size_t t) const { return &data_[(s * times_ + t) * dim_]; }
  double* at(std::size_t s, std::size_t t) { return &data_[(s * times_ + t) * dim_]; }

 private:
  std::size_t samples_ = 0, times_ = 0;
  int dim_ = 0;
  std::vector<double> data_;
};

inline OrbitTable build_orbits(const SystemInstance& sys, const std::vector<Point>& pts, std::size_t times,
                               long first = 0) {
  if (!sys.family.embedded()) throw InvalidArgument("counting needs an embedded entourage family");
  if (times == 0) throw InvalidArgument("horizon must be >= 1");
  if (first < 0 && !sys.invertible()) throw InvalidArgument(sys.name + " has no inverse");
  OrbitTable table(pts.size(), times, sys.family.dim);
  parallel_for(pts.size(), [&](std::size_t s) {
    Point p = sys.iterate(pts[s], first);
    for (std::size_t t = 0; t < times; ++t) {
      const Features f = sys.family.embed(p);
      std::copy(f.begin(), f.begin() + sys.family.dim, table.at(s, t));
      if (t + 1 < times) p = sys.step(p);
    }
  });
  return table;
}

namespace detail {

inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Grid cells whose neighbourhoods contain every point at entourage distance.
class CellGrid {
 public:
  CellGrid(const EntourageFamily& f, int k) : f_(f), k_(k), r_(f.radius(k)) {
    if (f.geometry == Geometry::cyclic) cyc_ = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(1 / r_)));
  }

  // Keys of the cells that may hold points related to `a`; returns the count.
  int neighbours(const double* a, std::uint64_t* out) const {
    switch (f_.geometry) {
      case Geometry::cells: out[0] = f_.cell(k_, a[0]); return 1;
      case Geometry::cyclic: {
        const std::int64_t c = static_cast<std::int64_t>(std::floor(a[0] * cyc_)) % cyc_;
        int m = 0;
        for (std::int64_t d = -1; d <= 1; ++d) {
          const auto v = static_cast<std::uint64_t>(((c + d) % cyc_ + cyc_) % cyc_);
          if (std::find(out, out + m, v) == out + m) out[m++] = v;
        }
        return m;
      }
      case Geometry::euclidean: {
        std::int64_t base[3] = {0, 0, 0};
        for (int i = 0; i < f_.dim; ++i) base[i] = static_cast<std::int64_t>(std::floor(a[i] / r_));
        int m = 0;
        const int span[3] = {1, f_.dim > 1 ? 1 : 0, f_.dim > 2 ? 1 : 0};
        for (int d0 = -span[0]; d0 <= span[0]; ++d0)
          for (int d1 = -span[1]; d1 <= span[1]; ++d1)
            for (int d2 = -span[2]; d2 <= span[2]; ++d2) {
              const std::int64_t c[3] = {base[0] + d0, base[1] + d1, base[2] + d2};
              out[m++] = combine(c);
            }
        return m;
      }
    }
    return 0;
  }

  std::uint64_t home(const double* a) const {
    switch (f_.geometry) {
      case Geometry::cells: return f_.cell(k_, a[0]);
      case Geometry::cyclic: return static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(a[0] * cyc_)) % cyc_);
      case Geometry::euclidean: {
        std::int64_t c[3] = {0, 0, 0};
        for (int i = 0; i < f_.dim; ++i) c[i] = static_cast<std::int64_t>(std::floor(a[i] / r_));
        return combine(c);
      }
    }
    return 0;
  }

 private:
  static std::uint64_t combine(const std::int64_t* c) {
    return mix(static_cast<std::uint64_t>(c[0]) ^ mix(static_cast<std::uint64_t>(c[1]) ^ mix(static_cast<std::uint64_t>(c[2]))));
  }

  const EntourageFamily& f_;
  int k_;
  double r_;
  std::int64_t cyc_ = 1;
};

// Lossy hash index (time, cell) -> ids.  Collisions only add candidates,
// which callers verify.
class CellIndex {
 public:
  explicit CellIndex(std::size_t expected) {
    std::size_t size = 1024;
    while (size < 2 * expected && size < (std::size_t{1} << 22)) size <<= 1;
    mask_ = size - 1;
    heads_.assign(size, kNone);
    counts_.assign(size, 0);
  }

  std::size_t bucket(std::size_t t, std::uint64_t key) const { return mix(key ^ (t * 0x9e3779b97f4a7c15ULL)) & mask_; }

  void insert(std::size_t b, std::uint32_t id) {
    nodes_.push_back({id, heads_[b]});
    heads_[b] = static_cast<std::uint32_t>(nodes_.size() - 1);
    ++counts_[b];
  }

  std::uint32_t count(std::size_t b) const { return counts_[b]; }

  template <class F>
  bool for_each(std::size_t b, F f) const {
    for (std::uint32_t i = heads_[b]; i != kNone; i = nodes_[i].next)
      if (!f(nodes_[i].id)) return false;
    return true;
  }

 private:
  static constexpr std::uint32_t kNone = 0xffffffffu;
  struct Node {
    std::uint32_t id, next;
  };
  std::size_t mask_ = 0;
  std::vector<std::uint32_t> heads_, counts_;
  std::vector<Node> nodes_;
};

}  // namespace detail

// First time t in [from, to) at which the orbits of p and q are not related
// at level k; `to` if none.
inline std::size_t first_split(const EntourageFamily& f, int k, const OrbitTable& o, std::size_t p,
                               std::size_t q, std::size_t from, std::size_t to) {
  for (std::size_t t = from; t < to; ++t)
    if (!f.member_features(k, o.at(p, t), o.at(q, t))) return t;
  return to;
}

struct SeparatedScan {
  std::vector<std::size_t> counts;         // counts[n-1] = size of the set at n
  std::vector<std::uint32_t> admitted_at;  // scan n in which a sample entered; 0 = never
  std::size_t blocker_searches = 0;

  std::vector<std::uint32_t> members(std::size_t n) const {
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < admitted_at.size(); ++i)
      if (admitted_at[i] != 0 && admitted_at[i] <= n) out.push_back(static_cast<std::uint32_t>(i));
    return out;
  }
};

// Greedy maximal (n, k)-separated subsets for n = 1..horizon, scanning samples
// in `rank` order and seeding scan n with the set of scan n-1.
//
// Each rejected sample keeps a blocker and the first time their orbits split;
// it is only re-examined at the scan where that time falls inside the window.
inline SeparatedScan greedy_separated(const EntourageFamily& f, int k, const OrbitTable& o, std::size_t horizon,
                                      const std::vector<std::uint32_t>* rank = nullptr) {
  f.check_level(k);
  if (horizon == 0 || horizon > o.times()) throw InvalidArgument("horizon outside the orbit table");
  const std::size_t m = o.samples();
  if (m == 0) throw InvalidArgument("empty compact");
  const std::size_t H = horizon;
  std::vector<std::uint32_t> identity;
  if (!rank) {
    identity.resize(m);
    std::iota(identity.begin(), identity.end(), 0u);
    rank = &identity;
  }
  SeparatedScan out;
  out.admitted_at.assign(m, 0);
  out.counts.assign(H, 0);
  std::vector<std::uint32_t> until(m, 0);  // blocked at scan n iff until >= n
  std::vector<std::vector<std::uint32_t>> pending(H);
  pending[0].resize(m);
  std::iota(pending[0].begin(), pending[0].end(), 0u);

  const detail::CellGrid grid(f, k);
  detail::CellIndex index(std::min<std::size_t>(m * H, std::size_t{1} << 21));
  std::size_t admitted = 0;
  std::uint64_t keys[27];
  std::size_t buckets[27];

  auto admit = [&](std::uint32_t p, std::size_t n) {
    out.admitted_at[p] = static_cast<std::uint32_t>(n);
    ++admitted;
    for (std::size_t t = 0; t < H; ++t) index.insert(index.bucket(t, grid.home(o.at(p, t))), p);
  };

  // Longest-lived blocker among the first few found, or 0 when p is separated
  // from every member.
  // Related at every time < n.  A coarse stride first: pairs that split tend
  // to stay split for a while.
  auto related = [&](std::uint32_t p, std::uint32_t a, std::size_t n) {
    for (std::size_t t = n - 1;; t -= std::min<std::size_t>(t, 8)) {
      if (!f.member_features(k, o.at(p, t), o.at(a, t))) return false;
      if (t == 0) break;
    }
    return first_split(f, k, o, p, a, 0, n) == n;
  };

  auto search = [&](std::uint32_t p, std::size_t n) -> std::size_t {
    ++out.blocker_searches;
    std::size_t best = 0;
    int found = 0;
    auto consider = [&](std::uint32_t a) {
      if (!related(p, a, n)) return;
      best = std::max(best, first_split(f, k, o, p, a, n, H));
      ++found;
    };
    // Grids are laid out geometrically, so members adjacent in sample order
    // are the likeliest blockers.
    for (std::uint32_t d = 1; d <= 48 && found < 1; ++d) {
      if (p >= d && out.admitted_at[p - d]) consider(p - d);
      if (p + d < m && out.admitted_at[p + d]) consider(p + d);
    }
    if (found) return best;
    std::size_t best_t = 0, best_load = ~std::size_t{0};
    // Probe up to 32 times spread over the window, starting at n - 1.
    const std::size_t stride = std::max<std::size_t>(1, n / 32);
    for (std::size_t j = 0; j < n; j += stride) {
      const std::size_t t = n - 1 - j;
      const int nk = grid.neighbours(o.at(p, t), keys);
      std::size_t load = 0;
      for (int i = 0; i < nk; ++i) load += index.count(index.bucket(t, keys[i]));
      if (load < best_load) {
        best_load = load;
        best_t = t;
      }
    }
    if (best_load == 0) return 0;
    const int nk = grid.neighbours(o.at(p, best_t), keys);
    for (int i = 0; i < nk; ++i) buckets[i] = index.bucket(best_t, keys[i]);
    std::sort(buckets, buckets + nk);
    const auto nb = static_cast<std::size_t>(std::unique(buckets, buckets + nk) - buckets);
    for (std::size_t i = 0; i < nb && found < 1; ++i) {
      index.for_each(buckets[i], [&](std::uint32_t a) {
        if (!f.member_features(k, o.at(p, best_t), o.at(a, best_t))) return true;
        consider(a);
        return found < 1;
      });
    }
    return best;
  };

  for (std::size_t n = 1; n <= H; ++n) {
    auto& list = pending[n - 1];
    std::sort(list.begin(), list.end(), [&](std::uint32_t a, std::uint32_t b) { return (*rank)[a] < (*rank)[b]; });
    for (std::uint32_t p : list) {
      const std::size_t t = admitted == 0 ? 0 : search(p, n);
      if (t == 0) {
        admit(p, n);
      } else {
        until[p] = static_cast<std::uint32_t>(t);
        if (t < H) pending[t].push_back(p);
      }
    }
    std::vector<std::uint32_t>().swap(list);
    out.counts[n - 1] = admitted;
  }
  return out;
}

// Size of a greedy cover of the samples by dynamical balls centred at samples,
// n = 1..horizon.  Greedy max-coverage, then redundant centres are dropped in
// reverse pick order.  A cover at n is also one at n-1, so each value is the
// smallest cover found at n or later.
inline std::vector<std::size_t> greedy_cover_counts(const EntourageFamily& f, int k, const OrbitTable& o,
                                                    std::size_t horizon) {
  f.check_level(k);
  if (horizon == 0 || horizon > o.times()) throw InvalidArgument("horizon outside the orbit table");
  const std::size_t m = o.samples();
  if (m == 0) throw InvalidArgument("empty compact");
  // Neighbour lists at n = 1, without self.
  std::vector<std::vector<std::uint32_t>> nbr(m);
  {
    const detail::CellGrid grid(f, k);
    detail::CellIndex index(m);
    for (std::uint32_t p = 0; p < m; ++p) index.insert(index.bucket(0, grid.home(o.at(p, 0))), p);
    std::uint64_t keys[27];
    std::size_t buckets[27];
    for (std::uint32_t p = 0; p < m; ++p) {
      const int nk = grid.neighbours(o.at(p, 0), keys);
      for (int i = 0; i < nk; ++i) buckets[i] = index.bucket(0, keys[i]);
      std::sort(buckets, buckets + nk);
      const auto nb = std::unique(buckets, buckets + nk) - buckets;
      for (long i = 0; i < nb; ++i)
        index.for_each(buckets[i], [&](std::uint32_t q) {
          if (q != p && f.member_features(k, o.at(p, 0), o.at(q, 0))) nbr[p].push_back(q);
          return true;
        });
      std::sort(nbr[p].begin(), nbr[p].end());
    }
  }
  std::vector<std::size_t> counts(horizon);
  std::vector<std::int64_t> gain(m);
  std::vector<char> covered(m);
  std::vector<std::uint32_t> cov(m);
  for (std::size_t n = 1; n <= horizon; ++n) {
    if (n > 1) {
      for (std::uint32_t p = 0; p < m; ++p) {
        auto& v = nbr[p];
        v.erase(std::remove_if(v.begin(), v.end(),
                               [&](std::uint32_t q) { return !f.member_features(k, o.at(p, n - 1), o.at(q, n - 1)); }),
                v.end());
      }
    }
    using Entry = std::pair<std::int64_t, std::int64_t>;  // (gain, -id)
    std::priority_queue<Entry> heap;
    for (std::uint32_t p = 0; p < m; ++p) {
      gain[p] = static_cast<std::int64_t>(nbr[p].size()) + 1;
      heap.push({gain[p], -static_cast<std::int64_t>(p)});
    }
    std::fill(covered.begin(), covered.end(), 0);
    std::vector<std::uint32_t> chosen;
    auto cover = [&](std::uint32_t y) {
      if (covered[y]) return;
      covered[y] = 1;
      --gain[y];
      if (gain[y] > 0) heap.push({gain[y], -static_cast<std::int64_t>(y)});
      for (std::uint32_t z : nbr[y]) {
        --gain[z];
        if (gain[z] > 0) heap.push({gain[z], -static_cast<std::int64_t>(z)});
      }
    };
    while (!heap.empty()) {
      const auto [g, neg] = heap.top();
      heap.pop();
      const auto x = static_cast<std::uint32_t>(-neg);
      if (g != gain[x] || g <= 0) continue;
      chosen.push_back(x);
      cover(x);
      for (std::uint32_t y : nbr[x]) cover(y);
    }
    std::fill(cov.begin(), cov.end(), 0);
    for (std::uint32_t x : chosen) {
      ++cov[x];
      for (std::uint32_t y : nbr[x]) ++cov[y];
    }
    std::size_t size = chosen.size();
    for (auto it = chosen.rbegin(); it != chosen.rend(); ++it) {
      const std::uint32_t x = *it;
      bool redundant = cov[x] >= 2;
      for (std::uint32_t y : nbr[x]) redundant = redundant && cov[y] >= 2;
      if (!redundant) continue;
      --cov[x];
      for (std::uint32_t y : nbr[x]) --cov[y];
      --size;
    }
    counts[n - 1] = size;
  }
  for (std::size_t n = horizon - 1; n-- > 0;) counts[n] = std::min(counts[n], counts[n + 1]);
  return counts;
}

// Samples of `universe` whose orbits stay related to the centre's for n steps.
inline std::vector<Point> dynamical_ball(const SystemInstance& sys, const Point& center, std::size_t n, int k,
                                         const SampledCompact& universe) {
  if (n == 0) throw InvalidArgument("dynamical ball needs n >= 1");
  sys.family.check_level(k);
  std::vector<Point> out;
  std::vector<Point> centre_orbit{center};
  for (std::size_t i = 1; i < n; ++i) centre_orbit.push_back(sys.step(centre_orbit.back()));
  for (const auto& q : universe.points) {
    Point r = q;
    bool inside = true;
    for (std::size_t i = 0; i < n && inside; ++i) {
      inside = sys.family.member(k, centre_orbit[i], r);
      if (i + 1 < n) r = sys.step(r);
    }
    if (inside) out.push_back(q);
  }
  return out;
}

// ---------------------------------------------------------------- profiles

struct CountOptions {
  bool generators = false;             // also run greedy covers and the sandwich check
  std::size_t generator_limit = 4096;  // skip covers above this many samples
  std::optional<std::uint64_t> shuffle_seed;  // extra pass in a random scan order
  ClassifyBands bands;
};

struct LevelCounts {
  int k = 0;
  GrowthSeries s_series;
  std::optional<GrowthSeries> g_series;
  std::optional<bool> sandwich_ok;  // s(coarser) <= g(k) <= s(k)
  std::optional<std::size_t> sandwich_violation;
  std::optional<GrowthClass> growth;  // absent below horizon 16
  std::optional<GrowthSeries> shuffled_s;
};

struct CountProfile {
  std::string system;
  std::string compact;
  std::vector<LevelCounts> levels;
  std::optional<GrowthClass> aggregate;
  std::string status;  // "stable" or "unstable_at_levels"
  std::vector<int> unstable_levels;
  std::size_t grid_size = 0;
  int density_level = 0;
  std::size_t horizon = 0;
  std::map<std::string, std::string> metadata;
};

namespace detail {

inline GrowthSeries to_series(const std::vector<std::size_t>& c) { return GrowthSeries::from_counts(c); }

// Largest level whose refinement by sqrt_level is k.
inline std::optional<int> coarser_partner(const EntourageFamily& f, int k) {
  for (int c = k; c >= f.min_level; --c)
    if (f.sqrt_level(c) == k) return c;
  return std::nullopt;
}

inline std::optional<std::size_t> sandwich_violation(const std::vector<std::size_t>& s_coarse,
                                                     const std::vector<std::size_t>& g,
                                                     const std::vector<std::size_t>& s_fine) {
  for (std::size_t i = 0; i < g.size(); ++i)
    if (s_coarse[i] > g[i] || g[i] > s_fine[i]) return i + 1;
  return std::nullopt;
}

}  // namespace detail

// Separated and generator counts over one compact, with orbits computed once.
class CountEngine {
 public:
  CountEngine(const SystemInstance& sys, const SampledCompact& compact, std::size_t horizon)
      : sys_(sys), compact_(compact), horizon_(horizon), orbits_(build_orbits(sys, compact.points, horizon)) {}

  const OrbitTable& orbits() const { return orbits_; }
  std::size_t horizon() const { return horizon_; }

  const SeparatedScan& separated(int k) {
    auto it = scans_.find(k);
    if (it == scans_.end()) it = scans_.emplace(k, greedy_separated(sys_.family, k, orbits_, horizon_)).first;
    return it->second;
  }

  const std::vector<std::size_t>& generators(int k) {
    auto it = covers_.find(k);
    if (it == covers_.end()) it = covers_.emplace(k, greedy_cover_counts(sys_.family, k, orbits_, horizon_)).first;
    return it->second;
  }

  std::vector<std::size_t> shuffled(int k, std::uint64_t seed) const {
    std::vector<std::uint32_t> order(orbits_.samples());
    std::iota(order.begin(), order.end(), 0u);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::uint32_t> rank(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = static_cast<std::uint32_t>(i);
    return greedy_separated(sys_.family, k, orbits_, horizon_, &rank).counts;
  }

 private:
  const SystemInstance& sys_;
  const SampledCompact& compact_;
  std::size_t horizon_;
  OrbitTable orbits_;
  std::map<int, SeparatedScan> scans_;
  std::map<int, std::vector<std::size_t>> covers_;
};

inline GrowthSeries separated_count(const SystemInstance& sys, const SampledCompact& compact, int k,
                                    std::size_t horizon) {
  sys.family.check_level(k);
  CountEngine e(sys, compact, horizon);
  return detail::to_series(e.separated(k).counts);
}

inline GrowthSeries generator_count(const SystemInstance& sys, const SampledCompact& compact, int k,
                                    std::size_t horizon) {
  sys.family.check_level(k);
  CountEngine e(sys, compact, horizon);
  return detail::to_series(e.generators(k));
}

struct SandwichResult {
  bool ok = true;
  int coarse_level = 0, fine_level = 0;
  std::optional<std::size_t> first_violation;  // n
  std::vector<std::size_t> s_coarse, g_fine, s_fine;
};

// s(k, n) <= g(k_f, n) <= s(k_f, n) with k_f = sqrt_level(k).
inline SandwichResult sandwich_check(const SystemInstance& sys, const SampledCompact& compact, int k,
                                     std::size_t horizon) {
  sys.family.check_level(k);
  SandwichResult r;
  r.coarse_level = k;
  r.fine_level = sys.family.sqrt_level(k);
  sys.family.check_level(r.fine_level);
  CountEngine e(sys, compact, horizon);
  r.s_coarse = e.separated(k).counts;
  r.s_fine = e.separated(r.fine_level).counts;
  r.g_fine = e.generators(r.fine_level);
  r.first_violation = detail::sandwich_violation(r.s_coarse, r.g_fine, r.s_fine);
  r.ok = !r.first_violation;
  return r;
}

inline void aggregate_profile(CountProfile& p) {
  std::vector<const LevelCounts*> classified;
  for (const auto& l : p.levels)
    if (l.growth) classified.push_back(&l);
  std::sort(classified.begin(), classified.end(), [](auto* a, auto* b) { return a->k < b->k; });
  p.aggregate.reset();
  p.unstable_levels.clear();
  if (classified.size() >= 2) {
    const auto& fine = *classified[classified.size() - 1];
    const auto& next = *classified[classified.size() - 2];
    if (fine.growth->label == next.growth->label) {
      p.aggregate = fine.growth;
      p.status = "stable";
      return;
    }
    p.unstable_levels = {next.k, fine.k};
  } else if (classified.size() == 1) {
    p.unstable_levels = {classified[0]->k};
  }
  p.status = "unstable_at_levels";
}

inline CountProfile entropy_profile(const SystemInstance& sys, const SampledCompact& compact, std::vector<int> levels,
                                    std::size_t horizon, const CountOptions& opt = {}) {
  if (levels.empty()) throw InvalidArgument("no levels requested");
  for (int k : levels) sys.family.check_level(k);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  CountEngine engine(sys, compact, horizon);
  CountProfile p;
  p.system = sys.name;
  p.compact = compact.label;
  p.grid_size = compact.points.size();
  p.density_level = compact.density_level;
  p.horizon = horizon;
  const bool covers = opt.generators && compact.points.size() <= opt.generator_limit;
  for (int k : levels) {
    LevelCounts l;
    l.k = k;
    const auto& s = engine.separated(k).counts;
    l.s_series = detail::to_series(s);
    if (covers) {
      const auto& g = engine.generators(k);
      l.g_series = detail::to_series(g);
      const auto partner = detail::coarser_partner(sys.family, k);
      const auto& s_coarse = partner ? engine.separated(*partner).counts : std::vector<std::size_t>(s.size(), 0);
      l.sandwich_violation = detail::sandwich_violation(s_coarse, g, s);
      l.sandwich_ok = !l.sandwich_violation;
    }
    if (horizon >= 16) l.growth = classify(l.s_series, opt.bands);
    if (opt.shuffle_seed) l.shuffled_s = detail::to_series(engine.shuffled(k, *opt.shuffle_seed));
    p.levels.push_back(std::move(l));
  }
  if (opt.generators && !covers) p.metadata["generators"] = "skipped: grid above generator_limit";
  aggregate_profile(p);
  for (const auto& [key, value] : sys.metadata) p.metadata["system." + key] = value;
  return p;
}

// Union of declared compacts named by a selector "a+b+...".
inline SampledCompact select_compact(const SystemInstance& sys, const std::string& selector) {
  std::vector<std::string> names;
  std::size_t start = 0;
  while (true) {
    const auto plus = selector.find('+', start);
    names.push_back(selector.substr(start, plus == std::string::npos ? std::string::npos : plus - start));
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  if (names.size() == 1) return sys.compact(names[0]);
  std::vector<Point> pts;
  int density = std::numeric_limits<int>::max();
  for (const auto& n : names) {
    const auto& c = sys.compact(n);
    pts.insert(pts.end(), c.points.begin(), c.points.end());
    density = std::min(density, c.density_level);
  }
  return make_compact(selector, unique_points(pts), density);
}

struct RestrictedProfile {
  CountProfile profile;
  std::vector<CountProfile> pieces;          // one per '+' term, when a union
  std::vector<GrowthSeries> piece_sup;       // by level, pointwise sup of the pieces
};

inline RestrictedProfile restricted_profile(const SystemInstance& sys, const std::string& selector,
                                            const std::vector<int>& levels, std::size_t horizon,
                                            const CountOptions& opt = {}) {
  RestrictedProfile r;
  const SampledCompact k = select_compact(sys, selector);
  r.profile = entropy_profile(sys, k, levels, horizon, opt);
  if (selector.find('+') == std::string::npos) return r;
  std::size_t start = 0;
  while (true) {
    const auto plus = selector.find('+', start);
    const auto name = selector.substr(start, plus == std::string::npos ? std::string::npos : plus - start);
    r.pieces.push_back(entropy_profile(sys, sys.compact(name), levels, horizon, opt));
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  for (std::size_t i = 0; i < r.profile.levels.size(); ++i) {
    std::vector<GrowthSeries> parts;
    for (const auto& piece : r.pieces) parts.push_back(piece.levels[i].s_series);
    r.piece_sup.push_back(sup(parts));
  }
  return r;
}

// ---------------------------------------------------------------- probes

// Same system with step and step_inv exchanged.
inline SystemInstance inverse_system(const SystemInstance& sys) {
  if (!sys.invertible()) throw InvalidArgument(sys.name + " has no inverse");
  SystemInstance s = sys;
  s.name = sys.name + "^-1";
  std::swap(s.step, s.step_inv);
  s.exact_line.reset();
  return s;
}

struct StabilityResult {
  bool stable = false;
  std::optional<int> witness_level;
  std::optional<std::pair<Point, Point>> counterexample;
  std::optional<std::size_t> split_time;  // of the counterexample
  std::vector<int> unresolved_levels;     // no sampled pair inside the entourage
};

namespace detail {

// Index pairs (i < j) related at level v at time 0, in order; stops when the
// visitor returns false.
template <class F>
bool for_each_close_pair(const EntourageFamily& f, int v, const OrbitTable& o, F visit) {
  const std::size_t m = o.samples();
  const CellGrid grid(f, v);
  CellIndex index(m);
  for (std::uint32_t p = 0; p < m; ++p) index.insert(index.bucket(0, grid.home(o.at(p, 0))), p);
  std::uint64_t keys[27];
  std::size_t buckets[27];
  for (std::uint32_t p = 0; p < m; ++p) {
    const int nk = grid.neighbours(o.at(p, 0), keys);
    for (int i = 0; i < nk; ++i) buckets[i] = index.bucket(0, keys[i]);
    std::sort(buckets, buckets + nk);
    const auto nb = std::unique(buckets, buckets + nk) - buckets;
    std::vector<std::uint32_t> close;
    for (long i = 0; i < nb; ++i)
      index.for_each(buckets[i], [&](std::uint32_t q) {
        if (q > p && f.member_features(v, o.at(p, 0), o.at(q, 0))) close.push_back(q);
        return true;
      });
    std::sort(close.begin(), close.end());
    for (std::uint32_t q : close)
      if (!visit(p, q)) return false;
  }
  return true;
}

}  // namespace detail

// Searches v = target_k.. for a level at which every sampled pair related at v
// stays related at target_k along step^i, 0 <= i <= horizon.
inline StabilityResult lyapunov_probe(const SystemInstance& sys, const SampledCompact& compact, int target_k,
                                      std::size_t horizon) {
  sys.family.check_level(target_k);
  const OrbitTable o = build_orbits(sys, compact.points, horizon + 1);
  StabilityResult r;
  for (int v = target_k; v <= sys.family.max_level; ++v) {
    bool any = false;
    std::optional<std::pair<std::uint32_t, std::uint32_t>> bad;
    std::size_t when = 0;
    detail::for_each_close_pair(sys.family, v, o, [&](std::uint32_t p, std::uint32_t q) {
      any = true;
      const std::size_t t = first_split(sys.family, target_k, o, p, q, 0, horizon + 1);
      if (t <= horizon) {
        bad = {p, q};
        when = t;
        return false;
      }
      return true;
    });
    if (!any) {
      r.unresolved_levels.push_back(v);
      continue;
    }
    if (!bad) {
      r.stable = true;
      r.witness_level = v;
      r.counterexample.reset();
      r.split_time.reset();
      return r;
    }
    r.counterexample = std::make_pair(compact.points[bad->first], compact.points[bad->second]);
    r.split_time = when;
  }
  return r;
}

struct RegularityResult {
  bool regular = false;
  std::optional<int> witness_level;
  std::optional<Point> counterexample;  // sampled point leaving the orbit tube
  std::optional<long> split_time;
  std::vector<int> unresolved_levels;
};

// Two-sided version of the Lyapunov probe centred at a sampled point x:
// searches v with ball(x, v) staying target_k-close to the orbit of x for
// times -horizon..horizon.
inline RegularityResult regularity_probe(const SystemInstance& sys, const Point& x, int target_k,
                                         std::size_t horizon, const SampledCompact& universe) {
  if (!sys.invertible()) throw InvalidArgument(sys.name + " has no inverse");
  sys.family.check_level(target_k);
  if (std::find(universe.points.begin(), universe.points.end(), x) == universe.points.end()) {
    throw InvalidArgument("point " + describe(x) + " is not sampled");
  }
  const long H = static_cast<long>(horizon);
  auto orbit = [&](const Point& p) {
    std::vector<Features> out;
    Point q = sys.iterate(p, -H);
    for (long t = -H; t <= H; ++t) {
      out.push_back(sys.family.embed(q));
      if (t < H) q = sys.step(q);
    }
    return out;
  };
  const auto centre = orbit(x);
  std::vector<std::size_t> near;  // samples related to x at target_k
  for (std::size_t i = 0; i < universe.points.size(); ++i) {
    if (universe.points[i] == x) continue;
    const Features f = sys.family.embed(universe.points[i]);
    if (sys.family.member_features(target_k, centre[static_cast<std::size_t>(H)].data(), f.data())) near.push_back(i);
  }
  std::map<std::size_t, std::optional<long>> split;  // sample -> first time outside the tube
  auto split_of = [&](std::size_t i) {
    auto it = split.find(i);
    if (it != split.end()) return it->second;
    const auto o = orbit(universe.points[i]);
    std::optional<long> t;
    // Order times by |t| so the earliest departure in either direction wins.
    for (long a = 0; a <= H && !t; ++a)
      for (long s : {a, -a})
        if (!t && !sys.family.member_features(target_k, centre[static_cast<std::size_t>(s + H)].data(),
                                              o[static_cast<std::size_t>(s + H)].data()))
          t = s;
    split[i] = t;
    return t;
  };
  RegularityResult r;
  for (int v = target_k; v <= sys.family.max_level; ++v) {
    bool any = false, ok = true;
    for (std::size_t i : near) {
      const Features f = sys.family.embed(universe.points[i]);
      if (!sys.family.member_features(v, centre[static_cast<std::size_t>(H)].data(), f.data())) continue;
      any = true;
      if (const auto t = split_of(i)) {
        ok = false;
        r.counterexample = universe.points[i];
        r.split_time = *t;
        break;
      }
    }
    if (!any) {
      r.unresolved_levels.push_back(v);
      continue;
    }
    if (ok) {
      r.regular = true;
      r.witness_level = v;
      r.counterexample.reset();
      r.split_time.reset();
      return r;
    }
  }
  return r;
}

struct AlphaLimitResult {
  bool exits = false;         // backward orbit leaves ball(x, k) for good within the horizon
  std::size_t exit_time = 0;  // from this backward time on it stays outside
  long constant = 0;          // max over n of n - s(n)
  bool ok = false;            // exits and s(n) >= n / exit_time - 1 for all n
  GrowthSeries s_series;
};

// Lower bound from an orbit that is not in its own alpha-limit.
inline AlphaLimitResult alpha_limit_check(const SystemInstance& sys, const SampledCompact& compact, const Point& x,
                                          int k, std::size_t horizon) {
  if (!sys.invertible()) throw InvalidArgument(sys.name + " has no inverse");
  sys.family.check_level(k);
  AlphaLimitResult r;
  std::vector<char> inside;
  Point q = x;
  for (std::size_t j = 0; j <= horizon; ++j) {
    inside.push_back(sys.family.member(k, x, q));
    q = sys.step_inv(q);
  }
  std::size_t last_inside = 0;
  for (std::size_t j = 1; j <= horizon; ++j)
    if (inside[j]) last_inside = j;
  r.exits = last_inside < horizon / 2;
  r.exit_time = last_inside + 1;
  r.s_series = separated_count(sys, compact, k, horizon);
  r.ok = r.exits;
  for (std::size_t n = 1; n <= horizon; ++n) {
    const long s = static_cast<long>(r.s_series(n));
    r.constant = std::max(r.constant, static_cast<long>(n) - s);
    if (static_cast<double>(s) < static_cast<double>(n) / static_cast<double>(r.exit_time) - 1) r.ok = false;
  }
  return r;
}

struct MatchedLevel {
  int target_level = 0;  // on the factor
  int source_level = 0;  // on the lifted system
  bool ok = true;
  std::optional<std::size_t> first_violation;
  std::vector<std::size_t> s_target, s_source;
};

struct SemiconjugacyResult {
  bool ok = true;
  std::vector<MatchedLevel> levels;
};

// Coarsest partition level whose widest cell is narrower than eps.
inline std::optional<int> matching_partition_level(const EntourageFamily& partition, double eps) {
  for (int j = partition.min_level; j <= partition.max_level; ++j)
    if (partition.cell_width[static_cast<std::size_t>(j - partition.min_level)] < eps) return j;
  return std::nullopt;
}

// s_g(k, n) <= s_f(matched level, n) for every requested factor level.
inline SemiconjugacyResult semiconjugacy_inequality_check(const SystemInstance& lifted, const Semiconjugacy& sc,
                                                          const std::vector<int>& target_levels,
                                                          std::size_t horizon) {
  if (lifted.family.geometry != Geometry::cells) throw InvalidArgument("lifted system needs a partition family");
  CountEngine source(lifted, lifted.default_compact, horizon);
  CountEngine target(sc.target, sc.target.default_compact, horizon);
  SemiconjugacyResult r;
  for (int k : target_levels) {
    sc.target.family.check_level(k);
    const auto j = matching_partition_level(lifted.family, sc.target.family.radius(k));
    if (!j) throw InvalidArgument("no matching level for factor level " + std::to_string(k));
    MatchedLevel m;
    m.target_level = k;
    m.source_level = *j;
    m.s_target = target.separated(k).counts;
    m.s_source = source.separated(*j).counts;
    for (std::size_t i = 0; i < horizon; ++i)
      if (m.s_target[i] > m.s_source[i]) {
        m.ok = false;
        m.first_violation = i + 1;
        break;
      }
    r.ok = r.ok && m.ok;
    r.levels.push_back(std::move(m));
  }
  return r;
}

struct PowerCheck {
  bool ok = false;
  int power = 1;
  GrowthSeries s_base, s_power;
  GrowthClass base, powered;
};

// class(f) <= class(f^r) at the same level.
inline PowerCheck power_monotonicity_check(const SystemInstance& sys, const SampledCompact& compact, int k,
                                           std::size_t horizon, int r, const ClassifyBands& bands = {}) {
  if (r < 2) throw InvalidArgument("power must be >= 2");
  PowerCheck c;
  c.power = r;
  c.s_base = separated_count(sys, compact, k, horizon);
  c.s_power = separated_count(power_system(sys, r), compact, k, horizon);
  c.base = classify(c.s_base, bands);
  c.powered = classify(c.s_power, bands);
  c.ok = class_leq(c.base, c.powered);
  return c;
}

}  // namespace entrograph
