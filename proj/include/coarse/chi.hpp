#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "coarse/context.hpp"
#include "coarse/verdict.hpp"

namespace coarse {

/// chi_{A,B}(R) = d(A minus ball(x0,R), B minus ball(x0,R)), computed
/// exactly inside the work region; the infinity sentinel marks radii where
/// a truncated operand is empty.
struct ChiProfile {
  Profile profile;
  json a, b;  // the operand descriptors, for reports

  json to_json() const {
    json j = profile.to_json();
    j["a"] = a;
    j["b"] = b;
    return j;
  }
};

inline ChiProfile chi_profile(Context& ctx, const SubsetPtr& A,
                              const SubsetPtr& B) {
  Universe& u = ctx.universe();
  const TruncationGrid& grid = ctx.grid();
  ChiProfile out;
  out.a = subset_to_json(*A);
  out.b = subset_to_json(*B);
  Profile& p = out.profile;
  p.radii = grid.radii;
  const DynBitset& abits = ctx.eval(A);
  const DynBitset& bbits = ctx.eval(B);
  for (int64_t R : grid.radii) {
    DynBitset at = abits, bt = bbits;
    DynBitset inner = u.ball_bits(R);
    at.subtract(inner);
    bt.subtract(inner);
    if (at.none() || bt.none()) {
      p.values.push_back(kEmpty);
      p.certified.push_back(0);
      p.attain.push_back(json{{"empty", at.none() ? "a" : "b"}});
      continue;
    }
    std::vector<int32_t> f, nearest;
    u.distance_field(at, f, &nearest);
    int64_t best = kInfDist;
    int32_t arg = -1;
    bt.for_each([&](size_t j) {
      if (f[j] < best) {
        best = f[j];
        arg = static_cast<int32_t>(j);
      }
    });
    if (arg < 0 || best >= kUnreached) {
      p.values.push_back(kEmpty);
      p.certified.push_back(0);
      p.attain.push_back(json{{"empty", "unreachable"}});
      continue;
    }
    p.values.push_back(best);
    p.certified.push_back(R + best <= ctx.work() ? 1 : 0);
    p.attain.push_back(
        json{{"a", u.point(static_cast<size_t>(nearest[arg])).to_json()},
             {"b", u.point(static_cast<size_t>(arg)).to_json()},
             {"value", best}});
  }
  return out;
}

inline Verdict decide_close(const ChiProfile& p, const TruncationGrid& grid) {
  Verdict v = decide_profile(p.profile, grid, kCloseApart,
                             "a truncated operand is empty on the window; "
                             "bounded sets are close to nothing");
  return v;
}

inline Verdict decide_close(Context& ctx, const SubsetPtr& A,
                            const SubsetPtr& B) {
  return decide_close(chi_profile(ctx, A, B), ctx.grid());
}

/// Boundedness proxy: members stabilize across the trailing window.
inline Verdict is_bounded(Context& ctx, const SubsetPtr& A) {
  Universe& u = ctx.universe();
  const TruncationGrid& grid = ctx.grid();
  const DynBitset& bits = ctx.eval(A);
  std::vector<DynBitset> slices;
  std::vector<int64_t> counts;
  std::vector<int64_t> far;  // farthest member distance per radius
  for (int64_t R : grid.radii) {
    DynBitset s = bits;
    s &= u.ball_bits(R);
    int64_t mx = -1;
    s.for_each([&](size_t i) { mx = std::max<int64_t>(mx, u.dist0(i)); });
    counts.push_back(static_cast<int64_t>(s.count()));
    far.push_back(mx);
    slices.push_back(std::move(s));
  }
  size_t b = grid.window_begin(), n = grid.size();
  json window = json::array();
  for (size_t i = b; i < n; ++i)
    window.push_back(json{{"radius", grid.radii[i]},
                          {"count", counts[i]},
                          {"farthest", far[i]}});
  bool stable = true;
  for (size_t i = b + 1; i < n; ++i)
    stable = stable && slices[i] == slices[b];
  if (stable) {
    json sample = json::array();
    int shown = 0;
    slices[b].for_each([&](size_t i) {
      if (shown++ < 10) sample.push_back(u.point(i).to_json());
    });
    return Verdict::make_positive(
        kBounded.positive, std::max<int64_t>(far[n - 1], 0),
        json{{"reason", "members_stabilize"},
             {"count", counts[n - 1]},
             {"window", window},
             {"sample", sample}});
  }
  bool growing = true, escaping = true;
  for (size_t i = b + 1; i < n; ++i)
    growing = growing && counts[i] > counts[i - 1];
  json escapes = json::array();
  for (size_t i = b; i < n; ++i) {
    escaping = escaping && far[i] > grid.tau_at(i);
    int64_t want = far[i];
    slices[i].for_each([&](size_t k) {
      if (u.dist0(k) == want && escapes.size() == i - b)
        escapes.push_back(u.point(k).to_json());
    });
  }
  if (growing && escaping)
    return Verdict::make_negative(
        kBounded.negative, json{{"reason", "members_escape"},
                                {"window", window},
                                {"escaping", escapes}});
  return Verdict::make_inconclusive(
      json{{"reason", "no_stabilization"}, {"window", window}},
      "member sets neither stabilize nor clearly escape");
}

/// Duality check for a single entourage bound: the pairs satisfying the
/// predicate at distance <= n must form a bounded (stabilizing) set.
inline Verdict is_coentourage(
    Context& ctx,
    const std::function<bool(const Point&, const Point&)>& predicate,
    int64_t n) {
  Universe& u = ctx.universe();
  const TruncationGrid& grid = ctx.grid();
  size_t m = grid.size();
  std::vector<int64_t> counts(m, 0);
  std::vector<int64_t> maxmin(m, -1);
  std::vector<json> far_pair(m);
  std::vector<int32_t> stamp(u.size(), -1);
  for (size_t xi = 0; xi < u.size(); ++xi) {
    int64_t dx = u.dist0(xi);
    u.local_ball(
        static_cast<int32_t>(xi), static_cast<int32_t>(n), stamp,
        static_cast<int32_t>(xi), [&](int32_t yi, int32_t) {
          if (!predicate(u.point(xi), u.point(static_cast<size_t>(yi))))
            return;
          int64_t dy = u.dist0(static_cast<size_t>(yi));
          int64_t lo = std::min(dx, dy), hi = std::max(dx, dy);
          for (size_t r = 0; r < m; ++r) {
            if (hi > grid.radii[r]) continue;
            ++counts[r];
            if (lo > maxmin[r]) {
              maxmin[r] = lo;
              far_pair[r] =
                  json::array({u.point(xi).to_json(),
                               u.point(static_cast<size_t>(yi)).to_json()});
            }
          }
        });
  }
  size_t b = grid.window_begin();
  json window = json::array();
  for (size_t i = b; i < m; ++i)
    window.push_back(json{{"radius", grid.radii[i]},
                          {"pairs", counts[i]},
                          {"farthest_min_dist", maxmin[i]}});
  bool stable = true;
  for (size_t i = b + 1; i < m; ++i) stable = stable && counts[i] == counts[b];
  if (stable) {
    int64_t bound = std::max<int64_t>(maxmin[m - 1], 0);
    return Verdict::make_positive(kHoldsFails.positive, bound,
                                  json{{"reason", "pairs_stabilize"},
                                       {"window", window}});
  }
  bool escaping = true;
  for (size_t i = b; i < m; ++i)
    escaping = escaping && maxmin[i] > grid.tau_at(i);
  if (escaping) {
    json esc = json::array();
    for (size_t i = b; i < m; ++i) esc.push_back(far_pair[i]);
    return Verdict::make_negative(kHoldsFails.negative,
                                  json{{"reason", "pairs_escape"},
                                       {"window", window},
                                       {"escaping_pairs", esc}});
  }
  return Verdict::make_inconclusive(
      json{{"reason", "no_stabilization"}, {"window", window}});
}

}  // namespace coarse
