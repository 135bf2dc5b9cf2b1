#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "coarse/bitset.hpp"
#include "coarse/errors.hpp"
#include "coarse/space.hpp"

namespace coarse {

constexpr int32_t kUnreached = std::numeric_limits<int32_t>::max() / 2;

/// The enumerated work region ball(x0, radius) of a space, with points in
/// lexicographic order, distances to the basepoint, and adjacency in CSR
/// form (plus any weighted bridge edges).  All heavy set computations run
/// against this index.
class Universe {
 public:
  Universe(const Space& space, int64_t radius, size_t point_cap = 6'000'000)
      : space_(space), radius_(radius) {
    points_ = space.ball(space.basepoint(), radius);
    if (points_.size() > point_cap)
      throw ConfigError(
          "work region has " + std::to_string(points_.size()) +
          " points, above the cap; use a smaller grid or raise the cap");
    index_.reserve(points_.size() * 2);
    for (size_t i = 0; i < points_.size(); ++i)
      index_.emplace(points_[i], static_cast<int32_t>(i));
    dist0_.resize(points_.size());
    for (size_t i = 0; i < points_.size(); ++i)
      dist0_[i] = static_cast<int32_t>(space.dist0(points_[i]));
    // adjacency restricted to the region
    adj_off_.assign(points_.size() + 1, 0);
    std::vector<Point> nb;
    std::vector<std::vector<int32_t>> tmp(points_.size());
    for (size_t i = 0; i < points_.size(); ++i) {
      space.neighbors(points_[i], nb);
      for (const auto& q : nb) {
        auto it = index_.find(q);
        if (it != index_.end()) tmp[i].push_back(it->second);
      }
      std::sort(tmp[i].begin(), tmp[i].end());
    }
    for (size_t i = 0; i < points_.size(); ++i)
      adj_off_[i + 1] = adj_off_[i] + static_cast<int64_t>(tmp[i].size());
    adj_.resize(static_cast<size_t>(adj_off_.back()));
    for (size_t i = 0; i < points_.size(); ++i)
      std::copy(tmp[i].begin(), tmp[i].end(), adj_.begin() + adj_off_[i]);
    for (const auto& br : space.bridges()) {
      auto u = index_.find(br.u), v = index_.find(br.v);
      if (u != index_.end() && v != index_.end())
        wedges_.push_back({u->second, v->second,
                           static_cast<int32_t>(br.w)});
    }
  }

  const Space& space() const { return space_; }
  int64_t radius() const { return radius_; }
  size_t size() const { return points_.size(); }
  const Point& point(size_t i) const { return points_[i]; }
  const std::vector<Point>& points() const { return points_; }
  int32_t dist0(size_t i) const { return dist0_[i]; }

  /// Index of a point, or -1 when it lies outside the work region.
  int32_t find(const Point& p) const {
    auto it = index_.find(p);
    return it == index_.end() ? -1 : it->second;
  }

  DynBitset empty_set() const { return DynBitset(points_.size()); }
  DynBitset full_set() const {
    DynBitset b(points_.size());
    return b.flip_all(), b;
  }
  /// Points with dist0 <= R.
  DynBitset ball_bits(int64_t R) const {
    DynBitset b(points_.size());
    for (size_t i = 0; i < points_.size(); ++i)
      if (dist0_[i] <= R) b.set(i);
    return b;
  }

  /// Multi-source shortest-path field over the region (bucket Dijkstra;
  /// all edge weights are 1 except bridges).  out[i] = distance from i to
  /// the nearest source, kUnreached when none; src[i] = index of that
  /// nearest source (smallest index wins ties deterministically).
  void distance_field(const DynBitset& sources, std::vector<int32_t>& out,
                      std::vector<int32_t>* src = nullptr) const {
    out.assign(points_.size(), kUnreached);
    if (src) src->assign(points_.size(), -1);
    int32_t maxw = 1;
    for (auto& e : wedges_) maxw = std::max(maxw, e.w);
    std::vector<std::vector<int32_t>> buckets(2);
    sources.for_each([&](size_t i) {
      out[i] = 0;
      if (src) (*src)[i] = static_cast<int32_t>(i);
      buckets[0].push_back(static_cast<int32_t>(i));
    });
    for (size_t d = 0; d < buckets.size(); ++d) {
      for (size_t qi = 0; qi < buckets[d].size(); ++qi) {
        int32_t u = buckets[d][qi];
        if (out[u] != static_cast<int32_t>(d)) continue;
        auto relax = [&](int32_t v, int32_t nd) {
          if (nd < out[v]) {
            out[v] = nd;
            if (src) (*src)[v] = (*src)[u];
            if (buckets.size() <= static_cast<size_t>(nd) + 1)
              buckets.resize(static_cast<size_t>(nd) + 2);
            buckets[nd].push_back(v);
          } else if (src && nd == out[v] && (*src)[v] > (*src)[u] &&
                     out[v] == nd) {
            // smaller source index wins on equal distance
            (*src)[v] = (*src)[u];
            buckets[nd].push_back(v);
          }
        };
        for (int64_t k = adj_off_[u]; k < adj_off_[u + 1]; ++k)
          relax(adj_[static_cast<size_t>(k)], static_cast<int32_t>(d) + 1);
        for (auto& e : wedges_) {
          if (e.u == u) relax(e.v, static_cast<int32_t>(d) + e.w);
          if (e.v == u) relax(e.u, static_cast<int32_t>(d) + e.w);
        }
        if (buckets.size() <= d + 1) buckets.resize(d + 2);
      }
      if (d + 1 >= buckets.size() && [&] {
            for (size_t r = d + 1; r < buckets.size(); ++r)
              if (!buckets[r].empty()) return false;
            return true;
          }())
        break;
    }
  }

  /// Graph-metric ball around one region point, depth-limited; used for
  /// small-n neighbourhood scans.  Calls f(index, depth).
  template <typename F>
  void local_ball(int32_t start, int32_t depth, std::vector<int32_t>& stamp,
                  int32_t tick, F&& f) const {
    stamp[start] = tick;
    f(start, 0);
    std::vector<std::pair<int32_t, int32_t>> frontier{{start, 0}};
    size_t head = 0;
    while (head < frontier.size()) {
      auto [u, d] = frontier[head++];
      if (d == depth) continue;
      auto visit = [&](int32_t v, int32_t nd) {
        if (nd > depth) return;
        if (stamp[v] == tick) return;
        stamp[v] = tick;
        f(v, nd);
        frontier.emplace_back(v, nd);
      };
      for (int64_t k = adj_off_[u]; k < adj_off_[u + 1]; ++k)
        visit(adj_[static_cast<size_t>(k)], d + 1);
      for (auto& e : wedges_) {
        if (e.u == u) visit(e.v, d + e.w);
        if (e.v == u) visit(e.u, d + e.w);
      }
    }
  }

  size_t degree_bound() const {
    size_t m = 0;
    for (size_t i = 0; i < points_.size(); ++i)
      m = std::max(m, static_cast<size_t>(adj_off_[i + 1] - adj_off_[i]));
    return m;
  }

 private:
  const Space& space_;
  int64_t radius_;
  std::vector<Point> points_;
  std::unordered_map<Point, int32_t, PointHash> index_;
  std::vector<int32_t> dist0_;
  std::vector<int64_t> adj_off_;
  std::vector<int32_t> adj_;
  struct WEdge {
    int32_t u, v;
    int32_t w;
  };
  std::vector<WEdge> wedges_;
};

}  // namespace coarse
