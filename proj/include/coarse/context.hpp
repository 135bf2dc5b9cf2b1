#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coarse/bitset.hpp"
#include "coarse/endpoint.hpp"
#include "coarse/errors.hpp"
#include "coarse/grid.hpp"
#include "coarse/maps.hpp"
#include "coarse/parse.hpp"
#include "coarse/point.hpp"
#include "coarse/space.hpp"
#include "coarse/subset.hpp"
#include "coarse/universe.hpp"

namespace coarse {

/// Evaluation context: one space + one truncation grid + the enumerated
/// work region, with memoized subset evaluation and endpoint
/// materialization.  Every subset is evaluated against the *fixed* work
/// region ball(x0, work); query radii R <= r_max then slice that region,
/// which is what keeps members() monotone-consistent across radii.
class Context {
 public:
  Context(SpacePtr space, TruncationGrid grid)
      : space_(std::move(space)), grid_(std::move(grid)) {
    grid_.validate();
  }

  const Space& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }
  const TruncationGrid& grid() const { return grid_; }

  /// Effective work radius: fixed for all evaluation in this context.
  /// Loaded graphs are finite, so their region is the whole graph.
  int64_t work() const {
    if (space_->kind == Space::Kind::Graph)
      return std::max<int64_t>(grid_.work(),
                               static_cast<int64_t>(space_->graph_size()));
    return grid_.work();
  }

  Universe& universe() {
    if (!universe_) universe_ = std::make_unique<Universe>(*space_, work());
    return *universe_;
  }

  // ------------------------------------------------------------- subsets

  /// Structural interning: refinement chains share deep sub-DAGs, so cache
  /// keys are small integers derived from child ids, never full dumps.
  /// Every pointer registered in the fast path is kept alive for the
  /// context's lifetime; otherwise a freed node's address could be reused
  /// by a different expression and resolve to the stale id.
  int32_t intern(const SubsetPtr& s) {
    auto pit = intern_ptr_.find(s.get());
    if (pit != intern_ptr_.end()) return pit->second;
    std::string shape = shape_key(*s);
    auto sit = intern_shape_.find(shape);
    int32_t id;
    if (sit != intern_shape_.end()) {
      id = sit->second;
      retained_.push_back(s);
    } else {
      id = static_cast<int32_t>(interned_.size());
      interned_.push_back(s);
      intern_shape_.emplace(std::move(shape), id);
    }
    intern_ptr_.emplace(s.get(), id);
    return id;
  }
  const SubsetPtr& interned(int32_t id) const {
    return interned_.at(static_cast<size_t>(id));
  }

  const DynBitset& eval(const SubsetPtr& s) {
    int32_t id = intern(s);
    auto it = subset_cache_.find(id);
    if (it != subset_cache_.end()) return it->second;
    DynBitset bits = eval_uncached(*s);
    return subset_cache_.emplace(id, std::move(bits)).first->second;
  }

  /// (set denoted by s) intersected with ball(x0, R), sorted.
  std::vector<Point> members(const SubsetPtr& s, int64_t R) {
    Universe& u = universe();
    if (R > work())
      throw PreconditionError("members radius exceeds the work region");
    const DynBitset& bits = eval(s);
    std::vector<Point> out;
    bits.for_each([&](size_t i) {
      if (u.dist0(i) <= R) out.push_back(u.point(i));
    });
    return out;
  }

  /// Multi-source exact distance field from a point set (graph BFS inside
  /// the region; exact for the shipped space families).
  std::vector<int32_t> field_from(const DynBitset& sources,
                                  std::vector<int32_t>* nearest = nullptr) {
    std::vector<int32_t> f;
    universe().distance_field(sources, f, nearest);
    return f;
  }

  // ------------------------------------------------------------ endpoints

  struct Materialized {
    std::vector<Point> pts;      // phi(0..horizon)
    std::vector<int64_t> dist0;  // exact distance to the basepoint
    DynBitset bits;              // image inside the work region
    int64_t horizon = 0;         // last generated index
    bool truncated = false;      // stopped by the horizon cap
  };

  const Materialized& materialize(const EndpointPtr& e) {
    std::string key = endpoint_key(*e);
    auto it = endpoint_cache_.find(key);
    if (it != endpoint_cache_.end()) return it->second;
    Materialized m = materialize_uncached(*e);
    return endpoint_cache_.emplace(std::move(key), std::move(m))
        .first->second;
  }

  // ------------------------------------------------------- cross contexts

  /// Context for another space (preimage/image/pushforward targets),
  /// sized to cover at least min_radius.  Returns *this when the space is
  /// this context's own space and the region is large enough.
  Context& linked(const SpacePtr& other, int64_t min_radius) {
    if (other->descriptor() == space_->descriptor() && min_radius <= work())
      return *this;
    std::string key = other->descriptor().dump();
    auto& list = linked_[key];
    for (auto& c : list)
      if (c->work() >= min_radius) return *c;
    TruncationGrid g = TruncationGrid::defaults_for(*other);
    g.work_radius = std::max(min_radius, g.work());
    list.push_back(std::make_unique<Context>(other, g));
    return *list.back();
  }

 private:
  SpacePtr space_;
  TruncationGrid grid_;
  std::unique_ptr<Universe> universe_;
  std::unordered_map<const SubsetExpr*, int32_t> intern_ptr_;
  std::unordered_map<std::string, int32_t> intern_shape_;
  std::vector<SubsetPtr> interned_;
  std::vector<SubsetPtr> retained_;  // duplicates pinned for pointer keys
  std::unordered_map<int32_t, DynBitset> subset_cache_;
  std::unordered_map<std::string, Materialized> endpoint_cache_;
  std::unordered_map<int64_t, std::pair<std::vector<int32_t>,
                                        std::vector<int32_t>>>
      voronoi_cache_;
  std::unordered_map<std::string, std::vector<std::unique_ptr<Context>>>
      linked_;

  /// Shallow structural key: kind, scalar payload, child ids.  Children are
  /// interned first, so shared sub-DAGs collapse to single ids and key size
  /// stays bounded regardless of expression depth.
  std::string shape_key(const SubsetExpr& s) {
    std::string k = std::to_string(static_cast<int>(s.kind));
    for (const auto& c : s.children) {
      k += ':';
      k += std::to_string(intern(c));
    }
    using K = SubsetExpr::Kind;
    switch (s.kind) {
      case K::Finite:
        for (const auto& p : s.points) k += '|' + p.str();
        break;
      case K::BallComplement:
        k += '|' + s.center.str() + '|' + std::to_string(s.radius);
        break;
      case K::Halfspace:
        for (int64_t v : s.normal) k += ',' + std::to_string(v);
        k += '|' + std::to_string(s.offset);
        break;
      case K::AxisRay:
        k += '|' + std::to_string(s.axis) + ',' + std::to_string(s.sign);
        break;
      case K::Subtree:
        k += '|' + s.word;
        break;
      case K::ComponentTag:
      case K::VoronoiSide:
        k += '|' + std::to_string(s.side);
        break;
      case K::EndpointImage:
        k += '|' + endpoint_key(*s.endpoint);
        break;
      case K::Thicken:
        k += '|' + std::to_string(s.radius);
        break;
      case K::Preimage:
      case K::Image:
        k += '|' + map_key(*s.map);
        break;
      default:
        break;
    }
    return k;
  }

  DynBitset eval_uncached(const SubsetExpr& s) {
    using K = SubsetExpr::Kind;
    Universe& u = universe();
    switch (s.kind) {
      case K::All:
        return u.full_set();
      case K::Empty:
        return u.empty_set();
      case K::Finite: {
        DynBitset b = u.empty_set();
        for (const auto& p : s.points) {
          if (!space_->contains(p))
            throw DomainError("finite subset point outside the space: " +
                              p.str());
          int32_t i = u.find(p);
          if (i >= 0) b.set(static_cast<size_t>(i));
        }
        return b;
      }
      case K::BallComplement: {
        if (!space_->contains(s.center))
          throw DomainError("ball_complement center outside the space");
        DynBitset b = u.empty_set();
        for (size_t i = 0; i < u.size(); ++i)
          if (space_->distance(u.point(i), s.center) > s.radius) b.set(i);
        return b;
      }
      case K::Halfspace: {
        DynBitset b = u.empty_set();
        for (size_t i = 0; i < u.size(); ++i) {
          const auto& c = u.point(i).coords;
          int64_t dot = 0;
          for (size_t k = 0; k < c.size(); ++k) dot += s.normal[k] * c[k];
          if (dot >= s.offset) b.set(i);
        }
        return b;
      }
      case K::AxisRay: {
        DynBitset b = u.empty_set();
        for (size_t i = 0; i < u.size(); ++i) {
          const auto& c = u.point(i).coords;
          bool on = s.sign * c[static_cast<size_t>(s.axis)] >= 0;
          for (size_t k = 0; on && k < c.size(); ++k)
            if (k != static_cast<size_t>(s.axis)) on = c[k] == 0;
          if (on) b.set(i);
        }
        return b;
      }
      case K::Subtree: {
        DynBitset b = u.empty_set();
        for (size_t i = 0; i < u.size(); ++i) {
          const auto& w = u.point(i).word;
          if (w.size() >= s.word.size() &&
              w.compare(0, s.word.size(), s.word) == 0)
            b.set(i);
        }
        return b;
      }
      case K::ComponentTag: {
        DynBitset b = u.empty_set();
        for (size_t i = 0; i < u.size(); ++i)
          if (u.point(i).side == s.side) b.set(i);
        return b;
      }
      case K::EndpointImage:
        return materialize(s.endpoint).bits;
      case K::Union: {
        DynBitset b = u.empty_set();
        for (const auto& c : s.children) b |= eval(c);
        return b;
      }
      case K::Intersection: {
        if (s.children.empty()) return u.full_set();
        DynBitset b = eval(s.children[0]);
        for (size_t k = 1; k < s.children.size(); ++k) b &= eval(s.children[k]);
        return b;
      }
      case K::Complement: {
        DynBitset b = eval(s.children[0]);
        b.flip_all();
        return b;
      }
      case K::Difference: {
        DynBitset b = eval(s.children[0]);
        b.subtract(eval(s.children[1]));
        return b;
      }
      case K::Thicken: {
        const DynBitset& src = eval(s.children[0]);
        std::vector<int32_t> f = field_from(src);
        DynBitset b = u.empty_set();
        for (size_t i = 0; i < u.size(); ++i)
          if (f[i] <= s.radius) b.set(i);
        return b;
      }
      case K::VoronoiSide: {
        const auto& [n1, n2] = voronoi_fields(s.children[0], s.children[1]);
        const DynBitset& a = eval(s.children[0]);
        const DynBitset& bset = eval(s.children[1]);
        DynBitset out = u.empty_set();
        for (size_t i = 0; i < u.size(); ++i) {
          bool in_a = a.get(i), in_b = bset.get(i);
          if (s.side == 0) {
            if (in_a || (!in_b && n1[i] <= n2[i])) out.set(i);
          } else {
            if (!in_a && (in_b || n2[i] < n1[i])) out.set(i);
          }
        }
        return out;
      }
      case K::Preimage: {
        const CoarseMapSpec& f = *s.map;
        if (f.source->descriptor() != space_->descriptor())
          throw PreconditionError("preimage map source mismatch");
        Context& tc = linked(f.target, f.image_radius(work()));
        const DynBitset& target_bits = tc.eval(s.children[0]);
        DynBitset b = u.empty_set();
        for (size_t i = 0; i < u.size(); ++i) {
          Point q = f.apply(u.point(i));
          int32_t qi = tc.universe().find(q);
          if (qi >= 0 && target_bits.get(static_cast<size_t>(qi))) b.set(i);
        }
        return b;
      }
      case K::Image: {
        const CoarseMapSpec& f = *s.map;
        if (f.target->descriptor() != space_->descriptor())
          throw PreconditionError("image map target mismatch");
        Context& sc = linked(f.source, work());
        const DynBitset& src_bits = sc.eval(s.children[0]);
        DynBitset b = u.empty_set();
        src_bits.for_each([&](size_t i) {
          Point q = f.apply(sc.universe().point(i));
          int32_t qi = u.find(q);
          if (qi >= 0) b.set(static_cast<size_t>(qi));
        });
        return b;
      }
    }
    throw InternalError("unhandled subset node");
  }

  /// Shared distance fields for both sides of a separation query.
  const std::pair<std::vector<int32_t>, std::vector<int32_t>>& voronoi_fields(
      const SubsetPtr& a, const SubsetPtr& b) {
    int64_t key = (static_cast<int64_t>(intern(a)) << 32) |
                  static_cast<uint32_t>(intern(b));
    auto it = voronoi_cache_.find(key);
    if (it != voronoi_cache_.end()) return it->second;
    std::vector<int32_t> n1 = field_from(eval(a));
    std::vector<int32_t> n2 = field_from(eval(b));
    return voronoi_cache_
        .emplace(key, std::make_pair(std::move(n1), std::move(n2)))
        .first->second;
  }

  Materialized materialize_uncached(const EndpointSpec& e) {
    if (e.space->descriptor() != space_->descriptor())
      throw PreconditionError("endpoint lives in a different space");
    Universe& u = universe();
    Materialized m;
    m.bits = u.empty_set();
    const int64_t T = 64;
    const int64_t L = std::max<int64_t>(e.nominal_step(), 1);
    const int64_t escape_level = work() + T * L;
    // A legitimate slow ray (a square-root reparametrization, say) repeats
    // one point for up to 2 * escape_level + 1 indices before moving on, so
    // only a strictly longer run certifies a stall.
    const int64_t T_same = 2 * escape_level + 2;
    int64_t prefix_floor = materialization_floor(e);
    int64_t escape_run = 0, same_run = 0;
    for (int64_t i = 0;; ++i) {
      Point p = e.point_at(i);
      int64_t d0 = space_->dist0(p);
      if (!m.pts.empty() && p == m.pts.back())
        ++same_run;
      else
        same_run = 0;
      if (d0 > escape_level)
        ++escape_run;
      else
        escape_run = 0;
      int32_t idx = u.find(p);
      if (idx >= 0) m.bits.set(static_cast<size_t>(idx));
      m.pts.push_back(std::move(p));
      m.dist0.push_back(d0);
      m.horizon = i;
      if (i >= prefix_floor && (escape_run >= T || same_run >= T_same)) break;
      if (i >= grid_.horizon_cap) {
        m.truncated = true;
        break;
      }
    }
    return m;
  }

  static int64_t materialization_floor(const EndpointSpec& e) {
    switch (e.kind) {
      case EndpointSpec::Kind::Explicit:
        return static_cast<int64_t>(e.prefix.size());
      case EndpointSpec::Kind::Pushforward:
      case EndpointSpec::Kind::SideRay:
        return materialization_floor(*e.inner);
      default:
        return 0;
    }
  }
};

}  // namespace coarse
