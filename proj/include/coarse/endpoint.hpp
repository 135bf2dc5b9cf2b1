#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "coarse/errors.hpp"
#include "coarse/fwd.hpp"
#include "coarse/maps.hpp"
#include "coarse/point.hpp"
#include "coarse/space.hpp"

namespace coarse {

/// Deterministic generator rule i -> Point for a candidate ray Z+ -> X.
/// Whether the rule actually defines a coarse ray (bounded steps, escaping
/// image) is checked by validate_endpoint, not assumed here.
struct EndpointSpec {
  enum class Kind {
    GridRay,      // i -> i * direction
    TreeRay,      // i -> first i letters of the periodic word
    GraphRay,     // i -> i-th vertex on the BFS geodesic toward target
    Pushforward,  // i -> f(inner(i))
    Explicit,     // prefix table, then repeated displacement
    SideRay,      // i -> (side, inner(i)) in a coproduct
  };

  Kind kind;
  SpacePtr space;                 // the space the generated points live in
  std::vector<int64_t> direction; // GridRay
  std::string period;             // TreeRay
  int64_t target_vertex = 0;      // GraphRay
  MapPtr map;                     // Pushforward
  EndpointPtr inner;              // Pushforward, SideRay
  int side = 0;                   // SideRay
  std::vector<Point> prefix;      // Explicit
  std::vector<int64_t> disp_vector;  // Explicit: grid displacement
  std::string disp_word;             // Explicit: word block appended per step

  static EndpointPtr grid_ray(SpacePtr s, std::vector<int64_t> dir) {
    bool on_half = s->kind == Space::Kind::HalfLine;
    size_t want = s->kind == Space::Kind::Grid ? static_cast<size_t>(s->dim)
                                               : 1;
    if (dir.size() != want)
      throw ConfigError("ray direction dimension mismatch");
    bool zero = true;
    for (auto v : dir) zero = zero && v == 0;
    if (zero) throw ConfigError("ray direction must be nonzero");
    if (on_half && dir[0] < 0)
      throw ConfigError("half-line ray direction must be positive");
    auto e = make(Kind::GridRay);
    e->space = std::move(s);
    e->direction = std::move(dir);
    return e;
  }
  static EndpointPtr tree_ray(SpacePtr s, std::string periodic_word) {
    if (periodic_word.empty())
      throw ConfigError("tree ray needs a nonempty periodic word");
    auto e = make(Kind::TreeRay);
    e->space = std::move(s);
    e->period = std::move(periodic_word);
    // every finite prefix must be a valid word
    std::string probe;
    for (size_t i = 0; i < 2 * e->period.size(); ++i) {
      probe += e->period[i % e->period.size()];
      if (!e->space->valid_word(probe))
        throw ConfigError("periodic word leaves the tree alphabet");
    }
    return e;
  }
  static EndpointPtr graph_ray(SpacePtr s, int64_t target) {
    if (!s->contains(Point::graph_vertex(target)))
      throw ConfigError("graph ray target vertex not in graph");
    auto e = make(Kind::GraphRay);
    e->space = std::move(s);
    e->target_vertex = target;
    return e;
  }
  static EndpointPtr pushforward(MapPtr f, EndpointPtr phi) {
    auto e = make(Kind::Pushforward);
    e->space = f->target;
    e->map = std::move(f);
    e->inner = std::move(phi);
    return e;
  }
  static EndpointPtr side_ray(SpacePtr coproduct, int side, EndpointPtr phi) {
    if (coproduct->kind != Space::Kind::Coproduct)
      throw ConfigError("side_ray requires a coproduct space");
    auto e = make(Kind::SideRay);
    e->space = std::move(coproduct);
    e->side = side;
    e->inner = std::move(phi);
    return e;
  }
  static EndpointPtr explicit_rule(SpacePtr s, std::vector<Point> prefix,
                                   std::vector<int64_t> disp_vector,
                                   std::string disp_word) {
    if (prefix.empty()) throw ConfigError("explicit endpoint needs a prefix");
    auto e = make(Kind::Explicit);
    e->space = std::move(s);
    e->prefix = std::move(prefix);
    e->disp_vector = std::move(disp_vector);
    e->disp_word = std::move(disp_word);
    return e;
  }

  Point point_at(int64_t i) const {
    switch (kind) {
      case Kind::GridRay: {
        std::vector<int64_t> c(direction.size());
        for (size_t k = 0; k < c.size(); ++k) c[k] = i * direction[k];
        return Point::grid(std::move(c));
      }
      case Kind::TreeRay: {
        std::string w;
        w.reserve(static_cast<size_t>(i));
        for (int64_t k = 0; k < i; ++k)
          w += period[static_cast<size_t>(k) % period.size()];
        return Point::tree_word(std::move(w));
      }
      case Kind::GraphRay: {
        const auto& chain = geodesic_chain();
        size_t k = std::min<size_t>(static_cast<size_t>(i), chain.size() - 1);
        return Point::graph_vertex(chain[k]);
      }
      case Kind::Pushforward:
        return map->apply(inner->point_at(i));
      case Kind::SideRay:
        return Point::tagged(side, inner->point_at(i));
      case Kind::Explicit: {
        if (i < static_cast<int64_t>(prefix.size()))
          return prefix[static_cast<size_t>(i)];
        int64_t reps = i - static_cast<int64_t>(prefix.size()) + 1;
        return displace(prefix.back(), reps);
      }
    }
    throw InternalError("unhandled endpoint kind");
  }

  /// Bound on d(phi(i), basepoint) growth per step, from the rule shape
  /// (observed bounds come from validation).
  int64_t nominal_step() const {
    switch (kind) {
      case Kind::GridRay: {
        int64_t l1 = 0, lmax = 0;
        for (auto v : direction) {
          l1 += std::llabs(v);
          lmax = std::max<int64_t>(lmax, std::llabs(v));
        }
        return space->linf ? lmax : l1;
      }
      case Kind::TreeRay:
      case Kind::GraphRay:
        return 1;
      case Kind::Pushforward:
      case Kind::SideRay:
        return inner->nominal_step();
      case Kind::Explicit: {
        int64_t l1 = static_cast<int64_t>(disp_word.size());
        for (auto v : disp_vector) l1 += std::llabs(v);
        return std::max<int64_t>(l1, 1);
      }
    }
    return 1;
  }

 private:
  static std::shared_ptr<EndpointSpec> make(Kind k) {
    auto e = std::make_shared<EndpointSpec>();
    e->kind = k;
    return e;
  }

  Point displace(const Point& base, int64_t reps) const {
    // No displacement at all = a stationary rule.  The generated sequence
    // repeats the prefix tail forever, which validation reports as a stall;
    // this is how finite observations without an escape direction are
    // encoded (rather than rejecting them at construction time).
    if (disp_vector.empty() && disp_word.empty()) return base;
    if (base.kind == Point::Kind::Tagged)
      return Point::tagged(base.side, displace(*base.inner, reps));
    if (base.kind == Point::Kind::Grid) {
      if (disp_vector.size() != base.coords.size())
        throw ConfigError("displacement vector dimension mismatch");
      std::vector<int64_t> c = base.coords;
      for (size_t k = 0; k < disp_vector.size(); ++k)
        c[k] += reps * disp_vector[k];
      return Point::grid(std::move(c));
    }
    if (base.kind == Point::Kind::Word) {
      if (disp_word.empty())
        throw ConfigError("word displacement required for tree points");
      std::string w = base.word;
      for (int64_t r = 0; r < reps; ++r) w += disp_word;
      return Point::tree_word(std::move(w));
    }
    throw ConfigError("explicit displacement unsupported for this point kind");
  }

  const std::vector<int64_t>& geodesic_chain() const {
    if (!chain_.empty()) return chain_;
    // deterministic BFS from the basepoint; parents discovered in sorted
    // vertex order, so the chain is reproducible
    std::unordered_map<int64_t, int64_t> parent;
    std::deque<int64_t> q;
    parent[0] = 0;
    q.push_back(0);
    std::vector<Point> nb;
    while (!q.empty()) {
      int64_t u = q.front();
      q.pop_front();
      if (u == target_vertex) break;
      space->neighbors(Point::graph_vertex(u), nb);
      for (auto& np : nb)
        if (!parent.count(np.vertex)) {
          parent[np.vertex] = u;
          q.push_back(np.vertex);
        }
    }
    if (!parent.count(target_vertex))
      throw DomainError("graph ray target unreachable from basepoint");
    std::vector<int64_t> rev;
    for (int64_t v = target_vertex;; v = parent[v]) {
      rev.push_back(v);
      if (v == 0) break;
    }
    chain_.assign(rev.rbegin(), rev.rend());
    return chain_;
  }

  mutable std::vector<int64_t> chain_;
};

}  // namespace coarse
