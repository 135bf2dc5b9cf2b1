#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coarse/errors.hpp"
#include "coarse/fwd.hpp"
#include "coarse/point.hpp"
#include "coarse/space.hpp"

namespace coarse {

inline int64_t isqrt64(int64_t n) {
  if (n < 0) throw DomainError("isqrt of negative value");
  auto r = static_cast<int64_t>(std::sqrt(static_cast<double>(n)));
  while (r > 0 && r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

/// A declared total function between two spaces, applied pointwise.
struct CoarseMapSpec {
  enum class Kind {
    Identity,
    Inclusion,   // subspace -> ambient space; identity on points
    Projection,  // grid -> line, x -> x[axis]
    FoldToLine,  // coproduct -> line: side 0 -> +d(x, base), side 1 -> -d
    FloorSqrt,   // halfline -> halfline
    Negate,      // grid -> grid, x -> -x
    SwapSides,   // coproduct(A,B) -> coproduct(B,A)
    Constant,    // everything to one target point
    Compose,     // outer after inner
    Pointwise,   // finite override table, else default rule
  };

  Kind kind;
  SpacePtr source, target;
  int axis = 0;              // Projection
  Point constant_value;      // Constant
  SubsetPtr domain;          // Inclusion: the subspace being included
  MapPtr outer, inner;       // Compose
  std::vector<std::pair<Point, Point>> table;  // Pointwise overrides
  MapPtr fallback;                             // Pointwise default rule

  static MapPtr identity(SpacePtr s) {
    auto m = make(Kind::Identity);
    m->source = s;
    m->target = std::move(s);
    return m;
  }
  static MapPtr inclusion(SpacePtr s, SubsetPtr subspace) {
    auto m = make(Kind::Inclusion);
    m->source = s;
    m->target = std::move(s);
    m->domain = std::move(subspace);
    return m;
  }
  static MapPtr projection(SpacePtr grid_space, SpacePtr line, int axis) {
    if (grid_space->kind != Space::Kind::Grid)
      throw ConfigError("projection requires a grid source space");
    if (axis < 0 || axis >= grid_space->dim)
      throw ConfigError("projection axis out of range");
    auto m = make(Kind::Projection);
    m->source = std::move(grid_space);
    m->target = std::move(line);
    m->axis = axis;
    return m;
  }
  static MapPtr fold_to_line(SpacePtr coproduct_space, SpacePtr line) {
    if (coproduct_space->kind != Space::Kind::Coproduct)
      throw ConfigError("fold_to_line requires a coproduct source space");
    auto m = make(Kind::FoldToLine);
    m->source = std::move(coproduct_space);
    m->target = std::move(line);
    return m;
  }
  static MapPtr floor_sqrt(SpacePtr halfline) {
    auto m = make(Kind::FloorSqrt);
    m->source = halfline;
    m->target = std::move(halfline);
    return m;
  }
  static MapPtr negate(SpacePtr grid_space) {
    if (grid_space->kind == Space::Kind::HalfLine ||
        (grid_space->kind != Space::Kind::Grid &&
         grid_space->kind != Space::Kind::Line))
      throw ConfigError("negate requires a full grid space");
    auto m = make(Kind::Negate);
    m->source = grid_space;
    m->target = std::move(grid_space);
    return m;
  }
  static MapPtr swap_sides(SpacePtr cop, SpacePtr swapped) {
    if (cop->kind != Space::Kind::Coproduct)
      throw ConfigError("swap_sides requires a coproduct source space");
    auto m = make(Kind::SwapSides);
    m->source = std::move(cop);
    m->target = std::move(swapped);
    return m;
  }
  static MapPtr constant(SpacePtr src, SpacePtr dst, Point value) {
    auto m = make(Kind::Constant);
    m->source = std::move(src);
    m->target = std::move(dst);
    m->constant_value = std::move(value);
    return m;
  }
  static MapPtr compose(MapPtr outer, MapPtr inner) {
    if (outer->source->descriptor() != inner->target->descriptor())
      throw ConfigError("compose: inner target does not match outer source");
    auto m = make(Kind::Compose);
    m->source = inner->source;
    m->target = outer->target;
    m->outer = std::move(outer);
    m->inner = std::move(inner);
    return m;
  }
  static MapPtr pointwise(std::vector<std::pair<Point, Point>> table,
                          MapPtr fallback) {
    auto m = make(Kind::Pointwise);
    m->source = fallback->source;
    m->target = fallback->target;
    m->table = std::move(table);
    m->fallback = std::move(fallback);
    return m;
  }

  Point apply(const Point& p) const {
    switch (kind) {
      case Kind::Identity:
      case Kind::Inclusion:
        return p;  // membership in the declared subspace is checked by callers
      case Kind::Projection:
        return Point::scalar(p.coords.at(static_cast<size_t>(axis)));
      case Kind::FoldToLine: {
        const Point& in = *p.inner;
        if (p.side == 0)
          return Point::scalar(source->left->dist0(in));
        return Point::scalar(-source->right->dist0(in));
      }
      case Kind::FloorSqrt:
        return Point::scalar(isqrt64(p.x()));
      case Kind::Negate: {
        std::vector<int64_t> c = p.coords;
        for (auto& v : c) v = -v;
        return Point::grid(std::move(c));
      }
      case Kind::SwapSides:
        return Point::tagged(1 - p.side, *p.inner);
      case Kind::Constant:
        return constant_value;
      case Kind::Compose:
        return outer->apply(inner->apply(p));
      case Kind::Pointwise:
        for (const auto& [from, to] : table)
          if (from == p) return to;
        return fallback->apply(p);
    }
    throw InternalError("unhandled map kind");
  }

  /// Bound g(R) with d(f(x), target basepoint) <= g(R) whenever
  /// d(x, source basepoint) <= R; used to size target work regions.
  int64_t image_radius(int64_t R) const {
    switch (kind) {
      case Kind::Identity:
      case Kind::Inclusion:
      case Kind::Projection:  // |x_axis| <= ||x|| for L1 and Linf
      case Kind::FoldToLine:  // |fold(p)| = dist to side base <= dist0(p)
      case Kind::Negate:
      case Kind::SwapSides:
        return R;
      case Kind::FloorSqrt:
        return isqrt64(R);
      case Kind::Constant:
        return target->dist0(constant_value);
      case Kind::Compose:
        return outer->image_radius(inner->image_radius(R));
      case Kind::Pointwise: {
        int64_t b = fallback->image_radius(R);
        for (const auto& [from, to] : table) {
          (void)from;
          b = std::max(b, target->dist0(to));
        }
        return b;
      }
    }
    throw InternalError("unhandled map kind");
  }

 private:
  static std::shared_ptr<CoarseMapSpec> make(Kind k) {
    auto m = std::make_shared<CoarseMapSpec>();
    m->kind = k;
    return m;
  }
};

}  // namespace coarse
