#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "coarse/fwd.hpp"
#include "coarse/point.hpp"

namespace coarse {

/// Symbolic description of a subset of a space.  Immutable; shared freely.
/// Evaluation against a truncated work region lives in Context.
struct SubsetExpr {
  enum class Kind {
    All,
    Empty,
    Finite,          // explicit point list
    BallComplement,  // {x : d(x, center) > radius}
    Halfspace,       // {x : a . x >= c}, grid spaces only
    AxisRay,         // {x : sign * x_axis >= 0 and x_j = 0 for j != axis}
    Subtree,         // words extending `word` (incl. itself), tree only
    ComponentTag,    // one side of a coproduct
    EndpointImage,   // image of an endpoint generator
    Union,
    Intersection,
    Complement,
    Difference,
    Thicken,      // E_n[S]: all points within distance n of S
    VoronoiSide,  // side of the separation construction applied to (A, B)
    Preimage,     // f^{-1}(S), S in the target space of f
    Image,        // f(S cap source work region), S in the source space of f
  };

  Kind kind;
  std::vector<SubsetPtr> children;
  std::vector<Point> points;    // Finite
  Point center;                 // BallComplement
  int64_t radius = 0;           // BallComplement, Thicken
  std::vector<int64_t> normal;  // Halfspace a
  int64_t offset = 0;           // Halfspace c
  int axis = 0;                 // AxisRay
  int sign = 1;                 // AxisRay (+1 / -1)
  std::string word;             // Subtree root
  int side = 0;                 // ComponentTag, VoronoiSide (0 or 1)
  EndpointPtr endpoint;         // EndpointImage
  MapPtr map;                   // Preimage, Image

  static SubsetPtr all() { return make(Kind::All); }
  static SubsetPtr empty() { return make(Kind::Empty); }
  static SubsetPtr finite(std::vector<Point> pts) {
    auto n = make(Kind::Finite);
    n->points = std::move(pts);
    return n;
  }
  static SubsetPtr ball_complement(Point c, int64_t R) {
    auto n = make(Kind::BallComplement);
    n->center = std::move(c);
    n->radius = R;
    return n;
  }
  static SubsetPtr halfspace(std::vector<int64_t> a, int64_t c) {
    auto n = make(Kind::Halfspace);
    n->normal = std::move(a);
    n->offset = c;
    return n;
  }
  static SubsetPtr axis_ray(int axis, int sign) {
    auto n = make(Kind::AxisRay);
    n->axis = axis;
    n->sign = sign;
    return n;
  }
  static SubsetPtr subtree(std::string root_word) {
    auto n = make(Kind::Subtree);
    n->word = std::move(root_word);
    return n;
  }
  static SubsetPtr component_tag(int side) {
    auto n = make(Kind::ComponentTag);
    n->side = side;
    return n;
  }
  static SubsetPtr endpoint_image(EndpointPtr e) {
    auto n = make(Kind::EndpointImage);
    n->endpoint = std::move(e);
    return n;
  }
  static SubsetPtr union_of(std::vector<SubsetPtr> parts) {
    auto n = make(Kind::Union);
    n->children = std::move(parts);
    return n;
  }
  static SubsetPtr union_of(SubsetPtr a, SubsetPtr b) {
    return union_of(std::vector<SubsetPtr>{std::move(a), std::move(b)});
  }
  static SubsetPtr intersection_of(std::vector<SubsetPtr> parts) {
    auto n = make(Kind::Intersection);
    n->children = std::move(parts);
    return n;
  }
  static SubsetPtr intersection_of(SubsetPtr a, SubsetPtr b) {
    return intersection_of(std::vector<SubsetPtr>{std::move(a), std::move(b)});
  }
  static SubsetPtr complement(SubsetPtr s) {
    auto n = make(Kind::Complement);
    n->children = {std::move(s)};
    return n;
  }
  static SubsetPtr difference(SubsetPtr a, SubsetPtr b) {
    auto n = make(Kind::Difference);
    n->children = {std::move(a), std::move(b)};
    return n;
  }
  static SubsetPtr thicken(SubsetPtr s, int64_t bound) {
    auto n = make(Kind::Thicken);
    n->children = {std::move(s)};
    n->radius = bound;
    return n;
  }
  static SubsetPtr voronoi_side(SubsetPtr a, SubsetPtr b, int side) {
    auto n = make(Kind::VoronoiSide);
    n->children = {std::move(a), std::move(b)};
    n->side = side;
    return n;
  }
  static SubsetPtr preimage(MapPtr f, SubsetPtr s) {
    auto n = make(Kind::Preimage);
    n->map = std::move(f);
    n->children = {std::move(s)};
    return n;
  }
  static SubsetPtr image(MapPtr f, SubsetPtr s) {
    auto n = make(Kind::Image);
    n->map = std::move(f);
    n->children = {std::move(s)};
    return n;
  }

 private:
  static std::shared_ptr<SubsetExpr> make(Kind k) {
    auto n = std::make_shared<SubsetExpr>();
    n->kind = k;
    return n;
  }
};

}  // namespace coarse
