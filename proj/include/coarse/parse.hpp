#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coarse/endpoint.hpp"
#include "coarse/errors.hpp"
#include "coarse/maps.hpp"
#include "coarse/point.hpp"
#include "coarse/space.hpp"
#include "coarse/subset.hpp"

namespace coarse {

inline json subset_to_json(const SubsetExpr& s);
inline json map_to_json(const CoarseMapSpec& m);
inline json endpoint_to_json(const EndpointSpec& e);

/// `defs`, when given, resolves {"ref": name} nodes to shared subexpressions;
/// deep refinement outputs are serialized that way to keep files linear in
/// the expression DAG.
inline SubsetPtr parse_subset(
    const json& j, SpacePtr ambient,
    const std::filesystem::path& base_dir = ".",
    const std::unordered_map<std::string, SubsetPtr>* defs = nullptr);
inline MapPtr parse_map(const json& j, SpacePtr ambient,
                        const std::filesystem::path& base_dir = ".");
inline EndpointPtr parse_endpoint(const json& j, SpacePtr ambient,
                                  const std::filesystem::path& base_dir = ".");

// ---------------------------------------------------------------- to JSON

inline json map_to_json(const CoarseMapSpec& m) {
  json j;
  switch (m.kind) {
    case CoarseMapSpec::Kind::Identity:
      j["kind"] = "identity";
      break;
    case CoarseMapSpec::Kind::Inclusion:
      j["kind"] = "inclusion";
      j["domain"] = subset_to_json(*m.domain);
      break;
    case CoarseMapSpec::Kind::Projection:
      j["kind"] = "projection";
      j["axis"] = m.axis;
      break;
    case CoarseMapSpec::Kind::FoldToLine:
      j["kind"] = "fold_to_line";
      break;
    case CoarseMapSpec::Kind::FloorSqrt:
      j["kind"] = "floor_sqrt";
      break;
    case CoarseMapSpec::Kind::Negate:
      j["kind"] = "negate";
      break;
    case CoarseMapSpec::Kind::SwapSides:
      j["kind"] = "swap_sides";
      break;
    case CoarseMapSpec::Kind::Constant:
      j["kind"] = "constant";
      j["value"] = m.constant_value.to_json();
      j["target"] = m.target->descriptor();
      break;
    case CoarseMapSpec::Kind::Compose:
      j["kind"] = "compose";
      j["outer"] = map_to_json(*m.outer);
      j["inner"] = map_to_json(*m.inner);
      break;
    case CoarseMapSpec::Kind::Pointwise: {
      j["kind"] = "pointwise";
      json t = json::array();
      for (const auto& [p, q] : m.table)
        t.push_back(json::array({p.to_json(), q.to_json()}));
      j["table"] = t;
      j["default"] = map_to_json(*m.fallback);
      break;
    }
  }
  j["source"] = m.source->descriptor();
  return j;
}

inline json endpoint_to_json(const EndpointSpec& e) {
  json j;
  switch (e.kind) {
    case EndpointSpec::Kind::GridRay:
      j["kind"] = "grid_ray";
      j["direction"] = e.direction;
      break;
    case EndpointSpec::Kind::TreeRay:
      j["kind"] = "tree_ray";
      j["period"] = e.period;
      break;
    case EndpointSpec::Kind::GraphRay:
      j["kind"] = "graph_ray";
      j["target"] = e.target_vertex;
      break;
    case EndpointSpec::Kind::Pushforward:
      j["kind"] = "pushforward";
      j["map"] = map_to_json(*e.map);
      j["endpoint"] = endpoint_to_json(*e.inner);
      break;
    case EndpointSpec::Kind::SideRay:
      j["kind"] = "side_ray";
      j["side"] = e.side;
      j["endpoint"] = endpoint_to_json(*e.inner);
      break;
    case EndpointSpec::Kind::Explicit: {
      j["kind"] = "explicit";
      json pts = json::array();
      for (const auto& p : e.prefix) pts.push_back(p.to_json());
      j["prefix"] = pts;
      json d = json::object();
      if (!e.disp_vector.empty()) d["vector"] = e.disp_vector;
      if (!e.disp_word.empty()) d["word"] = e.disp_word;
      j["displacement"] = d;
      break;
    }
  }
  return j;
}

inline json subset_to_json(const SubsetExpr& s) {
  using K = SubsetExpr::Kind;
  json j;
  auto parts = [&] {
    json a = json::array();
    for (const auto& c : s.children) a.push_back(subset_to_json(*c));
    return a;
  };
  switch (s.kind) {
    case K::All: j["node"] = "all"; break;
    case K::Empty: j["node"] = "empty"; break;
    case K::Finite: {
      j["node"] = "finite";
      json pts = json::array();
      for (const auto& p : s.points) pts.push_back(p.to_json());
      j["points"] = pts;
      break;
    }
    case K::BallComplement:
      j["node"] = "ball_complement";
      j["center"] = s.center.to_json();
      j["radius"] = s.radius;
      break;
    case K::Halfspace:
      j["node"] = "halfspace";
      j["a"] = s.normal;
      j["c"] = s.offset;
      break;
    case K::AxisRay:
      j["node"] = "axis_ray";
      j["axis"] = s.axis;
      j["sign"] = s.sign;
      break;
    case K::Subtree:
      j["node"] = "subtree";
      j["root"] = s.word;
      break;
    case K::ComponentTag:
      j["node"] = "component_tag";
      j["side"] = s.side;
      break;
    case K::EndpointImage:
      j["node"] = "endpoint_image";
      j["endpoint"] = endpoint_to_json(*s.endpoint);
      break;
    case K::Union:
      j["node"] = "union";
      j["parts"] = parts();
      break;
    case K::Intersection:
      j["node"] = "intersection";
      j["parts"] = parts();
      break;
    case K::Complement:
      j["node"] = "complement";
      j["of"] = subset_to_json(*s.children[0]);
      break;
    case K::Difference:
      j["node"] = "difference";
      j["a"] = subset_to_json(*s.children[0]);
      j["b"] = subset_to_json(*s.children[1]);
      break;
    case K::Thicken:
      j["node"] = "thicken";
      j["of"] = subset_to_json(*s.children[0]);
      j["bound"] = s.radius;
      break;
    case K::VoronoiSide:
      j["node"] = "voronoi_side";
      j["a"] = subset_to_json(*s.children[0]);
      j["b"] = subset_to_json(*s.children[1]);
      j["side"] = s.side;
      break;
    case K::Preimage:
      j["node"] = "preimage";
      j["map"] = map_to_json(*s.map);
      j["of"] = subset_to_json(*s.children[0]);
      break;
    case K::Image:
      j["node"] = "image";
      j["map"] = map_to_json(*s.map);
      j["of"] = subset_to_json(*s.children[0]);
      break;
  }
  return j;
}

/// Canonical cache keys (nlohmann dumps object keys sorted).
inline std::string subset_key(const SubsetExpr& s) {
  return subset_to_json(s).dump();
}
inline std::string map_key(const CoarseMapSpec& m) {
  return map_to_json(m).dump();
}
inline std::string endpoint_key(const EndpointSpec& e) {
  return endpoint_to_json(e).dump();
}

// -------------------------------------------------------------- from JSON

inline MapPtr parse_map(const json& j, SpacePtr ambient,
                        const std::filesystem::path& base_dir) {
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError("map spec needs a \"kind\" field");
  SpacePtr src =
      j.contains("source") ? make_space(j.at("source"), base_dir) : ambient;
  std::string k = j.at("kind").get<std::string>();
  if (k == "identity") return CoarseMapSpec::identity(src);
  if (k == "inclusion")
    return CoarseMapSpec::inclusion(src,
                                    parse_subset(j.at("domain"), src, base_dir));
  if (k == "projection")
    return CoarseMapSpec::projection(src, Space::make_line(),
                                     j.value("axis", 0));
  if (k == "fold_to_line")
    return CoarseMapSpec::fold_to_line(src, Space::make_line());
  if (k == "floor_sqrt") {
    if (src->kind != Space::Kind::HalfLine)
      throw ConfigError("floor_sqrt requires the half-line space");
    return CoarseMapSpec::floor_sqrt(src);
  }
  if (k == "negate") return CoarseMapSpec::negate(src);
  if (k == "swap_sides") {
    if (src->kind != Space::Kind::Coproduct)
      throw ConfigError("swap_sides requires a coproduct source space");
    return CoarseMapSpec::swap_sides(
        src, Space::make_coproduct(src->right, src->left, src->gap));
  }
  if (k == "constant") {
    SpacePtr dst =
        j.contains("target") ? make_space(j.at("target"), base_dir) : src;
    Point v = Point::from_json(j.at("value"));
    if (!dst->contains(v))
      throw ConfigError("constant map value lies outside the target space");
    return CoarseMapSpec::constant(src, dst, v);
  }
  if (k == "compose") {
    MapPtr inner = parse_map(j.at("inner"), src, base_dir);
    MapPtr outer = parse_map(j.at("outer"), inner->target, base_dir);
    return CoarseMapSpec::compose(outer, inner);
  }
  if (k == "pointwise") {
    MapPtr fallback = parse_map(j.at("default"), src, base_dir);
    std::vector<std::pair<Point, Point>> table;
    for (const auto& row : j.value("table", json::array()))
      table.emplace_back(Point::from_json(row.at(0)),
                         Point::from_json(row.at(1)));
    return CoarseMapSpec::pointwise(std::move(table), fallback);
  }
  throw ConfigError("unknown map kind: " + k);
}

inline EndpointPtr parse_endpoint(const json& j, SpacePtr ambient,
                                  const std::filesystem::path& base_dir) {
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError("endpoint spec needs a \"kind\" field");
  std::string k = j.at("kind").get<std::string>();
  if (k == "grid_ray")
    return EndpointSpec::grid_ray(
        ambient, j.at("direction").get<std::vector<int64_t>>());
  if (k == "tree_ray")
    return EndpointSpec::tree_ray(ambient, j.at("period").get<std::string>());
  if (k == "graph_ray")
    return EndpointSpec::graph_ray(ambient, j.at("target").get<int64_t>());
  if (k == "pushforward") {
    MapPtr f = parse_map(j.at("map"), ambient, base_dir);
    if (f->target->descriptor() != ambient->descriptor())
      throw ConfigError("pushforward endpoint lands outside the ambient space");
    EndpointPtr inner = parse_endpoint(j.at("endpoint"), f->source, base_dir);
    return EndpointSpec::pushforward(f, inner);
  }
  if (k == "side_ray") {
    if (ambient->kind != Space::Kind::Coproduct)
      throw ConfigError("side_ray endpoint requires a coproduct space");
    int side = j.at("side").get<int>();
    if (side != 0 && side != 1) throw ConfigError("side must be 0 or 1");
    EndpointPtr inner = parse_endpoint(
        j.at("endpoint"), side == 0 ? ambient->left : ambient->right,
        base_dir);
    return EndpointSpec::side_ray(ambient, side, inner);
  }
  if (k == "explicit") {
    std::vector<Point> prefix;
    for (const auto& p : j.at("prefix")) prefix.push_back(Point::from_json(p));
    std::vector<int64_t> dv;
    std::string dw;
    if (j.contains("displacement")) {
      const json& d = j.at("displacement");
      if (d.contains("vector")) dv = d.at("vector").get<std::vector<int64_t>>();
      if (d.contains("word")) dw = d.at("word").get<std::string>();
    }
    // An absent/empty displacement encodes a stationary rule: the endpoint
    // repeats its last prefix point forever (and validation reports a stall).
    return EndpointSpec::explicit_rule(ambient, std::move(prefix),
                                       std::move(dv), std::move(dw));
  }
  throw ConfigError("unknown endpoint kind: " + k);
}

inline SubsetPtr parse_subset(
    const json& j, SpacePtr ambient, const std::filesystem::path& base_dir,
    const std::unordered_map<std::string, SubsetPtr>* defs) {
  if (j.is_string()) {
    std::string n = j.get<std::string>();
    if (n == "all") return SubsetExpr::all();
    if (n == "empty") return SubsetExpr::empty();
    throw ConfigError("unknown subset shorthand: " + n);
  }
  if (j.is_object() && j.contains("ref")) {
    if (!defs) throw ConfigError("subset ref used without a defs table");
    std::string name = j.at("ref").get<std::string>();
    auto it = defs->find(name);
    if (it == defs->end()) throw ConfigError("unknown subset ref: " + name);
    return it->second;
  }
  if (!j.is_object() || !j.contains("node"))
    throw ConfigError("subset spec needs a \"node\" field");
  std::string n = j.at("node").get<std::string>();
  auto kids = [&](const char* field) {
    std::vector<SubsetPtr> out;
    for (const auto& c : j.at(field))
      out.push_back(parse_subset(c, ambient, base_dir, defs));
    return out;
  };
  if (n == "all") return SubsetExpr::all();
  if (n == "empty") return SubsetExpr::empty();
  if (n == "finite") {
    std::vector<Point> pts;
    for (const auto& pj : j.at("points")) {
      Point p = Point::from_json(pj);
      if (!ambient->contains(p))
        throw ConfigError("finite subset point outside the space: " + p.str());
      pts.push_back(std::move(p));
    }
    return SubsetExpr::finite(std::move(pts));
  }
  if (n == "ball_complement") {
    Point c = Point::from_json(j.at("center"));
    if (!ambient->contains(c))
      throw ConfigError("ball_complement center outside the space");
    return SubsetExpr::ball_complement(c, j.at("radius").get<int64_t>());
  }
  if (n == "halfspace") {
    if (ambient->kind != Space::Kind::Grid &&
        ambient->kind != Space::Kind::Line &&
        ambient->kind != Space::Kind::HalfLine)
      throw ConfigError("halfspace subsets require a grid space");
    auto a = j.at("a").get<std::vector<int64_t>>();
    size_t want = ambient->kind == Space::Kind::Grid
                      ? static_cast<size_t>(ambient->dim)
                      : 1;
    if (a.size() != want)
      throw ConfigError("halfspace normal dimension mismatch");
    return SubsetExpr::halfspace(std::move(a), j.at("c").get<int64_t>());
  }
  if (n == "axis_ray") {
    int axis = j.value("axis", 0);
    int sign = j.value("sign", 1);
    size_t d = ambient->kind == Space::Kind::Grid
                   ? static_cast<size_t>(ambient->dim)
                   : 1;
    if (ambient->kind != Space::Kind::Grid &&
        ambient->kind != Space::Kind::Line &&
        ambient->kind != Space::Kind::HalfLine)
      throw ConfigError("axis_ray subsets require a grid space");
    if (axis < 0 || static_cast<size_t>(axis) >= d)
      throw ConfigError("axis_ray axis out of range");
    if (sign != 1 && sign != -1) throw ConfigError("axis_ray sign must be +-1");
    return SubsetExpr::axis_ray(axis, sign);
  }
  if (n == "subtree") {
    if (ambient->kind != Space::Kind::Tree)
      throw ConfigError("subtree subsets require a tree space");
    std::string root = j.at("root").get<std::string>();
    if (!ambient->valid_word(root))
      throw ConfigError("subtree root is not a valid tree word");
    return SubsetExpr::subtree(root);
  }
  if (n == "component_tag") {
    if (ambient->kind != Space::Kind::Coproduct)
      throw ConfigError("component_tag subsets require a coproduct space");
    int side = j.at("side").get<int>();
    if (side != 0 && side != 1) throw ConfigError("side must be 0 or 1");
    return SubsetExpr::component_tag(side);
  }
  if (n == "endpoint_image")
    return SubsetExpr::endpoint_image(
        parse_endpoint(j.at("endpoint"), ambient, base_dir));
  if (n == "union") return SubsetExpr::union_of(kids("parts"));
  if (n == "intersection") return SubsetExpr::intersection_of(kids("parts"));
  if (n == "complement")
    return SubsetExpr::complement(
        parse_subset(j.at("of"), ambient, base_dir, defs));
  if (n == "difference")
    return SubsetExpr::difference(
        parse_subset(j.at("a"), ambient, base_dir, defs),
        parse_subset(j.at("b"), ambient, base_dir, defs));
  if (n == "thicken")
    return SubsetExpr::thicken(parse_subset(j.at("of"), ambient, base_dir, defs),
                               j.at("bound").get<int64_t>());
  if (n == "voronoi_side") {
    int side = j.at("side").get<int>();
    if (side != 0 && side != 1) throw ConfigError("side must be 0 or 1");
    return SubsetExpr::voronoi_side(
        parse_subset(j.at("a"), ambient, base_dir, defs),
        parse_subset(j.at("b"), ambient, base_dir, defs), side);
  }
  if (n == "preimage") {
    MapPtr f = parse_map(j.at("map"), ambient, base_dir);
    if (f->source->descriptor() != ambient->descriptor())
      throw ConfigError("preimage map must start at the ambient space");
    return SubsetExpr::preimage(
        f, parse_subset(j.at("of"), f->target, base_dir));
  }
  if (n == "image") {
    MapPtr f = parse_map(j.at("map"), ambient, base_dir);
    if (f->target->descriptor() != ambient->descriptor())
      throw ConfigError("image map must land in the ambient space");
    return SubsetExpr::image(f, parse_subset(j.at("of"), f->source, base_dir));
  }
  throw ConfigError("unknown subset node: " + n);
}

}  // namespace coarse
