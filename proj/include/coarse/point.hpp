#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace coarse {

using json = nlohmann::json;

/// A point of one of the built-in space families.
///
/// Grid   : integer coordinate vector (also line / half-line, dim 1)
/// Word   : vertex of a regular tree, encoded as the path word from the root
/// Vertex : vertex id of a loaded graph
/// Tagged : coproduct point, side tag + boxed inner point
struct Point {
  enum class Kind : uint8_t { Grid, Word, Vertex, Tagged };

  Kind kind = Kind::Grid;
  std::vector<int64_t> coords;
  std::string word;
  int64_t vertex = 0;
  uint8_t side = 0;
  std::shared_ptr<const Point> inner;

  Point() = default;

  static Point grid(std::vector<int64_t> c) {
    Point p;
    p.kind = Kind::Grid;
    p.coords = std::move(c);
    return p;
  }
  static Point scalar(int64_t x) { return grid({x}); }
  static Point tree_word(std::string w) {
    Point p;
    p.kind = Kind::Word;
    p.word = std::move(w);
    return p;
  }
  static Point graph_vertex(int64_t v) {
    Point p;
    p.kind = Kind::Vertex;
    p.vertex = v;
    return p;
  }
  static Point tagged(uint8_t side, Point in) {
    Point p;
    p.kind = Kind::Tagged;
    p.side = side;
    p.inner = std::make_shared<const Point>(std::move(in));
    return p;
  }

  int64_t x() const { return coords.at(0); }

  friend bool operator==(const Point& a, const Point& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case Kind::Grid: return a.coords == b.coords;
      case Kind::Word: return a.word == b.word;
      case Kind::Vertex: return a.vertex == b.vertex;
      case Kind::Tagged:
        return a.side == b.side && *a.inner == *b.inner;
    }
    return false;
  }
  friend bool operator!=(const Point& a, const Point& b) { return !(a == b); }

  /// Lexicographic order on the encoding; the deterministic order used
  /// everywhere points are listed.
  friend bool operator<(const Point& a, const Point& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    switch (a.kind) {
      case Kind::Grid: return a.coords < b.coords;
      case Kind::Word: return a.word < b.word;
      case Kind::Vertex: return a.vertex < b.vertex;
      case Kind::Tagged:
        if (a.side != b.side) return a.side < b.side;
        return *a.inner < *b.inner;
    }
    return false;
  }

  size_t hash() const {
    size_t h = static_cast<size_t>(kind) * 0x9e3779b97f4a7c15ULL;
    auto mix = [&h](size_t v) {
      h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    switch (kind) {
      case Kind::Grid:
        for (int64_t c : coords) mix(static_cast<size_t>(c));
        break;
      case Kind::Word:
        mix(std::hash<std::string>{}(word));
        break;
      case Kind::Vertex:
        mix(static_cast<size_t>(vertex));
        break;
      case Kind::Tagged:
        mix(side);
        mix(inner->hash());
        break;
    }
    return h;
  }

  json to_json() const {
    switch (kind) {
      case Kind::Grid: return json(coords);
      case Kind::Word: return json(word);
      case Kind::Vertex: return json(vertex);
      case Kind::Tagged:
        return json{{"side", side}, {"point", inner->to_json()}};
    }
    return json();
  }

  static Point from_json(const json& j) {
    if (j.is_array()) {
      std::vector<int64_t> c;
      for (const auto& v : j) c.push_back(v.get<int64_t>());
      return grid(std::move(c));
    }
    if (j.is_string()) return tree_word(j.get<std::string>());
    if (j.is_number_integer()) return graph_vertex(j.get<int64_t>());
    if (j.is_object() && j.contains("side") && j.contains("point"))
      return tagged(j.at("side").get<uint8_t>(), from_json(j.at("point")));
    throw std::runtime_error("unrecognized point encoding: " + j.dump());
  }

  std::string str() const { return to_json().dump(); }
};

struct PointHash {
  size_t operator()(const Point& p) const { return p.hash(); }
};

}  // namespace coarse
