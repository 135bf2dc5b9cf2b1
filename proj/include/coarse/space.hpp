#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <unordered_map>
#include <vector>

#include "coarse/errors.hpp"
#include "coarse/point.hpp"

namespace coarse {

constexpr int64_t kInfDist = INT64_MAX / 4;

/// Immutable metric space oracle: basepoint, exact integer distance,
/// unit-step neighbour enumeration and metric balls.
///
/// All built-in kinds are geodesic at scale 1 except the coproduct bridge,
/// which is a single weighted edge between the two basepoints.
class Space {
 public:
  enum class Kind { Grid, Tree, HalfLine, Line, Coproduct, Graph };

  Kind kind = Kind::Line;
  int dim = 1;
  bool linf = false;  // grid metric: false = L1, true = Linf
  int valence = 3;    // tree
  int64_t gap = 1;    // coproduct
  std::shared_ptr<const Space> left, right;

  static std::shared_ptr<const Space> make_grid(int d, bool linf_metric) {
    if (d < 1) throw ConfigError("grid dimension must be >= 1");
    auto s = std::make_shared<Space>();
    s->kind = Kind::Grid;
    s->dim = d;
    s->linf = linf_metric;
    return s;
  }
  static std::shared_ptr<const Space> make_line() {
    auto s = std::make_shared<Space>();
    s->kind = Kind::Line;
    return s;
  }
  static std::shared_ptr<const Space> make_halfline() {
    auto s = std::make_shared<Space>();
    s->kind = Kind::HalfLine;
    return s;
  }
  static std::shared_ptr<const Space> make_tree(int k) {
    if (k < 3 || k > 10)
      throw ConfigError("tree valence must be in [3, 10], got " +
                        std::to_string(k));
    auto s = std::make_shared<Space>();
    s->kind = Kind::Tree;
    s->valence = k;
    return s;
  }
  static std::shared_ptr<const Space> make_coproduct(
      std::shared_ptr<const Space> a, std::shared_ptr<const Space> b,
      int64_t gap) {
    if (gap < 1) throw ConfigError("coproduct gap must be >= 1");
    auto s = std::make_shared<Space>();
    s->kind = Kind::Coproduct;
    s->left = std::move(a);
    s->right = std::move(b);
    s->gap = gap;
    return s;
  }
  static std::shared_ptr<const Space> make_graph_csv(
      const std::filesystem::path& path);
  static std::shared_ptr<const Space> make_graph_edges(
      const std::vector<std::pair<int64_t, int64_t>>& edges);

  Point basepoint() const {
    switch (kind) {
      case Kind::Grid:
        return Point::grid(std::vector<int64_t>(dim, 0));
      case Kind::Line:
      case Kind::HalfLine:
        return Point::scalar(0);
      case Kind::Tree:
        return Point::tree_word("");
      case Kind::Coproduct:
        return Point::tagged(0, left->basepoint());
      case Kind::Graph:
        return Point::graph_vertex(0);
    }
    throw InternalError("bad space kind");
  }

  bool contains(const Point& p) const {
    switch (kind) {
      case Kind::Grid:
        return p.kind == Point::Kind::Grid &&
               static_cast<int>(p.coords.size()) == dim;
      case Kind::Line:
        return p.kind == Point::Kind::Grid && p.coords.size() == 1;
      case Kind::HalfLine:
        return p.kind == Point::Kind::Grid && p.coords.size() == 1 &&
               p.coords[0] >= 0;
      case Kind::Tree:
        return p.kind == Point::Kind::Word && valid_word(p.word);
      case Kind::Coproduct:
        return p.kind == Point::Kind::Tagged && p.side < 2 &&
               (p.side == 0 ? left : right)->contains(*p.inner);
      case Kind::Graph:
        return p.kind == Point::Kind::Vertex &&
               graph_index_.count(p.vertex) > 0;
    }
    return false;
  }

  int64_t distance(const Point& a, const Point& b) const {
    switch (kind) {
      case Kind::Grid:
      case Kind::Line:
      case Kind::HalfLine: {
        int64_t d = 0;
        for (size_t i = 0; i < a.coords.size(); ++i) {
          int64_t t = std::llabs(a.coords[i] - b.coords[i]);
          d = linf ? std::max(d, t) : d + t;
        }
        return d;
      }
      case Kind::Tree: {
        size_t l = 0;
        while (l < a.word.size() && l < b.word.size() && a.word[l] == b.word[l])
          ++l;
        return static_cast<int64_t>(a.word.size() + b.word.size() - 2 * l);
      }
      case Kind::Coproduct: {
        if (a.side == b.side)
          return (a.side == 0 ? left : right)->distance(*a.inner, *b.inner);
        const Point& x = a.side == 0 ? *a.inner : *b.inner;
        const Point& y = a.side == 0 ? *b.inner : *a.inner;
        // bridge metric: through the joined basepoints
        return left->distance(x, left->basepoint()) + gap +
               right->distance(y, right->basepoint());
      }
      case Kind::Graph:
        return graph_distance(a.vertex, b.vertex);
    }
    throw InternalError("bad space kind");
  }

  int64_t dist0(const Point& p) const { return distance(p, basepoint()); }

  /// Unit-step neighbours. The coproduct bridge edge (weight = gap) is
  /// reported separately through bridge().
  void neighbors(const Point& p, std::vector<Point>& out) const {
    out.clear();
    switch (kind) {
      case Kind::Grid:
      case Kind::Line:
      case Kind::HalfLine: {
        if (!linf) {
          for (size_t i = 0; i < p.coords.size(); ++i) {
            for (int64_t s : {int64_t(-1), int64_t(1)}) {
              Point q = p;
              q.coords[i] += s;
              if (kind == Kind::HalfLine && q.coords[0] < 0) continue;
              out.push_back(std::move(q));
            }
          }
        } else {
          std::vector<int64_t> off(p.coords.size(), -1);
          while (true) {
            bool zero = true;
            for (int64_t o : off) zero = zero && o == 0;
            if (!zero) {
              Point q = p;
              for (size_t i = 0; i < off.size(); ++i) q.coords[i] += off[i];
              out.push_back(std::move(q));
            }
            size_t i = 0;
            while (i < off.size() && off[i] == 1) off[i++] = -1;
            if (i == off.size()) break;
            ++off[i];
          }
        }
        break;
      }
      case Kind::Tree: {
        if (!p.word.empty())
          out.push_back(Point::tree_word(p.word.substr(0, p.word.size() - 1)));
        int nkids = p.word.empty() ? valence : valence - 1;
        for (int c = 0; c < nkids; ++c)
          out.push_back(Point::tree_word(p.word + static_cast<char>('0' + c)));
        break;
      }
      case Kind::Coproduct: {
        std::vector<Point> in;
        (p.side == 0 ? left : right)->neighbors(*p.inner, in);
        for (auto& q : in) out.push_back(Point::tagged(p.side, std::move(q)));
        break;
      }
      case Kind::Graph: {
        auto it = graph_index_.find(p.vertex);
        if (it == graph_index_.end()) throw DomainError("vertex not in graph");
        for (int32_t j : graph_adj_[it->second])
          out.push_back(Point::graph_vertex(graph_ids_[j]));
        break;
      }
    }
  }

  struct Bridge {
    Point u, v;
    int64_t w;
  };
  /// Weighted extra edges (only the coproduct basepoint bridge).
  std::vector<Bridge> bridges() const {
    if (kind != Kind::Coproduct) return {};
    return {{Point::tagged(0, left->basepoint()),
             Point::tagged(1, right->basepoint()), gap}};
  }

  /// Closed metric ball, sorted lexicographically.
  std::vector<Point> ball(const Point& center, int64_t R) const {
    if (!contains(center)) throw DomainError("ball center not in space");
    std::unordered_map<Point, int64_t, PointHash> dist;
    // bucket queue over integer distances
    std::vector<std::vector<Point>> buckets(static_cast<size_t>(R) + 2);
    dist[center] = 0;
    buckets[0].push_back(center);
    auto brs = bridges();
    std::vector<Point> nb;
    for (int64_t d = 0; d <= R; ++d) {
      for (size_t qi = 0; qi < buckets[d].size(); ++qi) {
        Point p = buckets[d][qi];
        if (dist[p] != d) continue;
        auto relax = [&](const Point& q, int64_t nd) {
          if (nd > R) return;
          auto it = dist.find(q);
          if (it == dist.end() || it->second > nd) {
            dist[q] = nd;
            buckets[nd].push_back(q);
          }
        };
        neighbors(p, nb);
        for (auto& q : nb) relax(q, d + 1);
        for (auto& br : brs) {
          if (p == br.u) relax(br.v, d + br.w);
          if (p == br.v) relax(br.u, d + br.w);
        }
      }
    }
    std::vector<Point> out;
    out.reserve(dist.size());
    for (auto& [p, d] : dist)
      if (d <= R) out.push_back(p);
    std::sort(out.begin(), out.end());
    return out;
  }

  bool valid_word(const std::string& w) const {
    for (size_t i = 0; i < w.size(); ++i) {
      int lim = (i == 0) ? valence : valence - 1;
      if (w[i] < '0' || w[i] >= '0' + lim) return false;
    }
    return true;
  }

  json descriptor() const {
    switch (kind) {
      case Kind::Grid:
        return json{{"kind", "grid"},
                    {"dim", dim},
                    {"metric", linf ? "Linf" : "L1"}};
      case Kind::Line: return json{{"kind", "line"}};
      case Kind::HalfLine: return json{{"kind", "halfline"}};
      case Kind::Tree: return json{{"kind", "tree"}, {"valence", valence}};
      case Kind::Coproduct:
        return json{{"kind", "coproduct"},
                    {"left", left->descriptor()},
                    {"right", right->descriptor()},
                    {"gap", gap}};
      case Kind::Graph: {
        json edges = json::array();
        for (size_t i = 0; i < graph_adj_.size(); ++i)
          for (int32_t j : graph_adj_[i])
            if (graph_ids_[i] < graph_ids_[j])
              edges.push_back({graph_ids_[i], graph_ids_[j]});
        return json{{"kind", "graph"}, {"edges", edges}};
      }
    }
    throw InternalError("bad space kind");
  }

  size_t graph_size() const { return graph_ids_.size(); }

 private:
  // graph payload: sorted vertex ids, id -> index, adjacency by index
  std::vector<int64_t> graph_ids_;
  std::unordered_map<int64_t, int32_t> graph_index_;
  std::vector<std::vector<int32_t>> graph_adj_;
  mutable std::mutex graph_mu_;
  mutable std::unordered_map<int64_t, std::vector<int64_t>> graph_dist_;

  int64_t graph_distance(int64_t a, int64_t b) const {
    auto ia = graph_index_.find(a), ib = graph_index_.find(b);
    if (ia == graph_index_.end() || ib == graph_index_.end())
      throw DomainError("vertex not in graph");
    std::lock_guard<std::mutex> lk(graph_mu_);
    auto it = graph_dist_.find(a);
    if (it == graph_dist_.end()) {
      std::vector<int64_t> d(graph_ids_.size(), kInfDist);
      std::deque<int32_t> q;
      d[ia->second] = 0;
      q.push_back(ia->second);
      while (!q.empty()) {
        int32_t u = q.front();
        q.pop_front();
        for (int32_t v : graph_adj_[u])
          if (d[v] == kInfDist) {
            d[v] = d[u] + 1;
            q.push_back(v);
          }
      }
      it = graph_dist_.emplace(a, std::move(d)).first;
    }
    return it->second[ib->second];
  }

  friend std::shared_ptr<const Space> make_space(
      const json&, const std::filesystem::path&);
};

inline std::shared_ptr<const Space> Space::make_graph_edges(
    const std::vector<std::pair<int64_t, int64_t>>& edges) {
  auto s = std::make_shared<Space>();
  s->kind = Kind::Graph;
  std::vector<int64_t> ids;
  for (auto& [u, v] : edges) {
    ids.push_back(u);
    ids.push_back(v);
  }
  ids.push_back(0);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  s->graph_ids_ = ids;
  for (size_t i = 0; i < ids.size(); ++i)
    s->graph_index_[ids[i]] = static_cast<int32_t>(i);
  s->graph_adj_.assign(ids.size(), {});
  for (auto& [u, v] : edges) {
    if (u == v) continue;
    int32_t iu = s->graph_index_[u], iv = s->graph_index_[v];
    s->graph_adj_[iu].push_back(iv);
    s->graph_adj_[iv].push_back(iu);
  }
  for (auto& a : s->graph_adj_) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  if (!s->graph_index_.count(0))
    throw ConfigError("graph must contain vertex 0 (the basepoint)");
  return s;
}

inline std::shared_ptr<const Space> Space::make_graph_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open graph file: " + path.string());
  std::vector<std::pair<int64_t, int64_t>> edges;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    int64_t u, v;
    if (!(ls >> u >> v))
      throw ConfigError("bad edge at " + path.string() + ":" +
                        std::to_string(lineno));
    edges.emplace_back(u, v);
  }
  return make_graph_edges(edges);
}

/// Build a space from a JSON descriptor.  Graph paths resolve against
/// base_dir.
inline std::shared_ptr<const Space> make_space(
    const json& j, const std::filesystem::path& base_dir = ".") {
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError("space descriptor needs a \"kind\" field");
  std::string k = j.at("kind").get<std::string>();
  if (k == "grid") {
    std::string m = j.value("metric", "L1");
    if (m != "L1" && m != "Linf")
      throw ConfigError("grid metric must be L1 or Linf");
    return Space::make_grid(j.value("dim", 1), m == "Linf");
  }
  if (k == "line") return Space::make_line();
  if (k == "halfline") return Space::make_halfline();
  if (k == "tree") return Space::make_tree(j.value("valence", 3));
  if (k == "coproduct")
    return Space::make_coproduct(make_space(j.at("left"), base_dir),
                                 make_space(j.at("right"), base_dir),
                                 j.value("gap", 1));
  if (k == "graph") {
    if (j.contains("path"))
      return Space::make_graph_csv(base_dir /
                                   j.at("path").get<std::string>());
    std::vector<std::pair<int64_t, int64_t>> edges;
    for (const auto& e : j.at("edges"))
      edges.emplace_back(e.at(0).get<int64_t>(), e.at(1).get<int64_t>());
    return Space::make_graph_edges(edges);
  }
  throw ConfigError("unknown space kind: " + k);
}

}  // namespace coarse
