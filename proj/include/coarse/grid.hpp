#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "coarse/errors.hpp"
#include "coarse/space.hpp"

namespace coarse {

/// Truncation grid: the radii at which every profile is reported, the
/// divergence threshold tau, and the trailing stability window.
///
/// All set evaluation happens inside the fixed work region
/// ball(x0, work_radius); keeping that region independent of the query
/// radius is what makes truncated members monotone-consistent.
struct TruncationGrid {
  std::vector<int64_t> radii{8, 16, 32, 64, 128};
  int64_t tau_den = 4;               // tau(R) = ceil(R / tau_den)
  std::vector<int64_t> tau_values;   // optional explicit override per radius
  int window = 3;
  int64_t work_radius = 0;           // 0 = derive: 2 * r_max + 4
  int64_t horizon_cap = 1'000'000;   // endpoint materialization guard

  int64_t r_max() const { return radii.back(); }
  int64_t work() const { return work_radius ? work_radius : 2 * r_max() + 4; }
  size_t size() const { return radii.size(); }
  size_t window_begin() const { return radii.size() - window; }

  int64_t tau(int64_t R) const {
    if (!tau_values.empty()) {
      auto it = std::lower_bound(radii.begin(), radii.end(), R);
      if (it != radii.end() && *it == R)
        return tau_values[it - radii.begin()];
    }
    return (R + tau_den - 1) / tau_den;
  }
  int64_t tau_at(size_t i) const { return tau(radii[i]); }

  void validate() const {
    if (radii.empty()) throw ConfigError("grid needs at least one radius");
    for (size_t i = 1; i < radii.size(); ++i)
      if (radii[i] <= radii[i - 1])
        throw ConfigError("grid radii must be strictly increasing");
    if (radii[0] < 1) throw ConfigError("grid radii must be positive");
    if (window < 1 || static_cast<size_t>(window) > radii.size())
      throw ConfigError("stability window must fit inside the grid");
    if (!tau_values.empty() && tau_values.size() != radii.size())
      throw ConfigError("explicit tau table must match the radii list");
    int64_t prev = -1;
    for (int64_t r : radii) {
      int64_t t = tau(r);
      if (t < prev) throw ConfigError("tau must be nondecreasing");
      prev = t;
    }
    if (radii.size() > 1 && tau(radii.back()) <= tau(radii.front()) &&
        tau(radii.back()) == 0)
      throw ConfigError("tau must grow over the grid");
    if (work_radius && work_radius < r_max())
      throw ConfigError("work radius must be >= the largest grid radius");
  }

  json to_json() const {
    json j{{"radii", radii}, {"tau_den", tau_den}, {"window", window}};
    if (!tau_values.empty()) j["tau_values"] = tau_values;
    if (work_radius) j["work_radius"] = work_radius;
    return j;
  }

  static TruncationGrid from_json(const json& j) {
    TruncationGrid g;
    if (j.is_array()) {  // bare radii-list shorthand
      g.radii = j.get<std::vector<int64_t>>();
      g.window = std::min<int>(g.window, static_cast<int>(g.radii.size()));
      g.validate();
      return g;
    }
    if (j.contains("radii")) g.radii = j.at("radii").get<std::vector<int64_t>>();
    g.tau_den = j.value("tau_den", int64_t(4));
    if (j.contains("tau_values"))
      g.tau_values = j.at("tau_values").get<std::vector<int64_t>>();
    g.window = j.value("window", 3);
    g.work_radius = j.value("work_radius", int64_t(0));
    g.horizon_cap = j.value("horizon_cap", int64_t(1'000'000));
    g.validate();
    return g;
  }

  /// Defaults per space kind, sized so the work region stays desk-scale.
  static TruncationGrid defaults_for(const Space& s) {
    TruncationGrid g;
    if (s.kind == Space::Kind::Tree) {
      g.radii = {2, 3, 4, 5, 6};
    } else if (s.kind == Space::Kind::Grid && s.dim >= 3) {
      g.radii = s.linf ? std::vector<int64_t>{2, 4, 8, 16}
                       : std::vector<int64_t>{4, 8, 16, 32};
    } else if (s.kind == Space::Kind::Graph) {
      g.radii = {2, 4, 8, 16, 32};
    }
    g.validate();
    return g;
  }

  /// Grid selection: explicit descriptor > COARSE_ENDS_GRID environment
  /// variable (inline JSON or a file path) > per-space defaults.
  static TruncationGrid resolve(const Space& s,
                                const json* explicit_grid = nullptr) {
    if (explicit_grid && !explicit_grid->is_null())
      return from_json(*explicit_grid);
    if (const char* env = std::getenv("COARSE_ENDS_GRID")) {
      std::string v(env);
      if (!v.empty()) {
        if (v.front() == '{' || v.front() == '[') return from_json(json::parse(v));
        std::ifstream in(v);
        if (!in)
          throw ConfigError("COARSE_ENDS_GRID file not found: " + v);
        json j;
        in >> j;
        return from_json(j);
      }
    }
    return defaults_for(s);
  }
};

}  // namespace coarse
