#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coarse/ends.hpp"

namespace coarse {

// ---------------------------------------------------------------------------
// Graph-theoretic ends at desk scale: connected components of an annulus
// around the basepoint, a ray discretizer, the chain quotient of endpoint
// samples under a cover family, and the comparison between the two counts.
// ---------------------------------------------------------------------------

/// Connected components of the annulus {R <= d(x0, .) <= horizon}, computed
/// by BFS over unit neighbours plus weighted bridge edges.  A component
/// counts as "unbounded at this scale" when it contains a point at distance
/// exactly `horizon` -- the sphere-touching proxy for escaping to infinity.
struct ComponentCount {
  struct Part {
    Point anchor;  // lexicographically least point: a stable component name
    int64_t size = 0;
    bool touches_horizon = false;
    int32_t label = -1;  // 0..count-1 over horizon-touching parts, else -1
  };

  int64_t R = 0;
  int64_t horizon = 0;
  int64_t count = 0;          // number of horizon-touching components
  std::vector<Part> parts;    // all components, ordered by anchor
  std::unordered_map<Point, int32_t, PointHash> part_of;  // annulus pt -> part

  json to_json() const {
    json jp = json::array();
    for (const auto& p : parts)
      jp.push_back({{"anchor", p.anchor.str()},
                    {"size", p.size},
                    {"touches_horizon", p.touches_horizon},
                    {"label", p.label}});
    return json{{"R", R}, {"horizon", horizon}, {"count", count},
                {"parts", jp}};
  }
};

inline ComponentCount component_count(const SpacePtr& space, int64_t R,
                                      int64_t horizon) {
  if (R < 0) throw ConfigError("component_count: R must be >= 0");
  int64_t max_step = 1;
  for (const auto& br : space->bridges()) max_step = std::max(max_step, br.w);
  if (horizon < R + 2 * max_step)
    throw PreconditionError(
        "component_count: horizon must be at least R + 2 * max step (= " +
        std::to_string(R + 2 * max_step) + "), got " + std::to_string(horizon));

  const Point base = space->basepoint();
  std::vector<Point> pts = space->ball(base, horizon);  // sorted

  ComponentCount out;
  out.R = R;
  out.horizon = horizon;

  // Annulus membership plus depth, keyed by point.  distance(base, p) keeps
  // the cached-BFS orientation cheap for graph spaces.
  std::unordered_map<Point, int64_t, PointHash> depth;
  depth.reserve(pts.size());
  for (const auto& p : pts) {
    int64_t d = space->distance(base, p);
    if (d >= R) depth.emplace(p, d);
  }

  const auto bridges = space->bridges();
  std::vector<Point> nb;
  std::vector<Point> queue;
  for (const auto& p : pts) {
    if (!depth.count(p) || out.part_of.count(p)) continue;
    int32_t id = static_cast<int32_t>(out.parts.size());
    ComponentCount::Part part;
    part.anchor = p;  // outer loop over sorted points => least point first
    queue.assign(1, p);
    out.part_of.emplace(p, id);
    while (!queue.empty()) {
      Point q = std::move(queue.back());
      queue.pop_back();
      ++part.size;
      part.touches_horizon = part.touches_horizon || depth.at(q) == horizon;
      auto visit = [&](const Point& r) {
        if (!depth.count(r) || out.part_of.count(r)) return;
        out.part_of.emplace(r, id);
        queue.push_back(r);
      };
      space->neighbors(q, nb);
      for (const auto& r : nb) visit(r);
      for (const auto& br : bridges) {
        if (q == br.u) visit(br.v);
        if (q == br.v) visit(br.u);
      }
    }
    out.parts.push_back(std::move(part));
  }
  for (auto& part : out.parts)
    if (part.touches_horizon)
      part.label = static_cast<int32_t>(out.count++);
  return out;
}

/// Resamples a finite path of adjacent points (steps of length 0 or 1) at
/// exact unit-distance increments: t_i is the first index past t_{i-1} whose
/// point lies at distance exactly 1 from the previous sample.  The resampled
/// prefix becomes an explicit endpoint whose tail repeats the final unit
/// step when the path ends at its deepest excursion, and stays put
/// otherwise -- so loop or backtracking paths fail endpoint validation
/// instead of being silently extended.
struct DiscretizedRay {
  EndpointPtr endpoint;
  EndpointValidation validation;
  std::vector<Point> resampled;
  json report;
};

namespace detail {

/// Displacement rule matching a single unit step a -> b, or "stationary"
/// (both fields empty) when the step has no repeatable direction.
inline void step_displacement(const Point& a, const Point& b,
                              std::vector<int64_t>& vec, std::string& word) {
  if (a.kind == Point::Kind::Grid && b.kind == Point::Kind::Grid &&
      a.coords.size() == b.coords.size()) {
    vec.resize(a.coords.size());
    for (size_t i = 0; i < vec.size(); ++i) vec[i] = b.coords[i] - a.coords[i];
    return;
  }
  if (a.kind == Point::Kind::Word && b.kind == Point::Kind::Word &&
      b.word.size() == a.word.size() + 1 &&
      b.word.compare(0, a.word.size(), a.word) == 0) {
    word = b.word.substr(a.word.size());
    return;
  }
  if (a.kind == Point::Kind::Tagged && b.kind == Point::Kind::Tagged &&
      a.side == b.side) {
    step_displacement(*a.inner, *b.inner, vec, word);
    return;
  }
  // Rootward tree steps, bridge crossings, graph vertices: stationary.
}

}  // namespace detail

inline DiscretizedRay discretize_ray(Context& ctx,
                                     const std::vector<Point>& path) {
  const SpacePtr& space = ctx.space_ptr();
  if (path.empty())
    throw ConfigError("discretize_ray needs a nonempty path");
  for (const auto& p : path)
    if (!space->contains(p))
      throw DomainError("discretize_ray: path point not in the space: " +
                        p.str());
  for (size_t t = 0; t + 1 < path.size(); ++t)
    if (space->distance(path[t], path[t + 1]) > 1)
      throw ConfigError("discretize_ray: path points must be adjacent; step " +
                        std::to_string(t) + " has length " +
                        std::to_string(space->distance(path[t], path[t + 1])));

  DiscretizedRay out;
  out.resampled.push_back(path[0]);
  size_t t_prev = 0;
  for (size_t t = 1; t < path.size(); ++t) {
    if (space->distance(path[t_prev], path[t]) == 1) {
      out.resampled.push_back(path[t]);
      t_prev = t;
    }
  }
  // With unit steps the distance to the previous sample moves by at most one
  // per index, so every skipped point sits at distance 0 from its sample;
  // record the maximum anyway as the observed-window Hausdorff gap.
  int64_t hausdorff_window = 0;
  {
    size_t prev = 0;
    for (size_t t = 1; t < path.size(); ++t) {
      if (space->distance(path[prev], path[t]) == 1)
        prev = t;
      else
        hausdorff_window = std::max(
            hausdorff_window, space->distance(path[prev], path[t]));
    }
  }

  const Point base = space->basepoint();
  int64_t deepest = 0;
  for (const auto& p : out.resampled)
    deepest = std::max(deepest, space->distance(base, p));

  std::vector<int64_t> disp_vec;
  std::string disp_word;
  const size_t m = out.resampled.size();
  bool ends_at_max =
      m >= 2 && space->distance(base, out.resampled.back()) == deepest;
  if (ends_at_max)
    detail::step_displacement(out.resampled[m - 2], out.resampled[m - 1],
                              disp_vec, disp_word);
  bool stationary = disp_vec.empty() && disp_word.empty();

  out.endpoint = EndpointSpec::explicit_rule(space, out.resampled, disp_vec,
                                             disp_word);
  out.validation = validate_endpoint(ctx, out.endpoint);

  json ext;
  if (stationary) {
    ext = {{"mode", "stationary"},
           {"reason", ends_at_max ? "final step has no repeatable direction"
                                  : "path does not end at its deepest point"}};
  } else {
    ext = {{"mode", "repeat_final_step"}};
    if (!disp_vec.empty()) ext["vector"] = disp_vec;
    if (!disp_word.empty()) ext["word"] = disp_word;
  }
  out.report = json{{"input_points", path.size()},
                    {"resampled_points", m},
                    {"dropped", path.size() - m},
                    {"deepest", deepest},
                    {"hausdorff_window", hausdorff_window},
                    {"extension", ext},
                    {"validation", out.validation.to_json()}};
  return out;
}

/// Chain quotient of an endpoint sample under a family of covers.  Each
/// cover contributes the equivalence closure of its In-pairs; the family
/// partition is the common refinement (meet) of the per-cover closures, so
/// adding a cover can only split classes, never merge them.  Inconclusive
/// pair verdicts contribute no edge and are reported.
struct EndsQuotient {
  EndpointClasses dedup;                     // equal-endpoint grouping
  std::vector<std::vector<size_t>> classes;  // input indices per class
  std::vector<size_t> class_of;              // input index -> class
  json report;
};

inline EndsQuotient ends_quotient(Context& ctx,
                                  const std::vector<EndpointPtr>& endpoints,
                                  const std::vector<CoarseCover>& family) {
  if (endpoints.empty())
    throw ConfigError("ends_quotient needs at least one endpoint");
  if (family.empty())
    throw ConfigError("ends_quotient needs a nonempty cover family");
  for (const auto& cover : family)
    detail::require_verified_cover(ctx, cover, "ends_quotient");

  EndsQuotient out;
  out.dedup = dedup_endpoints(ctx, endpoints);
  const size_t k = out.dedup.reps.size();

  // Per-cover closure of the In relation over the deduplicated sample.
  std::vector<std::vector<size_t>> cover_class(family.size(),
                                               std::vector<size_t>(k));
  json cover_reports = json::array();
  int64_t inconclusive = 0;
  for (size_t c = 0; c < family.size(); ++c) {
    std::vector<size_t> root(k);
    for (size_t i = 0; i < k; ++i) root[i] = i;
    auto find = [&](size_t x) {
      while (root[x] != x) x = root[x] = root[root[x]];
      return x;
    };
    json pairs = json::array();
    for (size_t i = 0; i < k; ++i)
      for (size_t j = i + 1; j < k; ++j) {
        Verdict v = in_u_neighborhood_unchecked(ctx, out.dedup.reps[i],
                                                out.dedup.reps[j], family[c]);
        pairs.push_back({{"p", i}, {"q", j}, {"verdict", v.label}});
        if (v.positive())
          root[find(i)] = find(j);
        else if (!v.decisive())
          ++inconclusive;
      }
    std::unordered_map<size_t, size_t> seen;
    for (size_t i = 0; i < k; ++i) {
      size_t r = find(i);
      auto it = seen.find(r);
      if (it == seen.end()) it = seen.emplace(r, seen.size()).first;
      cover_class[c][i] = it->second;
    }
    cover_reports.push_back({{"cover", c},
                             {"classes", seen.size()},
                             {"pairs", std::move(pairs)}});
  }

  // Meet: two representatives share a class iff every cover chains them.
  std::map<std::vector<size_t>, size_t> by_signature;
  std::vector<size_t> rep_class(k);
  for (size_t i = 0; i < k; ++i) {
    std::vector<size_t> sig(family.size());
    for (size_t c = 0; c < family.size(); ++c) sig[c] = cover_class[c][i];
    auto it = by_signature.find(sig);
    if (it == by_signature.end()) {
      it = by_signature.emplace(std::move(sig), out.classes.size()).first;
      out.classes.emplace_back();
    }
    rep_class[i] = it->second;
  }
  out.class_of.resize(endpoints.size());
  for (size_t e = 0; e < endpoints.size(); ++e) {
    size_t cls = rep_class[out.dedup.class_of[e]];
    out.class_of[e] = cls;
    out.classes[cls].push_back(e);
  }
  out.report = json{{"representatives", k},
                    {"covers", std::move(cover_reports)},
                    {"inconclusive_pairs", inconclusive},
                    {"classes", out.classes.size()}};
  return out;
}

/// Comparison between the chain quotient of the endpoint sample and the
/// stabilized annulus component count: the counts must agree and each
/// quotient class must land in its own component (witnessed by the deepest
/// annulus point of a class representative).
struct EndsComparison {
  int64_t freudenthal = 0;  // component count at the last schedule radius
  int64_t quotient = 0;     // number of quotient classes
  bool stabilized = false;  // last two schedule counts agree
  bool match = false;
  EndsQuotient partition;
  json report;
};

inline EndsComparison compare_ends(Context& ctx,
                                   const std::vector<EndpointPtr>& endpoints,
                                   const std::vector<CoarseCover>& family,
                                   std::vector<int64_t> schedule = {8, 12, 16},
                                   int64_t horizon = 256) {
  if (schedule.empty())
    throw ConfigError("compare_ends needs a nonempty radius schedule");
  std::sort(schedule.begin(), schedule.end());
  schedule.erase(std::unique(schedule.begin(), schedule.end()),
                 schedule.end());

  EndsComparison out;
  json counts = json::array();
  ComponentCount last;
  for (int64_t R : schedule) {
    last = component_count(ctx.space_ptr(), R, horizon);
    counts.push_back({{"R", R}, {"count", last.count}});
  }
  out.freudenthal = last.count;
  out.stabilized =
      schedule.size() >= 2 &&
      counts[counts.size() - 2].at("count").get<int64_t>() == last.count;

  out.partition = ends_quotient(ctx, endpoints, family);
  out.quotient = static_cast<int64_t>(out.partition.classes.size());

  // Map each class to the component holding the deepest annulus point of
  // its representative's materialized image.
  const int64_t R_last = schedule.back();
  json class_rows = json::array();
  std::vector<int32_t> labels;
  json offending = json::array();
  for (size_t cls = 0; cls < out.partition.classes.size(); ++cls) {
    size_t input_idx = out.partition.classes[cls].front();
    const EndpointPtr& rep =
        out.partition.dedup.reps[out.partition.dedup.class_of[input_idx]];
    const Context::Materialized& m = ctx.materialize(rep);
    int32_t label = -1;
    std::string anchor;
    for (size_t i = m.pts.size(); i-- > 0;) {
      if (m.dist0[i] < R_last || m.dist0[i] > horizon) continue;
      auto it = last.part_of.find(m.pts[i]);
      if (it == last.part_of.end()) break;  // outside the enumerated annulus
      label = last.parts[static_cast<size_t>(it->second)].label;
      anchor = last.parts[static_cast<size_t>(it->second)].anchor.str();
      break;
    }
    class_rows.push_back({{"class", cls},
                          {"component", label},
                          {"component_anchor", anchor}});
    if (label < 0)
      offending.push_back({{"class", cls},
                           {"reason", "no labelled component reached"}});
    labels.push_back(label);
  }
  std::vector<int32_t> sorted_labels = labels;
  std::sort(sorted_labels.begin(), sorted_labels.end());
  bool injective =
      std::adjacent_find(sorted_labels.begin(), sorted_labels.end()) ==
      sorted_labels.end();
  bool total = sorted_labels.empty() || sorted_labels.front() >= 0;
  for (size_t i = 0; i + 1 < sorted_labels.size(); ++i)
    if (sorted_labels[i] == sorted_labels[i + 1])
      offending.push_back({{"component", sorted_labels[i]},
                           {"reason", "two classes share a component"}});

  out.match = out.stabilized && out.freudenthal == out.quotient && total &&
              injective;
  out.report = json{{"schedule", std::move(counts)},
                    {"stabilized", out.stabilized},
                    {"freudenthal", out.freudenthal},
                    {"quotient", out.quotient},
                    {"classes", std::move(class_rows)},
                    {"match", out.match},
                    {"offending", std::move(offending)},
                    {"quotient_report", out.partition.report}};
  return out;
}

}  // namespace coarse
