#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "coarse/covers.hpp"
#include "coarse/endpoint.hpp"
#include "coarse/maps.hpp"

namespace coarse {

/// Verdict over the symmetric U-neighborhood relation: label In/Out, bound
/// holds the certified entourage radius for In, witness carries the directed
/// escape profiles for Out.
using UNeighborhoodVerdict = Verdict;

namespace detail {

/// Directed Hausdorff profile: per grid radius R, the farthest distance from
/// a source point inside ball(R) to the target set, measured inside the work
/// region.  Plateau = the source stays within a fixed entourage of the
/// target; divergence = it escapes.
inline Profile dir_hausdorff_profile(Context& ctx, const DynBitset& src,
                                     const DynBitset& dst) {
  Universe& u = ctx.universe();
  const TruncationGrid& grid = ctx.grid();
  std::vector<int32_t> field = ctx.field_from(dst);
  Profile p;
  p.radii = grid.radii;
  for (int64_t R : grid.radii) {
    DynBitset s = src;
    s &= u.ball_bits(R);
    if (s.none()) {
      p.values.push_back(kEmpty);
      p.certified.push_back(0);
      p.attain.push_back(json{{"empty", "source"}});
      continue;
    }
    int64_t worst = -1;
    int32_t arg = -1;
    s.for_each([&](size_t j) {
      if (field[j] > worst) {
        worst = field[j];
        arg = static_cast<int32_t>(j);
      }
    });
    if (worst >= kUnreached) worst = kInfDist;
    p.values.push_back(worst);
    p.certified.push_back(R + worst <= ctx.work() ? 1 : 0);
    p.attain.push_back(json{{"point", u.point(static_cast<size_t>(arg)).to_json()},
                            {"value", worst == kInfDist ? json() : json(worst)}});
  }
  return p;
}

inline bool window_all_empty(const Profile& p, const TruncationGrid& grid) {
  for (size_t i = grid.window_begin(); i < grid.size(); ++i)
    if (p.values[i] != kEmpty) return false;
  return true;
}

/// Smallest grid radius that covers v; v itself when it exceeds the grid.
inline int64_t round_to_radius(const TruncationGrid& grid, int64_t v) {
  for (int64_t r : grid.radii)
    if (r >= v) return r;
  return v;
}

/// Tolerance at the scale of a point: tau of the largest grid radius below
/// its distance to the basepoint (the first radius when it lies closer).
inline int64_t scale_tolerance(const TruncationGrid& grid, int64_t d) {
  size_t best = 0;
  for (size_t i = 0; i < grid.size(); ++i)
    if (grid.radii[i] <= d) best = i;
  return grid.tau_at(best);
}

inline void require_verified_cover(Context& ctx, const CoarseCover& cover,
                                   const char* who) {
  Verdict v = verify_coarse_cover(ctx, cover, 2);
  if (!v.positive())
    throw PreconditionError(std::string(who) +
                            ": the input family does not verify as a coarse "
                            "cover (" +
                            v.label + ")");
}

}  // namespace detail

// ------------------------------------------------------------- validation

/// Outcome of checking that a generator rule is a coarse ray: steps stay
/// bounded at every scale and the image escapes every window tolerance.
struct EndpointValidation {
  bool valid = false;
  int64_t step_bound = 0;  // observed max step over the materialized range
  int64_t horizon = 0;     // last generated index
  bool truncated = false;  // materialization hit the horizon cap
  Verdict uniform;         // bounded_steps / growing_steps
  Verdict proper;          // escapes / stalls
  json report;

  json to_json() const {
    json j{{"valid", valid},
           {"step_bound", step_bound},
           {"horizon", horizon},
           {"truncated", truncated},
           {"uniform", uniform.to_json()},
           {"proper", proper.to_json()}};
    j["detail"] = report;
    return j;
  }
};

/// Checks both coarse-map invariants of a ray generator.  `probe` optionally
/// forces totality of the rule on [0, probe] beyond the materialized range.
inline EndpointValidation validate_endpoint(Context& ctx, const EndpointPtr& e,
                                            int64_t probe = 0) {
  const TruncationGrid& grid = ctx.grid();
  const Context::Materialized& m = ctx.materialize(e);
  const SpacePtr& sp = ctx.space_ptr();
  for (int64_t i = m.horizon + 1; i <= probe; ++i) (void)e->point_at(i);

  EndpointValidation out;
  out.horizon = m.horizon;
  out.truncated = m.truncated;

  // steps, attributed to the scale of their starting point
  std::vector<int64_t> steps(m.pts.size() ? m.pts.size() - 1 : 0);
  for (size_t i = 0; i + 1 < m.pts.size(); ++i) {
    steps[i] = sp->distance(m.pts[i], m.pts[i + 1]);
    out.step_bound = std::max(out.step_bound, steps[i]);
  }
  Profile sprof;
  sprof.radii = grid.radii;
  for (int64_t R : grid.radii) {
    int64_t v = kEmpty;
    for (size_t i = 0; i < steps.size(); ++i)
      if (m.dist0[i] <= R) v = std::max(v, steps[i]);
    sprof.values.push_back(v);
    sprof.certified.push_back(v == kEmpty ? 0 : 1);
  }
  out.uniform = decide_profile(sprof, grid, Labels{"bounded_steps", "growing_steps"},
                               "no steps start inside the window balls");

  // escape: suffix minima of the distance to the basepoint
  std::vector<int64_t> smin(m.dist0.size());
  int64_t acc = kInfDist;
  for (size_t i = m.dist0.size(); i-- > 0;) {
    acc = std::min(acc, m.dist0[i]);
    smin[i] = acc;
  }
  json esc_table = json::array();
  bool escapes = !smin.empty();
  for (size_t w = grid.window_begin(); w < grid.size() && escapes; ++w) {
    int64_t tol = grid.tau_at(w);
    int64_t k = -1;
    for (size_t i = 0; i < smin.size(); ++i)
      if (smin[i] > tol) {
        k = static_cast<int64_t>(i);
        break;
      }
    if (k < 0)
      escapes = false;
    else
      esc_table.push_back(json{{"radius", grid.radii[w]},
                               {"tau", tol},
                               {"from_index", k},
                               {"tail_min", smin[static_cast<size_t>(k)]}});
  }
  if (escapes && !smin.empty()) {
    out.proper = Verdict::make_positive(
        "escapes", smin.back(),
        json{{"cleared", esc_table}, {"final_tail_min", smin.back()}});
  } else if (!m.truncated) {
    // the materializer only stops early on a repeated-point run longer than
    // any legitimate slow ray can produce, so this tail is a certified stall
    size_t stall_run = 1;
    while (stall_run < m.pts.size() &&
           m.pts[m.pts.size() - 1 - stall_run] == m.pts.back())
      ++stall_run;
    out.proper = Verdict::make_negative(
        "stalls",
        json{{"repeated_point", m.pts.back().to_json()}, {"run", stall_run}},
        "the generator repeats one point");
  } else {
    size_t tail_begin = m.dist0.size() / 2;
    int64_t tail_max = 0;
    for (size_t i = tail_begin; i < m.dist0.size(); ++i)
      tail_max = std::max(tail_max, m.dist0[i]);
    out.proper = Verdict::make_inconclusive(
        json{{"cleared", esc_table},
             {"tail_from_index", tail_begin},
             {"tail_max", tail_max}},
        "the horizon cap was exhausted before the image cleared every window "
        "tolerance");
  }

  out.valid = out.uniform.positive() && out.proper.positive();
  out.report = json{{"steps", sprof.to_json()}, {"escape", esc_table}};
  return out;
}

// ----------------------------------------------------------- same endpoint

/// Two rays represent the same endpoint when each image stays within a fixed
/// entourage of the other: both directed Hausdorff profiles plateau.  Either
/// profile diverging past tau certifies Apart.
inline Verdict same_endpoint(Context& ctx, const EndpointPtr& a,
                             const EndpointPtr& b) {
  const TruncationGrid& grid = ctx.grid();
  const DynBitset& abits = ctx.eval(SubsetExpr::endpoint_image(a));
  const DynBitset& bbits = ctx.eval(SubsetExpr::endpoint_image(b));
  Profile fwd = detail::dir_hausdorff_profile(ctx, abits, bbits);
  Profile bwd = detail::dir_hausdorff_profile(ctx, bbits, abits);
  json w{{"forward", fwd.to_json()}, {"backward", bwd.to_json()}};
  if (detail::window_all_empty(fwd, grid) ||
      detail::window_all_empty(bwd, grid))
    return Verdict::make_inconclusive(
        w, "an image is empty on the window balls");
  Verdict vf = decide_profile(fwd, grid, kCloseApart);
  Verdict vb = decide_profile(bwd, grid, kCloseApart);
  w["forward_outcome"] = vf.label;
  w["backward_outcome"] = vb.label;
  if (vf.negative() || vb.negative())
    return Verdict::make_negative("Apart", w);
  if (vf.positive() && vb.positive())
    return Verdict::make_positive("Close", std::max(vf.bound, vb.bound), w);
  return Verdict::make_inconclusive(w, "a directed profile is undecided");
}

// -------------------------------------------------------- U-neighborhoods

/// st(A, U) restricted to the certified-close parts, with the undecided
/// parts reported separately: In needs the star no larger than the truth,
/// Out needs it no smaller, so undecided parts block the affected side.
inline UNeighborhoodVerdict in_u_neighborhood_unchecked(
    Context& ctx, const EndpointPtr& p, const EndpointPtr& q,
    const CoarseCover& cover) {
  const TruncationGrid& grid = ctx.grid();
  Universe& u = ctx.universe();
  SubsetPtr pim = SubsetExpr::endpoint_image(p);
  SubsetPtr qim = SubsetExpr::endpoint_image(q);
  StarResult sp = coarse_star(ctx, pim, cover);
  StarResult sq = coarse_star(ctx, qim, cover);
  auto close_union = [&](const StarResult& s) {
    std::vector<SubsetPtr> parts;
    for (size_t k : s.close_parts) parts.push_back(cover.parts[k]);
    if (parts.empty()) return SubsetExpr::empty();
    if (parts.size() == 1) return parts[0];
    return SubsetExpr::union_of(std::move(parts));
  };
  DynBitset star_p = ctx.eval(close_union(sp));
  DynBitset star_q = ctx.eval(close_union(sq));
  (void)u;
  Profile into_p = detail::dir_hausdorff_profile(ctx, ctx.eval(qim), star_p);
  Profile into_q = detail::dir_hausdorff_profile(ctx, ctx.eval(pim), star_q);
  json w{{"q_into_star_p", into_p.to_json()},
         {"p_into_star_q", into_q.to_json()},
         {"star_p_parts", sp.close_parts},
         {"star_q_parts", sq.close_parts}};
  if (!sp.flagged_parts.empty()) w["star_p_undecided"] = sp.flagged_parts;
  if (!sq.flagged_parts.empty()) w["star_q_undecided"] = sq.flagged_parts;
  if (detail::window_all_empty(into_p, grid) ||
      detail::window_all_empty(into_q, grid))
    return Verdict::make_inconclusive(
        w, "an image is empty on the window balls");
  Verdict vp = decide_profile(into_p, grid, kInOut);
  Verdict vq = decide_profile(into_q, grid, kInOut);
  w["q_into_star_p_outcome"] = vp.label;
  w["p_into_star_q_outcome"] = vq.label;
  if (vp.negative() && sp.flagged_parts.empty())
    return Verdict::make_negative("Out", w,
                                  "q escapes every entourage of st(p, U)");
  if (vq.negative() && sq.flagged_parts.empty())
    return Verdict::make_negative("Out", w,
                                  "p escapes every entourage of st(q, U)");
  if (vp.positive() && vq.positive()) {
    int64_t e = detail::round_to_radius(grid, std::max(vp.bound, vq.bound));
    return Verdict::make_positive("In", e, w);
  }
  if (vp.negative() || vq.negative())
    return Verdict::make_inconclusive(
        w, "an escape crosses parts whose closeness is undecided");
  return Verdict::make_inconclusive(w, "a directed profile is undecided");
}

/// Symmetric U-neighborhood relation q in U[p]: both images must sit inside
/// a common entourage of the other's coarse star.
inline UNeighborhoodVerdict in_u_neighborhood(Context& ctx,
                                              const EndpointPtr& p,
                                              const EndpointPtr& q,
                                              const CoarseCover& cover) {
  detail::require_verified_cover(ctx, cover, "in_u_neighborhood");
  for (const EndpointPtr& e : {p, q}) {
    EndpointValidation v = validate_endpoint(ctx, e);
    if (!v.valid)
      throw PreconditionError(
          "in_u_neighborhood: an endpoint does not validate (uniform: " +
          v.uniform.label + ", proper: " + v.proper.label + ")");
  }
  return in_u_neighborhood_unchecked(ctx, p, q, cover);
}

// -------------------------------------------------- refinement monotonicity

/// V refining U can only shrink stars, so q in V[p] must imply q in U[p].
inline Verdict refinement_monotonicity_check(Context& ctx,
                                             const EndpointPtr& p,
                                             const EndpointPtr& q,
                                             const CoarseCover& coverV,
                                             const CoarseCover& coverU) {
  for (size_t i = 0; i < coverV.parts.size(); ++i) {
    const DynBitset& vb = ctx.eval(coverV.parts[i]);
    bool inside = false;
    for (size_t j = 0; j < coverU.parts.size() && !inside; ++j)
      inside = vb.is_subset_of(ctx.eval(coverU.parts[j]));
    if (!inside)
      throw PreconditionError(
          "refinement_monotonicity_check: part " + std::to_string(i) +
          " of the refining cover lies in no part of the coarser cover");
  }
  detail::require_verified_cover(ctx, coverV, "refinement_monotonicity_check");
  detail::require_verified_cover(ctx, coverU, "refinement_monotonicity_check");
  UNeighborhoodVerdict fine = in_u_neighborhood_unchecked(ctx, p, q, coverV);
  json w{{"under_refinement", fine.to_json()}};
  if (!fine.positive()) {
    w["note"] = "vacuous: the relation does not hold under the refinement";
    return Verdict::make_positive("holds", 0, w);
  }
  UNeighborhoodVerdict coarse = in_u_neighborhood_unchecked(ctx, p, q, coverU);
  w["under_coarser"] = coarse.to_json();
  if (coarse.positive()) return Verdict::make_positive("holds", coarse.bound, w);
  if (coarse.negative())
    return Verdict::make_negative("fails", w,
                                  "In under the refinement but Out under the "
                                  "coarser cover");
  return Verdict::make_inconclusive(w, "the coarser relation is undecided");
}

// ------------------------------------------------------------ dedup classes

/// Endpoints grouped into classes by certified closeness, with the
/// lexicographically least generator descriptor as representative.
struct EndpointClasses {
  std::vector<EndpointPtr> reps;
  std::vector<std::vector<size_t>> members;  // input indices per class
  std::vector<size_t> class_of;              // input index -> class
  json details;
};

inline EndpointClasses dedup_endpoints(Context& ctx,
                                       const std::vector<EndpointPtr>& list) {
  for (size_t i = 0; i < list.size(); ++i) {
    EndpointValidation v = validate_endpoint(ctx, list[i]);
    if (!v.valid)
      throw PreconditionError("endpoint " + std::to_string(i) +
                              " does not validate (uniform: " +
                              v.uniform.label + ", proper: " + v.proper.label +
                              ")");
  }
  std::vector<size_t> root(list.size());
  for (size_t i = 0; i < root.size(); ++i) root[i] = i;
  auto find = [&](size_t x) {
    while (root[x] != x) x = root[x] = root[root[x]];
    return x;
  };
  json pairs = json::array();
  for (size_t i = 0; i < list.size(); ++i)
    for (size_t j = i + 1; j < list.size(); ++j) {
      Verdict v = same_endpoint(ctx, list[i], list[j]);
      if (!v.decisive())
        throw PreconditionError(
            "same_endpoint is inconclusive for endpoints " +
            std::to_string(i) + " and " + std::to_string(j) +
            "; deduplication needs decisive pairs");
      pairs.push_back(json{{"i", i}, {"j", j}, {"outcome", v.label}});
      if (v.positive()) root[find(i)] = find(j);
    }
  EndpointClasses out;
  out.class_of.resize(list.size());
  std::map<size_t, size_t> cls;  // union-find root -> class index
  for (size_t i = 0; i < list.size(); ++i) {
    size_t r = find(i);
    auto it = cls.find(r);
    if (it == cls.end()) {
      it = cls.emplace(r, out.members.size()).first;
      out.members.push_back({});
    }
    out.class_of[i] = it->second;
    out.members[it->second].push_back(i);
  }
  for (const auto& m : out.members) {
    size_t best = m[0];
    std::string best_key = endpoint_to_json(*list[m[0]]).dump();
    for (size_t k = 1; k < m.size(); ++k) {
      std::string key = endpoint_to_json(*list[m[k]]).dump();
      if (key < best_key) {
        best = m[k];
        best_key = std::move(key);
      }
    }
    out.reps.push_back(list[best]);
  }
  out.details = json{{"pairwise", pairs}, {"classes", out.members}};
  return out;
}

// -------------------------------------------------------- entourage matrix

/// D_U over a deduplicated endpoint sample: symmetric, reflexive matrix of
/// U-neighborhood verdicts.
struct EntourageRelation {
  EndpointClasses classes;
  std::vector<std::vector<UNeighborhoodVerdict>> matrix;

  json to_json() const {
    json m = json::array();
    for (const auto& row : matrix) {
      json r = json::array();
      for (const auto& v : row) r.push_back(v.to_json());
      m.push_back(std::move(r));
    }
    json edges = json::array();
    for (size_t i = 0; i < matrix.size(); ++i)
      for (size_t j = i; j < matrix.size(); ++j)
        if (matrix[i][j].positive())
          edges.push_back(json{{"p", i}, {"q", j}});
    return json{{"classes", classes.details},
                {"matrix", m},
                {"in_edges", edges}};
  }
};

inline EntourageRelation entourage_relation(
    Context& ctx, const std::vector<EndpointPtr>& endpoints,
    const CoarseCover& cover) {
  detail::require_verified_cover(ctx, cover, "entourage_relation");
  EntourageRelation out;
  out.classes = dedup_endpoints(ctx, endpoints);
  size_t n = out.classes.reps.size();
  out.matrix.assign(n, std::vector<UNeighborhoodVerdict>(n));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i; j < n; ++j) {
      UNeighborhoodVerdict v = in_u_neighborhood_unchecked(
          ctx, out.classes.reps[i], out.classes.reps[j], cover);
      out.matrix[i][j] = v;
      out.matrix[j][i] = std::move(v);  // the defining condition is symmetric
    }
  return out;
}

// -------------------------------------------------------- uniformity axioms

struct AxiomSuite {
  Verdict overall;
  json report;
};

/// The four base axioms of the end-space uniformity, checked on the sampled
/// endpoint classes: reflexivity, intersection monotonicity, star-refinement
/// composition, and symmetry.
inline AxiomSuite base_axiom_suite(Context& ctx,
                                   const std::vector<CoarseCover>& covers,
                                   const std::vector<EndpointPtr>& endpoints) {
  if (covers.empty())
    throw ConfigError("base_axiom_suite needs at least one cover");
  for (const CoarseCover& c : covers)
    detail::require_verified_cover(ctx, c, "base_axiom_suite");
  EndpointClasses cls = dedup_endpoints(ctx, endpoints);
  size_t n = cls.reps.size();
  auto matrix_under = [&](const CoarseCover& c) {
    std::vector<std::vector<UNeighborhoodVerdict>> m(
        n, std::vector<UNeighborhoodVerdict>(n));
    for (size_t i = 0; i < n; ++i)
      for (size_t j = i; j < n; ++j) {
        m[i][j] = in_u_neighborhood_unchecked(ctx, cls.reps[i], cls.reps[j], c);
        m[j][i] = m[i][j];
      }
    return m;
  };
  std::vector<std::vector<std::vector<UNeighborhoodVerdict>>> mats;
  for (const CoarseCover& c : covers) mats.push_back(matrix_under(c));

  json checks = json::array();
  bool any_fail = false, any_undecided = false;
  auto record = [&](const std::string& name, const char* status, json detail) {
    checks.push_back(
        json{{"axiom", name}, {"status", status}, {"detail", detail}});
    if (std::string(status) == "fails") any_fail = true;
    if (std::string(status) == "inconclusive") any_undecided = true;
  };

  // (1) the diagonal lies in every D_U
  for (size_t c = 0; c < covers.size(); ++c) {
    const char* status = "holds";
    json detail = json::array();
    for (size_t i = 0; i < n; ++i) {
      detail.push_back(mats[c][i][i].label);
      if (mats[c][i][i].negative()) status = "fails";
      else if (!mats[c][i][i].positive() && std::string(status) != "fails")
        status = "inconclusive";
    }
    record("diagonal_in_D", status, json{{"cover", c}, {"diagonal", detail}});
  }

  // (2) D_{U cap V} inside D_U cap D_V for consecutive cover pairs
  for (size_t c = 0; c + 1 < covers.size(); ++c) {
    CoarseCover inter;
    for (const SubsetPtr& a : covers[c].parts)
      for (const SubsetPtr& b : covers[c + 1].parts) {
        SubsetPtr p = SubsetExpr::intersection_of(a, b);
        if (ctx.eval(p).any()) inter.parts.push_back(std::move(p));
      }
    if (inter.parts.empty()) {
      record("intersection_monotone", "inconclusive",
             json{{"covers", {c, c + 1}},
                  {"note", "all pairwise intersections are empty"}});
      continue;
    }
    Verdict iv = verify_coarse_cover(ctx, inter, 2);
    auto mw = matrix_under(inter);
    const char* status = "holds";
    json bad = json::array();
    size_t skipped = 0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = i; j < n; ++j) {
        if (!mw[i][j].positive()) continue;
        const UNeighborhoodVerdict& a = mats[c][i][j];
        const UNeighborhoodVerdict& b = mats[c + 1][i][j];
        if (a.negative() || b.negative()) {
          status = "fails";
          bad.push_back(json{{"p", i}, {"q", j}});
        } else if (!a.positive() || !b.positive()) {
          ++skipped;
        }
      }
    if (std::string(status) == "holds" && skipped > 0) status = "inconclusive";
    record("intersection_monotone", status,
           json{{"covers", {c, c + 1}},
                {"intersection_verifies", iv.label},
                {"violations", bad},
                {"skipped", skipped}});
  }

  // (3) D_V composed with itself lands in D_U for V = star_refinement(U)
  for (size_t c = 0; c < covers.size(); ++c) {
    json detail{{"cover", c}};
    try {
      CoarseCover v = star_refinement(ctx, covers[c]);
      detail["refinement_parts"] = v.parts.size();
      auto mv = matrix_under(v);
      const char* status = "holds";
      json bad = json::array();
      size_t skipped = 0;
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
          for (size_t k = 0; k < n; ++k) {
            if (!mv[i][j].positive() || !mv[j][k].positive()) continue;
            if (mats[c][i][k].negative()) {
              status = "fails";
              bad.push_back(json{{"p", i}, {"q", j}, {"r", k}});
            } else if (!mats[c][i][k].positive()) {
              ++skipped;
            }
          }
      if (std::string(status) == "holds" && skipped > 0)
        status = "inconclusive";
      detail["violations"] = bad;
      detail["skipped"] = skipped;
      record("star_composition", status, detail);
    } catch (const std::runtime_error& err) {
      detail["error"] = err.what();
      record("star_composition", "inconclusive", detail);
    }
  }

  // (4) D_U equals its own inverse
  for (size_t c = 0; c < covers.size(); ++c) {
    const char* status = "holds";
    json bad = json::array();
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) {
        UNeighborhoodVerdict ab = in_u_neighborhood_unchecked(
            ctx, cls.reps[i], cls.reps[j], covers[c]);
        UNeighborhoodVerdict ba = in_u_neighborhood_unchecked(
            ctx, cls.reps[j], cls.reps[i], covers[c]);
        if (ab.label != ba.label) {
          status = "fails";
          bad.push_back(json{{"p", i}, {"q", j}});
        }
      }
    record("symmetry", status, json{{"cover", c}, {"violations", bad}});
  }

  AxiomSuite out;
  json w{{"checks", checks}, {"classes", cls.details}};
  if (any_fail)
    out.overall = Verdict::make_negative("fails", w);
  else if (any_undecided)
    out.overall = Verdict::make_inconclusive(w, "some checks were undecided");
  else
    out.overall = Verdict::make_positive("holds", 0, w);
  out.report = std::move(w);
  return out;
}

// ------------------------------------------------------------- functoriality

struct PushforwardEndpoint {
  EndpointPtr endpoint;
  EndpointValidation validation;
};

/// Composition with a coarse map, revalidated on the target space.
inline PushforwardEndpoint pushforward_endpoint(Context& target_ctx,
                                                const MapPtr& f,
                                                const EndpointPtr& phi) {
  if (f->source->descriptor() != phi->space->descriptor())
    throw ConfigError("pushforward domain mismatch: the endpoint lives in " +
                      phi->space->descriptor().dump() + ", the map expects " +
                      f->source->descriptor().dump());
  if (f->target->descriptor() != target_ctx.space_ptr()->descriptor())
    throw ConfigError(
        "pushforward target mismatch: the context space differs from the "
        "map's target");
  PushforwardEndpoint out;
  out.endpoint = EndpointSpec::pushforward(f, phi);
  out.validation = validate_endpoint(target_ctx, out.endpoint);
  return out;
}

/// E(f) is uniformly continuous: In under the pulled-back cover implies In
/// under the target cover, for every sampled pair.
inline Verdict uniform_continuity_check(
    Context& source_ctx, Context& target_ctx, const MapPtr& f,
    const CoarseCover& target_cover,
    const std::vector<EndpointPtr>& endpoints) {
  if (f->source->descriptor() != source_ctx.space_ptr()->descriptor() ||
      f->target->descriptor() != target_ctx.space_ptr()->descriptor())
    throw ConfigError("uniform_continuity_check: context spaces do not match "
                      "the map");
  if (!target_cover.over_is_all())
    throw ConfigError("uniform_continuity_check expects a cover of the whole "
                      "target space");
  CoarseCover pulled;
  for (const SubsetPtr& u : target_cover.parts)
    pulled.parts.push_back(SubsetExpr::preimage(f, u));
  detail::require_verified_cover(source_ctx, pulled,
                                 "uniform_continuity_check (pullback)");
  detail::require_verified_cover(target_ctx, target_cover,
                                 "uniform_continuity_check (target)");
  EndpointClasses cls = dedup_endpoints(source_ctx, endpoints);
  std::vector<EndpointPtr> imgs;
  json validations = json::array();
  for (const EndpointPtr& p : cls.reps) {
    PushforwardEndpoint pf = pushforward_endpoint(target_ctx, f, p);
    validations.push_back(pf.validation.to_json());
    imgs.push_back(pf.endpoint);
  }
  size_t n = cls.reps.size();
  json table = json::array();
  bool fail = false;
  size_t skipped = 0, checked = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i; j < n; ++j) {
      UNeighborhoodVerdict a = in_u_neighborhood_unchecked(
          source_ctx, cls.reps[i], cls.reps[j], pulled);
      if (!a.positive()) {
        table.push_back(json{{"p", i}, {"q", j}, {"source", a.label}});
        continue;
      }
      UNeighborhoodVerdict b = in_u_neighborhood_unchecked(
          target_ctx, imgs[i], imgs[j], target_cover);
      table.push_back(
          json{{"p", i}, {"q", j}, {"source", a.label}, {"target", b.label}});
      if (b.negative()) fail = true;
      else if (!b.positive()) ++skipped;
      else ++checked;
    }
  json w{{"pairs", table},
         {"pushforward_validations", validations},
         {"checked", checked},
         {"skipped", skipped}};
  if (fail)
    return Verdict::make_negative(
        "fails", w, "In under the pulled-back cover but Out on the target");
  if (skipped > 0)
    return Verdict::make_inconclusive(w, "some target relations undecided");
  return Verdict::make_positive("holds", 0, w);
}

// -------------------------------------------------- restriction to U cap V

struct IntersectionRestriction {
  EndpointPtr endpoint;
  json report;
};

/// Rebuilds a representative inside U cap V from one representative in U and
/// one in V: keep points already in V, substitute an entourage-partner from
/// the other ray when possible, and send the finitely many exceptional
/// indices to a fixed point of the intersection.  The patch is a pointwise
/// map, so the result stays a catalogue generator.
inline IntersectionRestriction restrict_to_intersection(
    Context& ctx, const SubsetPtr& U, const SubsetPtr& V,
    const EndpointPtr& phi, const EndpointPtr& psi) {
  CoarseCover pair;
  pair.parts = {U, V};
  detail::require_verified_cover(ctx, pair, "restrict_to_intersection");
  Verdict se = same_endpoint(ctx, phi, psi);
  if (!se.positive())
    throw PreconditionError(
        "restrict_to_intersection: the inputs do not represent the same "
        "endpoint (" +
        se.label + ")");
  int64_t E = se.bound;
  Universe& u = ctx.universe();
  const DynBitset& ubits = ctx.eval(U);
  const DynBitset& vbits = ctx.eval(V);
  if (!ctx.eval(SubsetExpr::endpoint_image(phi)).is_subset_of(ubits))
    throw PreconditionError(
        "restrict_to_intersection: the first ray leaves U inside the work "
        "region");
  if (!ctx.eval(SubsetExpr::endpoint_image(psi)).is_subset_of(vbits))
    throw PreconditionError(
        "restrict_to_intersection: the second ray leaves V inside the work "
        "region");
  DynBitset uv = ubits;
  uv &= vbits;
  if (uv.none())
    throw DomainError(
        "restrict_to_intersection: U cap V is empty inside the work region");
  int64_t anchor_idx = -1;
  uv.for_each([&](size_t i) {
    if (anchor_idx < 0) anchor_idx = static_cast<int64_t>(i);
  });
  Point anchor = u.point(static_cast<size_t>(anchor_idx));

  DynBitset psi_in_v = ctx.eval(SubsetExpr::endpoint_image(psi));
  psi_in_v &= vbits;
  std::vector<int32_t> nearest;
  std::vector<int32_t> field = ctx.field_from(psi_in_v, &nearest);

  const Context::Materialized& m = ctx.materialize(phi);
  std::vector<std::pair<Point, Point>> table;
  std::set<std::string> seen;
  json exceptional = json::array();
  json substitutions = json::array();
  size_t kept = 0, kept_far = 0, subs = 0, exc = 0;
  for (size_t i = 0; i < m.pts.size(); ++i) {
    const Point& p = m.pts[i];
    int32_t idx = u.find(p);
    if (idx < 0) {
      ++kept_far;
      continue;
    }
    if (vbits.get(static_cast<size_t>(idx))) {
      ++kept;  // already in U cap V: phi stays inside U throughout
      continue;
    }
    bool fresh = seen.insert(p.str()).second;
    // an entourage partner on the other ray, provided it also lies in U so
    // the substitute lands in the intersection
    if (field[idx] <= E && field[idx] < kUnreached &&
        ubits.get(static_cast<size_t>(nearest[idx]))) {
      Point q = u.point(static_cast<size_t>(nearest[idx]));
      if (substitutions.size() < 50)
        substitutions.push_back(json{{"index", i},
                                     {"from", p.to_json()},
                                     {"to", q.to_json()},
                                     {"distance", field[idx]}});
      if (fresh) table.emplace_back(p, std::move(q));
      ++subs;
    } else {
      if (exceptional.size() < 50)
        exceptional.push_back(json{{"index", i}, {"point", p.to_json()}});
      if (fresh) table.emplace_back(p, anchor);
      ++exc;
    }
  }

  IntersectionRestriction out;
  if (table.empty()) {
    out.endpoint = phi;
  } else {
    MapPtr patch = CoarseMapSpec::pointwise(
        std::move(table), CoarseMapSpec::identity(ctx.space_ptr()));
    out.endpoint = EndpointSpec::pushforward(std::move(patch), phi);
  }

  EndpointValidation val = validate_endpoint(ctx, out.endpoint);
  const DynBitset& rbits = ctx.eval(SubsetExpr::endpoint_image(out.endpoint));
  bool inside = rbits.is_subset_of(uv);
  out.report = json{{"entourage_bound", E},
                    {"kept", kept},
                    {"kept_beyond_work_region", kept_far},
                    {"substituted", subs},
                    {"exceptional", exc},
                    {"anchor", anchor.to_json()},
                    {"substitution_sample", substitutions},
                    {"exceptional_sample", exceptional},
                    {"image_in_intersection", inside},
                    {"validation", val.to_json()},
                    {"close_to_phi", same_endpoint(ctx, out.endpoint, phi).label},
                    {"close_to_psi", same_endpoint(ctx, out.endpoint, psi).label}};
  return out;
}

// ------------------------------------------------------ endpoint separation

struct EndpointSeparation {
  Verdict status;  // separated / inconclusive
  CoarseCover cover;
  int case_tag = 0;  // 1: escaping subsequence of phi, 2: of psi
  UNeighborhoodVerdict postcondition;
  json report;
};

namespace detail {

/// Points of the materialized ray that sit farther from the other image than
/// the tolerance at their own scale: the escaping subsequence witness.
inline std::vector<Point> escaping_subsequence(Context& ctx,
                                               const EndpointPtr& ray,
                                               const DynBitset& other) {
  Universe& u = ctx.universe();
  const TruncationGrid& grid = ctx.grid();
  std::vector<int32_t> field = ctx.field_from(other);
  const DynBitset& bits = ctx.eval(SubsetExpr::endpoint_image(ray));
  std::vector<Point> out;
  bits.for_each([&](size_t i) {
    if (field[i] > scale_tolerance(grid, u.dist0(i)))
      out.push_back(u.point(i));
  });
  return out;
}

}  // namespace detail

/// Separated-ness of E(X): for Apart endpoints, build a two-part coarse
/// cover whose first part avoids an escaping subsequence of one ray and
/// whose second avoids the other ray's whole image, so the U-neighborhood
/// relation rejects the pair.
inline EndpointSeparation separate_endpoints(Context& ctx,
                                             const EndpointPtr& phi,
                                             const EndpointPtr& psi) {
  Verdict se = same_endpoint(ctx, phi, psi);
  if (!se.negative())
    throw PreconditionError(
        "separate_endpoints: the endpoints are not Apart (" + se.label + ")");
  const TruncationGrid& grid = ctx.grid();
  EndpointSeparation out;

  const DynBitset& phib = ctx.eval(SubsetExpr::endpoint_image(phi));
  const DynBitset& psib = ctx.eval(SubsetExpr::endpoint_image(psi));
  std::vector<Point> sub;
  SubsetPtr sub_expr, other_im;
  Verdict case_check = Verdict::make_inconclusive({}, "no subsequence tried");
  json search = json::array();
  for (int attempt = 1; attempt <= 2 && out.case_tag == 0; ++attempt) {
    const EndpointPtr& a = attempt == 1 ? phi : psi;
    const EndpointPtr& b = attempt == 1 ? psi : phi;
    const DynBitset& bb = attempt == 1 ? psib : phib;
    std::vector<Point> cand = detail::escaping_subsequence(ctx, a, bb);
    if (cand.empty()) {
      search.push_back(json{{"case", attempt}, {"outcome", "empty"}});
      continue;
    }
    SubsetPtr cexpr = SubsetExpr::finite(cand);
    Verdict v = decide_close(ctx, cexpr, SubsetExpr::endpoint_image(b));
    search.push_back(json{{"case", attempt},
                          {"candidates", cand.size()},
                          {"outcome", v.label}});
    if (v.negative()) {
      out.case_tag = attempt;
      sub = std::move(cand);
      sub_expr = std::move(cexpr);
      other_im = SubsetExpr::endpoint_image(b);
      case_check = std::move(v);
    }
  }
  if (out.case_tag == 0) {
    out.status = Verdict::make_inconclusive(
        json{{"search", search}},
        "neither ray yields a certified escaping subsequence");
    out.report = out.status.witness;
    return out;
  }

  // proximity partition around the certified-apart pair: the side carrying
  // the other image avoids the subsequence with growing margin, and vice
  // versa, at every scale of the window
  Separation s = separate(ctx, sub_expr, other_im);
  out.cover.parts = {s.d, s.c};

  Verdict a1 = decide_close(ctx, out.cover.parts[0], sub_expr);
  Verdict a2 = decide_close(ctx, out.cover.parts[1], other_im);
  Verdict cv = verify_coarse_cover(ctx, out.cover, 2);
  out.postcondition = in_u_neighborhood_unchecked(ctx, phi, psi, out.cover);
  json sample = json::array();
  for (size_t i = 0; i < sub.size() && i < 25; ++i)
    sample.push_back(sub[i].to_json());
  out.report = json{{"case", out.case_tag},
                    {"search", search},
                    {"subsequence_size", sub.size()},
                    {"subsequence_sample", sample},
                    {"subsequence_apart", case_check.to_json()},
                    {"part1_avoids_subsequence", a1.label},
                    {"part2_avoids_other_image", a2.label},
                    {"cover_verifies", cv.label},
                    {"postcondition", out.postcondition.to_json()}};
  out.cover.certificate = json{{"kind", "endpoint_separation"},
                               {"case", out.case_tag},
                               {"subsequence_sample", sample}};
  out.status = Verdict::make_positive("separated", 0, out.report);
  return out;
}

// --------------------------------------------------------------- index sets

/// I(p): the parts certifiably close to the ray's image.
struct IndexSet {
  std::vector<size_t> included;
  std::vector<size_t> undecided;
  std::vector<size_t> excluded;
  std::vector<Verdict> verdicts;

  json to_json() const {
    json vs = json::array();
    for (const Verdict& v : verdicts) vs.push_back(v.to_json());
    return json{{"included", included},
                {"undecided", undecided},
                {"excluded", excluded},
                {"verdicts", vs}};
  }
};

inline IndexSet index_set_unchecked(Context& ctx, const EndpointPtr& phi,
                                    const CoarseCover& cover) {
  IndexSet out;
  SubsetPtr im = SubsetExpr::endpoint_image(phi);
  for (size_t k = 0; k < cover.parts.size(); ++k) {
    Verdict v = decide_close(ctx, im, cover.parts[k]);
    if (v.positive()) out.included.push_back(k);
    else if (v.negative()) out.excluded.push_back(k);
    else out.undecided.push_back(k);
    out.verdicts.push_back(std::move(v));
  }
  return out;
}

inline IndexSet index_set(Context& ctx, const EndpointPtr& phi,
                          const CoarseCover& cover) {
  detail::require_verified_cover(ctx, cover, "index_set");
  EndpointValidation v = validate_endpoint(ctx, phi);
  if (!v.valid)
    throw PreconditionError("index_set: the endpoint does not validate");
  return index_set_unchecked(ctx, phi, cover);
}

// ------------------------------------------------- totally bounded structure

struct FiniteCoverStructure {
  Verdict iff_verdict;
  json classes;
  json report;
};

namespace detail {

/// Membership of p in U(S): the whole image inside one entourage of the
/// union over S, decided by the directed Hausdorff profile.
inline Verdict u_of_s_membership(Context& ctx, const DynBitset& image,
                                 const DynBitset& union_bits) {
  const TruncationGrid& grid = ctx.grid();
  Profile prof = dir_hausdorff_profile(ctx, image, union_bits);
  if (window_all_empty(prof, grid))
    return Verdict::make_inconclusive(prof.to_json(),
                                      "image empty on the window balls");
  return decide_profile(prof, grid, kInOut);
}

}  // namespace detail

/// The finite cover (U(S))_S of the end space associated to one coarse
/// cover, plus the iff-check against the U-neighborhood relation:
/// q in U[p] exactly when some S contains both.
inline FiniteCoverStructure finite_cover_structure(
    Context& ctx, const std::vector<EndpointPtr>& endpoints,
    const CoarseCover& cover) {
  detail::require_verified_cover(ctx, cover, "finite_cover_structure");
  if (cover.parts.size() > 12)
    throw ConfigError(
        "finite_cover_structure enumerates subsets of the index set; at most "
        "12 parts are supported");
  EndpointClasses cls = dedup_endpoints(ctx, endpoints);
  size_t n = cls.reps.size();

  std::vector<IndexSet> isets;
  std::vector<const DynBitset*> images;
  for (const EndpointPtr& p : cls.reps) {
    isets.push_back(index_set_unchecked(ctx, p, cover));
    images.push_back(&ctx.eval(SubsetExpr::endpoint_image(p)));
  }

  // subsets worth testing: those inside some I(p)
  std::set<std::vector<size_t>> wanted;
  for (const IndexSet& is : isets) {
    size_t m = is.included.size();
    for (uint64_t mask = 1; mask < (uint64_t(1) << m); ++mask) {
      std::vector<size_t> s;
      for (size_t b = 0; b < m; ++b)
        if (mask & (uint64_t(1) << b)) s.push_back(is.included[b]);
      wanted.insert(std::move(s));
    }
  }

  // membership verdicts per (endpoint, S)
  std::map<std::vector<size_t>, std::vector<Verdict>> membership;
  for (const std::vector<size_t>& s : wanted) {
    DynBitset ub = ctx.universe().empty_set();
    for (size_t k : s) ub |= ctx.eval(cover.parts[k]);
    std::vector<Verdict> per;
    for (size_t i = 0; i < n; ++i)
      per.push_back(detail::u_of_s_membership(ctx, *images[i], ub));
    membership.emplace(s, std::move(per));
  }

  auto subset_of = [](const std::vector<size_t>& a,
                      const std::vector<size_t>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
  };

  json classes = json::array();
  for (const auto& [s, per] : membership) {
    json members = json::array();
    for (size_t i = 0; i < n; ++i)
      if (per[i].positive() && subset_of(s, isets[i].included))
        members.push_back(i);
    if (!members.empty())
      classes.push_back(json{{"S", s}, {"members", members}});
  }

  json pairs = json::array();
  bool fail = false;
  size_t skipped = 0, checked = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i; j < n; ++j) {
      UNeighborhoodVerdict rel =
          in_u_neighborhood_unchecked(ctx, cls.reps[i], cls.reps[j], cover);
      // shared classes live inside I(p) cap I(q)
      std::vector<size_t> common;
      std::set_intersection(isets[i].included.begin(),
                            isets[i].included.end(),
                            isets[j].included.begin(),
                            isets[j].included.end(),
                            std::back_inserter(common));
      bool found = false, undecided = false;
      for (const auto& [s, per] : membership) {
        if (!subset_of(s, common)) continue;
        if (per[i].positive() && per[j].positive()) {
          found = true;
          break;
        }
        if (!per[i].decisive() || !per[j].decisive()) undecided = true;
      }
      json entry{{"p", i}, {"q", j}, {"relation", rel.label}};
      if (!rel.decisive() || (!found && undecided)) {
        ++skipped;
        entry["status"] = "skipped";
      } else if (rel.positive() != found) {
        fail = true;
        entry["status"] = "mismatch";
        entry["shared_class_found"] = found;
      } else {
        ++checked;
        entry["status"] = "consistent";
      }
      pairs.push_back(std::move(entry));
    }

  FiniteCoverStructure out;
  out.classes = classes;
  json w{{"classes", classes},
         {"pairs", pairs},
         {"checked", checked},
         {"skipped", skipped}};
  if (fail)
    out.iff_verdict = Verdict::make_negative(
        "fails", w, "the neighborhood relation disagrees with the class "
                    "cover");
  else if (checked == 0)
    out.iff_verdict = Verdict::make_inconclusive(w, "no decisive pairs");
  else if (skipped > 0)
    out.iff_verdict = Verdict::make_inconclusive(w, "some pairs undecided");
  else
    out.iff_verdict = Verdict::make_positive("holds", 0, w);
  out.report = std::move(w);
  return out;
}

// ------------------------------------------------------- distance bounds

/// A certified lower-bound function on the distance between two endpoint
/// classes: a chi profile against an escaping subsequence, or zero when the
/// endpoints agree.
struct EndpointDistanceBound {
  int case_tag = 0;  // 0: equal endpoints, 1/2: subsequence case
  Profile f;
  Verdict status;  // zero / separating / inconclusive
  json report;

  json to_json() const {
    return json{{"case", case_tag},
                {"f", f.to_json()},
                {"status", status.to_json()},
                {"slack_c", 0},
                {"detail", report}};
  }
};

inline EndpointDistanceBound endpoint_distance_bound(Context& ctx,
                                                     const EndpointPtr& phi,
                                                     const EndpointPtr& psi) {
  const TruncationGrid& grid = ctx.grid();
  EndpointDistanceBound out;
  Verdict se = same_endpoint(ctx, phi, psi);
  out.report = json{{"same_endpoint", se.to_json()}};
  if (se.positive()) {
    out.case_tag = 0;
    out.f.radii = grid.radii;
    out.f.values.assign(grid.size(), 0);
    out.f.certified.assign(grid.size(), 1);
    out.status = Verdict::make_positive("zero", 0, json{},
                                        "equal endpoints have distance zero");
    return out;
  }
  if (!se.decisive()) {
    out.status = Verdict::make_inconclusive(se.witness,
                                            "same_endpoint is undecided");
    return out;
  }
  // Apart: find the subsequence case. Case 1 escapes from psi, case 2 from
  // phi, matching the order of the defining dichotomy.
  json search = json::array();
  for (int attempt = 1; attempt <= 2 && out.case_tag == 0; ++attempt) {
    const EndpointPtr& whole = attempt == 1 ? phi : psi;
    const EndpointPtr& sub_ray = attempt == 1 ? psi : phi;
    const DynBitset& wb = ctx.eval(SubsetExpr::endpoint_image(whole));
    std::vector<Point> cand = detail::escaping_subsequence(ctx, sub_ray, wb);
    if (cand.empty()) {
      search.push_back(json{{"case", attempt}, {"outcome", "empty"}});
      continue;
    }
    SubsetPtr cexpr = SubsetExpr::finite(std::move(cand));
    ChiProfile chi =
        chi_profile(ctx, SubsetExpr::endpoint_image(whole), cexpr);
    Verdict v = decide_close(chi, grid);
    search.push_back(json{{"case", attempt}, {"outcome", v.label}});
    if (v.negative()) {
      out.case_tag = attempt;
      out.f = chi.profile;
      out.status = Verdict::make_positive(
          "separating",
          *std::max_element(out.f.values.begin(), out.f.values.end()),
          json{{"chi", chi.to_json()}});
    }
  }
  out.report["search"] = search;
  if (out.case_tag == 0)
    out.status = Verdict::make_inconclusive(
        json{{"search", search}},
        "no certified escaping subsequence in either direction");
  return out;
}

/// The cover-level lower bound of the totally-bounded lemma: the pointwise
/// minimum of chi profiles against every class-union the endpoint escapes,
/// plus the complement-of-I(p) case.
struct CoverSeparationBound {
  Profile f;
  Verdict status;  // separating / inconclusive
  json report;
};

inline CoverSeparationBound cover_separation_bound(Context& ctx,
                                                   const EndpointPtr& phi,
                                                   const CoarseCover& cover) {
  detail::require_verified_cover(ctx, cover, "cover_separation_bound");
  if (cover.parts.size() > 12)
    throw ConfigError(
        "cover_separation_bound enumerates subsets of the index set; at most "
        "12 parts are supported");
  EndpointValidation val = validate_endpoint(ctx, phi);
  if (!val.valid)
    throw PreconditionError(
        "cover_separation_bound: the endpoint does not validate");
  const TruncationGrid& grid = ctx.grid();
  SubsetPtr im = SubsetExpr::endpoint_image(phi);
  const DynBitset& imb = ctx.eval(im);
  IndexSet is = index_set_unchecked(ctx, phi, cover);

  std::vector<Profile> contributions;
  json cases = json::array();
  size_t skipped = 0;

  // case 1: every class union the endpoint certifiably escapes
  size_t np = cover.parts.size();
  for (uint64_t mask = 1; mask < (uint64_t(1) << np); ++mask) {
    std::vector<size_t> s;
    for (size_t b = 0; b < np; ++b)
      if (mask & (uint64_t(1) << b)) s.push_back(b);
    DynBitset ub = ctx.universe().empty_set();
    std::vector<SubsetPtr> us;
    for (size_t k : s) {
      ub |= ctx.eval(cover.parts[k]);
      us.push_back(cover.parts[k]);
    }
    Verdict mem = detail::u_of_s_membership(ctx, imb, ub);
    if (mem.positive()) continue;  // p lies in U(S): no bound from S
    if (!mem.negative()) {
      ++skipped;
      cases.push_back(json{{"S", s}, {"status", "undecided"}});
      continue;
    }
    SubsetPtr union_expr =
        us.size() == 1 ? us[0] : SubsetExpr::union_of(std::move(us));
    std::vector<Point> sub = detail::escaping_subsequence(ctx, phi, ub);
    if (sub.empty()) {
      ++skipped;
      cases.push_back(json{{"S", s}, {"status", "no_subsequence"}});
      continue;
    }
    SubsetPtr sexpr = SubsetExpr::finite(std::move(sub));
    Verdict apart = decide_close(ctx, sexpr, union_expr);
    if (!apart.negative()) {
      ++skipped;
      cases.push_back(json{{"S", s}, {"status", "subsequence_undecided"}});
      continue;
    }
    ChiProfile chi = chi_profile(ctx, sexpr, union_expr);
    cases.push_back(json{{"S", s},
                         {"status", "contributes"},
                         {"chi", chi.profile.to_json()}});
    contributions.push_back(chi.profile);
  }

  // case 2: the union of the parts outside I(p)
  std::vector<SubsetPtr> outside;
  for (size_t k = 0; k < np; ++k)
    if (std::find(is.included.begin(), is.included.end(), k) ==
        is.included.end())
      outside.push_back(cover.parts[k]);
  if (!outside.empty()) {
    SubsetPtr oexpr = outside.size() == 1 ? outside[0]
                                          : SubsetExpr::union_of(outside);
    Verdict apart = decide_close(ctx, im, oexpr);
    if (apart.negative()) {
      ChiProfile chi = chi_profile(ctx, im, oexpr);
      cases.push_back(json{{"S", "complement_of_I"},
                           {"status", "contributes"},
                           {"chi", chi.profile.to_json()}});
      contributions.push_back(chi.profile);
    } else {
      ++skipped;
      cases.push_back(json{{"S", "complement_of_I"},
                           {"status", apart.positive() ? "close" : "undecided"}});
    }
  }

  CoverSeparationBound out;
  out.f.radii = grid.radii;
  for (size_t r = 0; r < grid.size(); ++r) {
    int64_t best = kInfDist;
    bool all_cert = true, any = false;
    for (const Profile& c : contributions) {
      if (c.values[r] == kEmpty) continue;
      any = true;
      best = std::min(best, c.values[r]);
      all_cert = all_cert && c.certified[r];
    }
    // an uncertified contribution may shrink in truth, so the minimum is
    // certified only when every contributor is
    for (const Profile& c : contributions)
      if (c.values[r] != kEmpty) all_cert = all_cert && c.certified[r];
    out.f.values.push_back(any ? best : kEmpty);
    out.f.certified.push_back(any && all_cert ? 1 : 0);
  }
  out.report = json{{"index_set", is.to_json()},
                    {"cases", cases},
                    {"skipped", skipped},
                    {"f", out.f.to_json()}};
  if (contributions.empty()) {
    out.status = Verdict::make_inconclusive(
        out.report, "no separating classes within the truncation");
  } else {
    bool unbounded = true;
    for (size_t r = grid.window_begin(); r < grid.size(); ++r)
      unbounded = unbounded && out.f.values[r] != kEmpty &&
                  out.f.values[r] > grid.tau_at(r);
    if (unbounded)
      out.status = Verdict::make_positive(
          "separating", out.f.values.back(), out.report);
    else
      out.status = Verdict::make_inconclusive(
          out.report, "the minimum does not clear the window tolerances");
  }
  return out;
}

}  // namespace coarse
