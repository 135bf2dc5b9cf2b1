#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "coarse/context.hpp"
#include "coarse/verdict.hpp"

namespace coarse {

/// sup_{x in ball(R)} d(f(x), g(x)) per grid radius; Close iff the profile
/// plateaus, Apart iff it clears tau across the window.
inline Verdict maps_close(Context& ctx, const MapPtr& f, const MapPtr& g) {
  if (f->source->descriptor() != g->source->descriptor() ||
      f->target->descriptor() != g->target->descriptor())
    throw PreconditionError("maps_close requires matching source and target");
  if (f->source->descriptor() != ctx.space().descriptor())
    throw PreconditionError("maps_close source must be the context space");
  Universe& u = ctx.universe();
  const TruncationGrid& grid = ctx.grid();
  const Space& T = *f->target;
  size_t m = grid.size();
  std::vector<int64_t> sup(m, 0);
  std::vector<json> attain(m);
  for (size_t i = 0; i < u.size(); ++i) {
    int64_t d0 = u.dist0(i);
    if (d0 > grid.r_max()) continue;
    Point fx = f->apply(u.point(i));
    Point gx = g->apply(u.point(i));
    int64_t d = T.distance(fx, gx);
    for (size_t r = 0; r < m; ++r) {
      if (d0 > grid.radii[r]) continue;
      if (d > sup[r] || attain[r].is_null()) {
        if (d > sup[r]) sup[r] = d;
        if (d >= sup[r])
          attain[r] = json{{"x", u.point(i).to_json()},
                           {"fx", fx.to_json()},
                           {"gx", gx.to_json()},
                           {"distance", d}};
      }
    }
  }
  Profile p;
  p.radii = grid.radii;
  p.values = sup;
  p.certified.assign(m, 1);  // sup over a fully visible ball is exact
  p.attain = attain;
  return decide_profile(p, grid, kCloseApart);
}

/// Coarse-map validation: scale-1 uniformity (max image step over unit
/// pairs, stable across the window) and properness (preimage-of-ball radii
/// stable across the window, sampled on small and image-offset ball radii).
inline Verdict validate_coarse_map(Context& ctx, const MapPtr& f) {
  if (f->source->descriptor() != ctx.space().descriptor())
    throw PreconditionError("map source must be the context space");
  Universe& u = ctx.universe();
  const TruncationGrid& grid = ctx.grid();
  const Space& S = ctx.space();
  const Space& T = *f->target;
  size_t m = grid.size();
  size_t wb = grid.window_begin();

  // --- uniformity at generator scale
  std::vector<int64_t> L(m, 0);
  std::vector<json> Lw(m);
  std::vector<Point> nb;
  auto brs = S.bridges();
  for (size_t i = 0; i < u.size(); ++i) {
    int64_t d0 = u.dist0(i);
    if (d0 > grid.r_max()) continue;
    const Point& x = u.point(i);
    Point fx = f->apply(x);
    int64_t step = 0;
    Point worst;
    S.neighbors(x, nb);
    for (auto& br : brs) {  // weight-1 bridges are unit pairs too
      if (br.w > 1) continue;
      if (x == br.u) nb.push_back(br.v);
      if (x == br.v) nb.push_back(br.u);
    }
    for (const auto& y : nb) {
      int64_t d = T.distance(fx, f->apply(y));
      if (d > step) {
        step = d;
        worst = y;
      }
    }
    for (size_t r = 0; r < m; ++r) {
      if (d0 > grid.radii[r]) continue;
      if (step > L[r]) {
        L[r] = step;
        Lw[r] = json{{"x", x.to_json()},
                     {"y", worst.to_json()},
                     {"image_step", step}};
      }
    }
  }
  bool l_stable = true;
  for (size_t r = wb + 1; r < m; ++r) l_stable = l_stable && L[r] == L[wb];
  bool l_diverges = true;
  for (size_t r = wb; r < m; ++r)
    l_diverges = l_diverges && L[r] > grid.tau_at(r);

  // --- properness rows
  int64_t rc = std::min<int64_t>(8, (grid.tau_at(wb) + 1) / 2);
  int64_t r0 = T.distance(f->apply(S.basepoint()), T.basepoint());
  std::vector<int64_t> rows;
  for (int64_t r = 0; r <= rc; ++r) rows.push_back(r);
  for (int64_t r = 0; r <= rc; ++r) rows.push_back(r0 + r);
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  // P[radius][row] = max dist0(x) with x in ball(radius), d(f x, y0) <= row
  std::vector<std::vector<int64_t>> P(m,
                                      std::vector<int64_t>(rows.size(), -1));
  std::vector<std::vector<json>> Pw(m, std::vector<json>(rows.size()));
  for (size_t i = 0; i < u.size(); ++i) {
    int64_t d0 = u.dist0(i);
    if (d0 > grid.r_max()) continue;
    int64_t c = T.distance(f->apply(u.point(i)), T.basepoint());
    for (size_t r = 0; r < m; ++r) {
      if (d0 > grid.radii[r]) continue;
      for (size_t k = 0; k < rows.size(); ++k)
        if (c <= rows[k] && d0 > P[r][k]) {
          P[r][k] = d0;
          Pw[r][k] = u.point(i).to_json();
        }
    }
  }
  bool p_stable = true;
  size_t bad_row = rows.size();
  for (size_t k = 0; k < rows.size(); ++k) {
    for (size_t r = wb + 1; r < m; ++r)
      if (P[r][k] != P[wb][k]) {
        p_stable = false;
        if (bad_row == rows.size()) bad_row = k;
      }
  }
  bool p_diverges = false;
  if (bad_row < rows.size()) {
    p_diverges = true;
    for (size_t r = wb; r < m; ++r)
      p_diverges = p_diverges && P[r][bad_row] > grid.tau_at(r);
    for (size_t r = wb + 1; r < m && p_diverges; ++r)
      p_diverges = p_diverges && P[r][bad_row] > P[r - 1][bad_row];
  }

  json table = json::array();
  for (size_t k = 0; k < rows.size(); ++k) {
    json per = json::array();
    for (size_t r = 0; r < m; ++r) per.push_back(P[r][k]);
    table.push_back(json{{"ball_radius", rows[k]}, {"preimage_radius", per}});
  }
  json lwin = json::array();
  for (size_t r = wb; r < m; ++r)
    lwin.push_back(json{{"radius", grid.radii[r]}, {"L", L[r]}});

  if (l_stable && p_stable)
    return Verdict::make_positive(
        kHoldsFails.positive, L[wb],
        json{{"uniform", lwin}, {"properness", table}},
        "coarsely uniform and coarsely proper at the tested scales");
  if (l_diverges) {
    json esc = json::array();
    for (size_t r = wb; r < m; ++r) esc.push_back(Lw[r]);
    return Verdict::make_negative(kHoldsFails.negative,
                                  json{{"reason", "uniformity_diverges"},
                                       {"uniform", lwin},
                                       {"witness_pairs", esc}},
                                  "image steps of unit pairs diverge");
  }
  if (p_diverges) {
    json esc = json::array();
    for (size_t r = wb; r < m; ++r) esc.push_back(Pw[r][bad_row]);
    return Verdict::make_negative(
        kHoldsFails.negative,
        json{{"reason", "preimage_escapes"},
             {"ball_radius", rows[bad_row]},
             {"properness", table},
             {"escaping_preimage", esc}},
        "preimage of a bounded ball grows without bound");
  }
  return Verdict::make_inconclusive(
      json{{"uniform", lwin}, {"properness", table}},
      "uniformity or properness not yet stable on this grid");
}

}  // namespace coarse
