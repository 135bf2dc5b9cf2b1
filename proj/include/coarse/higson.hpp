#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "coarse/covers.hpp"
#include "coarse/rational.hpp"

namespace coarse {

// ---------------------------------------------------------------------------
// Bounded rational-valued functions on a space, slow-oscillation (Higson)
// checks, vanishing-at-infinity checks, and the two sheaf-style axioms for
// pair covers: gluing compatible local functions and bounding the set where
// a locally vanishing function stays large.
// ---------------------------------------------------------------------------

struct BoundedFn;
using FnPtr = std::shared_ptr<const BoundedFn>;

/// A catalogue rule for a bounded function with an exact rational bound.
/// Evaluation is exact at every universe point, so all comparisons against
/// tolerances are integer arithmetic in disguise.
struct BoundedFn {
  enum class Kind {
    Constant,    // value
    Decay,       // 1 / (1 + d(x0, x))
    Angle,       // coords[axis] / max(1, d(x0, x)): discrete direction
    Sign,        // +1 when coords[axis] >= 0, else -1
    NormParity,  // (-1)^d(x0, x): oscillates, deliberately not Higson
    Table,       // finite exceptions + default value
    Sum,         // a + b
    Product,     // a * b
    Scale,       // value * a
    Glued,       // f1 on U1; f2 + g on U2 \ U1; 0 elsewhere
  };

  Kind kind = Kind::Constant;
  Rational value;  // Constant value, Scale factor, Table default
  int axis = 0;    // Angle, Sign
  std::vector<std::pair<Point, Rational>> entries;  // Table
  FnPtr a, b, g;                                    // children; Glued f1,f2,g
  SubsetPtr u1, u2;                                 // Glued parts

  static FnPtr constant(Rational q) {
    auto f = make(Kind::Constant);
    f->value = q;
    return f;
  }
  static FnPtr decay() { return make(Kind::Decay); }
  static FnPtr angle(int axis) {
    auto f = make(Kind::Angle);
    f->axis = axis;
    return f;
  }
  static FnPtr sign(int axis) {
    auto f = make(Kind::Sign);
    f->axis = axis;
    return f;
  }
  static FnPtr norm_parity() { return make(Kind::NormParity); }
  static FnPtr table(std::vector<std::pair<Point, Rational>> entries,
                     Rational fallback) {
    auto f = make(Kind::Table);
    f->entries = std::move(entries);
    f->value = fallback;
    return f;
  }
  static FnPtr sum(FnPtr x, FnPtr y) {
    auto f = make(Kind::Sum);
    f->a = std::move(x);
    f->b = std::move(y);
    return f;
  }
  static FnPtr product(FnPtr x, FnPtr y) {
    auto f = make(Kind::Product);
    f->a = std::move(x);
    f->b = std::move(y);
    return f;
  }
  static FnPtr scale(Rational c, FnPtr x) {
    auto f = make(Kind::Scale);
    f->value = c;
    f->a = std::move(x);
    return f;
  }
  static FnPtr glued(SubsetPtr u1, SubsetPtr u2, FnPtr f1, FnPtr f2,
                     FnPtr corr) {
    auto f = make(Kind::Glued);
    f->u1 = std::move(u1);
    f->u2 = std::move(u2);
    f->a = std::move(f1);
    f->b = std::move(f2);
    f->g = std::move(corr);
    return f;
  }

  /// Certified bound M with |f| <= M everywhere, from the rule shape.
  Rational bound() const {
    switch (kind) {
      case Kind::Constant: return value.abs();
      case Kind::Decay:
      case Kind::Angle:
      case Kind::Sign:
      case Kind::NormParity: return Rational(1);
      case Kind::Table: {
        Rational m = value.abs();
        for (const auto& [p, q] : entries) m = std::max(m, q.abs());
        return m;
      }
      case Kind::Sum: return a->bound() + b->bound();
      case Kind::Product: return a->bound() * b->bound();
      case Kind::Scale: return value.abs() * a->bound();
      case Kind::Glued:
        return std::max(a->bound(), b->bound() + g->bound());
    }
    throw InternalError("unhandled function kind");
  }

  json descriptor() const {
    switch (kind) {
      case Kind::Constant:
        return json{{"rule", "constant"}, {"value", value.str()}};
      case Kind::Decay: return json{{"rule", "decay"}};
      case Kind::Angle: return json{{"rule", "angle"}, {"axis", axis}};
      case Kind::Sign: return json{{"rule", "sign"}, {"axis", axis}};
      case Kind::NormParity: return json{{"rule", "norm_parity"}};
      case Kind::Table: {
        json rows = json::array();
        for (const auto& [p, q] : entries)
          rows.push_back({{"point", p.to_json()}, {"value", q.str()}});
        return json{{"rule", "table"},
                    {"entries", rows},
                    {"default", value.str()}};
      }
      case Kind::Sum:
        return json{{"rule", "sum"},
                    {"terms", {a->descriptor(), b->descriptor()}}};
      case Kind::Product:
        return json{{"rule", "product"},
                    {"terms", {a->descriptor(), b->descriptor()}}};
      case Kind::Scale:
        return json{{"rule", "scale"},
                    {"factor", value.str()},
                    {"inner", a->descriptor()}};
      case Kind::Glued:
        return json{{"rule", "glued"},
                    {"u1", subset_to_json(*u1)},
                    {"u2", subset_to_json(*u2)},
                    {"f1", a->descriptor()},
                    {"f2", b->descriptor()},
                    {"g", g->descriptor()}};
    }
    throw InternalError("unhandled function kind");
  }

 private:
  static std::shared_ptr<BoundedFn> make(Kind k) {
    auto f = std::make_shared<BoundedFn>();
    f->kind = k;
    return f;
  }
};

/// Exact value of f at universe point i.
inline Rational eval_fn(Context& ctx, const BoundedFn& f, size_t i) {
  Universe& u = ctx.universe();
  switch (f.kind) {
    case BoundedFn::Kind::Constant: return f.value;
    case BoundedFn::Kind::Decay:
      return Rational(1, 1 + static_cast<int64_t>(u.dist0(i)));
    case BoundedFn::Kind::Angle: {
      const Point& p = u.point(i);
      if (p.kind != Point::Kind::Grid ||
          f.axis < 0 || static_cast<size_t>(f.axis) >= p.coords.size())
        throw ConfigError("angle function needs grid coordinates with a "
                          "valid axis");
      return Rational(p.coords[static_cast<size_t>(f.axis)],
                      std::max<int64_t>(1, u.dist0(i)));
    }
    case BoundedFn::Kind::Sign: {
      const Point& p = u.point(i);
      if (p.kind != Point::Kind::Grid ||
          f.axis < 0 || static_cast<size_t>(f.axis) >= p.coords.size())
        throw ConfigError("sign function needs grid coordinates with a "
                          "valid axis");
      return Rational(p.coords[static_cast<size_t>(f.axis)] >= 0 ? 1 : -1);
    }
    case BoundedFn::Kind::NormParity:
      return Rational(u.dist0(i) % 2 == 0 ? 1 : -1);
    case BoundedFn::Kind::Table: {
      const Point& p = u.point(i);
      for (const auto& [q, v] : f.entries)
        if (q == p) return v;
      return f.value;
    }
    case BoundedFn::Kind::Sum:
      return eval_fn(ctx, *f.a, i) + eval_fn(ctx, *f.b, i);
    case BoundedFn::Kind::Product:
      return eval_fn(ctx, *f.a, i) * eval_fn(ctx, *f.b, i);
    case BoundedFn::Kind::Scale: return f.value * eval_fn(ctx, *f.a, i);
    case BoundedFn::Kind::Glued: {
      if (ctx.eval(f.u1).get(i)) return eval_fn(ctx, *f.a, i);
      if (ctx.eval(f.u2).get(i))
        return eval_fn(ctx, *f.b, i) + eval_fn(ctx, *f.g, i);
      return Rational(0);
    }
  }
  throw InternalError("unhandled function kind");
}

namespace detail {

/// Candidate cut radii for "past R" scans: 0 plus the grid radii, so a
/// variation that is small everywhere reports R = 0.
inline std::vector<int64_t> cut_radii(const TruncationGrid& grid) {
  std::vector<int64_t> out{0};
  out.insert(out.end(), grid.radii.begin(), grid.radii.end());
  return out;
}

}  // namespace detail

/// Higson condition at entourage bound n: the variation of f over pairs at
/// distance <= n must fall below eps outside some ball.  Positive verdicts
/// carry the least grid radius that works; negative ones carry the worst
/// witness pair beyond the largest grid radius.
inline Verdict higson_check(Context& ctx, const FnPtr& f, int64_t n,
                            const Rational& eps) {
  if (!f) throw ConfigError("higson_check needs a function");
  if (n < 0) throw ConfigError("entourage bound must be >= 0");
  if (eps <= Rational(0)) throw ConfigError("tolerance must be positive");
  const TruncationGrid& grid = ctx.grid();
  const int64_t r_max = grid.radii.back();
  const int64_t W = ctx.work() - n;  // pairs stay inside the work region
  if (W <= r_max)
    throw ConfigError("entourage bound too large for the work region: need "
                      "n <= work - largest radius");

  Universe& u = ctx.universe();
  const size_t N = u.size();
  std::vector<Rational> vals(N);
  for (size_t i = 0; i < N; ++i) vals[i] = eval_fn(ctx, *f, i);

  // Per-source variation over ball(x, n), folded into a suffix maximum by
  // depth so every cut radius reads off in O(1).
  const Space& space = ctx.space();
  std::vector<Rational> worst_at_depth(static_cast<size_t>(W) + 1,
                                       Rational(0));
  struct Witness {
    Point x, y;
    Rational fx, fy;
    int64_t depth = -1;
  };
  std::vector<Witness> witness_at_depth(static_cast<size_t>(W) + 1);
  for (size_t i = 0; i < N; ++i) {
    int64_t d0 = u.dist0(i);
    if (d0 > W) continue;
    for (const Point& y : space.ball(u.point(i), n)) {
      int32_t j = u.find(y);
      if (j < 0) continue;
      Rational diff = (vals[static_cast<size_t>(j)] - vals[i]).abs();
      auto& cur = worst_at_depth[static_cast<size_t>(d0)];
      if (diff > cur) {
        cur = diff;
        witness_at_depth[static_cast<size_t>(d0)] =
            Witness{u.point(i), y, vals[i], vals[static_cast<size_t>(j)], d0};
      }
    }
  }
  std::vector<Rational> suffix(worst_at_depth.size() + 1, Rational(0));
  std::vector<int64_t> arg_depth(worst_at_depth.size() + 1, -1);
  for (size_t d = worst_at_depth.size(); d-- > 0;) {
    suffix[d] = std::max(worst_at_depth[d], suffix[d + 1]);
    arg_depth[d] =
        worst_at_depth[d] >= suffix[d + 1] && witness_at_depth[d].depth >= 0
            ? static_cast<int64_t>(d)
            : arg_depth[d + 1];
  }
  auto variation_past = [&](int64_t R) {  // over x with d0 > R
    size_t d = static_cast<size_t>(std::min<int64_t>(R + 1, W + 1));
    return suffix[d];
  };

  for (int64_t R : detail::cut_radii(grid)) {
    if (R > r_max) break;
    if (variation_past(R) <= eps) {
      return Verdict::make_positive(
          "higson_at", R,
          json{{"R", R},
               {"n", n},
               {"eps", eps.str()},
               {"max_variation", variation_past(R).str()}});
    }
  }
  int64_t bad = arg_depth[static_cast<size_t>(r_max) + 1];
  json w{{"n", n},
         {"eps", eps.str()},
         {"max_variation", variation_past(r_max).str()},
         {"scanned_up_to", W}};
  if (bad >= 0) {
    const Witness& ww = witness_at_depth[static_cast<size_t>(bad)];
    w["pair"] = json{{"x", ww.x.to_json()},
                     {"y", ww.y.to_json()},
                     {"f_x", ww.fx.str()},
                     {"f_y", ww.fy.str()},
                     {"depth", ww.depth}};
  }
  return Verdict::make_negative(
      "variation_persists", w,
      "variation above tolerance survives past every grid radius");
}

/// Vanishing at infinity: {|f| >= eps} must lie inside some ball.  The
/// optional domain restricts the scan (used for overlaps and cover parts).
inline Verdict tends_to_zero_check(Context& ctx, const FnPtr& f,
                                   const Rational& eps,
                                   const SubsetPtr& domain = nullptr) {
  if (!f) throw ConfigError("tends_to_zero_check needs a function");
  if (eps <= Rational(0)) throw ConfigError("tolerance must be positive");
  const TruncationGrid& grid = ctx.grid();
  const int64_t r_max = grid.radii.back();
  Universe& u = ctx.universe();
  const DynBitset* dom = domain ? &ctx.eval(domain) : nullptr;

  const int64_t W = ctx.work();
  std::vector<Rational> worst_at_depth(static_cast<size_t>(W) + 1,
                                       Rational(0));
  std::vector<int64_t> arg_at_depth(static_cast<size_t>(W) + 1, -1);
  for (size_t i = 0; i < u.size(); ++i) {
    if (dom && !dom->get(i)) continue;
    int64_t d0 = u.dist0(i);
    Rational v = eval_fn(ctx, *f, i).abs();
    auto& cur = worst_at_depth[static_cast<size_t>(d0)];
    if (v > cur) {
      cur = v;
      arg_at_depth[static_cast<size_t>(d0)] = static_cast<int64_t>(i);
    }
  }
  std::vector<Rational> suffix(worst_at_depth.size() + 1, Rational(0));
  std::vector<int64_t> arg(worst_at_depth.size() + 1, -1);
  for (size_t d = worst_at_depth.size(); d-- > 0;) {
    suffix[d] = std::max(worst_at_depth[d], suffix[d + 1]);
    arg[d] = worst_at_depth[d] >= suffix[d + 1] && arg_at_depth[d] >= 0
                 ? arg_at_depth[d]
                 : arg[d + 1];
  }

  for (int64_t R : detail::cut_radii(grid)) {
    if (R > r_max) break;
    size_t d = static_cast<size_t>(std::min<int64_t>(R + 1, W + 1));
    if (suffix[d] < eps) {
      return Verdict::make_positive(
          "vanishes_past", R,
          json{{"R", R}, {"eps", eps.str()}, {"max_tail", suffix[d].str()}});
    }
  }
  size_t d = static_cast<size_t>(std::min<int64_t>(r_max + 1, W + 1));
  json w{{"eps", eps.str()},
         {"max_tail", suffix[d].str()},
         {"scanned_up_to", W}};
  if (arg[d] >= 0) {
    size_t i = static_cast<size_t>(arg[d]);
    w["witness"] = json{{"point", u.point(i).to_json()},
                        {"value", eval_fn(ctx, *f, i).str()},
                        {"depth", u.dist0(i)}};
  }
  return Verdict::make_negative(
      "persists", w,
      "values at or above tolerance survive past every grid radius");
}

/// f1 - (f2 + g), the compatibility defect of a gluing datum.
inline FnPtr glue_defect(const FnPtr& f1, const FnPtr& f2, const FnPtr& g) {
  return BoundedFn::sum(
      f1, BoundedFn::scale(Rational(-1), BoundedFn::sum(f2, g)));
}

/// Glue two local functions along a verified pair cover.  Preconditions —
/// the pair must verify as a coarse cover and the defect f1 - f2 - g must
/// vanish at infinity on the overlap — throw when violated.  The result
/// takes f1 on U1 (precedence on the overlap), f2 + g on U2 \ U1, and 0
/// outside the union.
struct GlueResult {
  FnPtr fn;
  json report;
};

inline GlueResult glue(Context& ctx, const SubsetPtr& u1, const SubsetPtr& u2,
                       const FnPtr& f1, const FnPtr& f2, const FnPtr& g,
                       const Rational& eps) {
  if (!u1 || !u2 || !f1 || !f2 || !g)
    throw ConfigError("glue needs two parts and three functions");
  CoarseCover cover;
  cover.parts = {u1, u2};
  Verdict cv = verify_coarse_cover(ctx, cover, 2);
  if (!cv.positive())
    throw PreconditionError("glue: (U1, U2) does not verify as a coarse "
                            "cover (" + cv.label + ")");
  SubsetPtr overlap = SubsetExpr::intersection_of(u1, u2);
  Verdict tz = tends_to_zero_check(ctx, glue_defect(f1, f2, g), eps, overlap);
  if (!tz.positive())
    throw PreconditionError(
        "glue: f1 - f2 - g does not vanish at infinity on the overlap (" +
        tz.label + ")");

  GlueResult out;
  out.fn = BoundedFn::glued(u1, u2, f1, f2, g);
  out.report = json{{"cover", cv.to_json()},
                    {"compatibility", tz.to_json()},
                    {"eps", eps.str()},
                    {"bound", out.fn->bound().str()}};
  return out;
}

/// Global axiom for a pair cover: if f vanishes at infinity on each part,
/// it vanishes at infinity on the union, and the ball radius where large
/// values die out is bounded by the worse of the two parts.
inline Verdict global_axiom_check(Context& ctx, const CoarseCover& cover,
                                  const FnPtr& f, const Rational& eps) {
  if (cover.parts.size() != 2)
    throw ConfigError("global_axiom_check treats pair covers");
  Verdict cv = verify_coarse_cover(ctx, cover, 2);
  if (!cv.positive())
    throw PreconditionError("global_axiom_check: cover does not verify (" +
                            cv.label + ")");
  std::vector<int64_t> part_R;
  for (size_t i = 0; i < 2; ++i) {
    Verdict t = tends_to_zero_check(ctx, f, eps, cover.parts[i]);
    if (!t.positive())
      throw PreconditionError("global_axiom_check: f does not vanish at "
                              "infinity on part " + std::to_string(i) + " (" +
                              t.label + ")");
    part_R.push_back(t.bound);
  }
  SubsetPtr u = SubsetExpr::union_of(cover.parts[0], cover.parts[1]);
  Verdict tu = tends_to_zero_check(ctx, f, eps, u);
  int64_t B = std::max(part_R[0], part_R[1]);
  if (!tu.positive())
    return Verdict::make_negative(
        "union_persists",
        json{{"part_R", part_R}, {"union", tu.witness}},
        "large values on the union survive although both parts vanish");
  json w{{"union_R", tu.bound},
         {"part_R", part_R},
         {"B_radius", B},
         {"within_B", tu.bound <= B}};
  return Verdict::make_positive("global_axiom", tu.bound, w);
}

/// Parse a function descriptor (see BoundedFn::descriptor for the shape).
inline FnPtr parse_fn(
    const json& j, SpacePtr ambient,
    const std::filesystem::path& base_dir = ".",
    const std::unordered_map<std::string, SubsetPtr>* defs = nullptr) {
  if (!j.is_object() || !j.contains("rule"))
    throw ConfigError("function descriptor needs a \"rule\" field");
  std::string rule = j.at("rule").get<std::string>();
  auto rat = [&](const json& v) {
    if (v.is_number_integer()) return Rational(v.get<int64_t>());
    return Rational::parse(v.get<std::string>());
  };
  if (rule == "constant") return BoundedFn::constant(rat(j.at("value")));
  if (rule == "decay") return BoundedFn::decay();
  if (rule == "angle") return BoundedFn::angle(j.value("axis", 0));
  if (rule == "sign") return BoundedFn::sign(j.value("axis", 0));
  if (rule == "norm_parity") return BoundedFn::norm_parity();
  if (rule == "table") {
    std::vector<std::pair<Point, Rational>> entries;
    for (const auto& row : j.value("entries", json::array()))
      entries.emplace_back(Point::from_json(row.at("point")),
                           rat(row.at("value")));
    return BoundedFn::table(std::move(entries),
                            j.contains("default") ? rat(j.at("default"))
                                                  : Rational(0));
  }
  if (rule == "sum" || rule == "product") {
    const json& terms = j.at("terms");
    if (!terms.is_array() || terms.size() < 2)
      throw ConfigError(rule + " needs at least two terms");
    FnPtr acc = parse_fn(terms[0], ambient, base_dir, defs);
    for (size_t i = 1; i < terms.size(); ++i) {
      FnPtr next = parse_fn(terms[i], ambient, base_dir, defs);
      acc = rule == "sum" ? BoundedFn::sum(acc, next)
                          : BoundedFn::product(acc, next);
    }
    return acc;
  }
  if (rule == "scale")
    return BoundedFn::scale(rat(j.at("factor")),
                            parse_fn(j.at("inner"), ambient, base_dir, defs));
  if (rule == "glued")
    return BoundedFn::glued(parse_subset(j.at("u1"), ambient, base_dir, defs),
                            parse_subset(j.at("u2"), ambient, base_dir, defs),
                            parse_fn(j.at("f1"), ambient, base_dir, defs),
                            parse_fn(j.at("f2"), ambient, base_dir, defs),
                            parse_fn(j.at("g"), ambient, base_dir, defs));
  throw ConfigError("unknown function rule: " + rule);
}

}  // namespace coarse
