#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "coarse/errors.hpp"
#include "coarse/grid.hpp"
#include "coarse/point.hpp"

namespace coarse {

/// Sentinel profile entry: the truncated set backing this radius was empty,
/// so the value is "infinity".  Serialized as null.
constexpr int64_t kEmpty = -1;

enum class Outcome { Positive, Negative, Inconclusive };

/// Three-valued verdict with a mandatory witness payload.  The label pair
/// carries the op-specific vocabulary (Close/Apart, holds/fails, In/Out).
struct Verdict {
  Outcome outcome = Outcome::Inconclusive;
  std::string label = "Inconclusive";
  int64_t bound = -1;  // certified bound for positive outcomes, else -1
  std::string note;
  json witness = json::object();

  bool positive() const { return outcome == Outcome::Positive; }
  bool negative() const { return outcome == Outcome::Negative; }
  bool decisive() const { return outcome != Outcome::Inconclusive; }

  static Verdict make_positive(std::string label, int64_t bound, json witness,
                               std::string note = "") {
    Verdict v;
    v.outcome = Outcome::Positive;
    v.label = std::move(label);
    v.bound = bound;
    v.witness = std::move(witness);
    v.note = std::move(note);
    return v;
  }
  static Verdict make_negative(std::string label, json witness,
                               std::string note = "") {
    Verdict v;
    v.outcome = Outcome::Negative;
    v.label = std::move(label);
    v.witness = std::move(witness);
    v.note = std::move(note);
    return v;
  }
  static Verdict make_inconclusive(json witness, std::string note = "") {
    Verdict v;
    v.witness = std::move(witness);
    v.note = std::move(note);
    return v;
  }

  json to_json() const {
    json j{{"outcome", label}};
    if (bound >= 0) j["bound"] = bound;
    if (!note.empty()) j["note"] = note;
    j["witness"] = witness;
    return j;
  }
};

/// Label vocabulary for the two decisive outcomes of an op family.
struct Labels {
  const char* positive;
  const char* negative;
};
constexpr Labels kCloseApart{"Close", "Apart"};
constexpr Labels kHoldsFails{"holds", "fails"};
constexpr Labels kInOut{"In", "Out"};
constexpr Labels kBounded{"bounded", "unbounded"};

/// A value per grid radius plus certification flags and per-radius witness
/// payloads (realizing pairs, escaping points, ...).
struct Profile {
  std::vector<int64_t> radii;
  std::vector<int64_t> values;     // kEmpty encodes the infinity sentinel
  std::vector<uint8_t> certified;  // value attained inside the work region
  std::vector<json> attain;        // optional per-radius witness

  size_t size() const { return values.size(); }

  json to_json() const {
    json vals = json::array();
    for (int64_t v : values)
      vals.push_back(v == kEmpty ? json() : json(v));
    json j{{"radii", radii}, {"values", vals}};
    json cert = json::array();
    for (uint8_t c : certified) cert.push_back(static_cast<bool>(c));
    j["certified"] = cert;
    if (!attain.empty()) j["attained_by"] = attain;
    return j;
  }
};

/// The frozen window decision rule shared by every profile-based op:
///   - every window entry empty            -> negative ("window empty")
///   - some (not all) window entries empty -> inconclusive (mixed window)
///   - value > tau(R) at every window idx  -> negative (diverges)
///   - max over window == max over all certified entries -> positive with
///     that max as the bound (the profile has plateaued)
///   - otherwise inconclusive.
inline Verdict decide_profile(const Profile& p, const TruncationGrid& grid,
                              Labels labels,
                              const std::string& empty_note =
                                  "window empty inside the work region") {
  if (p.values.size() != grid.size())
    throw InternalError("profile length does not match the grid");
  size_t b = grid.window_begin();
  size_t n = grid.size();

  size_t empties = 0;
  for (size_t i = b; i < n; ++i)
    if (p.values[i] == kEmpty) ++empties;
  json windows = json::array();
  for (size_t i = b; i < n; ++i)
    windows.push_back(json{{"radius", p.radii[i]},
                           {"value", p.values[i] == kEmpty
                                         ? json()
                                         : json(p.values[i])},
                           {"tau", grid.tau_at(i)}});
  if (empties == n - b)
    return Verdict::make_negative(labels.negative,
                                  json{{"reason", "window_empty"},
                                       {"window", windows}},
                                  empty_note);
  if (empties > 0)
    return Verdict::make_inconclusive(
        json{{"reason", "mixed_empty_window"},
             {"window", windows},
             {"profile", p.to_json()}},
        "window mixes empty and nonempty truncations");

  bool diverges = true;
  for (size_t i = b; i < n; ++i)
    diverges = diverges && p.values[i] > grid.tau_at(i);
  if (diverges) {
    json idx = json::array();
    for (size_t i = b; i < n; ++i) idx.push_back(i);
    json w{{"reason", "diverges_past_tau"},
           {"indices", idx},
           {"window", windows}};
    if (!p.attain.empty()) {
      json at = json::array();
      for (size_t i = b; i < n; ++i) at.push_back(p.attain[i]);
      w["attained_by"] = at;
    }
    return Verdict::make_negative(labels.negative, w);
  }

  int64_t wmax = 0;
  for (size_t i = b; i < n; ++i) wmax = std::max(wmax, p.values[i]);
  bool have_cert = false;
  int64_t cmax = 0;
  for (size_t i = 0; i < n; ++i)
    if (p.values[i] != kEmpty && p.certified[i]) {
      have_cert = true;
      cmax = std::max(cmax, p.values[i]);
    }
  if (have_cert && wmax == cmax) {
    json w{{"reason", "plateau"}, {"window", windows}};
    if (!p.attain.empty()) {
      json at = json::array();
      for (size_t i = b; i < n; ++i) at.push_back(p.attain[i]);
      w["attained_by"] = at;
    }
    return Verdict::make_positive(labels.positive, wmax, w);
  }
  return Verdict::make_inconclusive(
      json{{"reason", have_cert ? "no_plateau" : "nothing_certified"},
           {"profile", p.to_json()}});
}

}  // namespace coarse
