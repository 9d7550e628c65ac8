// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hand3d/dataset_io.hpp"
#include "hand3d/error.hpp"
#include "hand3d/spatial_labeling.hpp"

namespace hand3d {

struct SpatialPrediction {
  DirectionSet directions;
  double distance_m = 0.0;
};

enum class AxisPolicy {
  All,        // all three axes scored; matching absences count
  GtPresent,  // only axes where the ground truth carries a word
};

inline AxisPolicy axis_policy_from_string(std::string_view s) {
  if (s == "all") return AxisPolicy::All;
  if (s == "gt-present") return AxisPolicy::GtPresent;
  throw Error(Errc::InvalidArgument, "axes must be 'all' or 'gt-present'");
}

inline int direction_score(const SpatialPrediction& pred, const SpatialPrediction& gt,
                           AxisPolicy policy = AxisPolicy::All) {
  int score = 0;
  for (int a = 0; a < 3; ++a) {
    if (policy == AxisPolicy::GtPresent && gt.directions.sign(a) == 0) continue;
    score += pred.directions.sign(a) == gt.directions.sign(a) ? 1 : 0;
  }
  return score;
}

inline double distance_error(const SpatialPrediction& pred, const SpatialPrediction& gt) {
  return std::abs(pred.distance_m - gt.distance_m);
}

/// Direction words (first occurrence per axis wins) and the first decimal
/// number in the text, optionally followed by "m"/"meters". Numbers glued to
/// other words or followed by "degrees" are skipped.
inline SpatialPrediction parse_answer(std::string_view text) {
  SpatialPrediction out;
  std::optional<double> distance;
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char ch = static_cast<unsigned char>(text[i]);
    if (std::isalpha(ch)) {
      std::size_t j = i;
      while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
      std::string word(text.substr(i, j - i));
      for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (auto d = direction_from_string(word)) out.directions.insert(*d);
      i = j;
    } else if (std::isdigit(ch) || (ch == '.' && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
      std::size_t j = i;
      while (j < text.size() && (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.')) ++j;
      // A number glued to a word is only a distance when the word is a unit ("3D" is not).
      std::size_t w = j;
      while (w < text.size() && std::isalpha(static_cast<unsigned char>(text[w]))) ++w;
      const std::string_view unit = text.substr(j, w - j);
      bool unit_ok = unit.empty() || unit == "m" || unit == "meter" || unit == "meters";
      if (unit.empty()) {
        // "30 degrees" is an angle, not a distance.
        std::size_t a = w;
        while (a < text.size() && text[a] == ' ') ++a;
        std::size_t b = a;
        while (b < text.size() && std::isalpha(static_cast<unsigned char>(text[b]))) ++b;
        const std::string_view next = text.substr(a, b - a);
        if (next == "degrees" || next == "degree" || next == "deg") unit_ok = false;
      }
      if (!distance && unit_ok) {
        const std::string num(text.substr(i, j - i));
        char* end = nullptr;
        const double v = std::strtod(num.c_str(), &end);
        if (end != num.c_str()) distance = v;
      }
      i = j;
    } else {
      ++i;
    }
  }
  if (!distance) throw Error(Errc::ParseIncomplete, "no distance found in answer text");
  out.distance_m = *distance;
  return out;
}

struct HistogramBins {
  std::vector<double> edges;  // ascending; bin i is [edges[i], edges[i+1]), last bin open-ended
  std::vector<std::uint64_t> counts;

  explicit HistogramBins(std::vector<double> e = {0.0, 0.05, 0.1, 0.2, 0.5}) : edges(std::move(e)), counts(edges.size(), 0) {
    if (edges.empty()) throw Error(Errc::InvalidArgument, "histogram needs at least one edge");
    for (std::size_t i = 1; i < edges.size(); ++i)
      if (!(edges[i] > edges[i - 1])) throw Error(Errc::InvalidArgument, "histogram edges must increase");
  }

  void add(double v) {
    std::size_t bin = 0;
    while (bin + 1 < edges.size() && v >= edges[bin + 1]) ++bin;
    ++counts[bin];
  }
};

struct ScoreReport {
  std::uint64_t n = 0;
  double mean_distance_error_m = 0.0;
  double mean_direction_score = 0.0;
  std::array<std::uint64_t, 4> direction_histogram{};
  HistogramBins distance_histogram;
  std::uint64_t missing_predictions = 0;
  std::uint64_t extra_predictions = 0;
  std::uint64_t incomplete_predictions = 0;
};

struct ScoreOptions {
  AxisPolicy axes = AxisPolicy::All;
  bool strict = true;
  std::vector<double> distance_edges = {0.0, 0.05, 0.1, 0.2, 0.5};
};

/// Sum-based accumulator; merge() is associative.
struct ScoreAccumulator {
  std::uint64_t n = 0;
  double sum_distance_error = 0.0;
  std::uint64_t sum_direction_score = 0;
  std::array<std::uint64_t, 4> direction_histogram{};
  std::vector<double> distance_errors;

  void add(int dir_score, double dist_err) {
    ++n;
    sum_direction_score += static_cast<std::uint64_t>(dir_score);
    sum_distance_error += dist_err;
    ++direction_histogram[static_cast<std::size_t>(dir_score)];
    distance_errors.push_back(dist_err);
  }

  ScoreAccumulator& merge(const ScoreAccumulator& o) {
    n += o.n;
    sum_distance_error += o.sum_distance_error;
    sum_direction_score += o.sum_direction_score;
    for (int i = 0; i < 4; ++i) direction_histogram[i] += o.direction_histogram[i];
    distance_errors.insert(distance_errors.end(), o.distance_errors.begin(), o.distance_errors.end());
    return *this;
  }

  ScoreReport finish(const std::vector<double>& edges) const {
    ScoreReport r{.distance_histogram = HistogramBins(edges)};
    r.n = n;
    r.direction_histogram = direction_histogram;
    if (n > 0) {
      r.mean_distance_error_m = sum_distance_error / static_cast<double>(n);
      r.mean_direction_score = static_cast<double>(sum_direction_score) / static_cast<double>(n);
    }
    for (double e : distance_errors) r.distance_histogram.add(e);
    return r;
  }
};

namespace detail {

inline SpatialPrediction prediction_from_displacement_json(const nlohmann::json& d, const std::string& where) {
  SpatialPrediction p;
  if (!d.contains("distance_m") || !d["distance_m"].is_number())
    throw Error(Errc::SchemaError, "missing numeric distance_m", where);
  p.distance_m = d["distance_m"].get<double>();
  if (d.contains("directions")) {
    if (!d["directions"].is_array()) throw Error(Errc::SchemaError, "directions must be an array", where);
    for (const auto& w : d["directions"]) {
      if (!w.is_string()) throw Error(Errc::SchemaError, "direction must be a string", where);
      const auto dir = direction_from_string(w.get<std::string>());
      if (!dir) throw Error(Errc::SchemaError, "unknown direction word '" + w.get<std::string>() + "'", where);
      if (!p.directions.insert(*dir)) throw Error(Errc::SchemaError, "two direction words on one axis", where);
    }
  }
  return p;
}

}  // namespace detail

/// Accepts a generated visual record (scores its gt, the translation for
/// camera pairs), a structured prediction {id, directions, distance_m}, or a
/// free-text prediction {id, answer_text}.
inline SpatialPrediction prediction_from_record(const nlohmann::json& r, const std::string& where) {
  if (r.contains("gt")) {
    const auto& gt = r["gt"];
    if (gt.contains("translation")) return detail::prediction_from_displacement_json(gt["translation"], where);
    return detail::prediction_from_displacement_json(gt, where);
  }
  if (r.contains("distance_m")) return detail::prediction_from_displacement_json(r, where);
  if (r.contains("answer_text")) {
    if (!r["answer_text"].is_string()) throw Error(Errc::SchemaError, "answer_text must be a string", where);
    try {
      return parse_answer(r["answer_text"].get<std::string>());
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), where);
    }
  }
  throw Error(Errc::SchemaError, "record has neither gt, distance_m nor answer_text", where);
}

inline std::string record_id(const nlohmann::json& r, const std::string& where) {
  if (!r.is_object() || !r.contains("id") || !r["id"].is_string())
    throw Error(Errc::SchemaError, "record has no string id", where);
  return r["id"].get<std::string>();
}

/// Scores the id intersection of predictions and ground truth.
inline ScoreReport score_records(const std::vector<nlohmann::json>& preds, const std::vector<nlohmann::json>& gts,
                                 const ScoreOptions& opt = {}) {
  std::map<std::string, std::size_t> pred_by_id;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::string where = "pred:" + std::to_string(i + 1);
    if (!pred_by_id.emplace(record_id(preds[i], where), i).second)
      throw Error(Errc::IdMismatch, "duplicate prediction id", where);
  }
  ScoreAccumulator acc;
  std::uint64_t missing = 0, incomplete = 0, matched = 0;
  std::map<std::string, bool> seen_gt;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const std::string where = "gt:" + std::to_string(i + 1);
    const std::string id = record_id(gts[i], where);
    if (!seen_gt.emplace(id, true).second) throw Error(Errc::IdMismatch, "duplicate ground-truth id", where);
    const auto it = pred_by_id.find(id);
    if (it == pred_by_id.end()) {
      ++missing;
      continue;
    }
    ++matched;
    const SpatialPrediction gt = prediction_from_record(gts[i], where);
    try {
      const SpatialPrediction pred = prediction_from_record(preds[it->second], "pred:" + id);
      acc.add(direction_score(pred, gt, opt.axes), distance_error(pred, gt));
    } catch (const Error& e) {
      if (e.code() != Errc::ParseIncomplete || opt.strict) throw;
      // Worst case: no direction credit, error as if predicting zero distance.
      ++incomplete;
      acc.add(0, gt.distance_m);
    }
  }
  if (matched == 0) throw Error(Errc::IdMismatch, "predictions and ground truth share no ids");
  ScoreReport r = acc.finish(opt.distance_edges);
  r.missing_predictions = missing;
  r.extra_predictions = preds.size() - matched;
  r.incomplete_predictions = incomplete;
  return r;
}

inline ScoreReport score_files(const std::filesystem::path& pred_path, const std::filesystem::path& gt_path,
                               const ScoreOptions& opt = {}) {
  return score_records(read_jsonl(pred_path), read_jsonl(gt_path), opt);
}

inline nlohmann::ordered_json score_report_json(const ScoreReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["mean_distance_error_m"] = r.mean_distance_error_m;
  j["mean_direction_score"] = r.mean_direction_score;
  j["direction_score_histogram"] = r.direction_histogram;
  nlohmann::ordered_json dh;
  dh["edges"] = r.distance_histogram.edges;
  dh["counts"] = r.distance_histogram.counts;
  j["distance_error_histogram"] = dh;
  j["missing_predictions"] = r.missing_predictions;
  j["extra_predictions"] = r.extra_predictions;
  j["incomplete_predictions"] = r.incomplete_predictions;
  return j;
}

/// kind,bin,count rows for both histograms.
inline std::string score_histogram_csv(const ScoreReport& r) {
  std::string out = "histogram,bin,count\n";
  for (int s = 0; s < 4; ++s)
    out += "direction_score," + std::to_string(s) + "," + std::to_string(r.direction_histogram[s]) + "\n";
  const auto& h = r.distance_histogram;
  for (std::size_t i = 0; i < h.edges.size(); ++i) {
    char label[96];
    if (i + 1 < h.edges.size())
      std::snprintf(label, sizeof(label), "[%g;%g)", h.edges[i], h.edges[i + 1]);
    else
      std::snprintf(label, sizeof(label), "[%g;inf)", h.edges[i]);
    out += std::string("distance_error_m,") + label + "," + std::to_string(h.counts[i]) + "\n";
  }
  return out;
}

}  // namespace hand3d
