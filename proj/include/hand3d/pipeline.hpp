// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "hand3d/dataset_io.hpp"
#include "hand3d/error.hpp"
#include "hand3d/hand_kinematics.hpp"
#include "hand3d/motion_tokens.hpp"
#include "hand3d/scale_calibration.hpp"
#include "hand3d/spatial_labeling.hpp"
#include "hand3d/vqa_generator.hpp"

namespace hand3d {

struct PipelineConfig {
  double gamma = kDefaultGamma;
  int min_visible = kDefaultMinVisible;
  double delta_m = kDefaultSignificanceDelta;
  TokenizerConfig tokenizer;
  double rate_hz = 1.0;
  double chunk_s = 10.0;
  std::uint64_t seed = 0;
  // Context window (frames) for spatial_relationship / task_completion.
  int context_min = 1;
  int context_max = 4;
  double depth_epsilon = kDefaultDepthEpsilon;
  int wrist_index = kDefaultWristIndex;
  int jobs = 0;  // 0: hardware concurrency

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(Errc::InvalidArgument, "gamma must be in [0, 1)");
    if (min_visible < 0 || min_visible > kNumJoints) throw Error(Errc::InvalidArgument, "min_visible must be in [0, 21]");
    if (!(delta_m >= 0.0)) throw Error(Errc::InvalidArgument, "delta_m must be non-negative");
    tokenizer.validate();
    if (!(rate_hz > 0.0)) throw Error(Errc::InvalidArgument, "rate_hz must be positive");
    if (!(chunk_s > 0.0)) throw Error(Errc::InvalidArgument, "chunk_s must be positive");
    if (context_min < 1 || context_max < context_min)
      throw Error(Errc::InvalidArgument, "context window sizes must satisfy 1 <= min <= max");
    if (!(depth_epsilon > 0.0)) throw Error(Errc::InvalidArgument, "depth_epsilon must be positive");
    if (wrist_index < 0 || wrist_index >= kNumJoints) throw Error(Errc::InvalidArgument, "wrist_index must be in [0, 20]");
    if (jobs < 0) throw Error(Errc::InvalidArgument, "jobs must be non-negative");
  }

  /// Overlays the keys present in `j` onto this config.
  void apply_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(Errc::SchemaError, "config must be a JSON object");
    try {
      for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const auto& v = it.value();
        if (key == "gamma") gamma = v.get<double>();
        else if (key == "min_visible") min_visible = v.get<int>();
        else if (key == "delta_m") delta_m = v.get<double>();
        else if (key == "k_bins") tokenizer.k_bins = v.get<int>();
        else if (key == "tokenizer") tokenizer = tokenizer_from_json(v);
        else if (key == "rate_hz") rate_hz = v.get<double>();
        else if (key == "chunk_s") chunk_s = v.get<double>();
        else if (key == "seed") seed = v.get<std::uint64_t>();
        else if (key == "context_min") context_min = v.get<int>();
        else if (key == "context_max") context_max = v.get<int>();
        else if (key == "depth_epsilon") depth_epsilon = v.get<double>();
        else if (key == "wrist_index") wrist_index = v.get<int>();
        else if (key == "jobs") jobs = v.get<int>();
        else throw Error(Errc::SchemaError, "unknown config key", key);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::SchemaError, e.what(), "config");
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["gamma"] = gamma;
    j["min_visible"] = min_visible;
    j["delta_m"] = delta_m;
    j["tokenizer"] = tokenizer_json(tokenizer);
    j["rate_hz"] = rate_hz;
    j["chunk_s"] = chunk_s;
    j["seed"] = seed;
    j["context_min"] = context_min;
    j["context_max"] = context_max;
    j["depth_epsilon"] = depth_epsilon;
    j["wrist_index"] = wrist_index;
    j["jobs"] = jobs;
    return j;
  }
};

enum class DropReason { NoVisibleHand, EmptyOmega, InsignificantMotion, NoValidPoints, MissingRaster };

constexpr std::string_view to_string(DropReason r) {
  switch (r) {
    case DropReason::NoVisibleHand: return "NoVisibleHand";
    case DropReason::EmptyOmega: return "EmptyOmega";
    case DropReason::InsignificantMotion: return "InsignificantMotion";
    case DropReason::NoValidPoints: return "NoValidPoints";
    case DropReason::MissingRaster: return "MissingRaster";
  }
  return "";
}

/// Invariant: candidates == emitted + sum(dropped).
struct StageStats {
  std::uint64_t candidates = 0;
  std::uint64_t emitted = 0;
  std::map<DropReason, std::uint64_t> dropped;

  void emit() { ++candidates, ++emitted; }
  void drop(DropReason r) { ++candidates, ++dropped[r]; }
  /// Frame-visibility stage: passing frames are forwarded, not emitted records.
  void pass() { emit(); }

  std::uint64_t dropped_total() const {
    std::uint64_t n = 0;
    for (const auto& [r, c] : dropped) n += c;
    return n;
  }

  StageStats& merge(const StageStats& o) {
    candidates += o.candidates;
    emitted += o.emitted;
    for (const auto& [r, c] : o.dropped) dropped[r] += c;
    return *this;
  }
};

struct RunStats {
  std::map<std::string, StageStats> stages;
  std::vector<std::string> errors;  // one structured diagnostic line per failed clip

  RunStats& merge(const RunStats& o) {
    for (const auto& [name, s] : o.stages) stages[name].merge(s);
    errors.insert(errors.end(), o.errors.begin(), o.errors.end());
    return *this;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json st = nlohmann::ordered_json::object();
    for (const auto& [name, s] : stages) {
      nlohmann::ordered_json d = nlohmann::ordered_json::object();
      for (const auto& [r, c] : s.dropped) d[std::string(to_string(r))] = c;
      st[name] = {{"candidates", s.candidates}, {"emitted", s.emitted}, {"dropped", d}};
    }
    j["stages"] = st;
    j["errors"] = errors;
    return j;
  }
};

/// Single-line diagnostic: error code=<Errc> [clip=<id>] [where=<loc>] msg="<text>".
inline std::string diagnostic_line(const Error& e, const std::string& clip_id = {}) {
  std::string line = "error code=" + std::string(to_string(e.code()));
  if (!clip_id.empty()) line += " clip=" + clip_id;
  if (!e.where().empty()) line += " where=" + e.where();
  std::string msg = e.what();
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  line += " msg=\"" + msg + "\"";
  return line;
}

struct VisualResult {
  std::vector<VqaPair> pairs;
  std::string source;
  RunStats stats;
};

struct ActionResult {
  std::vector<ActionSample> samples;
  RunStats stats;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::vector<HandSide> sides_present(const ClipManifest& m) {
  std::vector<HandSide> out;
  for (HandSide side : {HandSide::Left, HandSide::Right})
    if (std::any_of(m.frames.begin(), m.frames.end(), [&](const ManifestFrame& f) { return f.hand_world(side).has_value(); }))
      out.push_back(side);
  return out;
}

inline std::vector<int> to_ids(const std::vector<std::size_t>& idx) { return {idx.begin(), idx.end()}; }

inline std::tuple<std::vector<int>, int, int, std::string> pair_order_key(const VqaPair& p) {
  return {p.frame_ids, static_cast<int>(p.category), p.side ? static_cast<int>(*p.side) : -1, p.object.value_or("")};
}

}  // namespace detail

/// Visual VQA pairs for one clip, ordered by (frame_ids, category, side, object).
inline VisualResult run_visual(const ClipManifest& m, const PipelineConfig& cfg) {
  cfg.validate();
  VisualResult out;
  out.source = m.source_name;
  auto& st = out.stats.stages;
  const double max_gap = 2.0 / cfg.rate_hz;
  const std::vector<std::size_t> sampled = sample_frames(m, cfg.rate_hz);

  // Camera movement: consecutive sampled frames, no hand needed.
  for (const auto& run : split_at_gaps(m, sampled, max_gap))
    for (std::size_t i = 0; i + 1 < run.size(); ++i) {
      const auto &a = m.frames[run[i]], &b = m.frames[run[i + 1]];
      out.pairs.push_back(gen_camera_movement({m.clip_id, detail::to_ids({run[i], run[i + 1]})}, a.pose, b.pose, cfg.gamma));
      st["camera_movement"].emit();
    }

  std::mt19937_64 rng(cfg.seed ^ detail::fnv1a(m.clip_id));
  std::map<std::size_t, PointRaster> raster_cache;

  for (HandSide side : detail::sides_present(m)) {
    std::vector<std::size_t> visible;
    for (std::size_t idx : sampled) {
      const auto hand = m.frames[idx].hand_in_camera(side);
      if (!hand) continue;
      if (keep_frame(joint_visibility(*hand, m.frames[idx].intrinsics, cfg.depth_epsilon), cfg.min_visible)) {
        visible.push_back(idx);
        st["frame_visibility"].pass();
      } else {
        st["frame_visibility"].drop(DropReason::NoVisibleHand);
      }
    }

    for (const auto& run : split_at_gaps(m, visible, max_gap)) {
      for (std::size_t i = 0; i + 1 < run.size(); ++i) {
        const auto& a = m.frames[run[i]];
        const auto& b = m.frames[run[i + 1]];
        // Both wrists in frame a's camera so camera motion does not leak in.
        const HandFrame ha = *a.hand_in_camera(side, a.pose);
        const HandFrame hb = *b.hand_in_camera(side, a.pose);
        out.pairs.push_back(gen_hand_movement({m.clip_id, detail::to_ids({run[i], run[i + 1]})}, ha, hb, cfg.gamma,
                                              cfg.wrist_index));
        st["hand_movement"].emit();
      }

      for (std::size_t i = 0; i < run.size(); ++i) {
        const std::size_t anchor = run[i];
        const ManifestFrame& f = m.frames[anchor];
        if (f.objects.empty()) continue;
        const auto span = static_cast<std::uint64_t>(cfg.context_max - cfg.context_min + 1);
        const std::size_t want = static_cast<std::size_t>(cfg.context_min) + static_cast<std::size_t>(rng() % span);
        const std::size_t n = std::min(want, i + 1);
        const std::vector<std::size_t> window(run.begin() + static_cast<std::ptrdiff_t>(i + 1 - n),
                                              run.begin() + static_cast<std::ptrdiff_t>(i + 1));
        const bool with_task = !m.task_text.empty();
        auto drop_all = [&](DropReason r, std::size_t n_objects) {
          for (std::size_t o = 0; o < n_objects; ++o) {
            st["spatial_relationship"].drop(r);
            if (with_task) st["task_completion"].drop(r);
          }
        };

        if (!f.raster_path) {
          drop_all(DropReason::MissingRaster, f.objects.size());
          continue;
        }
        if (!raster_cache.count(anchor)) {
          if (!std::filesystem::exists(*f.raster_path)) {
            drop_all(DropReason::MissingRaster, f.objects.size());
            continue;
          }
          PointRaster r = read_raster(*f.raster_path);
          if (r.width != static_cast<std::uint32_t>(f.intrinsics.width) ||
              r.height != static_cast<std::uint32_t>(f.intrinsics.height))
            throw Error(Errc::DimensionMismatch, "raster size differs from the intrinsics image size",
                        f.raster_path->string());
          raster_cache.emplace(anchor, std::move(r));
        }
        const PointRaster& raster = raster_cache.at(anchor);
        const HandFrame hand = *f.hand_in_camera(side);
        const auto omega = valid_joint_set(hand, raster, f.intrinsics, cfg.depth_epsilon);
        if (omega.empty()) {
          drop_all(DropReason::EmptyOmega, f.objects.size());
          continue;
        }
        const PointRaster calibrated = apply_scale(raster, estimate_scale(omega));
        for (const BBox2D& box : f.objects) {
          Vec3 pos;
          try {
            pos = locate_object(calibrated, box);
          } catch (const Error& e) {
            if (e.code() != Errc::NoValidPoints) throw;
            drop_all(DropReason::NoValidPoints, 1);
            continue;
          }
          const VqaContext ctx{m.clip_id, detail::to_ids(window)};
          out.pairs.push_back(gen_spatial_relationship(ctx, hand, box.label, pos, cfg.gamma));
          st["spatial_relationship"].emit();
          if (with_task) {
            out.pairs.push_back(gen_task_completion(ctx, m.task_text, hand, box.label, pos, cfg.gamma));
            st["task_completion"].emit();
          }
        }
      }
    }
  }

  std::stable_sort(out.pairs.begin(), out.pairs.end(), [](const VqaPair& a, const VqaPair& b) {
    return detail::pair_order_key(a) < detail::pair_order_key(b);
  });
  return out;
}

/// One action sample per (chunk, hand side) whose wrist trajectory is significant.
inline ActionResult run_action(const ClipManifest& m, const PipelineConfig& cfg) {
  cfg.validate();
  ActionResult out;
  auto& stage = out.stats.stages["action"];
  const auto sides = detail::sides_present(m);
  for (const FrameSpan& span : chunk_clip(m, cfg.chunk_s)) {
    for (HandSide side : sides) {
      std::vector<HandFrame> frames;
      for (std::size_t i = span.begin; i < span.end; ++i)
        if (auto h = m.frames[i].hand_in_camera(side)) frames.push_back(*h);
      if (frames.empty()) continue;
      const WristTrajectory traj = extract_wrist(frames, cfg.wrist_index);
      if (!is_significant(traj, cfg.delta_m)) {
        stage.drop(DropReason::InsignificantMotion);
        continue;
      }
      out.samples.push_back({m.clip_id, m.source_name, side, span, m.task_text, encode_trajectory(traj, cfg.tokenizer)});
      stage.emit();
    }
  }
  return out;
}

inline std::vector<nlohmann::ordered_json> visual_records(const VisualResult& r, const PipelineConfig& cfg) {
  std::vector<nlohmann::ordered_json> out;
  out.reserve(r.pairs.size());
  for (std::size_t i = 0; i < r.pairs.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "%06zu", i);
    const RecordMeta meta{r.pairs[i].clip_id + ":" + id, r.source, cfg.gamma, cfg.seed};
    out.push_back(visual_record_json(r.pairs[i], meta));
  }
  return out;
}

inline std::vector<nlohmann::ordered_json> action_records(const ActionResult& r, const PipelineConfig& cfg) {
  std::vector<nlohmann::ordered_json> out;
  out.reserve(r.samples.size());
  for (const auto& s : r.samples) out.push_back(action_record_json(s, cfg.tokenizer));
  return out;
}

// --- multi-clip driver ------------------------------------------------------------

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; results keep index order.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(std::size_t n, int jobs, Fn fn) {
  std::size_t workers = jobs > 0 ? static_cast<std::size_t>(jobs) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(n, 1));
  std::vector<Result> results(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) results[i] = fn(i);
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return results;
}

}  // namespace detail

struct CorpusRun {
  std::vector<nlohmann::ordered_json> records;
  RunStats stats;
};

enum class CorpusKind { Visual, Action };

/// Processes every manifest; a failing clip is logged in stats.errors and
/// skipped. Output is ordered by clip id.
inline CorpusRun run_corpus(const std::vector<std::filesystem::path>& manifests, const PipelineConfig& cfg,
                            CorpusKind kind) {
  cfg.validate();
  struct ClipOut {
    std::string clip_id;
    std::vector<nlohmann::ordered_json> records;
    RunStats stats;
  };
  auto clips = detail::parallel_map<ClipOut>(manifests.size(), cfg.jobs, [&](std::size_t i) {
    ClipOut c;
    c.clip_id = manifests[i].string();
    try {
      const ClipManifest m = load_manifest(manifests[i]);
      c.clip_id = m.clip_id;
      if (kind == CorpusKind::Visual) {
        const VisualResult r = run_visual(m, cfg);
        c.records = visual_records(r, cfg);
        c.stats = r.stats;
      } else {
        const ActionResult r = run_action(m, cfg);
        c.records = action_records(r, cfg);
        c.stats = r.stats;
      }
    } catch (const Error& e) {
      c.records.clear();
      c.stats.errors.push_back(diagnostic_line(e, c.clip_id));
    }
    return c;
  });
  std::stable_sort(clips.begin(), clips.end(), [](const ClipOut& a, const ClipOut& b) { return a.clip_id < b.clip_id; });
  CorpusRun run;
  for (auto& c : clips) {
    run.records.insert(run.records.end(), std::make_move_iterator(c.records.begin()),
                       std::make_move_iterator(c.records.end()));
    run.stats.merge(c.stats);
  }
  return run;
}

}  // namespace hand3d
