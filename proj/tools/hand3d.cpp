// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hand3d/hand3d.hpp"
#include "hand3d/ref_model_check.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace hand3d;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

struct PipelineFlags {
  std::string config_path;
  std::optional<double> gamma, delta_m, rate_hz, chunk_s, depth_epsilon;
  std::optional<int> min_visible, k_bins, jobs;
  std::optional<std::uint64_t> seed;
};

void add_config_flags(CLI::App* sub, PipelineFlags& f) {
  sub->add_option("--config", f.config_path, "JSON config file (default: $HAND3D_CONFIG)");
  sub->add_option("--jobs", f.jobs, "Worker threads, 0 = all cores");
}

void add_labeling_flags(CLI::App* sub, PipelineFlags& f) {
  sub->add_option("--gamma", f.gamma, "Direction threshold in [0, 1)");
  sub->add_option("--depth-epsilon", f.depth_epsilon, "Minimum depth for projection (m)");
}

void add_pipeline_flags(CLI::App* sub, PipelineFlags& f) {
  add_config_flags(sub, f);
  add_labeling_flags(sub, f);
  sub->add_option("--min-visible", f.min_visible, "Visible joints needed to keep a frame");
  sub->add_option("--delta-m", f.delta_m, "Minimum wrist excursion for an action chunk (m)");
  sub->add_option("--k-bins", f.k_bins, "Bins per axis for motion tokens");
  sub->add_option("--rate-hz", f.rate_hz, "Frame sampling rate");
  sub->add_option("--chunk-s", f.chunk_s, "Action chunk length (s)");
  sub->add_option("--seed", f.seed, "Seed for context-window sampling");
}

std::string read_text(const std::string& path) {
  if (path == "-") return {std::istreambuf_iterator<char>(std::cin), {}};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open file", path);
  return {std::istreambuf_iterator<char>(in), {}};
}

json parse_json_text(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ParseError, e.what(), where);
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  write_text_file(path, text);
}

/// defaults < config file < flags
PipelineConfig resolve_config(const PipelineFlags& f) {
  PipelineConfig cfg;
  std::string path = f.config_path;
  if (path.empty())
    if (const char* env = std::getenv("HAND3D_CONFIG"); env && *env) path = env;
  if (!path.empty()) cfg.apply_json(parse_json_text(read_text(path), path));
  if (f.gamma) cfg.gamma = *f.gamma;
  if (f.depth_epsilon) cfg.depth_epsilon = *f.depth_epsilon;
  if (f.min_visible) cfg.min_visible = *f.min_visible;
  if (f.delta_m) cfg.delta_m = *f.delta_m;
  if (f.k_bins) cfg.tokenizer.k_bins = *f.k_bins;
  if (f.rate_hz) cfg.rate_hz = *f.rate_hz;
  if (f.chunk_s) cfg.chunk_s = *f.chunk_s;
  if (f.seed) cfg.seed = *f.seed;
  if (f.jobs) cfg.jobs = *f.jobs;
  cfg.validate();
  return cfg;
}

int exit_code_for(Errc c) { return is_io_error(c) ? kExitIo : kExitValidation; }

/// Worst exit code among per-clip diagnostics.
int exit_code_for(const RunStats& stats) {
  int code = kExitOk;
  for (const auto& line : stats.errors) {
    const bool io = line.find("code=IoError") != std::string::npos || line.find("code=MissingRaster") != std::string::npos;
    code = std::max(code, io ? kExitIo : kExitValidation);
  }
  return code;
}

// --- subcommands -----------------------------------------------------------

int cmd_calibrate(const PipelineFlags& f, const std::string& manifest_path, const std::string& out) {
  const PipelineConfig cfg = resolve_config(f);
  const ClipManifest m = load_manifest(manifest_path);
  std::vector<ordered_json> rows;
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    const ManifestFrame& fr = m.frames[i];
    if (!fr.raster_path) continue;
    const PointRaster raster = read_raster(*fr.raster_path);
    for (HandSide side : {HandSide::Left, HandSide::Right}) {
      const auto hand = fr.hand_in_camera(side);
      if (!hand) continue;
      ordered_json row{{"clip_id", m.clip_id}, {"frame", i}, {"side", to_string(side)}};
      const auto pairs = valid_joint_set(*hand, raster, fr.intrinsics, cfg.depth_epsilon);
      try {
        const ScaleFactor s = estimate_scale(pairs);
        row["scale"] = s.s;
        row["support_count"] = s.support_count;
      } catch (const Error& e) {
        if (e.code() != Errc::EmptyOmega) throw;
        row["dropped"] = "EmptyOmega";
      }
      rows.push_back(std::move(row));
    }
  }
  write_output(out, to_jsonl(rows));
  return kExitOk;
}

int cmd_annotate(const PipelineFlags& f, const std::vector<std::string>& manifests, const std::string& out,
                 const std::string& stats_path, CorpusKind kind) {
  const PipelineConfig cfg = resolve_config(f);
  std::vector<fs::path> paths(manifests.begin(), manifests.end());
  const CorpusRun run = run_corpus(paths, cfg, kind);
  for (const auto& line : run.stats.errors) std::cerr << line << "\n";
  write_output(out, to_jsonl(run.records));
  if (!stats_path.empty()) {
    ordered_json s = run.stats.to_json();
    s["records"] = run.records.size();
    s["config"] = cfg.to_json();
    write_text_file(stats_path, s.dump(2) + "\n");
  }
  return exit_code_for(run.stats);
}

TokenizerConfig tokenizer_for(const PipelineFlags& f) {
  PipelineConfig cfg = resolve_config(f);
  return cfg.tokenizer;
}

int cmd_tokenize(const PipelineFlags& f, const std::string& in, const std::string& out) {
  const TokenizerConfig tok = tokenizer_for(f);
  const json j = parse_json_text(read_text(in), in);
  const json& pts = j.is_object() && j.contains("points") ? j["points"] : j;
  if (!pts.is_array()) throw Error(Errc::SchemaError, "expected an array of [x, y, z] points", in);
  std::vector<Vec3> points;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() || !p[2].is_number())
      throw Error(Errc::SchemaError, "point must be [x, y, z]", "$[" + std::to_string(i) + "]");
    points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
  }
  const MotionTokenSequence seq = encode_points(points, tok);
  ordered_json o;
  o["tokens"] = seq.tokens;
  o["tokenizer"] = tokenizer_json(tok);
  write_output(out, o.dump() + "\n");
  return kExitOk;
}

int cmd_detokenize(const PipelineFlags& f, const std::string& in, const std::string& out) {
  TokenizerConfig tok = tokenizer_for(f);
  const json j = parse_json_text(read_text(in), in);
  json tokens = j;
  if (j.is_object()) {
    if (!j.contains("tokens")) throw Error(Errc::SchemaError, "object input needs a tokens field", in);
    tokens = j["tokens"];
    if (j.contains("tokenizer") && !f.k_bins) tok = tokenizer_from_json(j["tokenizer"]);
  }
  if (!tokens.is_array()) throw Error(Errc::SchemaError, "tokens must be an array of integers", in);
  MotionTokenSequence seq;
  for (const auto& t : tokens) {
    if (!t.is_number_integer()) throw Error(Errc::SchemaError, "token must be an integer", in);
    seq.tokens.push_back(t.get<int>());
  }
  ordered_json pts = ordered_json::array();
  for (const Vec3& p : decode_trajectory(seq, tok)) pts.push_back({p.x, p.y, p.z});
  write_output(out, pts.dump() + "\n");
  return kExitOk;
}

struct ScoreFlags {
  std::string pred, gt, out, csv, axes = "all", strict = "on";
  std::vector<double> edges;
};

int cmd_score(const ScoreFlags& s) {
  ScoreOptions opt;
  opt.axes = axis_policy_from_string(s.axes);
  opt.strict = s.strict == "on";
  if (!s.edges.empty()) opt.distance_edges = s.edges;
  const ScoreReport r = score_files(s.pred, s.gt, opt);
  write_output(s.out, score_report_json(r).dump(2) + "\n");
  if (!s.csv.empty()) write_text_file(s.csv, score_histogram_csv(r));
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out, const std::string& format) {
  std::vector<fs::path> paths(inputs.begin(), inputs.end());
  const CorpusReport r = report(paths);
  if (format == "json") {
    write_output(out, report_json(r).dump(2) + "\n");
    return kExitOk;
  }
  std::ostringstream os;
  char buf[64];
  os << "total " << r.total << "\n";
  for (const auto* group : {&r.sources, &r.categories}) {
    os << (group == &r.sources ? "sources\n" : "categories\n");
    for (const auto& e : *group) {
      std::snprintf(buf, sizeof(buf), "%.1f%%", e.proportion_pct);
      os << "  " << e.name << " " << e.count << " " << buf << "\n";
    }
  }
  write_output(out, os.str());
  return kExitOk;
}

struct SynthFlags {
  std::string out_dir, scene_path, preset = "default", oracle_for, oracle_out;
  std::optional<std::uint64_t> seed;
};

synth::SceneSpec preset_scene(const std::string& name, std::uint64_t seed) {
  synth::SceneSpec s = synth::default_scene(seed);
  if (name == "default") return s;
  if (name == "static") {
    s.camera = {};
    s.hands = {{HandSide::Right, synth::PathKind::Line, {0.06, 0.06, 0.55}, {0.06, 0.06, 0.55}, {}}};
    return s;
  }
  if (name == "orbit") {
    s.camera.kind = synth::CameraMotion::Orbit;
    s.camera.orbit_deg_per_s = 3.0;
    s.camera.orbit_pivot = {0.0, 0.0, 0.8};
    return s;
  }
  throw Error(Errc::InvalidArgument, "preset must be default, static or orbit", "--preset");
}

int cmd_synth(const PipelineFlags& f, const SynthFlags& s) {
  if (s.out_dir.empty() && s.oracle_for.empty())
    throw Error(Errc::InvalidArgument, "nothing to do: pass -o and/or --oracle-for");
  if (s.oracle_for.empty() != s.oracle_out.empty())
    throw Error(Errc::InvalidArgument, "--oracle-for and --oracle-out go together");
  const PipelineConfig cfg = resolve_config(f);
  synth::SceneSpec spec = preset_scene(s.preset, s.seed.value_or(7));
  if (!s.scene_path.empty()) spec = synth::scene_from_json(parse_json_text(read_text(s.scene_path), s.scene_path), spec);
  if (s.seed) spec.seed = *s.seed;
  spec.validate();
  const synth::Scene scene = synth::generate(spec);
  if (!s.out_dir.empty()) {
    const fs::path manifest = synth::write_scene(scene, s.out_dir);
    std::cout << manifest.string() << "\n";
  }
  if (!s.oracle_for.empty()) {
    std::vector<ordered_json> rows;
    const auto records = read_jsonl(s.oracle_for);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const json& r = records[i];
      try {
        if (r.contains("category")) {
          rows.push_back(synth::expected_visual_answer(scene.truth, r, r.value("gamma", cfg.gamma)));
        } else {
          const TokenizerConfig tok = r.contains("tokenizer") ? tokenizer_from_json(r["tokenizer"]) : cfg.tokenizer;
          ordered_json o;
          o["clip_id"] = r.at("clip_id");
          o["side"] = r.at("side");
          o["chunk_span"] = r.at("chunk_span");
          o["tokens"] = synth::expected_action_tokens(scene.truth, r, tok);
          rows.push_back(std::move(o));
        }
      } catch (const json::exception& e) {
        throw Error(Errc::SchemaError, e.what(), s.oracle_for + ":" + std::to_string(i + 1));
      }
    }
    write_output(s.oracle_out, to_jsonl(rows));
  }
  return kExitOk;
}

int cmd_refmath_check(std::uint64_t seed, int cases) {
  if (cases < 1) throw Error(Errc::InvalidArgument, "cases must be positive", "--cases");
  bool ok = true;
  for (const auto& r : refmath::run_self_check(seed, cases)) {
    std::printf("%s %s (worst %.3g, tol %.3g)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.worst, r.tolerance);
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hand-centric 3D annotation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("hand3d 0.1.0"));

  PipelineFlags pf;
  std::string out, stats_path, manifest, input = "-";
  std::vector<std::string> manifests, inputs;

  auto* calibrate = app.add_subcommand("calibrate", "Per-frame metric scale from hand joints and point rasters");
  calibrate->add_option("manifest", manifest, "Clip manifest")->required();
  calibrate->add_option("-o,--output", out, "JSONL output (default stdout)");
  add_config_flags(calibrate, pf);
  calibrate->add_option("--depth-epsilon", pf.depth_epsilon, "Minimum depth for projection (m)");

  auto* visual = app.add_subcommand("annotate-visual", "Generate spatial VQA records");
  visual->add_option("manifests", manifests, "Clip manifests")->required();
  visual->add_option("-o,--output", out, "JSONL output (default stdout)");
  visual->add_option("--stats", stats_path, "Write per-stage counts as JSON");
  add_pipeline_flags(visual, pf);

  auto* action = app.add_subcommand("annotate-action", "Generate tokenized wrist-motion records");
  action->add_option("manifests", manifests, "Clip manifests")->required();
  action->add_option("-o,--output", out, "JSONL output (default stdout)");
  action->add_option("--stats", stats_path, "Write per-stage counts as JSON");
  add_pipeline_flags(action, pf);

  auto* tokenize = app.add_subcommand("tokenize", "Encode [x, y, z] points as motion tokens");
  tokenize->add_option("input", input, "JSON array of points, or - for stdin");
  tokenize->add_option("-o,--output", out, "Output file (default stdout)");
  add_config_flags(tokenize, pf);
  tokenize->add_option("--k-bins", pf.k_bins, "Bins per axis");

  auto* detokenize = app.add_subcommand("detokenize", "Decode motion tokens to bin-center points");
  detokenize->add_option("input", input, "JSON token array or {tokens, tokenizer}, or - for stdin");
  detokenize->add_option("-o,--output", out, "Output file (default stdout)");
  add_config_flags(detokenize, pf);
  detokenize->add_option("--k-bins", pf.k_bins, "Bins per axis (overrides the input's tokenizer)");

  ScoreFlags sf;
  auto* score = app.add_subcommand("score", "Score predictions against ground-truth records");
  score->add_option("predictions", sf.pred, "Prediction JSONL")->required();
  score->add_option("ground_truth", sf.gt, "Ground-truth JSONL")->required();
  score->add_option("-o,--output", sf.out, "Report JSON (default stdout)");
  score->add_option("--histogram-csv", sf.csv, "Write histograms as CSV");
  score->add_option("--axes", sf.axes, "all | gt-present")->check(CLI::IsMember({"all", "gt-present"}));
  score->add_option("--strict", sf.strict, "on: unparseable answers fail the run; off: scored as misses")
      ->check(CLI::IsMember({"on", "off"}));
  score->add_option("--distance-edges", sf.edges, "Histogram bin edges (m), ascending")->delimiter(',');

  std::string format = "json";
  auto* rep = app.add_subcommand("report", "Corpus composition by source and category");
  rep->add_option("inputs", inputs, "Record JSONL files")->required();
  rep->add_option("-o,--output", out, "Output file (default stdout)");
  rep->add_option("--format", format, "json | text")->check(CLI::IsMember({"json", "text"}));

  SynthFlags syf;
  auto* syn = app.add_subcommand("synth", "Write a synthetic clip with known ground truth");
  syn->add_option("-o,--output-dir", syf.out_dir, "Directory for manifest.json, rasters and ground_truth.json");
  syn->add_option("--seed", syf.seed, "Scene seed");
  syn->add_option("--preset", syf.preset, "default | static | orbit");
  syn->add_option("--scene", syf.scene_path, "Scene JSON overlaid on the preset");
  syn->add_option("--oracle-for", syf.oracle_for, "Records generated from this scene");
  syn->add_option("--oracle-out", syf.oracle_out, "Expected answers for --oracle-for, as JSONL");
  add_config_flags(syn, pf);
  add_labeling_flags(syn, pf);
  syn->add_option("--k-bins", pf.k_bins, "Bins per axis for action oracles without a tokenizer field");

  std::uint64_t check_seed = 1;
  int check_cases = 200;
  auto* refcheck = app.add_subcommand("refmath-check", "Property checks for the fusion and flow-matching math");
  refcheck->add_option("--seed", check_seed, "RNG seed");
  refcheck->add_option("--cases", check_cases, "Random cases per property");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (calibrate->parsed()) return cmd_calibrate(pf, manifest, out);
    if (visual->parsed()) return cmd_annotate(pf, manifests, out, stats_path, CorpusKind::Visual);
    if (action->parsed()) return cmd_annotate(pf, manifests, out, stats_path, CorpusKind::Action);
    if (tokenize->parsed()) return cmd_tokenize(pf, input, out);
    if (detokenize->parsed()) return cmd_detokenize(pf, input, out);
    if (score->parsed()) return cmd_score(sf);
    if (rep->parsed()) return cmd_report(inputs, out, format);
    if (syn->parsed()) return cmd_synth(pf, syf);
    if (refcheck->parsed()) return cmd_refmath_check(check_seed, check_cases);
  } catch (const Error& e) {
    std::cerr << diagnostic_line(e) << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error code=IoError msg=\"" << e.what() << "\"\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error code=InvalidArgument msg=\"" << e.what() << "\"\n";
    return kExitValidation;
  }
  return kExitValidation;
}
