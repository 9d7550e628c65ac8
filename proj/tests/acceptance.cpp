// SPDX-License-Identifier: Apache-2.0
//
// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "hand3d/hand3d.hpp"
#include "hand3d/ref_model_check.hpp"

namespace fs = std::filesystem;
using namespace hand3d;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = "'" HAND3D_CLI_PATH "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(const char* f, double v) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / ("hand3d_accept_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Outcome tokenizer_bound() {
  const TokenizerConfig cfg;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> xy(-0.5, 0.5), z(0.0, 1.0);
  const double bound = 1.0 / (2 * 1024);
  int violations = 0;
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const Vec3 p{xy(rng), xy(rng), z(rng)};
    const Vec3 back = detokenize_point(tokenize_point(p, cfg), cfg);
    for (int a = 0; a < 3; ++a) {
      const double e = std::abs(back[a] - p[a]);
      worst = std::max(worst, e);
      if (e > bound) ++violations;
    }
  }
  return {violations == 0, "violations=" + std::to_string(violations) + fmt(" worst=%.10g", worst)};
}

Outcome scale_recovery() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> scale(0.5, 3.0);
  std::uniform_int_distribution<int> corrupt(0, 10);
  int ok = 0;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    synth::SceneSpec spec = synth::default_scene(1000 + i);
    spec.n_frames = 1;
    spec.true_scale = scale(rng);
    spec.corrupted_joints = corrupt(rng);
    const synth::Scene s = synth::generate(spec);
    const ManifestFrame& f = s.manifest.frames[0];
    bool scene_ok = true;
    for (HandSide side : {HandSide::Right, HandSide::Left}) {
      const auto omega = valid_joint_set(*f.hand_in_camera(side), s.rasters.at(0), f.intrinsics);
      const double err = std::abs(estimate_scale(omega).s - spec.true_scale);
      worst = std::max(worst, err);
      scene_ok = scene_ok && err <= 1e-6;
    }
    ok += scene_ok;
  }
  return {ok == 100, std::to_string(ok) + "/100 scenes" + fmt(" worst=%.3g", worst)};
}

Outcome rotation_round_trip() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> deg(0.0, 180.0), near(0.0, 0.2);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Vec3 axis{n(rng), n(rng), n(rng)};
    axis = (1.0 / axis.norm()) * axis;
    const double angle = i < 50 ? 180.0 - near(rng) * (i % 2) : deg(rng);  // 50 forced near-π, half exactly π
    const Rotation3 r = rotation_from_axis_angle({axis, angle});
    const Rotation3 back = rotation_from_axis_angle(to_axis_angle(r));
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) worst = std::max(worst, std::abs(back(a, b) - r(a, b)));
  }
  return {worst <= 1e-9, fmt("worst=%.3g", worst)};
}

Outcome label_properties() {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> scale(1e-3, 1e3), gamma(0.0, 1.0 / std::sqrt(3.0));
  int failures = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 v{n(rng), n(rng), n(rng)};
    const double g = gamma(rng);
    const Displacement3D d = label_displacement(v, g);
    if (!(label_displacement(scale(rng) * v, g).directions == d.directions)) ++failures;
    if (!(label_displacement(-1.0 * v, g).directions == d.directions.mirrored())) ++failures;
    if (d.directions.empty()) ++failures;
  }
  return {failures == 0, "failures=" + std::to_string(failures)};
}

Outcome flow_matching() {
  std::mt19937_64 rng(23);
  const double h = 1e-5;
  double worst = 0.0;
  bool zero = true;
  for (int i = 0; i < 100; ++i) {
    const refmath::Matrix a = refmath::random_matrix(rng, 8, 7), eps = refmath::random_matrix(rng, 8, 7);
    const refmath::Matrix tgt = refmath::flow_target(a, eps);
    zero = zero && refmath::flow_loss(tgt, a, eps) == 0.0;
    for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const auto up = refmath::flow_interpolate(a, eps, tau + h), down = refmath::flow_interpolate(a, eps, tau - h);
      for (std::size_t k = 0; k < tgt.size(); ++k)
        worst = std::max(worst, std::abs((up.values()[k] - down.values()[k]) / (2 * h) - tgt.values()[k]));
    }
  }
  return {worst <= 1e-8 && zero, fmt("worst=%.3g", worst) + (zero ? " loss(target)=0" : " loss(target)!=0")};
}

Outcome fusion() {
  bool pass = true;
  std::string detail;
  for (const auto& r : refmath::run_self_check(29, 100)) {
    if (r.name.rfind("flow", 0) == 0) continue;
    pass = pass && r.passed;
    detail += r.name + fmt("=%.3g ", r.worst);
  }
  return {pass, detail};
}

Outcome end_to_end(const fs::path& dir) {
  const fs::path log = dir / "e2e.log";
  std::string detail;
  bool pass = true;
  double worst_dist = 0.0, worst_score = 3.0;
  std::size_t token_mismatches = 0, n_visual = 0, n_action = 0;
  const std::pair<const char*, int> scenes[] = {{"default", 1}, {"default", 2}, {"static", 3}, {"orbit", 4}};
  for (const auto& [preset, seed] : scenes) {
    const std::string tag = std::string(preset) + std::to_string(seed);
    const fs::path sd = dir / tag;
    const std::string common = std::string(" --preset ") + preset + " --seed " + std::to_string(seed);
    const std::string vis = (sd / "visual.jsonl").string(), act = (sd / "action.jsonl").string();
    const std::string vo = (sd / "visual_oracle.jsonl").string(), ao = (sd / "action_oracle.jsonl").string();
    const std::string manifest = (sd / "manifest.json").string();
    if (run_cli("synth -o " + sd.string() + common, log) != 0 ||
        run_cli("annotate-visual " + manifest + " -o " + vis, log) != 0 ||
        run_cli("annotate-action " + manifest + " -o " + act, log) != 0 ||
        run_cli("synth" + common + " --oracle-for " + vis + " --oracle-out " + vo, log) != 0 ||
        run_cli("synth" + common + " --oracle-for " + act + " --oracle-out " + ao, log) != 0 ||
        run_cli("score " + vo + " " + vis + " -o " + (sd / "score.json").string(), log) != 0)
      return {false, tag + ": command failed: " + slurp(log)};
    const json score = json::parse(slurp(sd / "score.json"));
    worst_score = std::min(worst_score, score["mean_direction_score"].get<double>());
    worst_dist = std::max(worst_dist, score["mean_distance_error_m"].get<double>());
    n_visual += score["n"].get<std::size_t>();
    const auto recs = read_jsonl(act), oracle = read_jsonl(ao);
    if (recs.size() != oracle.size()) {
      token_mismatches += 1;
      continue;
    }
    for (std::size_t i = 0; i < recs.size(); ++i) token_mismatches += recs[i]["tokens"] != oracle[i]["tokens"];
    n_action += recs.size();
  }
  pass = worst_score == 3.0 && worst_dist <= 1e-6 && token_mismatches == 0;
  detail = "visual=" + std::to_string(n_visual) + fmt(" direction_score=%.6f", worst_score) +
           fmt(" distance_error=%.3g", worst_dist) + " action=" + std::to_string(n_action) +
           " token_mismatches=" + std::to_string(token_mismatches);
  return {pass, detail};
}

Outcome determinism(const fs::path& dir) {
  const fs::path log = dir / "det.log";
  std::string manifests;
  for (int seed : {11, 12, 13}) {
    const fs::path sd = dir / ("det" + std::to_string(seed));
    if (run_cli("synth -o " + sd.string() + " --seed " + std::to_string(seed), log) != 0)
      return {false, "synth failed: " + slurp(log)};
    manifests += " " + (sd / "manifest.json").string();
  }
  bool same = true;
  std::size_t bytes = 0;
  for (const char* sub : {"annotate-visual", "annotate-action"}) {
    const fs::path a = dir / (std::string(sub) + "_a.jsonl"), b = dir / (std::string(sub) + "_b.jsonl");
    if (run_cli(std::string(sub) + manifests + " --seed 5 --jobs 1 -o " + a.string(), log) != 0 ||
        run_cli(std::string(sub) + manifests + " --seed 5 --jobs 4 -o " + b.string(), log) != 0)
      return {false, std::string(sub) + " failed: " + slurp(log)};
    const std::string x = slurp(a), y = slurp(b);
    same = same && x == y && !x.empty();
    bytes += x.size();
  }
  return {same, (same ? "identical " : "differ ") + std::to_string(bytes) + " bytes"};
}

Outcome report_fixture() {
  CorpusCounts c;
  c.add("corpus", "spatial_relationship", 206409);
  c.add("corpus", "task_completion", 74887);
  c.add("corpus", "hand_movement", 18867);
  c.add("corpus", "camera_movement", 205);
  const json j = json::parse(report_json(make_report(c)).dump());
  const std::map<std::string, std::string> want{{"spatial_relationship", "68.7"},
                                                {"task_completion", "24.9"},
                                                {"hand_movement", "6.2"},
                                                {"camera_movement", "0.1"}};
  bool pass = true;
  std::string detail;
  for (const auto& e : j["categories"]) {
    const std::string name = e["name"], got = e["proportion_pct"];
    if (got != want.at(name)) pass = false;
    detail += name + "=" + got + (got == want.at(name) ? " " : "(want " + want.at(name) + ") ");
  }
  return {pass, detail};
}

Outcome raster_round_trip(const fs::path& dir) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<std::uint32_t> dim(1, 48);
  std::uniform_real_distribution<float> val(-5.0f, 5.0f);
  std::bernoulli_distribution hole(0.2);
  int failures = 0;
  for (int i = 0; i < 1000; ++i) {
    PointRaster r(dim(rng), dim(rng));
    for (auto& p : r.points)
      if (!hole(rng)) p = {val(rng), val(rng), val(rng)};
    const fs::path path = dir / "r.pc3r";
    write_raster(r, path);
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    const PointRaster back = read_raster(path);
    bool ok = back.width == r.width && back.height == r.height && encode_raster(back) == bytes;
    for (std::size_t k = 0; ok && k < r.points.size(); ++k) {
      const bool nan_a = PointRaster::is_nan_pixel(r.points[k]), nan_b = PointRaster::is_nan_pixel(back.points[k]);
      if (nan_a != nan_b) ok = false;
      else if (!nan_a)
        for (int a = 0; a < 3; ++a)
          if (const double x = r.points[k][a], y = back.points[k][a]; std::memcmp(&x, &y, sizeof(double)) != 0) ok = false;
    }
    failures += !ok;
  }
  return {failures == 0, "failures=" + std::to_string(failures) + "/1000"};
}

}  // namespace

int main() {
  const fs::path dir = scratch_dir();
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0: no time bound
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {1, "tokenizer-bound", 5.0, tokenizer_bound},
      {2, "scale-recovery", 10.0, scale_recovery},
      {3, "rotation-round-trip", 5.0, rotation_round_trip},
      {4, "direction-label-properties", 5.0, label_properties},
      {5, "flow-matching-derivative", 0.0, flow_matching},
      {6, "fusion-collapse", 0.0, fusion},
      {7, "end-to-end-oracle", 30.0, [&] { return end_to_end(dir); }},
      {8, "determinism", 0.0, [&] { return determinism(dir); }},
      {9, "report-fixture", 0.0, report_fixture},
      {10, "raster-round-trip", 0.0, [&] { return raster_round_trip(dir); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0.0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += fmt(" over budget %.0fs", c.budget_s);
    }
    std::printf("%s %2d %s (%.2fs) %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  fs::remove_all(dir);
  return failed == 0 ? 0 : 1;
}
