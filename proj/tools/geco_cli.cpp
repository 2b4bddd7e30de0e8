#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "geco/geco.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitMissing = 3;

int fail(geco_status s) {
  std::cerr << "error (" << geco_status_name(s) << "): " << geco_last_error() << "\n";
  return s == GECO_ERR_MISSING_INPUT ? kExitMissing : kExitUsage;
}

bool read_text(const std::string& path, std::string& out, int& code) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error (missing_input): " << path << ": cannot open file\n";
    code = kExitMissing;
    return false;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

struct ScoreArgs {
  std::string input;
  std::string out;
  geco_score_options opt{};
  bool heatmaps = false;
  double range = 0.2;
};

int run_score(ScoreArgs& a) {
  a.opt.keep_maps = a.out.empty() ? 0 : 1;
  std::error_code ec;
  const bool tree = std::filesystem::is_directory(a.input, ec) &&
                    !std::filesystem::exists(std::filesystem::path(a.input) / "manifest.json");
  if (tree) {
    if (a.out.empty()) {
      std::cerr << "error: --out is required when scoring a directory of clips\n";
      return kExitUsage;
    }
    if (geco_status s = geco_score_tree(a.input.c_str(), a.out.c_str(), &a.opt, a.heatmaps, a.range))
      return fail(s);
    std::cout << "scored clips under " << a.input << " into " << a.out << "\n";
    return kExitOk;
  }
  std::string manifest = a.input;
  if (std::filesystem::is_directory(a.input, ec))
    manifest = (std::filesystem::path(a.input) / "manifest.json").string();
  geco_clip_t* clip = nullptr;
  if (geco_status s = geco_clip_load(manifest.c_str(), &clip)) return fail(s);
  geco_score_t* score = nullptr;
  geco_status s = geco_score_clip(clip, &a.opt, &score);
  geco_clip_free(clip);
  if (s) return fail(s);
  if (!a.out.empty()) {
    s = geco_score_write(score, a.out.c_str(), a.heatmaps, a.range);
    if (s) {
      geco_score_free(score);
      return fail(s);
    }
  }
  char* json = nullptr;
  s = geco_score_to_json(score, &json);
  if (s) {
    geco_score_free(score);
    return fail(s);
  }
  if (a.out.empty()) std::cout << json << "\n";
  else
    std::printf("motion %.6g  structure %.6g  fused %.6g\n", geco_score_motion(score),
                geco_score_structure(score), geco_score_fused(score));
  geco_string_free(json);
  geco_score_free(score);
  return kExitOk;
}

struct BenchArgs {
  std::string spec;
  std::string out;
  uint64_t seed = 0;
  int jobs = 1;
  bool paper_scale = false;
};

int run_bench(const BenchArgs& a, bool warp) {
  std::string config;
  if (!a.spec.empty()) {
    int code = 0;
    if (!read_text(a.spec, config, code)) return code;
  }
  const char* cfg = a.spec.empty() ? nullptr : config.c_str();
  const geco_status s =
      warp ? geco_warpbench_generate(cfg, a.out.c_str(), a.seed, a.jobs, a.paper_scale)
           : geco_occlubench_generate(cfg, a.out.c_str(), a.seed, a.jobs, a.paper_scale);
  if (s) return fail(s);
  std::cout << (warp ? "warpbench" : "occlubench") << " written to " << a.out << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string pred, gt, task, map, out;
};

std::string fmt(const nlohmann::json& v, double scale, const char* suffix) {
  if (!v.is_number()) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f%s", v.get<double>() * scale, suffix);
  return buf;
}

int run_eval(const EvalArgs& a) {
  char* report = nullptr;
  if (geco_status s = geco_evaluate(a.pred.c_str(), a.gt.c_str(), a.task.c_str(),
                                    a.map.empty() ? nullptr : a.map.c_str(), &report))
    return fail(s);
  const std::string text = std::string(report) + "\n";
  geco_string_free(report);
  if (!a.out.empty()) {
    std::ofstream out(a.out, std::ios::binary);
    if (!out || !(out << text)) {
      std::cerr << "error (io): " << a.out << ": cannot write report\n";
      return kExitUsage;
    }
  }
  const auto j = nlohmann::json::parse(text);
  const auto& m = j["macro"];
  std::cout << "task " << j["task"].get<std::string>() << ", map " << j["map"].get<std::string>()
            << ", " << j["clips"].size() << " clips\n";
  if (a.task == "anomaly") {
    std::cout << "anomaly accuracy: " << fmt(m["anomaly_accuracy"], 1.0, "%") << "\n";
  } else {
    std::cout << "AP " << fmt(m["ap"], 100.0, "") << "  IoU " << fmt(m["iou"], 100.0, "") << "  F1 "
              << fmt(m["f1"], 100.0, "") << "  SRCC " << fmt(m["srcc"], 1.0, "") << "\n";
  }
  if (a.out.empty()) std::cout << text;
  return kExitOk;
}

struct GradArgs {
  std::string manifest;
  geco_gradcheck_options opt{};
};

int run_gradcheck(GradArgs& a) {
  if (!(a.opt.fd_step > 0.0)) {
    std::cerr << "error: --fd-step must be positive\n";
    return kExitUsage;
  }
  geco_clip_t* clip = nullptr;
  if (geco_status s = geco_clip_load(a.manifest.c_str(), &clip)) return fail(s);
  geco_gradcheck_result r{};
  char* worst = nullptr;
  const geco_status s = geco_gradcheck(clip, &a.opt, &r, &worst);
  geco_clip_free(clip);
  if (s) return fail(s);
  std::printf("loss %.9g  checked %zu  skipped %zu  max relative error %.3e (tolerance %.1e)\n",
              r.loss, r.checked, r.skipped, r.max_rel_error, a.opt.tolerance);
  const std::string where = worst ? worst : "";
  geco_string_free(worst);
  if (!r.passed) {
    std::printf("FAILED: worst entry %s, pixel (%d, %d)\n", where.c_str(), r.worst_x, r.worst_y);
    return kExitCheckFailed;
  }
  std::printf("ok\n");
  return kExitOk;
}

struct SynthArgs {
  std::string scene, out;
  int flow_offset = 2;
  int jobs = 1;
};

int run_synth(const SynthArgs& a) {
  std::string text;
  int code = 0;
  if (!read_text(a.scene, text, code)) return code;
  geco_clip_t* clip = nullptr;
  if (geco_status s = geco_synth_scene(text.c_str(), a.flow_offset, a.jobs, &clip)) return fail(s);
  const geco_status s = geco_clip_write(clip, a.out.c_str());
  geco_clip_free(clip);
  if (s) return fail(s);
  std::cout << "clip written to " << a.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometric consistency scoring, benchmark generation and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(geco_version()));

  ScoreArgs sa;
  geco_score_options_default(&sa.opt);
  auto* score = app.add_subcommand("score", "Score a clip (manifest or clip directory) or a tree of clips");
  score->add_option("input", sa.input, "manifest.json, clip directory or directory of clips")->required();
  score->add_option("-o,--out", sa.out, "Output directory for score.json, maps and heatmaps");
  score->add_option("--window", sa.opt.window, "Frames per sliding window (center included)")
      ->capture_default_str()->check(CLI::Range(2, 1000));
  score->add_option("--tau", sa.opt.tau, "Relative co-visibility threshold")
      ->capture_default_str()->check(CLI::PositiveNumber);
  score->add_option("--eval-fps", sa.opt.eval_fps, "Maximum evaluation frame rate")
      ->capture_default_str()->check(CLI::PositiveNumber);
  score->add_option("--window-seconds", sa.opt.window_seconds, "Length of scoring windows")
      ->capture_default_str()->check(CLI::PositiveNumber);
  score->add_option("--window-overlap", sa.opt.window_overlap, "Fractional window overlap in [0, 1)")
      ->capture_default_str()->check(CLI::Range(0.0, 0.999));
  score->add_option("-j,--jobs", sa.opt.jobs, "Worker threads")->capture_default_str()->check(CLI::Range(1, 1024));
  score->add_flag("--heatmaps", sa.heatmaps, "Write 8-bit grayscale PNG heatmaps");
  score->add_option("--heatmap-range", sa.range, "Map value rendered as white")
      ->capture_default_str()->check(CLI::PositiveNumber);

  BenchArgs wa, oa;
  auto* warp = app.add_subcommand("warpbench", "Generate a deformation benchmark suite");
  auto* occl = app.add_subcommand("occlubench", "Generate an occlusion benchmark suite");
  for (auto [cmd, args] : {std::pair{warp, &wa}, std::pair{occl, &oa}}) {
    cmd->add_option("--spec", args->spec, "Suite configuration (JSON)");
    cmd->add_option("-o,--out", args->out, "Output directory (its parent must exist)")->required();
    cmd->add_option("--seed", args->seed, "Random seed")->capture_default_str();
    cmd->add_option("-j,--jobs", args->jobs, "Worker threads")->capture_default_str()->check(CLI::Range(1, 1024));
    cmd->add_flag("--paper-scale", args->paper_scale, "Use the full-size suite preset");
  }

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate predictions against benchmark ground truth");
  eval->add_option("--pred", ea.pred, "Directory of score outputs (or clips)")->required();
  eval->add_option("--gt", ea.gt, "Benchmark directory")->required();
  eval->add_option("--task", ea.task, "localize | occlusion | anomaly")
      ->required()->check(CLI::IsMember({"localize", "occlusion", "anomaly"}));
  eval->add_option("--map", ea.map, "motion | structure | fused")
      ->check(CLI::IsMember({"motion", "structure", "fused"}));
  eval->add_option("-o,--out", ea.out, "Write the JSON report here");

  GradArgs ga;
  geco_gradcheck_options_default(&ga.opt);
  auto* grad = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  grad->add_option("manifest", ga.manifest, "manifest.json")->required();
  grad->add_option("--fd-step", ga.opt.fd_step, "Finite-difference step (pixels)")->capture_default_str();
  grad->add_option("--tolerance", ga.opt.tolerance, "Maximum relative error")
      ->capture_default_str()->check(CLI::PositiveNumber);
  grad->add_option("--tau", ga.opt.tau, "Relative co-visibility threshold")
      ->capture_default_str()->check(CLI::PositiveNumber);
  grad->add_option("--samples", ga.opt.samples, "Entries to check (0: all)")->capture_default_str();
  grad->add_option("--seed", ga.opt.seed, "Sampling seed")->capture_default_str();
  grad->add_option("-j,--jobs", ga.opt.jobs, "Worker threads")->capture_default_str()->check(CLI::Range(1, 1024));
  grad->add_option("--corrupt", ga.opt.corrupt)->group("");

  SynthArgs ya;
  auto* synth = app.add_subcommand("synth", "Render a scene description into a clip");
  synth->add_option("--scene", ya.scene, "Scene description (JSON)")->required();
  synth->add_option("-o,--out", ya.out, "Output clip directory")->required();
  synth->add_option("--flow-offset", ya.flow_offset, "Flows for all pairs up to this frame offset")
      ->capture_default_str()->check(CLI::Range(1, 16));
  synth->add_option("-j,--jobs", ya.jobs, "Worker threads")->capture_default_str()->check(CLI::Range(1, 1024));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*score) return run_score(sa);
  if (*warp) return run_bench(wa, true);
  if (*occl) return run_bench(oa, false);
  if (*eval) return run_eval(ea);
  if (*grad) return run_gradcheck(ga);
  if (*synth) return run_synth(ya);
  return kExitUsage;
}
