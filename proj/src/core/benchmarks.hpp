#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "consistency_metric.hpp"
#include "scene_synth.hpp"
#include "warp_synth.hpp"

namespace geco {

// Deterministic per-item seed.
uint64_t derive_seed(uint64_t seed, uint64_t index, uint64_t attempt = 0) noexcept;

struct WarpBenchConfig {
  int clips = 20;
  RandomSceneOptions scene;
  std::vector<TrackPreset> tracks{TrackPreset::Orbit, TrackPreset::Dolly, TrackPreset::Lateral};
  DeformClipSpec deform;
  double min_mean_displacement = 2.0;  // pixels, over the GT mask
  int flow_offset = 2;
};

struct OccluBenchConfig {
  int clips = 10;
  RandomSceneOptions scene;
  int flow_offset = 2;
};

// Strict parsing: unknown keys raise SchemaError.
WarpBenchConfig warpbench_config_from_json(const nlohmann::json& j, bool paper_scale);
OccluBenchConfig occlubench_config_from_json(const nlohmann::json& j, bool paper_scale);
nlohmann::ordered_json to_json(const WarpBenchConfig& c);
nlohmann::ordered_json to_json(const OccluBenchConfig& c);

// One clip of each suite, in memory. The warp clip carries exactly one
// deformed frame.
Clip make_warp_clip(const WarpBenchConfig& c, uint64_t seed, int index);
RenderedClip make_occlusion_clip(const OccluBenchConfig& c, uint64_t seed, int index);

// Writes <out_dir>/<clip_id>/ for every clip and <out_dir>/suite.json. The
// parent of out_dir must exist.
std::vector<std::string> generate_warpbench(const WarpBenchConfig& c, const fs::path& out_dir,
                                            uint64_t seed, int jobs);
std::vector<std::string> generate_occlubench(const OccluBenchConfig& c, const fs::path& out_dir,
                                             uint64_t seed, int jobs);

nlohmann::ordered_json score_report_json(const VideoScore& s, const std::string& clip_id);

// score.json, maps/{motion,structure,fused}_NNNNN.gcr and, when requested,
// heatmaps/{...}_NNNNN.png. Requires a score computed with keep_maps.
void write_score_outputs(const VideoScore& s, const std::string& clip_id, const fs::path& out_dir,
                         bool heatmaps, double heatmap_range);

// True when `dir` holds clip subdirectories rather than a manifest.
bool is_clip_tree(const fs::path& dir);

// Scores every clip under `in_dir` into <out_dir>/<clip_id>/.
std::vector<std::string> score_tree(const fs::path& in_dir, const fs::path& out_dir,
                                    const ScoreOptions& options, bool heatmaps, double range);

enum class EvalTask { Localize, Occlusion, Anomaly };
EvalTask parse_eval_task(const std::string& name);
enum class MapKind { Motion, Structure, Fused };
MapKind parse_map_kind(const std::string& name);
const char* map_name(MapKind m);

// Pairs prediction and GT clips by clip_id; MissingInputError lists any
// unpaired ids.
nlohmann::ordered_json evaluate_directories(const fs::path& pred_dir, const fs::path& gt_dir,
                                            EvalTask task, MapKind map);

}  // namespace geco
