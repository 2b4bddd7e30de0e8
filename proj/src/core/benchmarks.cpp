#include "benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "evaluation.hpp"
#include "heatmap.hpp"
#include "parallel.hpp"

namespace geco {

uint64_t derive_seed(uint64_t seed, uint64_t index, uint64_t attempt) noexcept {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1) + 0xbf58476d1ce4e5b9ULL * attempt;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr int kMaxAttempts = 64;

std::string clip_name(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04d", prefix, index);
  return buf;
}

std::string frame_file(const char* stem, int t, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05d.%s", stem, t, ext);
  return buf;
}

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(path_ + ": expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw SchemaError(path_ + "." + it.key() + ": unknown key");
  }
  const json* get(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  void integer(const std::string& key, int& dst, int lo, int hi = std::numeric_limits<int>::max()) {
    if (const json* v = get(key)) {
      if (!v->is_number_integer()) throw SchemaError(path_ + "." + key + ": expected an integer");
      const long long x = v->get<long long>();
      if (x < lo || x > hi)
        throw SchemaError(path_ + "." + key + ": must be in [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "]");
      dst = static_cast<int>(x);
    }
  }
  void number(const std::string& key, double& dst, bool positive) {
    if (const json* v = get(key)) {
      if (!v->is_number() || !std::isfinite(v->get<double>()))
        throw SchemaError(path_ + "." + key + ": expected a finite number");
      dst = v->get<double>();
      if (positive && !(dst > 0.0)) throw SchemaError(path_ + "." + key + ": must be positive");
    }
  }
  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void read_scene_options(Reader& r, RandomSceneOptions& s) {
  int w = static_cast<int>(s.width), h = static_cast<int>(s.height);
  r.integer("width", w, 16, 8192);
  r.integer("height", h, 16, 8192);
  s.width = static_cast<uint32_t>(w);
  s.height = static_cast<uint32_t>(h);
  r.integer("frame_count", s.frame_count, 2, 100000);
  r.number("fps", s.fps, true);
  r.number("speed_scale", s.speed_scale, true);
}

TrackPreset parse_track(const json& v, const std::string& path) {
  const std::string t = v.is_string() ? v.get<std::string>() : "";
  if (t == "orbit") return TrackPreset::Orbit;
  if (t == "dolly") return TrackPreset::Dolly;
  if (t == "lateral") return TrackPreset::Lateral;
  throw SchemaError(path + ": expected orbit|dolly|lateral");
}

const char* track_name(TrackPreset t) {
  switch (t) {
    case TrackPreset::Orbit: return "orbit";
    case TrackPreset::Dolly: return "dolly";
    case TrackPreset::Lateral: return "lateral";
  }
  return "orbit";
}

ojson scene_options_json(const RandomSceneOptions& s) {
  return {{"width", s.width},
          {"height", s.height},
          {"frame_count", s.frame_count},
          {"fps", s.fps},
          {"speed_scale", s.speed_scale}};
}

void prepare_out_dir(const fs::path& out_dir) {
  const fs::path abs = fs::absolute(out_dir);
  const fs::path parent = abs.parent_path();
  if (!parent.empty() && !fs::is_directory(parent))
    throw ValidationError(out_dir.string() + ": parent directory does not exist");
  std::error_code ec;
  fs::create_directories(abs, ec);
  if (ec) throw IoError(out_dir.string() + ": cannot create directory: " + ec.message());
}

}  // namespace

WarpBenchConfig warpbench_config_from_json(const json& j, bool paper_scale) {
  WarpBenchConfig c;
  if (paper_scale) {
    c.clips = 200;
    c.scene.frame_count = 20;
  }
  if (j.is_null()) return c;
  Reader r(j, "warpbench");
  r.integer("clips", c.clips, 1, 100000);
  read_scene_options(r, c.scene);
  if (c.scene.frame_count < 3) throw SchemaError("warpbench.frame_count: must be >= 3");
  if (const json* t = r.get("tracks")) {
    if (!t->is_array() || t->empty()) throw SchemaError("warpbench.tracks: expected a nonempty array");
    c.tracks.clear();
    for (size_t i = 0; i < t->size(); ++i)
      c.tracks.push_back(parse_track((*t)[i], "warpbench.tracks[" + std::to_string(i) + "]"));
  }
  if (const json* d = r.get("deform")) {
    Reader dr(*d, "warpbench.deform");
    dr.integer("control_count", c.deform.control_count, 3, 1000);
    dr.number("displacement_scale", c.deform.displacement_scale, false);
    dr.number("omega", c.deform.omega, false);
    dr.number("ema_beta", c.deform.ema_beta, false);
    dr.number("feather_radius", c.deform.feather_radius, true);
    dr.number("mask_threshold", c.deform.mask_threshold, false);
    dr.number("regularization", c.deform.regularization, false);
    try {
      validate_deform_spec(c.deform);
    } catch (const DomainError& e) {
      throw SchemaError(std::string("warpbench.") + e.what());
    }
  }
  r.number("min_mean_displacement", c.min_mean_displacement, false);
  r.integer("flow_offset", c.flow_offset, 1, 16);
  return c;
}

OccluBenchConfig occlubench_config_from_json(const json& j, bool paper_scale) {
  OccluBenchConfig c;
  if (paper_scale) {
    c.clips = 30;
    c.scene.frame_count = 40;
  }
  if (j.is_null()) return c;
  Reader r(j, "occlubench");
  r.integer("clips", c.clips, 1, 100000);
  read_scene_options(r, c.scene);
  if (c.scene.frame_count < 8) throw SchemaError("occlubench.frame_count: must be >= 8");
  r.integer("flow_offset", c.flow_offset, 1, 16);
  return c;
}

ojson to_json(const WarpBenchConfig& c) {
  ojson tracks = ojson::array();
  for (auto t : c.tracks) tracks.push_back(track_name(t));
  ojson j = {{"clips", c.clips}};
  const ojson scene = scene_options_json(c.scene);
  for (auto it = scene.begin(); it != scene.end(); ++it) j[it.key()] = it.value();
  j["tracks"] = tracks;
  j["deform"] = {{"control_count", c.deform.control_count},
                 {"displacement_scale", c.deform.displacement_scale},
                 {"omega", c.deform.omega},
                 {"ema_beta", c.deform.ema_beta},
                 {"feather_radius", c.deform.feather_radius},
                 {"mask_threshold", c.deform.mask_threshold},
                 {"regularization", c.deform.regularization}};
  j["min_mean_displacement"] = c.min_mean_displacement;
  j["flow_offset"] = c.flow_offset;
  return j;
}

ojson to_json(const OccluBenchConfig& c) {
  ojson j = {{"clips", c.clips}};
  const ojson scene = scene_options_json(c.scene);
  for (auto it = scene.begin(); it != scene.end(); ++it) j[it.key()] = it.value();
  j["flow_offset"] = c.flow_offset;
  return j;
}

Clip make_warp_clip(const WarpBenchConfig& c, uint64_t seed, int index) {
  const TrackPreset track = c.tracks[static_cast<size_t>(index) % c.tracks.size()];
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const uint64_t s = derive_seed(seed, static_cast<uint64_t>(index), attempt);
    int subject = -1;
    SceneSpec scene = random_scene(s, track, c.scene, &subject);
    scene.clip_id = clip_name("warp", index);
    RenderedClip rc = render_clip(scene, c.flow_offset);
    std::map<int, Mask> fg;
    for (int t = 0; t < rc.clip.frame_count(); ++t)
      fg[t] = primitive_mask(rc.primitive_ids[t], scene.width, scene.height, subject);
    std::mt19937_64 rng(s);
    const int warped = static_cast<int>(rng() % static_cast<uint64_t>(scene.frame_count));
    if (fg[warped].count() < static_cast<size_t>(c.deform.control_count)) continue;
    Clip clip = generate_warp_clip(rc.clip, c.deform, {warped}, s, &fg);

    const GroundTruth& gt = clip.ground_truth.at(warped);
    double sum = 0.0;
    size_t n = 0;
    for (size_t p = 0; p < gt.mask->pixel_count(); ++p) {
      if (!(*gt.mask)[p]) continue;
      const double ux = gt.displacement->at(p, 0), uy = gt.displacement->at(p, 1);
      sum += std::sqrt(ux * ux + uy * uy);
      ++n;
    }
    const double mean = n ? sum / static_cast<double>(n) : 0.0;
    if (n == 0 || mean < c.min_mean_displacement) continue;
    clip.metadata["benchmark"] = "warpbench";
    clip.metadata["track"] = track_name(track);
    clip.metadata["mean_displacement"] = mean;
    return clip;
  }
  throw SpecError("warpbench: clip " + std::to_string(index) +
                  " did not reach the minimum mean displacement");
}

RenderedClip make_occlusion_clip(const OccluBenchConfig& c, uint64_t seed, int index) {
  std::string last;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const uint64_t s = derive_seed(seed, static_cast<uint64_t>(index), attempt);
    auto [scene, event] = random_occlusion_scene(s, c.scene);
    scene.clip_id = clip_name("occl", index);
    try {
      RenderedClip rc = generate_occlusion_clip(scene, event, c.flow_offset);
      if (rc.clip.ground_truth.at(event.t1).mask->count() == 0) continue;
      rc.clip.metadata["benchmark"] = "occlubench";
      return rc;
    } catch (const SpecError& e) {
      last = e.what();
    }
  }
  throw SpecError("occlubench: clip " + std::to_string(index) + " has no valid event: " + last);
}

namespace {

template <typename Make>
std::vector<std::string> generate_suite(const char* name, ojson config, int clips,
                                        const fs::path& out_dir, uint64_t seed, int jobs,
                                        Make make) {
  prepare_out_dir(out_dir);
  std::vector<std::string> ids(static_cast<size_t>(clips));
  parallel_for(ids.size(), jobs, [&](size_t i) {
    Clip clip = make(static_cast<int>(i));
    write_clip(clip, out_dir / clip.clip_id);
    ids[i] = clip.clip_id;
  });
  ojson suite = {{"benchmark", name}, {"seed", seed}, {"config", std::move(config)}, {"clips", ids}};
  write_text_atomic(out_dir / "suite.json", suite.dump(2) + "\n");
  return ids;
}

}  // namespace

std::vector<std::string> generate_warpbench(const WarpBenchConfig& c, const fs::path& out_dir,
                                            uint64_t seed, int jobs) {
  return generate_suite("warpbench", to_json(c), c.clips, out_dir, seed, jobs,
                        [&](int i) { return make_warp_clip(c, seed, i); });
}

std::vector<std::string> generate_occlubench(const OccluBenchConfig& c, const fs::path& out_dir,
                                             uint64_t seed, int jobs) {
  return generate_suite("occlubench", to_json(c), c.clips, out_dir, seed, jobs,
                        [&](int i) { return make_occlusion_clip(c, seed, i).clip; });
}

ojson score_report_json(const VideoScore& s, const std::string& clip_id) {
  ojson per_frame = ojson::array();
  for (const FrameScore& f : s.per_frame)
    per_frame.push_back({{"frame", f.center_index},
                         {"motion", f.motion_mean},
                         {"structure", f.structure_mean},
                         {"fused", f.fused_mean},
                         {"valid_fraction", f.valid_pixel_fraction}});
  ojson windows = ojson::array();
  for (const WindowSpan& w : s.windows) windows.push_back({{"begin", w.begin}, {"end", w.end}});
  return {{"schema", "geco.score_report.v1"},
          {"clip_id", clip_id},
          {"options",
           {{"window", s.options.window},
            {"tau", s.options.tau},
            {"eval_fps", s.options.eval_fps},
            {"window_seconds", s.options.window_seconds},
            {"window_overlap", s.options.window_overlap}}},
          {"sample_fps", s.sample_fps},
          {"scores", {{"motion", s.motion}, {"structure", s.structure}, {"fused", s.fused}}},
          {"retained", s.retained},
          {"windows", windows},
          {"per_frame", per_frame}};
}

void write_score_outputs(const VideoScore& s, const std::string& clip_id, const fs::path& out_dir,
                         bool heatmaps, double range) {
  if (heatmaps && !(range > 0.0 && std::isfinite(range)))
    throw DomainError("heatmap range must be positive");
  prepare_out_dir(out_dir);
  if (s.maps.size() != s.per_frame.size())
    throw DomainError("score was computed without per-pixel maps");
  std::error_code ec;
  fs::create_directories(out_dir / "maps", ec);
  if (heatmaps) fs::create_directories(out_dir / "heatmaps", ec);
  if (ec) throw IoError(out_dir.string() + ": cannot create output directories: " + ec.message());
  for (size_t k = 0; k < s.per_frame.size(); ++k) {
    const int t = s.per_frame[k].center_index;
    const PairMaps& m = s.maps[k];
    const std::pair<const char*, const Field*> maps[] = {
        {"motion", &m.motion}, {"structure", &m.structure}, {"fused", &m.fused}};
    for (const auto& [name, f] : maps) {
      write_raster(grid_cast<float>(*f), out_dir / "maps" / frame_file(name, t, "gcr"));
      if (heatmaps) write_heatmap_png(*f, range, out_dir / "heatmaps" / frame_file(name, t, "png"));
    }
  }
  write_text_atomic(out_dir / "score.json", score_report_json(s, clip_id).dump(2) + "\n");
}

bool is_clip_tree(const fs::path& dir) {
  if (!fs::is_directory(dir) || fs::exists(dir / "manifest.json")) return false;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) return true;
  return false;
}

namespace {

std::vector<fs::path> sorted_subdirs(const fs::path& dir, const char* marker) {
  if (!fs::is_directory(dir)) throw MissingInputError(dir.string() + ": no such directory");
  if (fs::exists(dir / marker)) return {dir};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && fs::exists(e.path() / marker)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

json read_json(const fs::path& p) {
  const auto bytes = read_file(p);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw SchemaError(p.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace

std::vector<std::string> score_tree(const fs::path& in_dir, const fs::path& out_dir,
                                    const ScoreOptions& options, bool heatmaps, double range) {
  const auto dirs = sorted_subdirs(in_dir, "manifest.json");
  prepare_out_dir(out_dir);
  std::vector<std::string> ids(dirs.size());
  ScoreOptions inner = options;
  inner.jobs = 1;
  inner.keep_maps = true;
  parallel_for(dirs.size(), options.jobs, [&](size_t i) {
    const Clip clip = load_clip(dirs[i] / "manifest.json");
    const VideoScore s = score_clip(clip, inner);
    write_score_outputs(s, clip.clip_id, out_dir / clip.clip_id, heatmaps, range);
    ids[i] = clip.clip_id;
  });
  return ids;
}

EvalTask parse_eval_task(const std::string& name) {
  if (name == "localize") return EvalTask::Localize;
  if (name == "occlusion") return EvalTask::Occlusion;
  if (name == "anomaly") return EvalTask::Anomaly;
  throw ValidationError("unknown task '" + name + "' (expected localize|occlusion|anomaly)");
}

MapKind parse_map_kind(const std::string& name) {
  if (name == "motion") return MapKind::Motion;
  if (name == "structure") return MapKind::Structure;
  if (name == "fused") return MapKind::Fused;
  throw ValidationError("unknown map '" + name + "' (expected motion|structure|fused)");
}

const char* map_name(MapKind m) {
  switch (m) {
    case MapKind::Motion: return "motion";
    case MapKind::Structure: return "structure";
    case MapKind::Fused: return "fused";
  }
  return "fused";
}

namespace {

// A prediction source: either a score output directory or a clip whose GT
// displacement magnitude serves as the prediction.
struct Prediction {
  fs::path dir;
  bool from_score = false;
  json score;
  std::optional<Clip> clip;
};

std::string read_clip_id(const fs::path& dir, bool& from_score) {
  from_score = fs::exists(dir / "score.json");
  const json j = read_json(dir / (from_score ? "score.json" : "manifest.json"));
  if (!j.is_object() || !j.contains("clip_id") || !j["clip_id"].is_string())
    throw SchemaError((dir / (from_score ? "score.json" : "manifest.json")).string() +
                      ": missing clip_id");
  return j["clip_id"].get<std::string>();
}

std::map<std::string, fs::path> index_dir(const fs::path& dir, bool prediction) {
  std::map<std::string, fs::path> out;
  std::vector<fs::path> dirs;
  if (prediction) {
    dirs = sorted_subdirs(dir, "score.json");
    if (dirs.empty()) dirs = sorted_subdirs(dir, "manifest.json");
  } else {
    dirs = sorted_subdirs(dir, "manifest.json");
  }
  for (const auto& d : dirs) {
    bool from_score = false;
    const std::string id = read_clip_id(d, from_score);
    if (!prediction && from_score) continue;
    if (!out.emplace(id, d).second)
      throw SchemaError(dir.string() + ": clip_id '" + id + "' appears twice");
  }
  return out;
}

Field magnitude_of(const Field& disp) {
  Field m(disp.width(), disp.height(), 1, 0.0);
  if (disp.has_mask()) m.mask() = disp.mask();
  for (size_t p = 0; p < m.pixel_count(); ++p) {
    const double ux = disp.at(p, 0), uy = disp.at(p, 1);
    m.at(p) = std::sqrt(ux * ux + uy * uy);
  }
  return m;
}

Field prediction_map(const Prediction& pred, MapKind map, int t) {
  if (pred.from_score) return grid_cast<double>(read_raster(pred.dir / "maps" / frame_file(map_name(map), t, "gcr")));
  const auto it = pred.clip->ground_truth.find(t);
  if (it == pred.clip->ground_truth.end() || !it->second.displacement)
    throw MissingInputError((pred.dir / "manifest.json").string() + ": no displacement for frame " +
                            std::to_string(t));
  return magnitude_of(*it->second.displacement);
}

std::vector<std::pair<int, double>> per_frame_scores(const Prediction& pred, MapKind map) {
  std::vector<std::pair<int, double>> out;
  if (pred.from_score) {
    const json& pf = pred.score.at("per_frame");
    for (const auto& e : pf) {
      const json& v = e.at(map_name(map));
      out.emplace_back(e.at("frame").get<int>(),
                       v.is_number() ? v.get<double>() : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
  }
  for (int t = 0; t < pred.clip->frame_count(); ++t) {
    double v = 0.0;
    const auto it = pred.clip->ground_truth.find(t);
    if (it != pred.clip->ground_truth.end() && it->second.displacement) {
      const Field m = magnitude_of(*it->second.displacement);
      double sum = 0.0;
      for (double x : m.values()) sum += x;
      v = sum / static_cast<double>(m.pixel_count());
    }
    out.emplace_back(t, v);
  }
  return out;
}

ojson nullable(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

double mean_finite(const std::vector<double>& v) {
  double sum = 0.0;
  size_t n = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      sum += x;
      ++n;
    }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

ojson evaluate_directories(const fs::path& pred_dir, const fs::path& gt_dir, EvalTask task,
                           MapKind map) {
  const auto preds = index_dir(pred_dir, true);
  const auto gts = index_dir(gt_dir, false);
  std::vector<std::string> unpaired;
  for (const auto& [id, _] : preds)
    if (!gts.count(id)) unpaired.push_back(id);
  for (const auto& [id, _] : gts)
    if (!preds.count(id)) unpaired.push_back(id);
  if (!unpaired.empty()) {
    std::sort(unpaired.begin(), unpaired.end());
    std::string list;
    for (const auto& id : unpaired) list += (list.empty() ? "" : ", ") + id;
    throw MissingInputError("unpaired clips: " + list);
  }
  if (gts.empty()) throw MissingInputError(gt_dir.string() + ": no clips found");

  std::vector<double> aps, ious, f1s, srccs, accs;
  ojson clips = ojson::array();
  for (const auto& [id, gdir] : gts) {
    const Clip gt = load_clip(gdir / "manifest.json");
    Prediction pred;
    pred.dir = preds.at(id);
    bool from_score = false;
    read_clip_id(pred.dir, from_score);
    pred.from_score = from_score;
    if (from_score) pred.score = read_json(pred.dir / "score.json");
    else pred.clip = load_clip(pred.dir / "manifest.json");

    ojson entry = {{"clip_id", id}};
    ojson per_frame = ojson::array();
    double ap = NAN, iou = NAN, f1 = NAN, rho = NAN, acc = NAN;
    if (task == EvalTask::Anomaly) {
      int truth = -1;
      for (const auto& [t, g] : gt.ground_truth)
        if (g.displacement || g.mask) {
          truth = t;
          break;
        }
      if (truth < 0) throw MissingInputError(id + ": no ground-truth frame for the anomaly task");
      const auto scores = per_frame_scores(pred, map);
      if (scores.empty()) throw MissingInputError(id + ": prediction has no per-frame scores");
      std::vector<double> values;
      for (const auto& [t, v] : scores) {
        values.push_back(std::isnan(v) ? -std::numeric_limits<double>::infinity() : v);
        per_frame.push_back({{"frame", t}, {"score", nullable(v)}});
      }
      const int predicted = scores[static_cast<size_t>(anomaly_argmax(values))].first;
      acc = predicted == truth ? 100.0 : 0.0;
      entry["predicted_frame"] = predicted;
      entry["true_frame"] = truth;
    } else {
      std::vector<double> fa, fi, ff, fs_;
      for (const auto& [t, g] : gt.ground_truth) {
        if (!g.mask) continue;
        const Field raw = prediction_map(pred, map, t);
        const Field& depth = gt.frames.at(t).depth;
        if (!raw.same_shape(depth) || raw.channels() != 1)
          throw ShapeError(id + ": prediction for frame " + std::to_string(t) +
                           " does not match the ground truth resolution");
        LocalizationCase c;
        c.prediction = Field(depth.width(), depth.height(), 1, 0.0);
        c.prediction.mask() = validity_of(depth).bytes();
        for (size_t p = 0; p < raw.pixel_count(); ++p)
          if (raw.valid(p) && std::isfinite(raw.at(p))) c.prediction.at(p) = raw.at(p);
        c.gt_mask = *g.mask;
        if (task == EvalTask::Localize && g.displacement) c.gt_magnitude = magnitude_of(*g.displacement);
        const RankedPixels px = collect_valid(c);
        if (std::none_of(px.labels.begin(), px.labels.end(), [](uint8_t l) { return l; })) continue;
        const double fap = ranking_ap(px.scores, px.labels);
        const IouF1 best = best_threshold_iou_f1(px.scores, px.labels);
        double frho = NAN;
        if (c.gt_magnitude) {
          try {
            frho = srcc(px.scores, px.magnitudes);
          } catch (const DomainError&) {
          }
        }
        fa.push_back(fap);
        fi.push_back(best.iou);
        ff.push_back(best.f1);
        fs_.push_back(frho);
        per_frame.push_back({{"frame", t},
                             {"ap", fap},
                             {"iou", best.iou},
                             {"f1", best.f1},
                             {"srcc", nullable(frho)}});
      }
      if (fa.empty()) throw MissingInputError(id + ": no ground-truth mask with positives");
      ap = mean_finite(fa);
      iou = mean_finite(fi);
      f1 = mean_finite(ff);
      rho = mean_finite(fs_);
    }

    double tm = NAN, mi = NAN;
    std::vector<Field> steps;
    for (int t = 0; t + 1 < gt.frame_count(); ++t) {
      const Field* f = gt.flow(t, t + 1);
      if (!f) {
        steps.clear();
        break;
      }
      steps.push_back(*f);
    }
    if (!steps.empty()) {
      const MotionStats ms =
          motion_stats(steps, steps[0].width(), steps[0].height(), gt.fps);
      tm = ms.total_motion;
      mi = ms.mean_motion;
    }

    entry["per_frame"] = per_frame;
    entry["ap"] = nullable(ap);
    entry["iou"] = nullable(iou);
    entry["f1"] = nullable(f1);
    entry["srcc"] = nullable(rho);
    entry["anomaly_accuracy"] = nullable(acc);
    entry["total_motion"] = nullable(tm);
    entry["mean_motion"] = nullable(mi);
    clips.push_back(entry);
    if (std::isfinite(ap)) aps.push_back(ap);
    if (std::isfinite(iou)) ious.push_back(iou);
    if (std::isfinite(f1)) f1s.push_back(f1);
    if (std::isfinite(rho)) srccs.push_back(rho);
    if (std::isfinite(acc)) accs.push_back(acc);
  }
  auto macro = [](const std::vector<double>& v) {
    return v.empty() ? ojson(nullptr) : ojson(macro_average(v));
  };
  return {{"schema", "geco.eval_report.v1"},
          {"task", task == EvalTask::Anomaly ? "anomaly"
                   : task == EvalTask::Occlusion ? "occlusion"
                                                 : "localize"},
          {"map", map_name(map)},
          {"clips", clips},
          {"macro",
           {{"ap", macro(aps)},
            {"iou", macro(ious)},
            {"f1", macro(f1s)},
            {"srcc", macro(srccs)},
            {"anomaly_accuracy", macro(accs)}}}};
}

}  // namespace geco
