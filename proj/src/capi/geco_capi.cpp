#include "geco/geco.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "benchmarks.hpp"
#include "heatmap.hpp"
#include "metric_gradients.hpp"
#include "scene_synth.hpp"
#include "tensor_io.hpp"

struct geco_raster {
  geco::Raster r;
};

struct geco_clip {
  geco::Clip clip;
};

struct geco_score {
  geco::VideoScore score;
  std::string clip_id;
};

namespace {

thread_local std::string g_error;

geco_status status_of(geco::ErrorKind k) {
  using geco::ErrorKind;
  switch (k) {
    case ErrorKind::Io: return GECO_ERR_IO;
    case ErrorKind::Format: return GECO_ERR_FORMAT;
    case ErrorKind::Validation: return GECO_ERR_VALIDATION;
    case ErrorKind::Schema: return GECO_ERR_SCHEMA;
    case ErrorKind::Domain: return GECO_ERR_DOMAIN;
    case ErrorKind::Shape: return GECO_ERR_SHAPE;
    case ErrorKind::MissingInput: return GECO_ERR_MISSING_INPUT;
    case ErrorKind::Solve: return GECO_ERR_SOLVE;
    case ErrorKind::Spec: return GECO_ERR_SPEC;
    case ErrorKind::BehindCamera: return GECO_ERR_BEHIND_CAMERA;
  }
  return GECO_ERR_INTERNAL;
}

template <typename F>
geco_status guard(F&& f) {
  try {
    g_error.clear();
    f();
    return GECO_OK;
  } catch (const geco::Error& e) {
    g_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_error = std::string("invalid JSON: ") + e.what();
    return GECO_ERR_SCHEMA;
  } catch (const std::filesystem::filesystem_error& e) {
    g_error = e.what();
    return GECO_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
    return GECO_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_error = e.what();
    return GECO_ERR_INTERNAL;
  } catch (...) {
    g_error = "unknown error";
    return GECO_ERR_INTERNAL;
  }
}

struct ArgError : geco::Error {
  explicit ArgError(const std::string& w) : geco::Error(geco::ErrorKind::Validation, w) {}
};

geco_status bad_argument(const char* what) {
  g_error = what;
  return GECO_ERR_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json parse_optional(const char* text) {
  if (!text || !*text) return nullptr;
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw geco::SchemaError(std::string("invalid JSON: ") + e.what());
  }
}

geco::ScoreOptions to_options(const geco_score_options* o) {
  geco::ScoreOptions s;
  if (o) {
    s.window = o->window;
    s.tau = o->tau;
    s.eval_fps = o->eval_fps;
    s.window_seconds = o->window_seconds;
    s.window_overlap = o->window_overlap;
    s.jobs = o->jobs;
    s.keep_maps = o->keep_maps != 0;
  }
  return s;
}

}  // namespace

extern "C" {

const char* geco_last_error(void) { return g_error.c_str(); }

const char* geco_status_name(geco_status s) {
  switch (s) {
    case GECO_OK: return "ok";
    case GECO_ERR_IO: return "io";
    case GECO_ERR_FORMAT: return "format";
    case GECO_ERR_VALIDATION: return "validation";
    case GECO_ERR_SCHEMA: return "schema";
    case GECO_ERR_DOMAIN: return "domain";
    case GECO_ERR_SHAPE: return "shape";
    case GECO_ERR_MISSING_INPUT: return "missing_input";
    case GECO_ERR_SOLVE: return "solve";
    case GECO_ERR_SPEC: return "spec";
    case GECO_ERR_BEHIND_CAMERA: return "behind_camera";
    case GECO_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case GECO_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* geco_version(void) { return "1.0.0"; }

void geco_string_free(char* s) { std::free(s); }

geco_status geco_raster_create(uint32_t width, uint32_t height, uint32_t channels,
                               geco_raster_t** out) {
  if (!out) return bad_argument("out is NULL");
  return guard([&] { *out = new geco_raster{geco::Raster(width, height, channels, 0.0f)}; });
}

geco_status geco_raster_read(const char* path, geco_raster_t** out) {
  if (!path || !out) return bad_argument("path or out is NULL");
  return guard([&] { *out = new geco_raster{geco::read_raster(path)}; });
}

geco_status geco_raster_write(const geco_raster_t* r, const char* path) {
  if (!r || !path) return bad_argument("raster or path is NULL");
  return guard([&] { geco::write_raster(r->r, path); });
}

geco_status geco_raster_decode(const uint8_t* bytes, size_t size, geco_raster_t** out) {
  if ((!bytes && size) || !out) return bad_argument("bytes or out is NULL");
  return guard([&] { *out = new geco_raster{geco::decode_raster(std::span(bytes, size))}; });
}

geco_status geco_raster_encode(const geco_raster_t* r, uint8_t* buffer, size_t capacity,
                               size_t* size) {
  if (!r || !size) return bad_argument("raster or size is NULL");
  return guard([&] {
    const auto bytes = geco::encode_raster(r->r);
    *size = bytes.size();
    if (!buffer) return;
    if (capacity < bytes.size()) throw geco::DomainError("buffer too small");
    std::memcpy(buffer, bytes.data(), bytes.size());
  });
}

void geco_raster_free(geco_raster_t* r) { delete r; }

uint32_t geco_raster_width(const geco_raster_t* r) { return r ? r->r.width() : 0; }
uint32_t geco_raster_height(const geco_raster_t* r) { return r ? r->r.height() : 0; }
uint32_t geco_raster_channels(const geco_raster_t* r) { return r ? r->r.channels() : 0; }
int geco_raster_has_mask(const geco_raster_t* r) { return r && r->r.has_mask() ? 1 : 0; }
float* geco_raster_data(geco_raster_t* r) { return r ? r->r.data().data() : nullptr; }

int geco_raster_valid(const geco_raster_t* r, uint32_t x, uint32_t y) {
  if (!r || x >= r->r.width() || y >= r->r.height()) return 0;
  return r->r.valid(x, y) ? 1 : 0;
}

geco_status geco_raster_set_valid(geco_raster_t* r, uint32_t x, uint32_t y, int valid) {
  if (!r) return bad_argument("raster is NULL");
  if (x >= r->r.width() || y >= r->r.height()) return bad_argument("pixel out of range");
  return guard([&] { r->r.set_valid(x, y, valid != 0); });
}

geco_status geco_write_heatmap_png(const geco_raster_t* map, double range, const char* path) {
  if (!map || !path) return bad_argument("map or path is NULL");
  return guard([&] { geco::write_heatmap_png(geco::grid_cast<double>(map->r), range, path); });
}

geco_status geco_clip_load(const char* manifest_path, geco_clip_t** out) {
  if (!manifest_path || !out) return bad_argument("path or out is NULL");
  return guard([&] { *out = new geco_clip{geco::load_clip(std::filesystem::path(manifest_path))}; });
}

void geco_clip_free(geco_clip_t* clip) { delete clip; }

int geco_clip_frame_count(const geco_clip_t* clip) { return clip ? clip->clip.frame_count() : 0; }

const char* geco_clip_id(const geco_clip_t* clip) { return clip ? clip->clip.clip_id.c_str() : ""; }

geco_status geco_clip_write(const geco_clip_t* clip, const char* dir) {
  if (!clip || !dir) return bad_argument("clip or dir is NULL");
  return guard([&] { geco::write_clip(clip->clip, dir); });
}

geco_status geco_synth_scene(const char* scene_json, int flow_offset, int jobs, geco_clip_t** out) {
  if (!scene_json || !out) return bad_argument("scene or out is NULL");
  return guard([&] {
    const geco::SceneSpec spec = geco::scene_from_json(parse_optional(scene_json));
    *out = new geco_clip{geco::render_clip(spec, flow_offset, jobs).clip};
  });
}

void geco_score_options_default(geco_score_options* o) {
  if (!o) return;
  const geco::ScoreOptions d;
  o->window = d.window;
  o->tau = d.tau;
  o->eval_fps = d.eval_fps;
  o->window_seconds = d.window_seconds;
  o->window_overlap = d.window_overlap;
  o->jobs = d.jobs;
  o->keep_maps = d.keep_maps ? 1 : 0;
}

geco_status geco_score_clip(const geco_clip_t* clip, const geco_score_options* options,
                            geco_score_t** out) {
  if (!clip || !out) return bad_argument("clip or out is NULL");
  return guard([&] {
    *out = new geco_score{geco::score_clip(clip->clip, to_options(options)), clip->clip.clip_id};
  });
}

void geco_score_free(geco_score_t* s) { delete s; }
double geco_score_motion(const geco_score_t* s) { return s ? s->score.motion : 0.0; }
double geco_score_structure(const geco_score_t* s) { return s ? s->score.structure : 0.0; }
double geco_score_fused(const geco_score_t* s) { return s ? s->score.fused : 0.0; }
size_t geco_score_frame_count(const geco_score_t* s) { return s ? s->score.per_frame.size() : 0; }

geco_status geco_score_frame_map(const geco_score_t* s, size_t k, int which, geco_raster_t** out) {
  if (!s || !out) return bad_argument("score or out is NULL");
  if (which < 0 || which > 2) return bad_argument("map selector must be 0, 1 or 2");
  if (k >= s->score.maps.size()) return bad_argument("frame has no stored map (keep_maps off?)");
  return guard([&] {
    const geco::PairMaps& m = s->score.maps[k];
    const geco::Field& f = which == 0 ? m.motion : which == 1 ? m.structure : m.fused;
    *out = new geco_raster{geco::grid_cast<float>(f)};
  });
}

geco_status geco_score_to_json(const geco_score_t* s, char** json) {
  if (!s || !json) return bad_argument("score or json is NULL");
  return guard([&] { *json = dup_string(geco::score_report_json(s->score, s->clip_id).dump(2)); });
}

geco_status geco_score_write(const geco_score_t* s, const char* out_dir, int heatmaps,
                             double heatmap_range) {
  if (!s || !out_dir) return bad_argument("score or out_dir is NULL");
  return guard([&] {
    geco::write_score_outputs(s->score, s->clip_id, out_dir, heatmaps != 0, heatmap_range);
  });
}

geco_status geco_score_tree(const char* in_dir, const char* out_dir,
                            const geco_score_options* options, int heatmaps, double heatmap_range) {
  if (!in_dir || !out_dir) return bad_argument("in_dir or out_dir is NULL");
  return guard([&] {
    geco::score_tree(in_dir, out_dir, to_options(options), heatmaps != 0, heatmap_range);
  });
}

geco_status geco_loss_geo(const geco_clip_t* clip, const int* centers, size_t n_centers,
                          const int* offsets, size_t n_offsets, double tau, double* loss) {
  if (!clip || !loss || (!centers && n_centers) || (!offsets && n_offsets))
    return bad_argument("NULL argument");
  return guard([&] {
    geco::LossSpec spec;
    spec.centers.assign(centers, centers + n_centers);
    spec.offsets.assign(offsets, offsets + n_offsets);
    *loss = geco::loss_geo(clip->clip, spec, tau);
  });
}

void geco_gradcheck_options_default(geco_gradcheck_options* o) {
  if (!o) return;
  const geco::GradcheckOptions d;
  o->fd_step = d.flow_step;
  o->tolerance = d.tolerance;
  o->tau = geco::kDefaultTau;
  o->samples = d.max_entries;
  o->seed = d.seed;
  o->jobs = d.jobs;
  o->corrupt = d.corrupt;
}

geco_status geco_gradcheck(const geco_clip_t* clip, const geco_gradcheck_options* options,
                           geco_gradcheck_result* result, char** worst_description) {
  if (!clip || !options || !result) return bad_argument("NULL argument");
  return guard([&] {
    if (!(options->fd_step > 0.0) || !std::isfinite(options->fd_step))
      throw ArgError("fd_step must be positive");
    if (!(options->tolerance > 0.0)) throw ArgError("tolerance must be positive");
    const int n = clip->clip.frame_count();
    if (n < 2) throw geco::DomainError("gradient check needs at least two frames");
    geco::LossSpec spec;
    if (n == 2) {
      spec.centers = {0};
      spec.offsets = {1};
    } else {
      for (int c = 1; c + 1 < n; ++c) spec.centers.push_back(c);
      spec.offsets = {-1, 1};
    }
    geco::GradcheckOptions go;
    go.flow_step = options->fd_step;
    go.depth_rel_step = options->fd_step / 10.0;
    go.tolerance = options->tolerance;
    go.max_entries = options->samples;
    go.seed = options->seed;
    go.jobs = options->jobs;
    go.corrupt = options->corrupt;
    const geco::GradcheckResult r = geco::gradient_check(clip->clip, spec, options->tau, go);
    result->max_rel_error = r.max_rel_error;
    result->loss = r.loss;
    result->checked = r.checked;
    result->skipped = r.skipped;
    result->worst_x = r.worst_x;
    result->worst_y = r.worst_y;
    result->passed = r.passed ? 1 : 0;
    if (worst_description) *worst_description = dup_string(r.worst);
  });
}

geco_status geco_warpbench_generate(const char* config_json, const char* out_dir, uint64_t seed,
                                    int jobs, int paper_scale) {
  if (!out_dir) return bad_argument("out_dir is NULL");
  return guard([&] {
    const auto c = geco::warpbench_config_from_json(parse_optional(config_json), paper_scale != 0);
    geco::generate_warpbench(c, out_dir, seed, jobs);
  });
}

geco_status geco_occlubench_generate(const char* config_json, const char* out_dir, uint64_t seed,
                                     int jobs, int paper_scale) {
  if (!out_dir) return bad_argument("out_dir is NULL");
  return guard([&] {
    const auto c = geco::occlubench_config_from_json(parse_optional(config_json), paper_scale != 0);
    geco::generate_occlubench(c, out_dir, seed, jobs);
  });
}

geco_status geco_evaluate(const char* pred_dir, const char* gt_dir, const char* task,
                          const char* map, char** report_json) {
  if (!pred_dir || !gt_dir || !task || !report_json) return bad_argument("NULL argument");
  return guard([&] {
    const auto t = geco::parse_eval_task(task);
    const auto m = geco::parse_map_kind(map ? map
                                            : (t == geco::EvalTask::Localize || t == geco::EvalTask::Anomaly
                                                   ? "motion"
                                                   : "fused"));
    *report_json = dup_string(geco::evaluate_directories(pred_dir, gt_dir, t, m).dump(2));
  });
}

}  // extern "C"
