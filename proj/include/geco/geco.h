#ifndef GECO_GECO_H
#define GECO_GECO_H

#include <stddef.h>
#include <stdint.h>

#if defined(GECO_BUILDING)
#define GECO_API __attribute__((visibility("default")))
#else
#define GECO_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum geco_status {
  GECO_OK = 0,
  GECO_ERR_IO = 1,
  GECO_ERR_FORMAT = 2,
  GECO_ERR_VALIDATION = 3,
  GECO_ERR_SCHEMA = 4,
  GECO_ERR_DOMAIN = 5,
  GECO_ERR_SHAPE = 6,
  GECO_ERR_MISSING_INPUT = 7,
  GECO_ERR_SOLVE = 8,
  GECO_ERR_SPEC = 9,
  GECO_ERR_BEHIND_CAMERA = 10,
  GECO_ERR_INVALID_ARGUMENT = 11,
  GECO_ERR_INTERNAL = 12
} geco_status;

/* Message of the last failing call on this thread; empty after success. */
GECO_API const char* geco_last_error(void);
GECO_API const char* geco_status_name(geco_status status);
GECO_API const char* geco_version(void);

/* Strings returned through char** must be released with this. */
GECO_API void geco_string_free(char* s);

/* ---- rasters (GCR1, float32, optional validity mask) ---- */

typedef struct geco_raster geco_raster_t;

GECO_API geco_status geco_raster_create(uint32_t width, uint32_t height, uint32_t channels,
                                        geco_raster_t** out);
GECO_API geco_status geco_raster_read(const char* path, geco_raster_t** out);
GECO_API geco_status geco_raster_write(const geco_raster_t* r, const char* path);
GECO_API geco_status geco_raster_decode(const uint8_t* bytes, size_t size, geco_raster_t** out);
/* Call with buffer NULL to learn the size. */
GECO_API geco_status geco_raster_encode(const geco_raster_t* r, uint8_t* buffer, size_t capacity,
                                        size_t* size);
GECO_API void geco_raster_free(geco_raster_t* r);

GECO_API uint32_t geco_raster_width(const geco_raster_t* r);
GECO_API uint32_t geco_raster_height(const geco_raster_t* r);
GECO_API uint32_t geco_raster_channels(const geco_raster_t* r);
GECO_API int geco_raster_has_mask(const geco_raster_t* r);
/* Interleaved, row-major; width * height * channels values. */
GECO_API float* geco_raster_data(geco_raster_t* r);
GECO_API int geco_raster_valid(const geco_raster_t* r, uint32_t x, uint32_t y);
GECO_API geco_status geco_raster_set_valid(geco_raster_t* r, uint32_t x, uint32_t y, int valid);

/* 8-bit grayscale PNG of a one-channel map clamped to [0, range]. */
GECO_API geco_status geco_write_heatmap_png(const geco_raster_t* map, double range,
                                            const char* path);

/* ---- clips (manifest plus every raster it references) ---- */

typedef struct geco_clip geco_clip_t;

GECO_API geco_status geco_clip_load(const char* manifest_path, geco_clip_t** out);
GECO_API void geco_clip_free(geco_clip_t* clip);
GECO_API int geco_clip_frame_count(const geco_clip_t* clip);
GECO_API const char* geco_clip_id(const geco_clip_t* clip);
GECO_API geco_status geco_clip_write(const geco_clip_t* clip, const char* dir);

/* Renders a scene description (JSON) into a clip with exact depth and flow. */
GECO_API geco_status geco_synth_scene(const char* scene_json, int flow_offset, int jobs,
                                      geco_clip_t** out);

/* ---- scoring ---- */

typedef struct geco_score_options {
  int window;
  double tau;
  double eval_fps;
  double window_seconds;
  double window_overlap;
  int jobs;
  int keep_maps;
} geco_score_options;

GECO_API void geco_score_options_default(geco_score_options* options);

typedef struct geco_score geco_score_t;

GECO_API geco_status geco_score_clip(const geco_clip_t* clip, const geco_score_options* options,
                                     geco_score_t** out);
GECO_API void geco_score_free(geco_score_t* score);
GECO_API double geco_score_motion(const geco_score_t* score);
GECO_API double geco_score_structure(const geco_score_t* score);
GECO_API double geco_score_fused(const geco_score_t* score);
GECO_API size_t geco_score_frame_count(const geco_score_t* score);
/* which: 0 motion, 1 structure, 2 fused. Requires keep_maps. */
GECO_API geco_status geco_score_frame_map(const geco_score_t* score, size_t k, int which,
                                          geco_raster_t** out);
GECO_API geco_status geco_score_to_json(const geco_score_t* score, char** json);
/* score.json, maps/ and optionally heatmaps/ under out_dir. */
GECO_API geco_status geco_score_write(const geco_score_t* score, const char* out_dir, int heatmaps,
                                      double heatmap_range);
/* Scores every clip directory below in_dir into out_dir/<clip_id>/. */
GECO_API geco_status geco_score_tree(const char* in_dir, const char* out_dir,
                                     const geco_score_options* options, int heatmaps,
                                     double heatmap_range);

/* ---- differentiable objective ---- */

GECO_API geco_status geco_loss_geo(const geco_clip_t* clip, const int* centers, size_t n_centers,
                                   const int* offsets, size_t n_offsets, double tau, double* loss);

typedef struct geco_gradcheck_options {
  double fd_step;         /* flow step in pixels; depth uses fd_step / 10 relative */
  double tolerance;
  double tau;
  size_t samples;         /* 0: every entry */
  uint64_t seed;
  int jobs;
  double corrupt;         /* test hook: scales analytic gradients by 1 + corrupt */
} geco_gradcheck_options;

typedef struct geco_gradcheck_result {
  double max_rel_error;
  double loss;
  size_t checked;
  size_t skipped;
  int worst_x;
  int worst_y;
  int passed;
} geco_gradcheck_result;

GECO_API void geco_gradcheck_options_default(geco_gradcheck_options* options);
/* Adjacent pairs (offsets -1 and +1) around every interior frame. */
GECO_API geco_status geco_gradcheck(const geco_clip_t* clip, const geco_gradcheck_options* options,
                                    geco_gradcheck_result* result, char** worst_description);

/* ---- benchmarks and evaluation ---- */

/* config_json may be NULL for defaults. */
GECO_API geco_status geco_warpbench_generate(const char* config_json, const char* out_dir,
                                             uint64_t seed, int jobs, int paper_scale);
GECO_API geco_status geco_occlubench_generate(const char* config_json, const char* out_dir,
                                              uint64_t seed, int jobs, int paper_scale);

/* task: localize | occlusion | anomaly; map: motion | structure | fused. */
GECO_API geco_status geco_evaluate(const char* pred_dir, const char* gt_dir, const char* task,
                                   const char* map, char** report_json);

#ifdef __cplusplus
}
#endif

#endif
