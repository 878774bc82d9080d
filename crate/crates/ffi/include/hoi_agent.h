#ifndef HOI_AGENT_H
#define HOI_AGENT_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum HoiStatus {
  HOI_STATUS_OK = 0,
  HOI_STATUS_NULL_POINTER = 1,
  HOI_STATUS_INVALID_UTF8 = 2,
  HOI_STATUS_PARSE = 3,
  HOI_STATUS_VALIDATION = 4,
  HOI_STATUS_ARGUMENT = 5,
  HOI_STATUS_PROTOCOL = 6,
  HOI_STATUS_UNREACHABLE = 7,
  HOI_STATUS_PLANNER_UNAVAILABLE = 8,
  HOI_STATUS_HTTP = 9,
  HOI_STATUS_IO = 10,
  HOI_STATUS_PANIC = 11,
} HoiStatus;

typedef enum HoiOutcome {
  HOI_OUTCOME_COMPLETED = 0,
  HOI_OUTCOME_ERROR_BUDGET_EXHAUSTED = 1,
  HOI_OUTCOME_STEP_BUDGET_EXHAUSTED = 2,
  HOI_OUTCOME_PLANNER_UNAVAILABLE = 3,
  HOI_OUTCOME_UNFINISHED = 4,
} HoiOutcome;

// Finished planner episode.
typedef struct HoiEpisode HoiEpisode;

// Parsed scene.
typedef struct HoiScene HoiScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Owned by the library;
// valid until the next call on this thread.
const char *hoi_last_error(void);

// Parses environment-state text into a new scene handle.
//
// # Safety
// `text` must be a nul-terminated string; `out` must be writable.
enum HoiStatus hoi_scene_parse(const char *text, struct HoiScene **out);

// # Safety
// `scene` must come from this library and not be used afterwards. Null is ignored.
void hoi_scene_free(struct HoiScene *scene);

// Number of objects, or 0 for a null handle.
//
// # Safety
// `scene` must be null or a live handle.
size_t hoi_scene_object_count(const struct HoiScene *scene);

// Writes the center of object `name` to `out_xyz[0..3]`.
//
// # Safety
// `scene` must be live, `name` nul-terminated, `out_xyz` valid for three doubles.
enum HoiStatus hoi_scene_object_center(const struct HoiScene *scene,
                                       const char *name,
                                       double *out_xyz);

// Environment-state text of the scene; free with [`hoi_string_free`]. Null on a null handle.
//
// # Safety
// `scene` must be null or a live handle.
char *hoi_scene_emit(const struct HoiScene *scene);

// # Safety
// `s` must come from this library. Null is ignored.
void hoi_string_free(char *s);

// Collision-checks a track of `n_rows` rows `[frame, x, y, z]` for object `name`
// (or `pelvis`). Sets `*out_collided`; when it collides and `out_message` is not
// null, stores the planner-format error text there (free with [`hoi_string_free`]).
//
// # Safety
// Pointers must be valid; `rows` must hold `4 * n_rows` doubles.
enum HoiStatus hoi_validate_track(const struct HoiScene *scene,
                                  const char *name,
                                  const double *rows,
                                  size_t n_rows,
                                  double margin,
                                  bool *out_collided,
                                  char **out_message);

// Plans a collision-free track for `name` from `from_xyz` to `to_xyz` starting at
// `start_frame`. Stores a buffer of `*out_len` rows `[frame, x, y, z]` in `*out_rows`;
// free it with [`hoi_rows_free`].
//
// # Safety
// Pointers must be valid; `from_xyz` and `to_xyz` must hold three doubles.
enum HoiStatus hoi_plan_track(const struct HoiScene *scene,
                              const char *name,
                              const double *from_xyz,
                              const double *to_xyz,
                              uint32_t start_frame,
                              double margin,
                              double resolution,
                              double **out_rows,
                              size_t *out_len);

// # Safety
// `rows` and `len` must come from the same [`hoi_plan_track`] call. Null is ignored.
void hoi_rows_free(double *rows, size_t len);

// Runs an episode on `scene`, replaying the assistant turns of a JSON-lines transcript.
//
// # Safety
// Pointers must be valid and strings nul-terminated; `out` must be writable.
enum HoiStatus hoi_episode_replay(const struct HoiScene *scene,
                                  const char *instruction,
                                  const char *transcript,
                                  struct HoiEpisode **out);

// # Safety
// `ep` must be null or a live handle.
enum HoiOutcome hoi_episode_outcome(const struct HoiEpisode *ep);

// New scene handle holding the episode's final scene. Null on a null handle.
//
// # Safety
// `ep` must be null or a live handle.
struct HoiScene *hoi_episode_final_scene(const struct HoiEpisode *ep);

// Episode log as JSON lines; free with [`hoi_string_free`]. Null on a null handle.
//
// # Safety
// `ep` must be null or a live handle.
char *hoi_episode_log(const struct HoiEpisode *ep);

// # Safety
// `ep` must come from this library and not be used afterwards. Null is ignored.
void hoi_episode_free(struct HoiEpisode *ep);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOI_AGENT_H */
