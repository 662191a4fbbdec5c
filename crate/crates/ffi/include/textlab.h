#ifndef TEXTLAB_H
#define TEXTLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  TL_STATUS_OK = 0,
  TL_STATUS_NULL_ARGUMENT = 1,
  TL_STATUS_INVALID_UTF8 = 2,
  TL_STATUS_NOT_FOUND = 3,
  TL_STATUS_INVALID_ARGUMENT = 4,
  TL_STATUS_FINISHED = 5,
  TL_STATUS_BUFFER_TOO_SMALL = 6,
  TL_STATUS_INTERNAL = 7,
} TlStatus;

/**
 * Generated task variations for one master seed.
 */
typedef struct TlCatalog TlCatalog;

/**
 * One game in progress.
 */
typedef struct TlEpisode TlEpisode;

typedef struct {
  uint32_t score;
  size_t env_steps;
  bool won;
  bool lost;
  bool finished;
} TlEpisodeState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code.
 */
const char *tl_status_name(TlStatus status);

/**
 * Message of the last failed call on this thread.
 *
 * # Safety
 * `buf` must hold `cap` bytes (or be null); `needed` may be null.
 */
TlStatus tl_last_error(char *buf, size_t cap, size_t *needed);

/**
 * Builds the default catalog for `seed`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
TlStatus tl_catalog_new(uint64_t seed, TlCatalog **out);

/**
 * # Safety
 * `catalog` must come from [`tl_catalog_new`] and not be used afterwards.
 */
void tl_catalog_free(TlCatalog *catalog);

/**
 * # Safety
 * Pointers must be valid.
 */
TlStatus tl_catalog_len(const TlCatalog *catalog, size_t *out);

/**
 * Id of the variation at `index` (catalog order).
 *
 * # Safety
 * `catalog` must be valid; `buf` must hold `cap` bytes or be null.
 */
TlStatus tl_catalog_variation_id(const TlCatalog *catalog,
                                 size_t index,
                                 char *buf,
                                 size_t cap,
                                 size_t *needed);

/**
 * Starts an episode of `variation_id`. The opening observation is
 * available through [`tl_episode_observation`].
 *
 * # Safety
 * `catalog` and `variation_id` must be valid; `out` must be writable.
 */
TlStatus tl_episode_new(const TlCatalog *catalog,
                        const char *variation_id,
                        bool preconditions,
                        TlEpisode **out);

/**
 * # Safety
 * `episode` must come from [`tl_episode_new`] and not be used afterwards.
 */
void tl_episode_free(TlEpisode *episode);

/**
 * Task description of the episode.
 *
 * # Safety
 * `episode` must be valid; `buf` must hold `cap` bytes or be null.
 */
TlStatus tl_episode_description(const TlEpisode *episode, char *buf, size_t cap, size_t *needed);

/**
 * Plays one action. Returns `TL_STATUS_FINISHED` without acting once the
 * game is won or lost.
 *
 * # Safety
 * `episode` and `action` must be valid; `state` may be null.
 */
TlStatus tl_episode_step(TlEpisode *episode, const char *action, TlEpisodeState *state);

/**
 * Observation produced by the latest step (or the opening look).
 *
 * # Safety
 * `episode` must be valid; `buf` must hold `cap` bytes or be null.
 */
TlStatus tl_episode_observation(const TlEpisode *episode, char *buf, size_t cap, size_t *needed);

/**
 * # Safety
 * Pointers must be valid.
 */
TlStatus tl_episode_state(const TlEpisode *episode, TlEpisodeState *state);

/**
 * Packed prompt for the next action under a word-piece budget, ending
 * with the action cue.
 *
 * # Safety
 * `episode` must be valid; `buf` must hold `cap` bytes or be null.
 */
TlStatus tl_episode_prompt(const TlEpisode *episode,
                           size_t budget,
                           bool markov,
                           char *buf,
                           size_t cap,
                           size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TEXTLAB_H */
