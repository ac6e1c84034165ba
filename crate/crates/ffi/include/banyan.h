#ifndef BANYAN_H
#define BANYAN_H

/* Generated by cbindgen from src/lib.rs. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BanyanStatus {
  BANYAN_STATUS_OK = 0,
  BANYAN_STATUS_NULL_ARGUMENT = 1,
  BANYAN_STATUS_INVALID_UTF8 = 2,
  BANYAN_STATUS_INVALID_CONFIG = 3,
  BANYAN_STATUS_INVALID_SCENARIO = 4,
  BANYAN_STATUS_IO = 5,
  // The output buffer is too small; the required size was reported.
  BANYAN_STATUS_BUFFER_TOO_SMALL = 6,
  BANYAN_STATUS_PANIC = 7,
} BanyanStatus;

// The result of simulating one seed, with checker verdicts and metrics.
typedef struct BanyanRun BanyanRun;

// A parsed and validated scenario.
typedef struct BanyanScenario BanyanScenario;

typedef struct BanyanSummary {
  uint64_t rounds;
  // Number of checkers that reported a violation.
  uint32_t violations;
  double mean_latency_ms;
  uint64_t p99_latency_ms;
  double fast_hit_rate;
  double throughput_bytes_per_s;
  double block_interval_ms;
} BanyanSummary;

// Message for the last failed call on this thread. Valid until the next
// call into this library from the same thread.
const char *banyan_last_error(void);

// Library version as a static string.
const char *banyan_version(void);

// Checks `n >= max(3f + 2p - 1, 3f + 1)` and `p <= f`.
enum BanyanStatus banyan_config_validate(uint32_t n, uint32_t f, uint32_t p);

// Notarization and finalization quorum `ceil((n + f + 1) / 2)`.
uint32_t banyan_notarization_quorum(uint32_t n, uint32_t f);

// Fast-path quorum `n - p`.
uint32_t banyan_fast_quorum(uint32_t n, uint32_t p);

// Parses a scenario from JSON text.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum BanyanStatus banyan_scenario_from_json(const char *json, struct BanyanScenario **out);

// Loads a scenario file, or a bundled preset by name.
//
// # Safety
// `name_or_path` must be a NUL-terminated string and `out` a writable pointer.
enum BanyanStatus banyan_scenario_load(const char *name_or_path, struct BanyanScenario **out);

// # Safety
// `scenario` must be null or a handle from this library, freed at most once.
void banyan_scenario_free(struct BanyanScenario *scenario);

// Simulates `seed` and runs every checker.
//
// # Safety
// `scenario` must be a live handle and `out` a writable pointer.
enum BanyanStatus banyan_run(const struct BanyanScenario *scenario,
                             uint64_t seed,
                             struct BanyanRun **out);

// # Safety
// `run` must be null or a handle from this library, freed at most once.
void banyan_run_free(struct BanyanRun *run);

// # Safety
// `run` must be a live handle and `out` a writable pointer.
enum BanyanStatus banyan_run_summary(const struct BanyanRun *run, struct BanyanSummary *out);

// Hex trace digest: 64 characters plus NUL.
//
// # Safety
// `run` must be a live handle; `buf` valid for `len` bytes; `needed` null or writable.
enum BanyanStatus banyan_run_digest(const struct BanyanRun *run,
                                    char *buf,
                                    size_t len,
                                    size_t *needed);

// Checker reports as a JSON array. Call with a null buffer to learn the size.
//
// # Safety
// `run` must be a live handle; `buf` null or valid for `len` bytes; `needed` null or writable.
enum BanyanStatus banyan_run_reports_json(const struct BanyanRun *run,
                                          char *buf,
                                          size_t len,
                                          size_t *needed);

// Writes the trace as JSON lines to `path`.
//
// # Safety
// `run` must be a live handle and `path` a NUL-terminated string.
enum BanyanStatus banyan_run_write_trace(const struct BanyanRun *run, const char *path);

#endif /* BANYAN_H */
