#ifndef NITSCHE_DD_H
#define NITSCHE_DD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum NddStatus {
  NDD_STATUS_OK = 0,
  NDD_STATUS_NULL_POINTER = 1,
  NDD_STATUS_INVALID_UTF8 = 2,
  NDD_STATUS_INVALID_CONFIG = 3,
  NDD_STATUS_IO = 4,
  NDD_STATUS_CORRUPT_FILE = 5,
  NDD_STATUS_NUMERICAL = 6,
  NDD_STATUS_WORKER = 7,
  NDD_STATUS_OUT_OF_RANGE = 8,
  NDD_STATUS_PANIC = 9,
} NddStatus;

// Parsed run configuration.
typedef struct NddConfig NddConfig;

// Report of a finished run.
typedef struct NddReport NddReport;

// One report row. `reduction_error` is NaN when the oracle was off and
// `kappa` is NaN when no estimate was available.
typedef struct NddRow {
  size_t case_index;
  size_t dim;
  size_t degree;
  size_t dim_v;
  size_t subdomains;
  double h;
  double epsilon;
  double energy_error;
  // From the work `f^T u` of the reduced solution.
  double galerkin_error;
  double reduction_error;
  size_t trace_dim;
  size_t dim_lambda;
  size_t cg_iterations;
  bool converged;
  double kappa;
} NddRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes) and returns the full message length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t ndd_last_error(char *buf, size_t len);

// Parses configuration text. Relative paths in it resolve against
// `base_dir`.
//
// # Safety
// `text` and `base_dir` must be NUL-terminated strings; `out` must be valid
// for writes.
enum NddStatus ndd_config_parse(const char *text, const char *base_dir, struct NddConfig **out);

// Reads a configuration file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid for writes.
enum NddStatus ndd_config_from_file(const char *path, struct NddConfig **out);

// Replaces the output directory.
//
// # Safety
// `config` must come from this library; `dir` must be a NUL-terminated
// string.
enum NddStatus ndd_config_set_output(struct NddConfig *config, const char *dir);

// Turns the conforming reference solve on or off.
//
// # Safety
// `config` must come from this library.
enum NddStatus ndd_config_set_oracle(struct NddConfig *config, bool on);

// # Safety
// `config` must be null or come from this library, and not be used again.
void ndd_config_free(struct NddConfig *config);

// Runs every case of the configuration. Tasks are processed sequentially in
// the calling process, still through the task and result files.
//
// # Safety
// `config` must come from this library; `out` must be valid for writes.
enum NddStatus ndd_run(const struct NddConfig *config, struct NddReport **out);

// Reduces one subdomain task file, writing its result next to it.
//
// # Safety
// `task` must be a NUL-terminated string.
enum NddStatus ndd_run_worker(const char *task);

// Number of report rows, 0 for a null handle.
//
// # Safety
// `report` must be null or come from this library.
size_t ndd_report_len(const struct NddReport *report);

// # Safety
// `report` must come from this library; `row` must be valid for writes.
enum NddStatus ndd_report_row(const struct NddReport *report, size_t index, struct NddRow *row);

// # Safety
// `report` must be null or come from this library, and not be used again.
void ndd_report_free(struct NddReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NITSCHE_DD_H */
