#ifndef ARCEVAL_H
#define ARCEVAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  ARCEVAL_STATUS_OK = 0,
  ARCEVAL_STATUS_NULL_ARGUMENT = 1,
  ARCEVAL_STATUS_INVALID_UTF8 = 2,
  ARCEVAL_STATUS_PARSE = 3,
  ARCEVAL_STATUS_MEASURE = 4,
  ARCEVAL_STATUS_IO = 5,
  ARCEVAL_STATUS_WORKSPACE = 6,
  ARCEVAL_STATUS_ANALYSIS = 7,
  ARCEVAL_STATUS_TELEMETRY = 8,
  ARCEVAL_STATUS_NOT_FOUND = 9,
  ARCEVAL_STATUS_PANIC = 10,
} ArcevalStatus;

/**
 * A parsed document.
 */
typedef struct ArcevalDocument ArcevalDocument;

/**
 * A loaded workspace.
 */
typedef struct ArcevalWorkspace ArcevalWorkspace;

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library on this thread.
 */
const char *arceval_last_error(void);

/**
 * Library version as a static string.
 */
const char *arceval_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void arceval_string_free(char *s);

/**
 * Parses a DSL document.
 *
 * # Safety
 * `source` must be a NUL-terminated string; `out` must be writable.
 */
ArcevalStatus arceval_document_parse(const char *source, ArcevalDocument **out);

/**
 * Number of blocks in a document.
 *
 * # Safety
 * `doc` must be a live handle or null (yields 0).
 */
size_t arceval_document_block_count(const ArcevalDocument *doc);

/**
 * Canonical text of a document.
 *
 * # Safety
 * `doc` must be a live handle; `out` must be writable.
 */
ArcevalStatus arceval_document_serialize(const ArcevalDocument *doc, char **out);

/**
 * # Safety
 * `doc` must come from [`arceval_document_parse`] and not be freed twice.
 */
void arceval_document_free(ArcevalDocument *doc);

/**
 * Loads the workspace whose manifest lives in `dir`.
 *
 * # Safety
 * `dir` must be a NUL-terminated string; `out` must be writable.
 */
ArcevalStatus arceval_workspace_load(const char *dir, ArcevalWorkspace **out);

/**
 * The bundled Luna case-study workspace.
 *
 * # Safety
 * `out` must be writable.
 */
ArcevalStatus arceval_workspace_luna(ArcevalWorkspace **out);

/**
 * # Safety
 * `ws` must come from this library and not be freed twice.
 */
void arceval_workspace_free(ArcevalWorkspace *ws);

/**
 * Gap analysis as JSON. With a null `architecture` this is the coverage
 * sidecar of the current revision; otherwise the gap report for the named
 * revision label.
 *
 * # Safety
 * `ws` must be a live handle; `architecture` null or a NUL-terminated
 * string; `out` writable.
 */
ArcevalStatus arceval_workspace_gap_json(const ArcevalWorkspace *ws,
                                         const char *architecture,
                                         char **out);

/**
 * Text report. `telemetry` is optional JSONL evaluated offline against
 * every scenario.
 *
 * # Safety
 * `ws` must be a live handle; `telemetry` null or a NUL-terminated
 * string; `out` writable.
 */
ArcevalStatus arceval_workspace_report(const ArcevalWorkspace *ws,
                                       const char *telemetry,
                                       char **out);

/**
 * Evaluates one measure over JSONL telemetry tagged with `scenario` and
 * returns the verdict as JSON. Malformed lines are skipped.
 *
 * # Safety
 * All string arguments must be NUL-terminated; `out` writable.
 */
ArcevalStatus arceval_measure_evaluate(const char *measure,
                                       const char *telemetry,
                                       const char *scenario,
                                       char **out);

#endif  /* ARCEVAL_H */
