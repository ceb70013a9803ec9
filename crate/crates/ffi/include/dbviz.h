/* dbviz C API: compile and check multi-table database visualizations. */

#pragma once

/* Generated with cbindgen:0.26.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of an FFI call.
 */
typedef enum DbvizStatus {
  /**
   * The scene compiled and is a faithful representation.
   */
  DBVIZ_STATUS_OK = 0,
  /**
   * The scene compiled but the faithfulness verdict is negative; the
   * handle is still valid and the report names the failing clauses.
   */
  DBVIZ_STATUS_UNFAITHFUL = 1,
  /**
   * Spec diagnostics, data violations, or compile errors.
   */
  DBVIZ_STATUS_DIAGNOSTICS = 2,
  /**
   * Missing or unreadable files, malformed data.
   */
  DBVIZ_STATUS_IO_ERROR = 3,
  /**
   * Null or non-UTF-8 arguments.
   */
  DBVIZ_STATUS_INVALID_ARGUMENT = 4,
} DbvizStatus;

/**
 * Opaque compiled scene.
 */
typedef struct DbvizScene DbvizScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Compile a spec file against a data directory. On `Ok` or `Unfaithful`,
 * `*out_scene` receives a scene handle the caller must release with
 * [`dbviz_scene_free`]; on any other status it is set to null and
 * [`dbviz_last_error_message`] describes the failure.
 *
 * # Safety
 * `spec_path` and `data_dir` must be valid NUL-terminated strings;
 * `out_scene` must be a valid pointer.
 */
enum DbvizStatus dbviz_compile_file(const char *spec_path,
                                    const char *data_dir,
                                    struct DbvizScene **out_scene);

/**
 * Whether the compiled scene passed all four faithfulness clauses.
 *
 * # Safety
 * `scene` must be a handle returned by [`dbviz_compile_file`], not yet
 * freed.
 */
bool dbviz_scene_faithful(const struct DbvizScene *scene);

/**
 * Faithfulness report as a JSON string. Free with [`dbviz_string_free`].
 * Returns null on a null handle.
 *
 * # Safety
 * `scene` must be a live handle from [`dbviz_compile_file`].
 */
char *dbviz_scene_report_json(const struct DbvizScene *scene);

/**
 * Rendered SVG document. Free with [`dbviz_string_free`]. Returns null on
 * a null handle or a render error (see [`dbviz_last_error_message`]).
 *
 * # Safety
 * `scene` must be a live handle from [`dbviz_compile_file`].
 */
char *dbviz_scene_svg(const struct DbvizScene *scene);

/**
 * Mark tables as a JSON string. Free with [`dbviz_string_free`]. Returns
 * null on a null handle.
 *
 * # Safety
 * `scene` must be a live handle from [`dbviz_compile_file`].
 */
char *dbviz_scene_marks_json(const struct DbvizScene *scene);

/**
 * Message for the most recent failure on this thread, or null if none.
 * Free with [`dbviz_string_free`].
 */
char *dbviz_last_error_message(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be a pointer previously returned by a dbviz function, not yet
 * freed; null is accepted and ignored.
 */
void dbviz_string_free(char *s);

/**
 * Release a scene handle.
 *
 * # Safety
 * `scene` must be a handle returned by [`dbviz_compile_file`], not yet
 * freed; null is accepted and ignored.
 */
void dbviz_scene_free(struct DbvizScene *scene);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus
