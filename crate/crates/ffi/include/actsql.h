#ifndef ACTSQL_H
#define ACTSQL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum ActsqlStatus {
  ACTSQL_STATUS_OK = 0,
  ACTSQL_STATUS_NULL_POINTER = 1,
  ACTSQL_STATUS_INVALID_UTF8 = 2,
  ACTSQL_STATUS_INVALID_ARGUMENT = 3,
  ACTSQL_STATUS_UNKNOWN_DATABASE = 4,
  ACTSQL_STATUS_SCHEMA_ERROR = 5,
  ACTSQL_STATUS_SQL_ERROR = 6,
  ACTSQL_STATUS_EXECUTION_ERROR = 7,
  ACTSQL_STATUS_PANIC = 8,
} ActsqlStatus;

/**
 * Opaque handle to a loaded schema catalog.
 */
typedef struct ActsqlCatalog ActsqlCatalog;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a Spider-style tables file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ActsqlStatus actsql_catalog_load(const char *path, struct ActsqlCatalog **out);

/**
 * Parses a Spider-style tables document held in memory.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ActsqlStatus actsql_catalog_from_json(const char *json, struct ActsqlCatalog **out);

/**
 * Number of databases in the catalog, or 0 for a null handle.
 *
 * # Safety
 * `catalog` must be null or a handle from `actsql_catalog_load`.
 */
size_t actsql_catalog_len(const struct ActsqlCatalog *catalog);

/**
 * Releases a catalog handle. Null is ignored.
 *
 * # Safety
 * `catalog` must be null or a handle not yet freed.
 */
void actsql_catalog_free(struct ActsqlCatalog *catalog);

/**
 * Renders the schema prompt of `db_id` in `style`. When `db_path` is not null
 * and `rows` is positive, that many content rows per table are sampled from
 * the database file.
 *
 * # Safety
 * String arguments must be NUL-terminated; `db_path` may be null.
 */
enum ActsqlStatus actsql_render_schema(const struct ActsqlCatalog *catalog,
                                       const char *db_id,
                                       const char *style,
                                       const char *db_path,
                                       uint32_t rows,
                                       char **out);

/**
 * Builds the chain-of-thought annotation of a question and its gold SQL
 * using lexical similarity.
 *
 * # Safety
 * String arguments must be NUL-terminated.
 */
enum ActsqlStatus actsql_annotate(const struct ActsqlCatalog *catalog,
                                  const char *db_id,
                                  const char *question,
                                  const char *gold_sql,
                                  char **out);

/**
 * Writes 1 to `out` when `pred` and `gold` are exact-set matches, else 0.
 *
 * # Safety
 * String arguments must be NUL-terminated.
 */
enum ActsqlStatus actsql_exact_match(const struct ActsqlCatalog *catalog,
                                     const char *db_id,
                                     const char *pred,
                                     const char *gold,
                                     int32_t *out);

/**
 * Writes the hardness label (Easy, Medium, Hard or Extra) of `sql`.
 *
 * # Safety
 * String arguments must be NUL-terminated.
 */
enum ActsqlStatus actsql_difficulty(const struct ActsqlCatalog *catalog,
                                    const char *db_id,
                                    const char *sql_text,
                                    char **out);

/**
 * Extracts the SQL from a model reply. `mode` is zero-shot, few-shot or
 * act-sql. The extraction status (0 marker, 1 fallback, 2 failed) is written
 * to `status` when it is not null.
 *
 * # Safety
 * String arguments must be NUL-terminated; `status` may be null.
 */
enum ActsqlStatus actsql_extract_sql(const char *reply,
                                     const char *mode,
                                     char **out,
                                     int32_t *status);

/**
 * Executes both queries read-only against `db_path` and writes 1 to `out`
 * when their results match. A failing prediction counts as a mismatch; a
 * failing gold query is an error.
 *
 * # Safety
 * String arguments must be NUL-terminated.
 */
enum ActsqlStatus actsql_execution_match(const char *db_path,
                                         const char *pred,
                                         const char *gold,
                                         uint32_t timeout_ms,
                                         int32_t *out);

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next call into this library on the same thread.
 */
const char *actsql_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void actsql_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ACTSQL_H */
