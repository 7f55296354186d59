/* kgstore: permutation-indexed knowledge graph store, C interface. */
#ifndef KGSTORE_KGSTORE_H
#define KGSTORE_KGSTORE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define KGS_API __attribute__((visibility("default")))
#else
#define KGS_API
#endif

typedef enum kgs_status {
  KGS_OK = 0,
  KGS_ERR_INTERNAL = 1,
  KGS_ERR_USAGE = 2,
  KGS_ERR_PARSE = 3,
  KGS_ERR_STORAGE = 4,
  KGS_ERR_BUSY = 5,
  KGS_ERR_NOT_FOUND = 6,
  KGS_ERR_OUT_OF_RANGE = 7,
  KGS_ERR_CORRUPT = 8,
  KGS_ERR_LIMIT = 9
} kgs_status;

typedef struct kgs_db kgs_db;
typedef struct kgs_pattern kgs_pattern;
typedef struct kgs_edge_cursor kgs_edge_cursor;
typedef struct kgs_group_cursor kgs_group_cursor;
typedef struct kgs_result kgs_result;

typedef struct kgs_edge {
  uint64_t s;
  uint64_t r;
  uint64_t d;
} kgs_edge;

typedef struct kgs_group {
  uint64_t key[2];
  uint32_t arity;
  uint64_t count;
} kgs_group;

typedef struct kgs_load_options {
  const char* format;    /* "ntriples" or "snap" */
  const char* id_mode;   /* "global" or "split" */
  const char* nm;        /* "btree" or "array" */
  int ofr;
  uint64_t eta;
  int aggr;
  uint64_t tau;
  uint64_t upsilon;
  unsigned proc_workers;
  unsigned io_workers;
  uint64_t sort_memory;  /* bytes */
  const char* temp_dir;  /* NULL: inside the database directory */
} kgs_load_options;

typedef struct kgs_io_counters {
  uint64_t tables_opened;
  uint64_t table_bytes;
  uint64_t reconstructions;
} kgs_io_counters;

/* Message of the last failed call on this thread. */
KGS_API const char* kgs_last_error(void);
KGS_API void kgs_free_string(char* s);

KGS_API void kgs_load_options_init(kgs_load_options* o);
/* Builds a database; *report_json (may be NULL) receives the load report. */
KGS_API kgs_status kgs_load(const char* input, const char* dir,
                            const kgs_load_options* o, char** report_json);

KGS_API kgs_status kgs_open(const char* dir, int writable, kgs_db** out);
KGS_API void kgs_close(kgs_db* db);
KGS_API kgs_status kgs_stats_json(kgs_db* db, char** out);

/* SPARQL subset; rows are sorted label tuples. */
KGS_API kgs_status kgs_query(kgs_db* db, const char* text, kgs_result** out);
KGS_API size_t kgs_result_num_cols(const kgs_result* r);
KGS_API const char* kgs_result_col_name(const kgs_result* r, size_t col);
KGS_API size_t kgs_result_num_rows(const kgs_result* r);
KGS_API const char* kgs_result_value(const kgs_result* r, size_t row, size_t col);
KGS_API const char* kgs_result_plan(const kgs_result* r);
KGS_API void kgs_result_free(kgs_result* r);

/* f1-f4. *out is a string to release with kgs_free_string. */
KGS_API kgs_status kgs_lbl_n(kgs_db* db, uint64_t id, char** out);
KGS_API kgs_status kgs_lbl_e(kgs_db* db, uint64_t id, char** out);
KGS_API kgs_status kgs_nodid(kgs_db* db, const char* label, uint64_t* out);
KGS_API kgs_status kgs_edgid(kgs_db* db, const char* label, uint64_t* out);

/* Terms are "?name" for variables, otherwise labels. A pattern with an
   unknown label matches nothing. */
KGS_API kgs_status kgs_pattern_parse(kgs_db* db, const char* s, const char* r,
                                     const char* d, kgs_pattern** out);
KGS_API void kgs_pattern_free(kgs_pattern* p);

/* ordering: a permutation of "srd"; grp takes one or two fields. */
KGS_API kgs_status kgs_edg(kgs_db* db, const char* ordering,
                           const kgs_pattern* p, kgs_edge_cursor** out);
/* 1 on a row, 0 at end. */
KGS_API int kgs_edge_cursor_next(kgs_edge_cursor* c, kgs_edge* out);
KGS_API void kgs_edge_cursor_free(kgs_edge_cursor* c);

KGS_API kgs_status kgs_grp(kgs_db* db, const char* ordering,
                           const kgs_pattern* p, kgs_group_cursor** out);
KGS_API int kgs_group_cursor_next(kgs_group_cursor* c, kgs_group* out);
KGS_API void kgs_group_cursor_free(kgs_group_cursor* c);

KGS_API kgs_status kgs_cnt_edg(kgs_db* db, const char* ordering,
                               const kgs_pattern* p, uint64_t* out);
KGS_API kgs_status kgs_cnt_grp(kgs_db* db, const char* ordering,
                               const kgs_pattern* p, uint64_t* out);
/* 0-based index. */
KGS_API kgs_status kgs_pos(kgs_db* db, const char* ordering,
                           const kgs_pattern* p, uint64_t index, kgs_edge* out);

/* kind: "add" or "remove". *report_json may be NULL. */
KGS_API kgs_status kgs_update(kgs_db* db, const char* kind, const char* input,
                              const char* format, char** report_json);
KGS_API kgs_status kgs_merge(kgs_db* db, char** report_json);

KGS_API void kgs_io_counters_get(kgs_db* db, kgs_io_counters* out);
KGS_API void kgs_io_counters_reset(kgs_db* db);

#ifdef __cplusplus
}
#endif

#endif
