#include "kgstore/kgstore.h"

#include <cstdlib>
#include <cstring>
#include <new>

#include "bgp.hpp"
#include "database.hpp"

using namespace kgs;

struct kgs_db {
  std::unique_ptr<Database> db;
};

struct kgs_pattern {
  TriplePattern pattern;
  bool unsatisfiable = false;
};

struct kgs_edge_cursor {
  std::shared_ptr<const Snapshot> snap;
  std::unique_ptr<EdgeCursor> cursor;
};

struct kgs_group_cursor {
  std::shared_ptr<const Snapshot> snap;
  std::unique_ptr<GroupCursor> cursor;
};

struct kgs_result {
  QueryResult result;
  std::string plan;
};

namespace {

thread_local std::string g_last_error;

kgs_status status_of(ErrorCode c) {
  switch (c) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidOrdering:
      return KGS_ERR_USAGE;
    case ErrorCode::kParse: return KGS_ERR_PARSE;
    case ErrorCode::kStorage: return KGS_ERR_STORAGE;
    case ErrorCode::kBusy: return KGS_ERR_BUSY;
    case ErrorCode::kNotFound: return KGS_ERR_NOT_FOUND;
    case ErrorCode::kOutOfRange: return KGS_ERR_OUT_OF_RANGE;
    case ErrorCode::kCorrupt: return KGS_ERR_CORRUPT;
    case ErrorCode::kIdSpaceExhausted:
    case ErrorCode::kValueTooLarge:
    case ErrorCode::kWidthOverflow:
      return KGS_ERR_LIMIT;
    case ErrorCode::kEmptyTable:
    case ErrorCode::kUnsorted:
    case ErrorCode::kInternal:
      return KGS_ERR_INTERNAL;
  }
  return KGS_ERR_INTERNAL;
}

kgs_status fail(kgs_status s, const std::string& what) {
  g_last_error = what;
  return s;
}

template <typename F>
kgs_status guard(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(KGS_ERR_STORAGE, e.what());
  } catch (const std::bad_alloc&) {
    return fail(KGS_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(KGS_ERR_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put_json(char** out, const json& j) {
  if (out) *out = dup_string(j.dump(2));
}

#define KGS_REQUIRE(cond, msg) \
  if (!(cond)) return fail(KGS_ERR_USAGE, msg)

kgs_edge to_c(const Edge& e) { return {e.s, e.r, e.d}; }

}  // namespace

extern "C" {

const char* kgs_last_error(void) { return g_last_error.c_str(); }

void kgs_free_string(char* s) { std::free(s); }

void kgs_load_options_init(kgs_load_options* o) {
  if (!o) return;
  const LoadOptions d;
  o->format = "ntriples";
  o->id_mode = "global";
  o->nm = "btree";
  o->ofr = d.build.ofr ? 1 : 0;
  o->eta = d.build.eta;
  o->aggr = d.build.aggr ? 1 : 0;
  o->tau = d.build.layout.tau;
  o->upsilon = d.build.layout.upsilon;
  o->proc_workers = d.proc_workers;
  o->io_workers = d.io_workers;
  o->sort_memory = d.sort_memory;
  o->temp_dir = nullptr;
}

kgs_status kgs_load(const char* input, const char* dir,
                    const kgs_load_options* o, char** report_json) {
  return guard([&] {
    KGS_REQUIRE(input && dir, "input and directory are required");
    kgs_load_options defaults;
    kgs_load_options_init(&defaults);
    if (!o) o = &defaults;
    LoadOptions opts;
    if (o->format) opts.format = parse_input_format(o->format);
    if (o->id_mode) opts.id_mode = parse_id_mode(o->id_mode);
    if (o->nm) opts.nm = parse_nm_backend(o->nm);
    opts.build.ofr = o->ofr != 0;
    opts.build.eta = o->eta;
    opts.build.aggr = o->aggr != 0;
    opts.build.layout.tau = o->tau;
    opts.build.layout.upsilon = o->upsilon;
    KGS_REQUIRE(o->proc_workers > 0 && o->io_workers > 0,
                "worker counts must be positive");
    opts.proc_workers = o->proc_workers;
    opts.io_workers = o->io_workers;
    opts.sort_memory = o->sort_memory;
    if (o->temp_dir) opts.temp_dir = o->temp_dir;
    const json report = load_database(input, dir, opts);
    put_json(report_json, report);
    return KGS_OK;
  });
}

kgs_status kgs_open(const char* dir, int writable, kgs_db** out) {
  return guard([&] {
    KGS_REQUIRE(dir && out, "directory and output handle are required");
    auto db = std::make_unique<kgs_db>();
    db->db = Database::open(dir, writable != 0);
    *out = db.release();
    return KGS_OK;
  });
}

void kgs_close(kgs_db* db) { delete db; }

kgs_status kgs_stats_json(kgs_db* db, char** out) {
  return guard([&] {
    KGS_REQUIRE(db && out, "null argument");
    put_json(out, db->db->stats());
    return KGS_OK;
  });
}

kgs_status kgs_query(kgs_db* db, const char* text, kgs_result** out) {
  return guard([&] {
    KGS_REQUIRE(db && text && out, "null argument");
    auto r = std::make_unique<kgs_result>();
    r->result = run_query(text, db->db->primitives());
    r->plan = r->result.plan.describe();
    *out = r.release();
    return KGS_OK;
  });
}

size_t kgs_result_num_cols(const kgs_result* r) {
  return r ? r->result.columns.size() : 0;
}

const char* kgs_result_col_name(const kgs_result* r, size_t col) {
  if (!r || col >= r->result.columns.size()) return nullptr;
  return r->result.columns[col].c_str();
}

size_t kgs_result_num_rows(const kgs_result* r) {
  return r ? r->result.rows.size() : 0;
}

const char* kgs_result_value(const kgs_result* r, size_t row, size_t col) {
  if (!r || row >= r->result.rows.size() || col >= r->result.columns.size()) {
    return nullptr;
  }
  return r->result.rows[row][col].c_str();
}

const char* kgs_result_plan(const kgs_result* r) {
  return r ? r->plan.c_str() : nullptr;
}

void kgs_result_free(kgs_result* r) { delete r; }

kgs_status kgs_lbl_n(kgs_db* db, uint64_t id, char** out) {
  return guard([&] {
    KGS_REQUIRE(db && out, "null argument");
    auto l = db->db->primitives().lbl_n(id);
    if (!l) return fail(KGS_ERR_NOT_FOUND, "no node with id " + std::to_string(id));
    *out = dup_string(*l);
    return KGS_OK;
  });
}

kgs_status kgs_lbl_e(kgs_db* db, uint64_t id, char** out) {
  return guard([&] {
    KGS_REQUIRE(db && out, "null argument");
    auto l = db->db->primitives().lbl_e(id);
    if (!l) return fail(KGS_ERR_NOT_FOUND, "no relation with id " + std::to_string(id));
    *out = dup_string(*l);
    return KGS_OK;
  });
}

kgs_status kgs_nodid(kgs_db* db, const char* label, uint64_t* out) {
  return guard([&] {
    KGS_REQUIRE(db && label && out, "null argument");
    auto id = db->db->primitives().nodid(label);
    if (!id) return fail(KGS_ERR_NOT_FOUND, std::string("unknown node: ") + label);
    *out = *id;
    return KGS_OK;
  });
}

kgs_status kgs_edgid(kgs_db* db, const char* label, uint64_t* out) {
  return guard([&] {
    KGS_REQUIRE(db && label && out, "null argument");
    auto id = db->db->primitives().edgid(label);
    if (!id) return fail(KGS_ERR_NOT_FOUND, std::string("unknown relation: ") + label);
    *out = *id;
    return KGS_OK;
  });
}

kgs_status kgs_pattern_parse(kgs_db* db, const char* s, const char* r,
                             const char* d, kgs_pattern** out) {
  return guard([&] {
    KGS_REQUIRE(db && s && r && d && out, "null argument");
    const Primitives prim = db->db->primitives();
    auto p = std::make_unique<kgs_pattern>();
    const char* terms[3] = {s, r, d};
    for (int k = 0; k < 3; ++k) {
      const Field f = static_cast<Field>(k);
      const std::string t = terms[k];
      if (!t.empty() && t[0] == '?') {
        KGS_REQUIRE(t.size() > 1, "empty variable name");
        p->pattern.at(f) = PatternTerm::variable(t.substr(1));
        continue;
      }
      KGS_REQUIRE(!t.empty(), "empty pattern term");
      auto id = f == Field::kR ? prim.edgid(t) : prim.nodid(t);
      if (!id) p->unsatisfiable = true;
      p->pattern.at(f) = PatternTerm::constant(id.value_or(0));
    }
    *out = p.release();
    return KGS_OK;
  });
}

void kgs_pattern_free(kgs_pattern* p) { delete p; }

kgs_status kgs_edg(kgs_db* db, const char* ordering, const kgs_pattern* p,
                   kgs_edge_cursor** out) {
  return guard([&] {
    KGS_REQUIRE(db && ordering && p && out, "null argument");
    const Ordering w = Ordering::parse(ordering);
    auto c = std::make_unique<kgs_edge_cursor>();
    c->snap = db->db->snapshot();
    if (p->unsatisfiable) {
      c->cursor = std::make_unique<VectorEdgeCursor>(std::vector<Edge>{});
    } else {
      c->cursor = Primitives(c->snap).edg(w, p->pattern);
    }
    *out = c.release();
    return KGS_OK;
  });
}

int kgs_edge_cursor_next(kgs_edge_cursor* c, kgs_edge* out) {
  if (!c || !out) return 0;
  try {
    Edge e;
    if (!c->cursor->next(e)) return 0;
    *out = to_c(e);
    return 1;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return -1;
  }
}

void kgs_edge_cursor_free(kgs_edge_cursor* c) { delete c; }

namespace {

class EmptyGroupCursor : public GroupCursor {
 public:
  bool next(GroupedRow&) override { return false; }
};

}  // namespace

kgs_status kgs_grp(kgs_db* db, const char* ordering, const kgs_pattern* p,
                   kgs_group_cursor** out) {
  return guard([&] {
    KGS_REQUIRE(db && ordering && p && out, "null argument");
    const PartialOrdering w = PartialOrdering::parse(ordering);
    KGS_REQUIRE(w.size() == 1 || w.size() == 2, "grp takes one or two fields");
    auto c = std::make_unique<kgs_group_cursor>();
    c->snap = db->db->snapshot();
    if (p->unsatisfiable) {
      c->cursor = std::make_unique<EmptyGroupCursor>();
    } else {
      c->cursor = Primitives(c->snap).grp(w, p->pattern);
    }
    *out = c.release();
    return KGS_OK;
  });
}

int kgs_group_cursor_next(kgs_group_cursor* c, kgs_group* out) {
  if (!c || !out) return 0;
  try {
    GroupedRow g;
    if (!c->cursor->next(g)) return 0;
    out->key[0] = g.key[0];
    out->key[1] = g.key[1];
    out->arity = g.arity;
    out->count = g.count;
    return 1;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return -1;
  }
}

void kgs_group_cursor_free(kgs_group_cursor* c) { delete c; }

kgs_status kgs_cnt_edg(kgs_db* db, const char* ordering, const kgs_pattern* p,
                       uint64_t* out) {
  return guard([&] {
    KGS_REQUIRE(db && ordering && p && out, "null argument");
    const Ordering w = Ordering::parse(ordering);
    *out = p->unsatisfiable ? 0 : db->db->primitives().cnt_edg(w, p->pattern);
    return KGS_OK;
  });
}

kgs_status kgs_cnt_grp(kgs_db* db, const char* ordering, const kgs_pattern* p,
                       uint64_t* out) {
  return guard([&] {
    KGS_REQUIRE(db && ordering && p && out, "null argument");
    const PartialOrdering w = PartialOrdering::parse(ordering);
    KGS_REQUIRE(w.size() == 1 || w.size() == 2, "grp takes one or two fields");
    *out = p->unsatisfiable ? 0 : db->db->primitives().cnt_grp(w, p->pattern);
    return KGS_OK;
  });
}

kgs_status kgs_pos(kgs_db* db, const char* ordering, const kgs_pattern* p,
                   uint64_t index, kgs_edge* out) {
  return guard([&] {
    KGS_REQUIRE(db && ordering && p && out, "null argument");
    const Ordering w = Ordering::parse(ordering);
    if (p->unsatisfiable) {
      return fail(KGS_ERR_OUT_OF_RANGE, "index " + std::to_string(index) +
                                            " beyond an empty answer");
    }
    *out = to_c(db->db->primitives().pos(w, p->pattern, index));
    return KGS_OK;
  });
}

kgs_status kgs_update(kgs_db* db, const char* kind, const char* input,
                      const char* format, char** report_json) {
  return guard([&] {
    KGS_REQUIRE(db && kind && input, "null argument");
    const std::string k = kind;
    DeltaKind dk;
    if (k == "add") {
      dk = DeltaKind::kAddition;
    } else if (k == "remove") {
      dk = DeltaKind::kRemoval;
    } else {
      return fail(KGS_ERR_USAGE, "update kind must be add or remove");
    }
    const InputFormat f =
        format ? parse_input_format(format) : db->db->manifest().input_format;
    put_json(report_json, db->db->update_file(input, f, dk));
    return KGS_OK;
  });
}

kgs_status kgs_merge(kgs_db* db, char** report_json) {
  return guard([&] {
    KGS_REQUIRE(db, "null argument");
    put_json(report_json, db->db->merge());
    return KGS_OK;
  });
}

void kgs_io_counters_get(kgs_db* db, kgs_io_counters* out) {
  if (!db || !out) return;
  const IoStats& s = db->db->io_stats();
  out->tables_opened = s.tables_opened;
  out->table_bytes = s.table_bytes;
  out->reconstructions = s.reconstructions;
}

void kgs_io_counters_reset(kgs_db* db) {
  if (db) db->db->io_stats().reset();
}

}  // extern "C"
