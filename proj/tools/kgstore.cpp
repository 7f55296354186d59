// Command-line front end over the kgstore C interface.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "kgstore/kgstore.h"

using nlohmann::json;

namespace {

struct CliFailure {
  int code;
};

void check(kgs_status s) {
  if (s != KGS_OK) {
    std::cerr << "error: " << kgs_last_error() << "\n";
    throw CliFailure{static_cast<int>(s)};
  }
}

std::string take(char* s) {
  std::string out = s ? s : "";
  kgs_free_string(s);
  return out;
}

class Db {
 public:
  Db(const std::string& dir, bool writable) { check(kgs_open(dir.c_str(), writable, &db_)); }
  ~Db() { kgs_close(db_); }
  Db(const Db&) = delete;
  Db& operator=(const Db&) = delete;
  kgs_db* get() const { return db_; }

 private:
  kgs_db* db_ = nullptr;
};

class Pattern {
 public:
  Pattern(kgs_db* db, const std::vector<std::string>& t) {
    check(kgs_pattern_parse(db, t[0].c_str(), t[1].c_str(), t[2].c_str(), &p_));
  }
  ~Pattern() { kgs_pattern_free(p_); }
  Pattern(const Pattern&) = delete;
  Pattern& operator=(const Pattern&) = delete;
  const kgs_pattern* get() const { return p_; }

 private:
  kgs_pattern* p_ = nullptr;
};

std::string node_label(kgs_db* db, uint64_t id) {
  char* s = nullptr;
  check(kgs_lbl_n(db, id, &s));
  return take(s);
}

std::string edge_label(kgs_db* db, uint64_t id) {
  char* s = nullptr;
  check(kgs_lbl_e(db, id, &s));
  return take(s);
}

void print_edge(kgs_db* db, const kgs_edge& e, bool ids) {
  if (ids) {
    std::cout << e.s << '\t' << e.r << '\t' << e.d << '\n';
  } else {
    std::cout << node_label(db, e.s) << '\t' << edge_label(db, e.r) << '\t'
              << node_label(db, e.d) << '\n';
  }
}

// Label of a grouping key component given the field it came from.
std::string key_label(kgs_db* db, char field, uint64_t id, bool ids) {
  if (ids) return std::to_string(id);
  return field == 'r' ? edge_label(db, id) : node_label(db, id);
}

void print_tables(const json& report) {
  const json& t = report["totals"];
  std::cout << "edges\t" << report["edges"] << "\n"
            << "labels\t" << report["labels"] << "\n"
            << "tables\t" << t["tables"] << "\n"
            << "row\t" << t["row"] << "\n"
            << "column\t" << t["column"] << "\n"
            << "cluster\t" << t["cluster"] << "\n"
            << "pruned\t" << t["pruned"] << "\n"
            << "aggregated\t" << t["aggregated"] << "\n"
            << "stream_bytes\t" << t["bytes"] << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read " << path << "\n";
    throw CliFailure{KGS_ERR_STORAGE};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kgstore: permutation-indexed knowledge graph store"};
  app.require_subcommand(1);
  std::string db_dir;
  bool as_json = false;

  // load
  auto* load = app.add_subcommand("load", "Build a database from a triple file");
  kgs_load_options lo;
  kgs_load_options_init(&lo);
  std::string input, format = "ntriples", id_mode = "global", nm = "btree";
  std::string temp_dir;
  bool ofr = false, aggr = false;
  std::uint64_t sort_mb = lo.sort_memory >> 20;
  load->add_option("db", db_dir, "Database directory")->required();
  load->add_option("--input,-i", input, "Input file (plain or gzip)")->required();
  load->add_option("--format", format, "ntriples or snap")
      ->check(CLI::IsMember({"ntriples", "nt", "snap"}));
  load->add_option("--id-mode", id_mode, "global or split")
      ->check(CLI::IsMember({"global", "split"}));
  load->add_option("--nm", nm, "Node manager backend")
      ->check(CLI::IsMember({"btree", "array"}));
  load->add_flag("--ofr", ofr, "Prune small primed tables");
  load->add_option("--eta", lo.eta, "OFR row threshold");
  load->add_flag("--aggr", aggr, "Aggregate indexing in TR'");
  load->add_option("--tau", lo.tau, "Row limit for ROW/CLUSTER tables");
  load->add_option("--upsilon", lo.upsilon, "Distinct first-value limit for ROW/CLUSTER tables");
  load->add_option("--proc-workers", lo.proc_workers)->check(CLI::PositiveNumber);
  load->add_option("--io-workers", lo.io_workers)->check(CLI::PositiveNumber);
  load->add_option("--sort-mem", sort_mb, "Sort budget in MiB")->check(CLI::PositiveNumber);
  load->add_option("--temp-dir", temp_dir);
  load->add_flag("--json", as_json);

  // query
  auto* query = app.add_subcommand("query", "Run a SPARQL basic graph pattern");
  std::string query_text, query_file;
  bool show_plan = false;
  query->add_option("db", db_dir)->required();
  auto* qo = query->add_option("--query,-q", query_text, "Query text");
  auto* qf = query->add_option("--query-file,-f", query_file, "File holding the query");
  qo->excludes(qf);
  query->add_flag("--plan", show_plan, "Print the join plan to stderr");

  // probe
  auto* probe = app.add_subcommand("probe", "Call one primitive");
  std::string primitive, ordering = "srd", term;
  std::vector<std::string> pattern{"?s", "?r", "?d"};
  std::uint64_t index = 0;
  bool ids = false;
  probe->add_option("db", db_dir)->required();
  probe->add_option("--primitive,-p", primitive)
      ->required()
      ->check(CLI::IsMember({"lbl_n", "lbl_e", "nodid", "edgid", "edg", "grp",
                             "cnt", "pos"}));
  probe->add_option("--pattern", pattern, "Three terms: label or ?var")->expected(3);
  probe->add_option("--ordering,-o", ordering);
  probe->add_option("--index", index, "0-based position for pos");
  probe->add_option("--term", term, "Id or label for f1-f4");
  probe->add_flag("--ids", ids, "Print ids instead of labels");

  // update
  auto* update = app.add_subcommand("update", "Add or remove triples as a delta");
  std::string kind, update_format;
  update->add_option("kind", kind)->required()->check(CLI::IsMember({"add", "remove"}));
  update->add_option("db", db_dir)->required();
  update->add_option("--input,-i", input)->required();
  update->add_option("--format", update_format)
      ->check(CLI::IsMember({"ntriples", "nt", "snap"}));
  update->add_flag("--json", as_json);

  auto* merge = app.add_subcommand("merge", "Compact deltas");
  merge->add_option("db", db_dir)->required();
  merge->add_flag("--json", as_json);

  auto* stats = app.add_subcommand("stats", "Database statistics");
  stats->add_option("db", db_dir)->required();
  stats->add_flag("--json", as_json);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : KGS_ERR_USAGE;
  }

  try {
    if (*load) {
      lo.format = format.c_str();
      lo.id_mode = id_mode.c_str();
      lo.nm = nm.c_str();
      lo.ofr = ofr;
      lo.aggr = aggr;
      lo.sort_memory = sort_mb << 20;
      lo.temp_dir = temp_dir.empty() ? nullptr : temp_dir.c_str();
      char* report = nullptr;
      check(kgs_load(input.c_str(), db_dir.c_str(), &lo, &report));
      const std::string text = take(report);
      if (as_json) {
        std::cout << text << "\n";
      } else {
        const json j = json::parse(text);
        print_tables(j);
        std::cout << "seconds\t" << j["seconds"] << "\n";
      }
    } else if (*query) {
      if (query_text.empty() && query_file.empty()) {
        std::cerr << "error: --query or --query-file is required\n";
        return KGS_ERR_USAGE;
      }
      if (!query_file.empty()) query_text = read_file(query_file);
      Db db(db_dir, false);
      kgs_result* r = nullptr;
      check(kgs_query(db.get(), query_text.c_str(), &r));
      const size_t cols = kgs_result_num_cols(r);
      const size_t rows = kgs_result_num_rows(r);
      for (size_t c = 0; c < cols; ++c) {
        std::cout << (c ? "\t" : "") << '?' << kgs_result_col_name(r, c);
      }
      std::cout << '\n';
      for (size_t i = 0; i < rows; ++i) {
        for (size_t c = 0; c < cols; ++c) {
          std::cout << (c ? "\t" : "") << kgs_result_value(r, i, c);
        }
        std::cout << '\n';
      }
      if (show_plan) std::cerr << "plan: " << kgs_result_plan(r) << "\n";
      std::cerr << rows << " rows\n";
      kgs_result_free(r);
    } else if (*probe) {
      Db db(db_dir, false);
      if (primitive == "lbl_n" || primitive == "lbl_e") {
        const uint64_t id = std::stoull(term);
        std::cout << (primitive == "lbl_n" ? node_label(db.get(), id)
                                           : edge_label(db.get(), id))
                  << "\n";
      } else if (primitive == "nodid" || primitive == "edgid") {
        uint64_t id = 0;
        check(primitive == "nodid" ? kgs_nodid(db.get(), term.c_str(), &id)
                                   : kgs_edgid(db.get(), term.c_str(), &id));
        std::cout << id << "\n";
      } else {
        Pattern p(db.get(), pattern);
        if (primitive == "edg") {
          kgs_edge_cursor* c = nullptr;
          check(kgs_edg(db.get(), ordering.c_str(), p.get(), &c));
          kgs_edge e;
          int rc;
          while ((rc = kgs_edge_cursor_next(c, &e)) == 1) print_edge(db.get(), e, ids);
          kgs_edge_cursor_free(c);
          if (rc < 0) check(KGS_ERR_STORAGE);
        } else if (primitive == "grp") {
          kgs_group_cursor* c = nullptr;
          check(kgs_grp(db.get(), ordering.c_str(), p.get(), &c));
          kgs_group g;
          int rc;
          while ((rc = kgs_group_cursor_next(c, &g)) == 1) {
            for (uint32_t k = 0; k < g.arity; ++k) {
              std::cout << key_label(db.get(), ordering[k], g.key[k], ids) << '\t';
            }
            std::cout << g.count << '\n';
          }
          kgs_group_cursor_free(c);
          if (rc < 0) check(KGS_ERR_STORAGE);
        } else if (primitive == "cnt") {
          uint64_t n = 0;
          check(ordering.size() == 3 ? kgs_cnt_edg(db.get(), ordering.c_str(), p.get(), &n)
                                     : kgs_cnt_grp(db.get(), ordering.c_str(), p.get(), &n));
          std::cout << n << "\n";
        } else {
          kgs_edge e;
          check(kgs_pos(db.get(), ordering.c_str(), p.get(), index, &e));
          print_edge(db.get(), e, ids);
        }
      }
    } else if (*update) {
      Db db(db_dir, true);
      char* report = nullptr;
      check(kgs_update(db.get(), kind.c_str(), input.c_str(),
                       update_format.empty() ? nullptr : update_format.c_str(), &report));
      const std::string text = take(report);
      const json j = json::parse(text);
      if (as_json) {
        std::cout << text << "\n";
      } else {
        std::cout << "edges\t" << j["edges"] << "\n"
                  << "skipped\t" << j["skipped"] << "\n"
                  << "deltas\t" << j["deltas"] << "\n";
        if (j.contains("delta_bytes")) std::cout << "delta_bytes\t" << j["delta_bytes"] << "\n";
      }
      if (j["skipped"].get<uint64_t>() > 0) {
        std::cerr << "warning: " << j["skipped"] << " triples skipped\n";
      }
    } else if (*merge) {
      Db db(db_dir, true);
      char* report = nullptr;
      check(kgs_merge(db.get(), &report));
      const std::string text = take(report);
      if (as_json) {
        std::cout << text << "\n";
      } else {
        const json j = json::parse(text);
        for (const auto& [k, v] : j.items()) {
          if (!v.is_structured()) std::cout << k << '\t' << v << '\n';
        }
      }
    } else if (*stats) {
      Db db(db_dir, false);
      char* report = nullptr;
      check(kgs_stats_json(db.get(), &report));
      const std::string text = take(report);
      if (as_json) {
        std::cout << text << "\n";
      } else {
        const json j = json::parse(text);
        print_tables(j);
        std::cout << "nm_backend\t" << j["nm_backend"].get<std::string>() << "\n"
                  << "database_bytes\t" << j["database_bytes"] << "\n"
                  << "deltas\t" << j["deltas"].size() << "\n";
        for (const auto& d : j["deltas"]) {
          std::cout << "delta\t" << d.dump() << "\n";
        }
      }
    }
  } catch (const CliFailure& f) {
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return KGS_ERR_USAGE;
  }
  return 0;
}
