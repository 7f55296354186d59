#pragma once

#include <json.hpp>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "external_sort.hpp"
#include "parser.hpp"
#include "primitives.hpp"

namespace kgs {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

struct LoadOptions {
  InputFormat format = InputFormat::kNTriples;
  IdMode id_mode = IdMode::kGlobal;
  NmBackend nm = NmBackend::kBTree;
  BuildOptions build;
  unsigned proc_workers = 1;
  unsigned io_workers = 1;
  std::uint64_t sort_memory = 256ull << 20;
  fs::path temp_dir;  // default: <db>/tmp
  double reload_fraction = 0.25;
};

struct DeltaInfo {
  std::uint64_t seq = 0;
  DeltaKind kind = DeltaKind::kAddition;
  std::string dir;
  std::uint64_t edges = 0;
  bool has_dict = false;
};

struct Manifest {
  int format_version = kFormatVersion;
  IdMode id_mode = IdMode::kGlobal;
  NmBackend nm = NmBackend::kBTree;
  InputFormat input_format = InputFormat::kNTriples;
  BuildOptions build;
  double reload_fraction = 0.25;
  std::uint64_t edges = 0;
  std::uint64_t labels = 0;
  std::uint64_t nodes = 0;  // NM records
  TermId next_entity = 0;
  TermId next_relation = 0;
  // Counters as they were after the bulk load; delta terms start here.
  TermId base_next_entity = 0;
  TermId base_next_relation = 0;
  std::uint64_t next_seq = 1;
  std::vector<DeltaInfo> deltas;

  json to_json() const;
  static Manifest from_json(const json& j);
  static Manifest read(const fs::path& dir);
  void write(const fs::path& dir) const;  // atomic replace
};

// Builds a database in `dir` (created; must not exist or be empty). Returns
// the load report. On failure nothing is left behind.
json load_database(const fs::path& input, const fs::path& dir,
                   const LoadOptions& opts);

// Writes six streams and the NM for an in-memory edge set.
void build_store(const fs::path& dir, std::vector<Edge> edges,
                 const BuildOptions& opts, NmBackend nm, WorkerPool* io);

class Database {
 public:
  // Shared lock for readers, exclusive for writers; throws kBusy if taken.
  static std::unique_ptr<Database> open(const fs::path& dir, bool writable);

  const fs::path& dir() const { return dir_; }
  bool writable() const { return writable_; }
  Manifest manifest() const;
  std::shared_ptr<const Snapshot> snapshot() const;
  Primitives primitives() const { return Primitives(snapshot()); }
  IoStats& io_stats() { return stats_; }

  json update(const std::vector<LabelTriple>& triples, DeltaKind kind);
  json update_file(const fs::path& input, InputFormat format, DeltaKind kind);
  json merge();
  json stats() const;

 private:
  Database(const fs::path& dir, bool writable);
  void reload();
  void require_writable() const;

  fs::path dir_;
  bool writable_;
  std::unique_ptr<DirectoryLock> lock_;
  IoStats stats_;
  mutable std::mutex mu_;
  Manifest manifest_;
  std::shared_ptr<const Store> base_;
  std::shared_ptr<const Snapshot> snap_;
};

}  // namespace kgs
