#include "database.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>

namespace kgs {

namespace {

constexpr StreamId kBuildOrder[6] = {StreamId::kTS, StreamId::kTSp,
                                     StreamId::kTR, StreamId::kTD,
                                     StreamId::kTDp, StreamId::kTRp};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

json summary_json(const StreamSummary& s) {
  return {{"stream", stream_name(s.id)},
          {"tables", s.tables},
          {"rows", s.rows},
          {"row", s.row_tables},
          {"column", s.column_tables},
          {"cluster", s.cluster_tables},
          {"pruned", s.pruned_tables},
          {"aggregated", s.aggregated_tables},
          {"references", s.aggregated_references},
          {"bytes", s.file_bytes}};
}

json summaries_json(const std::vector<StreamSummary>& all) {
  json streams = json::array();
  json totals = {{"row", 0}, {"column", 0}, {"cluster", 0}, {"pruned", 0},
                 {"aggregated", 0}, {"tables", 0}, {"bytes", 0}};
  for (const auto& s : all) {
    streams.push_back(summary_json(s));
    totals["row"] = totals["row"].get<std::uint64_t>() + s.row_tables;
    totals["column"] = totals["column"].get<std::uint64_t>() + s.column_tables;
    totals["cluster"] = totals["cluster"].get<std::uint64_t>() + s.cluster_tables;
    totals["pruned"] = totals["pruned"].get<std::uint64_t>() + s.pruned_tables;
    totals["aggregated"] =
        totals["aggregated"].get<std::uint64_t>() + s.aggregated_tables;
    totals["tables"] = totals["tables"].get<std::uint64_t>() + s.tables;
    totals["bytes"] = totals["bytes"].get<std::uint64_t>() + s.file_bytes;
  }
  return {{"streams", streams}, {"totals", totals}};
}

bool dir_is_empty(const fs::path& dir) {
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename() != ".lock") return false;
  }
  return true;
}

void remove_contents(const fs::path& dir) {
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (e.path().filename() == ".lock") continue;
    fs::remove_all(e.path(), ec);
  }
}

std::string delta_dir_name(std::uint64_t seq, DeltaKind kind) {
  return "delta-" + std::to_string(seq) + "-" + delta_kind_name(kind);
}

TriplePattern ground(const Edge& e) {
  return TriplePattern(PatternTerm::constant(e.s), PatternTerm::constant(e.r),
                       PatternTerm::constant(e.d));
}

bool visible(const Primitives& prim, const Edge& e) {
  return prim.cnt_edg(stream_ordering(StreamId::kTS), ground(e)) > 0;
}

}  // namespace

json Manifest::to_json() const {
  json deltas_json = json::array();
  for (const auto& d : deltas) {
    deltas_json.push_back({{"seq", d.seq},
                           {"kind", delta_kind_name(d.kind)},
                           {"dir", d.dir},
                           {"edges", d.edges},
                           {"dictionary", d.has_dict}});
  }
  return {{"format_version", format_version},
          {"id_mode", id_mode_name(id_mode)},
          {"nm_backend", nm_backend_name(nm)},
          {"input_format", input_format_name(input_format)},
          {"ofr", build.ofr},
          {"eta", build.eta},
          {"aggr", build.aggr},
          {"tau", build.layout.tau},
          {"upsilon", build.layout.upsilon},
          {"reload_fraction", reload_fraction},
          {"edges", edges},
          {"labels", labels},
          {"nodes", nodes},
          {"next_entity_id", next_entity},
          {"next_relation_id", next_relation},
          {"base_next_entity_id", base_next_entity},
          {"base_next_relation_id", base_next_relation},
          {"next_seq", next_seq},
          {"deltas", deltas_json}};
}

Manifest Manifest::from_json(const json& j) {
  Manifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kFormatVersion) {
      throw Error(ErrorCode::kCorrupt, "unsupported format version " +
                                           std::to_string(m.format_version));
    }
    m.id_mode = parse_id_mode(j.at("id_mode").get<std::string>());
    m.nm = parse_nm_backend(j.at("nm_backend").get<std::string>());
    m.input_format = parse_input_format(j.at("input_format").get<std::string>());
    m.build.ofr = j.at("ofr").get<bool>();
    m.build.eta = j.at("eta").get<std::uint64_t>();
    m.build.aggr = j.at("aggr").get<bool>();
    m.build.layout.tau = j.at("tau").get<std::uint64_t>();
    m.build.layout.upsilon = j.at("upsilon").get<std::uint64_t>();
    m.reload_fraction = j.at("reload_fraction").get<double>();
    m.edges = j.at("edges").get<std::uint64_t>();
    m.labels = j.at("labels").get<std::uint64_t>();
    m.nodes = j.at("nodes").get<std::uint64_t>();
    m.next_entity = j.at("next_entity_id").get<TermId>();
    m.next_relation = j.at("next_relation_id").get<TermId>();
    m.base_next_entity = j.at("base_next_entity_id").get<TermId>();
    m.base_next_relation = j.at("base_next_relation_id").get<TermId>();
    m.next_seq = j.at("next_seq").get<std::uint64_t>();
    for (const auto& d : j.at("deltas")) {
      DeltaInfo info;
      info.seq = d.at("seq").get<std::uint64_t>();
      const auto kind = d.at("kind").get<std::string>();
      info.kind = kind == "add" ? DeltaKind::kAddition : DeltaKind::kRemoval;
      info.dir = d.at("dir").get<std::string>();
      info.edges = d.at("edges").get<std::uint64_t>();
      info.has_dict = d.at("dictionary").get<bool>();
      m.deltas.push_back(info);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorrupt, std::string("bad manifest: ") + e.what());
  }
  return m;
}

Manifest Manifest::read(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) {
    throw Error(ErrorCode::kStorage, "no database at " + dir.string());
  }
  json j;
  try {
    j = json::parse(read_text_file(p));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorrupt, std::string("bad manifest: ") + e.what());
  }
  return from_json(j);
}

void Manifest::write(const fs::path& dir) const {
  write_text_file_atomic(dir / "manifest.json", to_json().dump(2) + "\n");
}

void build_store(const fs::path& dir, std::vector<Edge> edges,
                 const BuildOptions& opts, NmBackend nm, WorkerPool* io) {
  fs::create_directories(dir);
  for (StreamId id : kBuildOrder) {
    const Ordering o = stream_ordering(id);
    std::sort(edges.begin(), edges.end(),
              [&o](const Edge& a, const Edge& b) { return o.less(a, b); });
    StreamBuilder b(dir, id, opts, io);
    for (const Edge& e : edges) b.add(e);
    b.finish();
  }
  build_node_manager(dir, nm, io);
}

json load_database(const fs::path& input, const fs::path& dir,
                   const LoadOptions& opts) {
  if (opts.proc_workers == 0 || opts.io_workers == 0) {
    throw Error(ErrorCode::kInvalidArgument, "worker counts must be at least 1");
  }
  if (!fs::exists(input)) {
    throw Error(ErrorCode::kStorage, "input not found: " + input.string());
  }
  const bool created = !fs::exists(dir);
  if (!created && (!fs::is_directory(dir) || !dir_is_empty(dir))) {
    throw Error(ErrorCode::kInvalidArgument,
                "target exists and is not empty: " + dir.string());
  }
  fs::create_directories(dir);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    DirectoryLock lock(dir, true);
    WorkerPool proc(opts.proc_workers);
    WorkerPool io(opts.io_workers);
    const fs::path tmp = opts.temp_dir.empty()
                             ? dir / "tmp"
                             : opts.temp_dir / ("kgs-load-" + std::to_string(::getpid()));
    fs::create_directories(tmp);

    Manifest m;
    m.id_mode = opts.id_mode;
    m.nm = opts.nm;
    m.input_format = opts.format;
    m.build = opts.build;
    m.reload_fraction = opts.reload_fraction;

    // Encode: workers parse slices of a batch, the sequencer assigns ids in
    // input order so the result does not depend on the worker count.
    const fs::path encoded = tmp / "encoded.bin";
    std::uint64_t input_triples = 0;
    {
      Dictionary dict(opts.id_mode);
      if (opts.format == InputFormat::kSnap) {
        dict.assign_id(kSnapRelation, TermKind::kRelation);
      }
      TripleWriter out(encoded, &io);
      LineReader in(input);
      const unsigned parts = proc.workers();
      const std::size_t batch = std::size_t{16384} * parts;
      std::vector<std::string> lines;
      std::uint64_t line_base = 0;
      std::vector<std::vector<LabelTriple>> parsed(parts);
      while (in.read_lines(lines, batch) > 0) {
        std::vector<std::future<void>> done;
        for (unsigned k = 0; k < parts; ++k) {
          const std::size_t b = lines.size() * k / parts;
          const std::size_t e = lines.size() * (k + 1) / parts;
          parsed[k].clear();
          done.push_back(proc.submit([&, k, b, e] {
            LabelTriple t;
            for (std::size_t i = b; i < e; ++i) {
              const bool ok = opts.format == InputFormat::kNTriples
                                  ? parse_ntriples_line(lines[i], line_base + i + 1, t)
                                  : parse_snap_line(lines[i], line_base + i + 1, t);
              if (ok) parsed[k].push_back(std::move(t));
            }
          }));
        }
        for (auto& f : done) f.get();
        for (const auto& slice : parsed) {
          for (const LabelTriple& t : slice) {
            Edge e;
            e.s = dict.assign_id(t[0], TermKind::kEntity);
            e.r = dict.assign_id(t[1], TermKind::kRelation);
            e.d = dict.assign_id(t[2], TermKind::kEntity);
            out.add(e);
          }
        }
        line_base += lines.size();
        lines.clear();
      }
      out.close();
      input_triples = out.count();
      dict.commit(dir / "dict", &io);
      m.labels = dict.size();
      m.next_entity = m.base_next_entity = dict.next_entity_id();
      m.next_relation = m.base_next_relation = dict.next_relation_id();
    }
    const double encode_seconds = seconds_since(t0);

    SortConfig cfg;
    cfg.memory_budget = opts.sort_memory;
    cfg.temp_dir = tmp;
    std::vector<StreamSummary> summaries;
    std::uint64_t runs = 0;
    for (StreamId id : kBuildOrder) {
      const fs::path sorted = tmp / "sorted.bin";
      const SortStats ss =
          external_sort(encoded, sorted, stream_ordering(id), cfg, proc, &io);
      runs += ss.runs;
      if (id == StreamId::kTS) m.edges = ss.output_triples;
      StreamBuilder b(dir, id, opts.build, &io);
      {
        TripleReader in(sorted, &io);
        Edge e;
        while (in.next(e)) b.add(e);
      }
      summaries.push_back(b.finish());
      fs::remove(sorted);
    }
    std::sort(summaries.begin(), summaries.end(),
              [](const StreamSummary& a, const StreamSummary& b) {
                return a.id < b.id;
              });
    m.nodes = build_node_manager(dir, opts.nm, &io);
    fs::remove_all(tmp);
    m.write(dir);

    json report = summaries_json(summaries);
    report["edges"] = m.edges;
    report["input_triples"] = input_triples;
    report["labels"] = m.labels;
    report["nodes"] = m.nodes;
    report["id_mode"] = id_mode_name(m.id_mode);
    report["nm_backend"] = nm_backend_name(m.nm);
    report["ofr"] = m.build.ofr;
    report["aggr"] = m.build.aggr;
    report["sort_runs"] = runs;
    report["proc_workers"] = proc.workers();
    report["io_workers"] = io.workers();
    report["io_peak_in_flight"] = io.peak_in_flight();
    report["encode_seconds"] = encode_seconds;
    report["seconds"] = seconds_since(t0);
    report["database_bytes"] = directory_bytes(dir);
    return report;
  } catch (...) {
    std::error_code ec;
    if (created) {
      fs::remove_all(dir, ec);
    } else {
      remove_contents(dir);
    }
    if (!opts.temp_dir.empty()) {
      fs::remove_all(opts.temp_dir / ("kgs-load-" + std::to_string(::getpid())), ec);
    }
    throw;
  }
}

// ---------------------------------------------------------------------------

Database::Database(const fs::path& dir, bool writable)
    : dir_(dir), writable_(writable) {}

std::unique_ptr<Database> Database::open(const fs::path& dir, bool writable) {
  if (!fs::exists(dir / "manifest.json")) {
    throw Error(ErrorCode::kStorage, "no database at " + dir.string());
  }
  std::unique_ptr<Database> db(new Database(dir, writable));
  db->lock_ = std::make_unique<DirectoryLock>(dir, writable);
  db->reload();
  return db;
}

void Database::reload() {
  Manifest m = Manifest::read(dir_);
  std::shared_ptr<const Store> base = base_;
  if (!base) base = std::make_shared<Store>(dir_, m.nm, &stats_);
  auto snap = std::make_shared<Snapshot>();
  snap->base = base;
  auto dict = std::make_shared<Dictionary>(m.id_mode, m.next_entity, m.next_relation);
  dict->add_segment(std::make_shared<DictionarySegment>(dir_ / "dict"));
  for (const DeltaInfo& d : m.deltas) {
    const fs::path p = dir_ / d.dir;
    snap->deltas.push_back({d.seq, d.kind, std::make_shared<Store>(p, m.nm, &stats_)});
    if (d.has_dict) dict->add_segment(std::make_shared<DictionarySegment>(p / "dict"));
  }
  snap->dict = dict;
  std::lock_guard<std::mutex> lock(mu_);
  manifest_ = std::move(m);
  base_ = base;
  snap_ = snap;
}

Manifest Database::manifest() const {
  std::lock_guard<std::mutex> lock(mu_);
  return manifest_;
}

std::shared_ptr<const Snapshot> Database::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return snap_;
}

void Database::require_writable() const {
  if (!writable_) {
    throw Error(ErrorCode::kInvalidArgument, "database opened read-only");
  }
}

json Database::update_file(const fs::path& input, InputFormat format,
                           DeltaKind kind) {
  return update(parse_file(input, format), kind);
}

json Database::update(const std::vector<LabelTriple>& triples, DeltaKind kind) {
  require_writable();
  const auto t0 = std::chrono::steady_clock::now();
  const Manifest m = manifest();
  auto snap = snapshot();
  Primitives prim(snap);
  Dictionary dict(m.id_mode, m.next_entity, m.next_relation);
  for (const auto& seg : snap->dict->segments()) dict.add_segment(seg);

  std::vector<Edge> edges;
  std::uint64_t skipped = 0;
  for (const LabelTriple& t : triples) {
    Edge e;
    if (kind == DeltaKind::kAddition) {
      e.s = dict.assign_id(t[0], TermKind::kEntity);
      e.r = dict.assign_id(t[1], TermKind::kRelation);
      e.d = dict.assign_id(t[2], TermKind::kEntity);
      if (visible(prim, e)) {
        ++skipped;
        continue;
      }
    } else {
      auto s = dict.lookup_id(t[0], TermKind::kEntity);
      auto r = dict.lookup_id(t[1], TermKind::kRelation);
      auto d = dict.lookup_id(t[2], TermKind::kEntity);
      if (!s || !r || !d) {
        ++skipped;
        continue;
      }
      e = {*s, *r, *d};
      if (!visible(prim, e)) {
        ++skipped;
        continue;
      }
    }
    edges.push_back(e);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  json report = {{"kind", delta_kind_name(kind)},
                 {"input_triples", triples.size()},
                 {"edges", edges.size()},
                 {"skipped", skipped},
                 {"new_terms", dict.pending_count()}};
  if (edges.empty() && dict.pending_count() == 0) {
    report["created"] = false;
    report["deltas"] = m.deltas.size();
    return report;
  }

  Manifest next = m;
  DeltaInfo info;
  info.seq = next.next_seq++;
  info.kind = kind;
  info.dir = delta_dir_name(info.seq, kind);
  info.edges = edges.size();
  info.has_dict = dict.pending_count() > 0;
  const fs::path target = dir_ / info.dir;
  const fs::path staging = dir_ / (info.dir + ".tmp");
  std::error_code ec;
  fs::remove_all(staging, ec);
  try {
    WorkerPool io(1);
    build_store(staging, edges, m.build, m.nm, &io);
    if (info.has_dict) dict.commit(staging / "dict", &io);
    fs::rename(staging, target);
    next.deltas.push_back(info);
    next.next_entity = dict.next_entity_id();
    next.next_relation = dict.next_relation_id();
    next.labels = dict.size();
    next.write(dir_);
  } catch (...) {
    fs::remove_all(staging, ec);
    if (fs::exists(target) && Manifest::read(dir_).deltas.size() == m.deltas.size()) {
      fs::remove_all(target, ec);
    }
    throw;
  }
  reload();
  report["created"] = true;
  report["delta"] = info.dir;
  report["deltas"] = next.deltas.size();
  report["delta_bytes"] = directory_bytes(target);
  report["seconds"] = seconds_since(t0);
  return report;
}

json Database::merge() {
  require_writable();
  const auto t0 = std::chrono::steady_clock::now();
  const Manifest m = manifest();
  if (m.deltas.empty()) {
    return {{"merged", false}, {"deltas", 0}, {"reload_recommended", false}};
  }
  auto snap = snapshot();
  Primitives prim(snap);

  std::vector<Edge> candidates;
  for (const DeltaLayer& d : snap->deltas) {
    auto c = d.store->scan(StreamId::kTS);
    Edge e;
    while (c->next(e)) candidates.push_back(e);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());
  std::vector<Edge> additions;
  std::vector<Edge> removals;
  for (const Edge& e : candidates) {
    const bool vis = visible(prim, e);
    const bool in_base = snap->base->contains(e);
    if (vis && !in_base) additions.push_back(e);
    if (!vis && in_base) removals.push_back(e);
  }

  // All terms introduced by updates move into one segment; their ids are
  // contiguous after the base counters.
  Dictionary dict(m.id_mode, m.base_next_entity, m.base_next_relation);
  for (const DeltaInfo& d : m.deltas) {
    if (!d.has_dict) continue;
    DictionarySegment seg(dir_ / d.dir / "dict");
    seg.for_each([&](TermKind kind, TermId id, std::string_view label) {
      if (dict.assign_id(label, kind) != id) {
        throw Error(ErrorCode::kCorrupt, "delta dictionaries are not contiguous");
      }
    });
  }

  Manifest next = m;
  next.deltas.clear();
  std::vector<fs::path> staged;
  std::vector<std::pair<fs::path, fs::path>> moves;
  std::error_code ec;
  try {
    WorkerPool io(1);
    auto stage = [&](DeltaKind kind, const std::vector<Edge>& edges, bool with_dict) {
      DeltaInfo info;
      info.seq = next.next_seq++;
      info.kind = kind;
      info.dir = delta_dir_name(info.seq, kind);
      info.edges = edges.size();
      info.has_dict = with_dict;
      const fs::path staging = dir_ / (info.dir + ".tmp");
      fs::remove_all(staging, ec);
      staged.push_back(staging);
      build_store(staging, edges, m.build, m.nm, &io);
      if (with_dict) dict.commit(staging / "dict", &io);
      moves.push_back({staging, dir_ / info.dir});
      next.deltas.push_back(info);
    };
    if (!additions.empty() || dict.pending_count() > 0) {
      stage(DeltaKind::kAddition, additions, dict.pending_count() > 0);
    }
    if (!removals.empty()) stage(DeltaKind::kRemoval, removals, false);
    for (const auto& [from, to] : moves) fs::rename(from, to);
    next.write(dir_);
  } catch (...) {
    for (const auto& p : staged) fs::remove_all(p, ec);
    if (Manifest::read(dir_).deltas.size() == m.deltas.size()) {
      for (const auto& [from, to] : moves) fs::remove_all(to, ec);
    }
    throw;
  }
  for (const DeltaInfo& d : m.deltas) fs::remove_all(dir_ / d.dir, ec);
  reload();

  const std::uint64_t changed = additions.size() + removals.size();
  const bool reload_recommended =
      static_cast<double>(changed) >
      m.reload_fraction * static_cast<double>(std::max<std::uint64_t>(m.edges, 1));
  return {{"merged", true},
          {"deltas_before", m.deltas.size()},
          {"deltas", next.deltas.size()},
          {"additions", additions.size()},
          {"removals", removals.size()},
          {"reload_recommended", reload_recommended},
          {"seconds", seconds_since(t0)}};
}

json Database::stats() const {
  const Manifest m = manifest();
  auto snap = snapshot();
  Primitives prim(snap);
  std::vector<StreamSummary> summaries;
  for (StreamId id : kAllStreams) {
    summaries.push_back(summarize_stream(snap->base->edges(), id));
  }
  json out = summaries_json(summaries);
  out["edges"] = prim.cnt_edg(stream_ordering(StreamId::kTS), TriplePattern());
  out["base_edges"] = m.edges;
  out["labels"] = m.labels;
  out["nodes"] = m.nodes;
  out["id_mode"] = id_mode_name(m.id_mode);
  out["nm_backend"] = nm_backend_name(m.nm);
  out["ofr"] = m.build.ofr;
  out["eta"] = m.build.eta;
  out["aggr"] = m.build.aggr;
  out["tau"] = m.build.layout.tau;
  out["upsilon"] = m.build.layout.upsilon;
  json files = json::object();
  for (const auto& e : fs::recursive_directory_iterator(dir_)) {
    if (!e.is_regular_file() || e.path().filename() == ".lock") continue;
    files[fs::relative(e.path(), dir_).string()] = e.file_size();
  }
  out["files"] = files;
  out["database_bytes"] = directory_bytes(dir_);
  json deltas = json::array();
  for (const DeltaInfo& d : m.deltas) {
    deltas.push_back({{"seq", d.seq},
                      {"kind", delta_kind_name(d.kind)},
                      {"dir", d.dir},
                      {"edges", d.edges},
                      {"bytes", directory_bytes(dir_ / d.dir)}});
  }
  out["deltas"] = deltas;
  return out;
}

}  // namespace kgs
