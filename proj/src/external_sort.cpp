#include "external_sort.hpp"

#include <algorithm>
#include <queue>

namespace kgs {

namespace {

constexpr std::size_t kMergeBlock = 1 << 20;

// Merges sorted runs into one sorted, duplicate-free file.
std::uint64_t merge_runs(const std::vector<fs::path>& runs, const fs::path& out,
                         const Ordering& o, WorkerPool* io) {
  std::vector<std::unique_ptr<TripleReader>> readers;
  readers.reserve(runs.size());
  for (const auto& r : runs) {
    readers.push_back(std::make_unique<TripleReader>(r, io, kMergeBlock));
  }
  struct Head {
    std::array<TermId, 3> key;
    Edge edge;
    std::size_t run;
  };
  auto greater = [](const Head& a, const Head& b) {
    if (a.key != b.key) return a.key > b.key;
    return a.run > b.run;
  };
  std::priority_queue<Head, std::vector<Head>, decltype(greater)> heap(greater);
  for (std::size_t i = 0; i < readers.size(); ++i) {
    Edge e;
    if (readers[i]->next(e)) heap.push({o.key(e), e, i});
  }
  TripleWriter w(out, io);
  bool have_last = false;
  Edge last{};
  while (!heap.empty()) {
    Head h = heap.top();
    heap.pop();
    if (!have_last || h.edge != last) {
      w.add(h.edge);
      last = h.edge;
      have_last = true;
    }
    Edge e;
    if (readers[h.run]->next(e)) heap.push({o.key(e), e, h.run});
  }
  w.close();
  return w.count();
}

}  // namespace

SortStats external_sort(const fs::path& input, const fs::path& output,
                        const Ordering& o, const SortConfig& cfg,
                        WorkerPool& proc, WorkerPool* io) {
  SortStats stats;
  const fs::path tmp = cfg.temp_dir.empty() ? output.parent_path() : cfg.temp_dir;
  fs::create_directories(tmp);
  const std::string stem = output.filename().string();
  std::uint64_t run_id = 0;
  auto run_path = [&](std::uint64_t id) {
    return tmp / (stem + ".run" + std::to_string(id));
  };

  // Half of the budget holds the chunk being sorted.
  const std::uint64_t chunk_edges =
      std::max<std::uint64_t>(1024, cfg.memory_budget / 2 / sizeof(Edge));
  const unsigned parts = proc.workers();
  std::vector<fs::path> runs;
  {
    TripleReader in(input, io);
    std::vector<Edge> chunk;
    for (;;) {
      chunk.clear();
      chunk.reserve(static_cast<std::size_t>(std::min(chunk_edges, in.size())));
      Edge e;
      while (chunk.size() < chunk_edges && in.next(e)) chunk.push_back(e);
      if (chunk.empty()) break;
      stats.input_triples += chunk.size();
      // Sort `parts` slices in parallel, one run file per slice.
      const std::size_t n = chunk.size();
      std::vector<std::future<void>> done;
      std::vector<std::pair<std::size_t, std::size_t>> slices;
      for (unsigned k = 0; k < parts; ++k) {
        const std::size_t b = n * k / parts;
        const std::size_t en = n * (k + 1) / parts;
        if (b == en) continue;
        slices.push_back({b, en});
        done.push_back(proc.submit([&chunk, &o, b, en] {
          std::sort(chunk.begin() + static_cast<std::ptrdiff_t>(b),
                    chunk.begin() + static_cast<std::ptrdiff_t>(en),
                    [&o](const Edge& x, const Edge& y) { return o.less(x, y); });
        }));
      }
      for (auto& f : done) f.get();
      for (const auto& [b, en] : slices) {
        const fs::path p = run_path(run_id++);
        TripleWriter w(p, io);
        for (std::size_t i = b; i < en; ++i) {
          if (i > b && chunk[i] == chunk[i - 1]) continue;
          w.add(chunk[i]);
        }
        w.close();
        runs.push_back(p);
      }
    }
  }
  stats.runs = runs.size();

  // Each open run costs two blocks (current and read-ahead).
  const std::uint64_t fan_in = std::max<std::uint64_t>(
      2, cfg.memory_budget / 2 / (2 * kMergeBlock));
  while (runs.size() > fan_in) {
    std::vector<fs::path> next;
    for (std::size_t i = 0; i < runs.size(); i += fan_in) {
      const std::size_t end = std::min<std::size_t>(runs.size(), i + fan_in);
      std::vector<fs::path> group(runs.begin() + static_cast<std::ptrdiff_t>(i),
                                  runs.begin() + static_cast<std::ptrdiff_t>(end));
      const fs::path p = run_path(run_id++);
      merge_runs(group, p, o, io);
      for (const auto& g : group) fs::remove(g);
      next.push_back(p);
    }
    runs = std::move(next);
    ++stats.merge_passes;
  }
  stats.output_triples = merge_runs(runs, output, o, io);
  ++stats.merge_passes;
  for (const auto& r : runs) fs::remove(r);
  return stats;
}

}  // namespace kgs
