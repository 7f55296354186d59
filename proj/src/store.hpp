#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "edge_store.hpp"
#include "node_manager.hpp"

namespace kgs {

class EdgeCursor {
 public:
  virtual ~EdgeCursor() = default;
  virtual bool next(Edge& out) = 0;
};

class VectorEdgeCursor : public EdgeCursor {
 public:
  explicit VectorEdgeCursor(std::vector<Edge> edges) : edges_(std::move(edges)) {}
  bool next(Edge& out) override {
    if (pos_ >= edges_.size()) return false;
    out = edges_[pos_++];
    return true;
  }

 private:
  std::vector<Edge> edges_;
  std::size_t pos_ = 0;
};

std::vector<Edge> drain(EdgeCursor& c);

// Rows [range) of one table, re-keyed into edges.
struct TableSlice {
  StreamId stream = StreamId::kTS;
  TermId key = 0;
  std::optional<Table> table;
  RowRange range;
};

// One database directory: six streams plus the node manager.
class Store {
 public:
  Store(const fs::path& dir, NmBackend backend, IoStats* stats);

  const fs::path& dir() const { return dir_; }
  const EdgeStore& edges() const { return *edges_; }
  const NodeManager& nm() const { return *nm_; }
  std::uint64_t edge_count() const { return edges_->edge_count(); }

  std::optional<NodeRecord> record(TermId id) const { return nm_->get(id); }
  // Table of `key` in stream `id`, located through NM.
  std::optional<Table> get_table(StreamId id, TermId key) const;

  // The rows of the stream for ordering w' that match the constants of p,
  // which must form a prefix of w'. Empty slice when nothing matches.
  TableSlice slice(const Ordering& stream_order, const TriplePattern& p) const;

  // Edges matching p in the order of stream_order (constants of p must be a
  // prefix of it). Repeated variables are filtered.
  std::unique_ptr<EdgeCursor> edg(const Ordering& stream_order,
                                  const TriplePattern& p) const;
  std::unique_ptr<EdgeCursor> scan(StreamId id) const;

  bool contains(const Edge& e) const;

 private:
  fs::path dir_;
  std::unique_ptr<EdgeStore> edges_;
  std::unique_ptr<NodeManager> nm_;
};

}  // namespace kgs
