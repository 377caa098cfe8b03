#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "histcheck/anomaly.hpp"
#include "histcheck/order.hpp"
#include "histcheck/parallel.hpp"
#include "histcheck/trace.hpp"
#include "histcheck/types.hpp"

namespace histcheck {

// What justifies a data edge. For ww, `from` and `to` are the two adjacent
// versions; for wr, `from` is the version read; for rw, `from` is the
// version read and `to` the version installed next.
struct EdgeWhy {
  Key key;
  VersionId from;
  VersionId to;
  bool operator==(const EdgeWhy&) const = default;
};

// Labeled directed graph over transaction ids 0..n-1. Each (from, to) pair is
// stored once with a label set and the first justification seen per label.
// Edges are found through the sorted adjacency lists, so the graph holds no
// per-edge heap state beyond those lists.
class Dsg {
 public:
  struct Edge {
    TxnId from = 0;
    TxnId to = 0;
    LabelSet labels = 0;
  };

  explicit Dsg(std::size_t nodes = 0) : out_(nodes), out_edge_(nodes) {}

  std::size_t node_count() const { return out_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  void reserve(std::size_t edges) {
    edges_.reserve(edges);
    why_.reserve(edges);
  }

  // Self-edges are dropped. Returns false when nothing changed.
  bool add_edge(TxnId from, TxnId to, Label label, std::optional<EdgeWhy> why = std::nullopt);

  LabelSet labels(TxnId from, TxnId to) const;
  const EdgeWhy* why(TxnId from, TxnId to, Label label) const;

  // Outgoing (target, labels) pairs sorted by target.
  const std::vector<std::pair<TxnId, LabelSet>>& out(TxnId from) const;
  const std::vector<Edge>& edges() const { return edges_; }

 private:
  static constexpr std::uint32_t kNone = UINT32_MAX;
  struct Why {
    std::uint32_t next;
    Label label;
    EdgeWhy why;
  };

  std::uint32_t find(TxnId from, TxnId to) const;

  std::vector<Edge> edges_;
  std::vector<std::uint32_t> why_head_;  // per edge, into why_
  std::vector<Why> why_;
  // Adjacency sorted by target; out_edge_ holds the matching edge indices.
  std::vector<std::vector<std::pair<TxnId, LabelSet>>> out_;
  std::vector<std::vector<std::uint32_t>> out_edge_;
};

// ww, wr and rw edges from list-append chains.
Dsg build_idsg(const Observation& obs, const ChainMap& chains, Exec exec = Exec::serial);

// ww, wr and rw edges from register partial orders.
Dsg build_idsg(const Observation& obs, const RegisterOrders& orders);

// Adds the edges of each order whose label is in `enabled`.
void merge_txn_orders(Dsg& g, const std::vector<TxnOrder>& orders, LabelSet enabled);

// Components with more than one node of the subgraph restricted to `filter`.
// Each component is sorted; components are ordered by their lowest node.
std::vector<std::vector<TxnId>> strongly_connected_components(const Dsg& g, LabelSet filter);

// Witnesses for one cycle class, using data labels plus `order_labels`.
// At most one witness per component.
std::vector<CycleWitness> find_anomaly_cycles(const Dsg& g, AnomalyClass cls, LabelSet order_labels,
                                              Exec exec = Exec::serial);

// All requested cycle classes. Data-only cycles are searched first; cycles
// needing process or realtime edges are then reported for components that
// no data-only witness touched.
std::vector<CycleWitness> find_cycles(const Dsg& g, const std::set<AnomalyClass>& classes, LabelSet order_labels,
                                      Exec exec = Exec::serial);

// Let/Then text naming the cycle's transactions T1..Tn in cycle order.
std::string explain(const CycleWitness& w, const Dsg& g, const Observation& obs);

// Graphviz rendering. When `only` is non-empty, restricted to those nodes.
std::string to_dot(const Dsg& g, const std::vector<TxnId>& only = {});

}  // namespace histcheck
