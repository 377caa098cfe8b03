#include "histcheck/graph.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <sstream>

namespace histcheck {

bool Dsg::add_edge(TxnId from, TxnId to, Label label, std::optional<EdgeWhy> why) {
  if (from == to) return false;
  const std::size_t need = static_cast<std::size_t>(std::max(from, to)) + 1;
  if (out_.size() < need) {
    out_.resize(need);
    out_edge_.resize(need);
  }
  auto& adj = out_[static_cast<std::size_t>(from)];
  auto& adj_edge = out_edge_[static_cast<std::size_t>(from)];
  auto pos = std::lower_bound(adj.begin(), adj.end(), to,
                              [](const std::pair<TxnId, LabelSet>& p, TxnId t) { return p.first < t; });
  const auto at = pos - adj.begin();
  std::uint32_t e;
  if (pos != adj.end() && pos->first == to) {
    e = adj_edge[static_cast<std::size_t>(at)];
    if (edges_[e].labels & label) return false;
    edges_[e].labels |= label;
    pos->second = edges_[e].labels;
  } else {
    e = static_cast<std::uint32_t>(edges_.size());
    edges_.push_back(Edge{from, to, label});
    why_head_.push_back(kNone);
    adj.insert(pos, {to, label});
    adj_edge.insert(adj_edge.begin() + at, e);
  }
  if (why) {
    why_.push_back(Why{why_head_[e], label, std::move(*why)});
    why_head_[e] = static_cast<std::uint32_t>(why_.size() - 1);
  }
  return true;
}

std::uint32_t Dsg::find(TxnId from, TxnId to) const {
  const auto i = static_cast<std::size_t>(from);
  if (from < 0 || i >= out_.size()) return kNone;
  const auto& adj = out_[i];
  auto pos = std::lower_bound(adj.begin(), adj.end(), to,
                              [](const std::pair<TxnId, LabelSet>& p, TxnId t) { return p.first < t; });
  if (pos == adj.end() || pos->first != to) return kNone;
  return out_edge_[i][static_cast<std::size_t>(pos - adj.begin())];
}

LabelSet Dsg::labels(TxnId from, TxnId to) const {
  const auto e = find(from, to);
  return e == kNone ? 0 : edges_[e].labels;
}

const EdgeWhy* Dsg::why(TxnId from, TxnId to, Label label) const {
  const auto e = find(from, to);
  if (e == kNone) return nullptr;
  const EdgeWhy* first = nullptr;
  for (auto w = why_head_[e]; w != kNone; w = why_[w].next) {
    if (why_[w].label == label) first = &why_[w].why;
  }
  return first;
}

const std::vector<std::pair<TxnId, LabelSet>>& Dsg::out(TxnId from) const {
  static const std::vector<std::pair<TxnId, LabelSet>> none;
  const auto i = static_cast<std::size_t>(from);
  return i < out_.size() ? out_[i] : none;
}

namespace {

struct PendingEdge {
  TxnId from;
  TxnId to;
  Label label;
  EdgeWhy why;
};

std::vector<PendingEdge> chain_edges(const Observation& obs, const VersionChain& chain,
                                     const std::vector<ReadRef>* reads) {
  std::vector<PendingEdge> out;
  for (std::size_t i = 1; i + 1 < chain.versions.size(); ++i) {
    const auto a = chain.writer(chain.versions[i]);
    const auto b = chain.writer(chain.versions[i + 1]);
    if (a && b && *a != *b) out.push_back({*a, *b, kWW, {chain.key, chain.versions[i], chain.versions[i + 1]}});
  }
  if (!reads) return out;
  for (const ReadRef& r : *reads) {
    const auto& t = obs.txns[static_cast<std::size_t>(r.txn)];
    const auto& seen = *t.ops[static_cast<std::size_t>(r.op)].list();
    // A read after the reader's own append observes the reader's version;
    // the dependency on the prior writer is the ww edge above.
    if (r.own_writes_before != 0) continue;
    const VersionId v = seen.empty() ? VersionId{} : VersionId{seen.back()};
    const auto pos = chain.position(v);
    if (!pos) continue;
    if (const auto w = chain.writer(v); w && *w != r.txn) out.push_back({*w, r.txn, kWR, {chain.key, v, std::nullopt}});
    if (*pos + 1 < chain.versions.size()) {
      const VersionId next = chain.versions[*pos + 1];
      if (const auto w = chain.writer(next); w && *w != r.txn) out.push_back({r.txn, *w, kRW, {chain.key, v, next}});
    }
  }
  return out;
}

}  // namespace

Dsg build_idsg(const Observation& obs, const ChainMap& chains, Exec exec) {
  Dsg g(obs.txns.size());
  const auto reads = committed_reads_by_key(obs);
  std::vector<const VersionChain*> sorted;
  sorted.reserve(chains.size());
  for (const auto& [k, c] : chains) sorted.push_back(&c);
  std::sort(sorted.begin(), sorted.end(), [](const VersionChain* a, const VersionChain* b) { return a->key < b->key; });

  std::vector<std::vector<PendingEdge>> per_key(sorted.size());
  for_each_index(exec, sorted.size(), [&](std::size_t i) {
    auto it = reads.find(sorted[i]->key);
    per_key[i] = chain_edges(obs, *sorted[i], it == reads.end() ? nullptr : &it->second);
  });
  std::size_t total = 0;
  for (const auto& edges : per_key) total += edges.size();
  g.reserve(total + obs.txns.size() * 2);
  for (auto& edges : per_key) {
    for (auto& e : edges) g.add_edge(e.from, e.to, e.label, std::move(e.why));
  }
  return g;
}

Dsg build_idsg(const Observation& obs, const RegisterOrders& orders) {
  Dsg g(obs.txns.size());
  // External reads: those not preceded by the reader's own write of the key.
  std::map<Key, std::vector<std::pair<TxnId, VersionId>>> readers;
  for (const auto& t : obs.txns) {
    if (!t.committed()) continue;
    std::vector<const Key*> written;
    for (const MicroOp& op : t.ops) {
      const bool own = std::any_of(written.begin(), written.end(), [&](const Key* k) { return *k == op.key; });
      if (op.kind == OpKind::write_register) {
        if (!own) written.push_back(&op.key);
      } else if (const auto* r = op.reg(); r && !own) {
        readers[op.key].emplace_back(t.id, r->value);
      }
    }
  }

  for (const auto& [key, order] : orders.orders) {
    // Transitive reduction, so edges join adjacent comparable versions.
    std::map<VersionId, std::vector<VersionId>> succ;
    for (const VersionEdge& e : order.edges) succ[e.from].push_back(e.to);
    auto reachable_avoiding = [&](const VersionId& from, const VersionId& to) {
      std::vector<VersionId> stack;
      std::set<VersionId> seen;
      for (const VersionId& s : succ[from]) {
        if (s != to) stack.push_back(s);
      }
      while (!stack.empty()) {
        VersionId v = stack.back();
        stack.pop_back();
        if (v == to) return true;
        if (!seen.insert(v).second) continue;
        for (const VersionId& s : succ[v]) stack.push_back(s);
      }
      return false;
    };
    std::map<VersionId, std::vector<VersionId>> next;
    for (const VersionEdge& e : order.edges) {
      if (!reachable_avoiding(e.from, e.to)) next[e.from].push_back(e.to);
    }
    for (auto& [v, ns] : next) std::sort(ns.begin(), ns.end());

    auto writer = [&](const VersionId& v) -> std::optional<TxnId> {
      if (!v) return std::nullopt;
      auto it = order.writer_of.find(*v);
      if (it == order.writer_of.end()) return std::nullopt;
      return it->second;
    };
    for (const auto& [v, ns] : next) {
      for (const VersionId& n : ns) {
        const auto a = writer(v);
        const auto b = writer(n);
        if (a && b) g.add_edge(*a, *b, kWW, EdgeWhy{key, v, n});
      }
    }
    auto rit = readers.find(key);
    if (rit == readers.end()) continue;
    for (const auto& [reader, v] : rit->second) {
      if (const auto w = writer(v); w && *w != reader) g.add_edge(*w, reader, kWR, EdgeWhy{key, v, std::nullopt});
      auto nit = next.find(v);
      if (nit == next.end()) continue;
      for (const VersionId& n : nit->second) {
        if (const auto w = writer(n); w && *w != reader) g.add_edge(reader, *w, kRW, EdgeWhy{key, v, n});
      }
    }
  }
  return g;
}

void merge_txn_orders(Dsg& g, const std::vector<TxnOrder>& orders, LabelSet enabled) {
  for (const TxnOrder& o : orders) {
    if (!(o.label & enabled)) continue;
    for (const auto& [a, b] : o.edges) g.add_edge(a, b, o.label);
  }
}

std::vector<std::vector<TxnId>> strongly_connected_components(const Dsg& g, LabelSet filter) {
  const auto n = static_cast<TxnId>(g.node_count());
  std::vector<int> index(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0);
  std::vector<char> on_stack(static_cast<std::size_t>(n), 0);
  std::vector<TxnId> stack;
  std::vector<std::pair<TxnId, std::size_t>> calls;  // node, next out-edge
  std::vector<std::vector<TxnId>> out;
  int next = 0;

  for (TxnId root = 0; root < n; ++root) {
    if (index[static_cast<std::size_t>(root)] >= 0) continue;
    calls.emplace_back(root, 0);
    while (!calls.empty()) {
      auto& [v, i] = calls.back();
      const auto vi = static_cast<std::size_t>(v);
      if (i == 0 && index[vi] < 0) {
        index[vi] = low[vi] = next++;
        stack.push_back(v);
        on_stack[vi] = 1;
      }
      const auto& adj = g.out(v);
      bool descended = false;
      while (i < adj.size()) {
        const auto [w, labels] = adj[i++];
        if (!(labels & filter)) continue;
        const auto wi = static_cast<std::size_t>(w);
        if (index[wi] < 0) {
          calls.emplace_back(w, 0);
          descended = true;
          break;
        }
        if (on_stack[wi]) low[vi] = std::min(low[vi], index[wi]);
      }
      if (descended) continue;
      if (low[vi] == index[vi]) {
        std::vector<TxnId> comp;
        TxnId w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[static_cast<std::size_t>(w)] = 0;
          comp.push_back(w);
        } while (w != v);
        if (comp.size() > 1) {
          std::sort(comp.begin(), comp.end());
          out.push_back(std::move(comp));
        }
      }
      const TxnId done = v;
      calls.pop_back();
      if (!calls.empty()) {
        const auto p = static_cast<std::size_t>(calls.back().first);
        low[p] = std::min(low[p], low[static_cast<std::size_t>(done)]);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

constexpr std::array<Label, 5> kPreference{kWW, kWR, kRW, kProcess, kRealtime};

// Search budget, in edge relaxations per component. Keeps pathological
// components from dominating; the first anchor's search always completes.
constexpr std::size_t kWorkBudget = 20'000'000;
constexpr std::size_t kAllStartsLimit = 32;

// A component as a dense local graph.
struct Local {
  std::vector<TxnId> nodes;
  std::vector<std::vector<std::pair<int, LabelSet>>> adj;
};

Local make_local(const Dsg& g, const std::vector<TxnId>& comp, LabelSet filter) {
  Local l;
  l.nodes = comp;
  l.adj.resize(comp.size());
  for (std::size_t i = 0; i < comp.size(); ++i) {
    for (const auto& [to, labels] : g.out(comp[i])) {
      if (!(labels & filter)) continue;
      auto it = std::lower_bound(comp.begin(), comp.end(), to);
      if (it != comp.end() && *it == to) l.adj[i].emplace_back(static_cast<int>(it - comp.begin()), labels & filter);
    }
  }
  return l;
}

// Shortest path src -> dst of at most `max_edges` edges using `allowed`
// labels. src == dst finds a shortest cycle through src. Returns the node
// sequence without the final dst when src == dst.
std::vector<int> bfs(const Local& l, int src, int dst, LabelSet allowed, std::size_t max_edges, std::size_t& work) {
  const std::size_t n = l.nodes.size();
  std::vector<int> parent(n, -1);
  std::vector<std::size_t> depth(n, 0);
  std::vector<int> queue{src};
  parent[static_cast<std::size_t>(src)] = src;
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    const int v = queue[qi];
    const std::size_t d = depth[static_cast<std::size_t>(v)];
    if (d + 1 > max_edges) break;
    for (const auto& [w, labels] : l.adj[static_cast<std::size_t>(v)]) {
      ++work;
      if (!(labels & allowed)) continue;
      if (w == dst) {
        std::vector<int> path;
        for (int x = v; x != src; x = parent[static_cast<std::size_t>(x)]) path.push_back(x);
        path.push_back(src);
        std::reverse(path.begin(), path.end());
        if (src != dst) path.push_back(dst);
        return path;
      }
      if (parent[static_cast<std::size_t>(w)] >= 0) continue;
      parent[static_cast<std::size_t>(w)] = v;
      depth[static_cast<std::size_t>(w)] = d + 1;
      queue.push_back(w);
    }
  }
  return {};
}

LabelSet edge_labels(const Local& l, int a, int b) {
  for (const auto& [w, labels] : l.adj[static_cast<std::size_t>(a)]) {
    if (w == b) return labels;
  }
  return 0;
}

// Builds a witness from a local cycle. Edge 0 carries `anchor` when set;
// other edges take their most preferred label within `allowed`.
std::optional<CycleWitness> make_witness(const Local& l, const std::vector<int>& cycle, AnomalyClass cls,
                                         std::optional<Label> anchor, LabelSet allowed) {
  CycleWitness w;
  w.cls = cls;
  for (std::size_t i = 0; i < cycle.size(); ++i) {
    const int a = cycle[i];
    const int b = cycle[(i + 1) % cycle.size()];
    w.txns.push_back(l.nodes[static_cast<std::size_t>(a)]);
    const LabelSet labels = edge_labels(l, a, b);
    Label chosen = kWW;
    if (i == 0 && anchor) {
      chosen = *anchor;
    } else {
      for (Label p : kPreference) {
        if (labels & allowed & p) {
          chosen = p;
          break;
        }
      }
    }
    w.labels.push_back(chosen);
    w.uses_process |= chosen == kProcess;
    w.uses_realtime |= chosen == kRealtime;
  }
  if (std::none_of(w.labels.begin(), w.labels.end(), [](Label x) { return (x & kDataLabels) != 0; })) {
    return std::nullopt;
  }
  return w;
}

std::optional<CycleWitness> shortest_cycle(const Local& l, AnomalyClass cls, LabelSet allowed) {
  const std::size_t starts = l.nodes.size() <= kAllStartsLimit ? l.nodes.size() : 1;
  std::vector<int> best;
  std::size_t work = 0;
  for (std::size_t s = 0; s < starts; ++s) {
    const std::size_t limit = best.empty() ? l.nodes.size() : best.size() - 1;
    auto c = bfs(l, static_cast<int>(s), static_cast<int>(s), allowed, limit, work);
    if (!c.empty() && (best.empty() || c.size() < best.size())) best = std::move(c);
  }
  if (best.empty()) return std::nullopt;
  return make_witness(l, best, cls, std::nullopt, allowed);
}

// Shortest cycle made of one `anchor` edge a -> b and a path b -> a over
// `complete` labels.
std::optional<CycleWitness> anchored_cycle(const Local& l, AnomalyClass cls, Label anchor, LabelSet complete) {
  std::vector<int> best;
  std::size_t work = 0;
  for (std::size_t a = 0; a < l.nodes.size(); ++a) {
    for (const auto& [b, labels] : l.adj[a]) {
      if (!(labels & anchor)) continue;
      if (!best.empty() && (work > kWorkBudget || best.size() == 2)) break;
      const std::size_t limit = best.empty() ? l.nodes.size() : best.size() - 2;
      if (!best.empty() && limit == 0) break;
      auto path = bfs(l, b, static_cast<int>(a), complete, limit, work);
      if (path.empty()) continue;
      std::vector<int> cycle{static_cast<int>(a)};
      cycle.insert(cycle.end(), path.begin(), path.end() - 1);
      if (best.empty() || cycle.size() < best.size()) best = std::move(cycle);
    }
    if (!best.empty() && work > kWorkBudget) break;
  }
  if (best.empty()) return std::nullopt;
  return make_witness(l, best, cls, anchor, complete);
}

bool touches(const std::vector<TxnId>& comp, const std::vector<char>* skip) {
  if (!skip) return false;
  return std::any_of(comp.begin(), comp.end(),
                     [&](TxnId t) { return static_cast<std::size_t>(t) < skip->size() && (*skip)[static_cast<std::size_t>(t)]; });
}

std::vector<CycleWitness> search(const Dsg& g, const std::set<AnomalyClass>& classes, LabelSet order,
                                 Exec exec, const std::vector<char>* skip) {
  std::vector<CycleWitness> out;
  auto run = [&](LabelSet filter, auto&& per_component) {
    const auto comps = strongly_connected_components(g, filter);
    std::vector<std::vector<CycleWitness>> found(comps.size());
    for_each_index(exec, comps.size(), [&](std::size_t i) {
      if (touches(comps[i], skip)) return;
      found[i] = per_component(make_local(g, comps[i], filter));
    });
    for (auto& f : found) {
      for (auto& w : f) out.push_back(std::move(w));
    }
  };

  if (classes.count(AnomalyClass::G0)) {
    run(kWW | order, [&](const Local& l) {
      std::vector<CycleWitness> r;
      if (auto w = shortest_cycle(l, AnomalyClass::G0, kWW | order)) r.push_back(std::move(*w));
      return r;
    });
  }
  if (classes.count(AnomalyClass::G1c)) {
    run(kWW | kWR | order, [&](const Local& l) {
      std::vector<CycleWitness> r;
      if (auto w = anchored_cycle(l, AnomalyClass::G1c, kWR, kWW | kWR | order)) r.push_back(std::move(*w));
      return r;
    });
  }
  const bool single = classes.count(AnomalyClass::G_single) > 0;
  const bool g2 = classes.count(AnomalyClass::G2) > 0;
  if (single || g2) {
    run(kDataLabels | order, [&](const Local& l) {
      std::vector<CycleWitness> r;
      auto w = anchored_cycle(l, AnomalyClass::G_single, kRW, kWW | kWR | order);
      if (w) {
        if (single) r.push_back(std::move(*w));
      } else if (g2) {
        if (auto w2 = anchored_cycle(l, AnomalyClass::G2, kRW, kDataLabels | order)) r.push_back(std::move(*w2));
      }
      return r;
    });
  }
  return out;
}

}  // namespace

std::vector<CycleWitness> find_anomaly_cycles(const Dsg& g, AnomalyClass cls, LabelSet order_labels, Exec exec) {
  return search(g, {cls}, order_labels & kOrderLabels, exec, nullptr);
}

std::vector<CycleWitness> find_cycles(const Dsg& g, const std::set<AnomalyClass>& classes, LabelSet order_labels,
                                      Exec exec) {
  auto out = search(g, classes, 0, exec, nullptr);
  order_labels &= kOrderLabels;
  if (!order_labels) return out;
  std::vector<char> covered(g.node_count(), 0);
  for (const auto& w : out) {
    for (TxnId t : w.txns) covered[static_cast<std::size_t>(t)] = 1;
  }
  for (auto& w : search(g, classes, order_labels, exec, &covered)) {
    if (w.uses_process || w.uses_realtime) out.push_back(std::move(w));
  }
  return out;
}

namespace {

std::string because(const Dsg& g, const Observation& obs, TxnId a, TxnId b, Label label,
                    const std::string& na, const std::string& nb) {
  const bool list = obs.model == Model::list_append;
  const char* noun = list ? "append" : "write";
  const char* verb = list ? "appended" : "wrote";
  const EdgeWhy* why = g.why(a, b, label);
  std::ostringstream os;
  switch (label) {
    case kWW:
      if (why) {
        os << nb << ' ' << verb << ' ' << version_string(why->to) << " after " << na << ' ' << verb << ' '
           << version_string(why->from) << " to " << key_string(why->key);
      } else {
        os << nb << " overwrote " << na;
      }
      break;
    case kWR:
      if (why) {
        os << nb << " observed " << na << "'s " << noun << " of " << version_string(why->from) << " to key "
           << key_string(why->key);
      } else {
        os << nb << " observed a write by " << na;
      }
      break;
    case kRW:
      if (why) {
        os << na << " did not observe " << nb << "'s " << noun << " of " << version_string(why->to) << " to "
           << key_string(why->key);
      } else {
        os << na << " did not observe a write by " << nb;
      }
      break;
    case kProcess:
      os << "process " << obs.txns[static_cast<std::size_t>(a)].process << " executed " << na << " before " << nb;
      break;
    case kRealtime:
      os << na << " completed before " << nb << " began";
      break;
  }
  return os.str();
}

}  // namespace

std::string explain(const CycleWitness& w, const Dsg& g, const Observation& obs) {
  const std::size_t n = w.txns.size();
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("T" + std::to_string(i + 1));
  std::ostringstream os;
  os << "Let:\n";
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = obs.txns[static_cast<std::size_t>(w.txns[i])];
    os << "  " << names[i] << " = txn " << t.id << " {\"process\": " << t.process << ", \"value\": " << ops_string(t)
       << "}\n";
  }
  os << "\nThen:\n";
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    const std::string text = because(g, obs, w.txns[i], w.txns[j], w.labels[i], names[i], names[j]);
    if (i + 1 < n) {
      os << "  - " << names[i] << " < " << names[j] << ", because " << text << ".\n";
    } else {
      os << "  - However, " << names[i] << " < " << names[j] << ", because " << text << ": a contradiction!\n";
    }
  }
  return os.str();
}

std::string to_dot(const Dsg& g, const std::vector<TxnId>& only) {
  std::vector<char> keep(g.node_count(), only.empty() ? 1 : 0);
  for (TxnId t : only) {
    if (static_cast<std::size_t>(t) < keep.size()) keep[static_cast<std::size_t>(t)] = 1;
  }
  std::ostringstream os;
  os << "digraph idsg {\n";
  std::vector<const Dsg::Edge*> edges;
  std::vector<char> shown(g.node_count(), 0);
  for (const auto& e : g.edges()) {
    if (keep[static_cast<std::size_t>(e.from)] && keep[static_cast<std::size_t>(e.to)]) {
      edges.push_back(&e);
      shown[static_cast<std::size_t>(e.from)] = shown[static_cast<std::size_t>(e.to)] = 1;
    }
  }
  for (std::size_t v = 0; v < g.node_count(); ++v) {
    if (shown[v] || (!only.empty() && keep[v])) os << "  T" << v << ";\n";
  }
  std::sort(edges.begin(), edges.end(),
            [](const Dsg::Edge* a, const Dsg::Edge* b) { return std::pair(a->from, a->to) < std::pair(b->from, b->to); });
  for (const auto* e : edges) {
    os << "  T" << e->from << " -> T" << e->to << " [label=\"" << labels_string(e->labels) << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace histcheck
