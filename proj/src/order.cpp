#include "histcheck/order.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

namespace histcheck {

std::optional<std::size_t> VersionChain::position(const VersionId& v) const {
  if (!v) return std::size_t{0};
  auto it = pos_.find(*v);
  if (it == pos_.end()) return std::nullopt;
  return it->second;
}

std::optional<TxnId> VersionChain::writer(const VersionId& v) const {
  if (!v) return std::nullopt;
  auto it = writer_of.find(*v);
  if (it == writer_of.end()) return std::nullopt;
  return it->second;
}

std::optional<VersionChain> infer_chain_from_reads(const Observation& obs, const WriteIndex& idx, const Key& key,
                                                   const std::vector<ReadRef>& reads, std::string* diagnostic) {
  const std::vector<Elem>* best = nullptr;
  for (const ReadRef& r : reads) {
    if (r.own_writes_before != 0) continue;
    const auto* seen = obs.txns[static_cast<std::size_t>(r.txn)].ops[static_cast<std::size_t>(r.op)].list();
    if (seen && (!best || seen->size() > best->size())) best = seen;
  }
  if (!best) return std::nullopt;

  VersionChain chain;
  chain.key = key;
  chain.versions.push_back(std::nullopt);
  bool recovered_any = false;
  for (Elem e : *best) {
    const RecoverResult r = recover_write(idx, key, e);
    if (r.kind == RecoverResult::Kind::found) {
      recovered_any = true;
      const auto& writer = obs.txns[static_cast<std::size_t>(r.ref.txn)];
      if (!r.ref.final_write || writer.aborted()) continue;
      chain.pos_.emplace(e, chain.versions.size());
      chain.versions.push_back(e);
      chain.writer_of.emplace(e, r.ref.txn);
    } else if (r.kind == RecoverResult::Kind::not_found && !recovered_any) {
      // Written before the history began; ordered, but with no known writer.
      chain.pos_.emplace(e, chain.versions.size());
      chain.versions.push_back(e);
    } else {
      if (diagnostic) {
        *diagnostic = "key " + key_string(key) + " excluded from version inference: element " + std::to_string(e) +
                      (r.kind == RecoverResult::Kind::ambiguous ? " has several writers" : " has no writer");
      }
      return std::nullopt;
    }
  }
  return chain;
}

std::optional<VersionChain> infer_list_append_chain(const Observation& obs, const WriteIndex& idx, const Key& key,
                                                    std::string* diagnostic) {
  auto reads = committed_reads_by_key(obs);
  auto it = reads.find(key);
  if (it == reads.end()) return std::nullopt;
  return infer_chain_from_reads(obs, idx, key, it->second, diagnostic);
}

ChainInference infer_list_append_chains(const Observation& obs, const WriteIndex& idx,
                                        const std::unordered_set<Key, KeyHash>& excluded, Exec exec) {
  const auto reads = committed_reads_by_key(obs);
  std::vector<const std::pair<const Key, std::vector<ReadRef>>*> work;
  work.reserve(reads.size());
  for (const auto& entry : reads) {
    if (!excluded.count(entry.first)) work.push_back(&entry);
  }
  std::vector<std::optional<VersionChain>> results(work.size());
  std::vector<std::string> diags(work.size());
  for_each_index(exec, work.size(), [&](std::size_t i) {
    results[i] = infer_chain_from_reads(obs, idx, work[i]->first, work[i]->second, &diags[i]);
  });

  ChainInference out;
  out.chains.reserve(work.size());
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (results[i]) out.chains.emplace(work[i]->first, std::move(*results[i]));
    if (!diags[i].empty()) out.diagnostics.push_back(std::move(diags[i]));
  }
  std::sort(out.diagnostics.begin(), out.diagnostics.end());
  return out;
}

const char* rule_name(VersionRule r) {
  switch (r) {
    case VersionRule::init_state: return "init-state";
    case VersionRule::writes_follow_reads: return "writes-follow-reads";
    case VersionRule::per_key_linearizable: return "per-key-linearizable";
  }
  return "?";
}

bool PartialVersionOrder::has_edge(const VersionId& a, const VersionId& b) const {
  return std::any_of(edges.begin(), edges.end(), [&](const VersionEdge& e) { return e.from == a && e.to == b; });
}

namespace {

struct Interval {
  TxnId txn;
  std::int64_t invoke;
  std::optional<std::int64_t> complete;
};

// Transitive reduction of interval precedence (a.complete < b.invoke). One
// sweep; the frontier holds completed intervals not yet known to precede
// another completed interval.
std::vector<std::pair<TxnId, TxnId>> reduce_intervals(const std::vector<Interval>& intervals) {
  struct Event {
    std::int64_t index;
    bool is_complete;
    std::size_t slot;
  };
  std::vector<Event> events;
  events.reserve(intervals.size() * 2);
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    events.push_back({intervals[i].invoke, false, i});
    if (intervals[i].complete) events.push_back({*intervals[i].complete, true, i});
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.index != b.index ? a.index < b.index : a.is_complete < b.is_complete;
  });

  std::vector<std::vector<std::size_t>> preds(intervals.size());
  std::vector<char> in_frontier(intervals.size(), 0);
  std::vector<std::size_t> frontier;
  std::vector<std::pair<TxnId, TxnId>> edges;
  for (const Event& ev : events) {
    if (!ev.is_complete) {
      std::erase_if(frontier, [&](std::size_t s) { return !in_frontier[s]; });
      preds[ev.slot] = frontier;
      for (std::size_t p : frontier) edges.emplace_back(intervals[p].txn, intervals[ev.slot].txn);
    } else {
      for (std::size_t p : preds[ev.slot]) in_frontier[p] = 0;
      in_frontier[ev.slot] = 1;
      frontier.push_back(ev.slot);
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

using VersionNode = std::size_t;

struct VersionGraph {
  std::vector<VersionId> nodes;
  std::map<VersionId, VersionNode> ids;
  std::map<std::pair<VersionNode, VersionNode>, VersionEdge> edges;

  VersionNode node(const VersionId& v) {
    auto [it, fresh] = ids.emplace(v, nodes.size());
    if (fresh) nodes.push_back(v);
    return it->second;
  }

  void add(const VersionId& a, const VersionId& b, VersionRule rule, TxnId t1, TxnId t2) {
    if (a == b) return;
    VersionEdge& e = edges[{node(a), node(b)}];
    e.from = a;
    e.to = b;
    e.sources |= static_cast<std::uint8_t>(rule);
    if (e.why.size() < 4) e.why.emplace_back(t1, t2);
  }
};

int strength(std::uint8_t sources) {
  if (sources & static_cast<std::uint8_t>(VersionRule::init_state)) return 3;
  if (sources & static_cast<std::uint8_t>(VersionRule::writes_follow_reads)) return 2;
  return 1;
}

// Tarjan over a small adjacency list; returns component id per node.
std::vector<std::size_t> scc_ids(std::size_t n, const std::vector<std::vector<VersionNode>>& adj,
                                 std::size_t& count) {
  std::vector<std::size_t> comp(n, SIZE_MAX), index(n, SIZE_MAX), low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<VersionNode> stack;
  std::size_t next = 0;
  count = 0;
  std::function<void(VersionNode)> visit = [&](VersionNode v) {
    index[v] = low[v] = next++;
    stack.push_back(v);
    on_stack[v] = 1;
    for (VersionNode w : adj[v]) {
      if (index[w] == SIZE_MAX) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      VersionNode w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = 0;
        comp[w] = count;
      } while (w != v);
      ++count;
    }
  };
  for (VersionNode v = 0; v < n; ++v) {
    if (index[v] == SIZE_MAX) visit(v);
  }
  return comp;
}

std::string edge_reason(const VersionEdge& e) {
  std::ostringstream os;
  os << version_string(e.from) << " < " << version_string(e.to) << " (";
  bool first = true;
  for (VersionRule r : {VersionRule::init_state, VersionRule::writes_follow_reads,
                        VersionRule::per_key_linearizable}) {
    if (!(e.sources & static_cast<std::uint8_t>(r))) continue;
    os << (first ? "" : ", ") << rule_name(r);
    first = false;
  }
  const auto& [a, b] = e.why.front();
  if (e.sources == static_cast<std::uint8_t>(VersionRule::per_key_linearizable)) {
    os << ": T" << a << " finished with the key before T" << b << " began";
  } else {
    os << ": T" << a;
  }
  os << ")";
  return os.str();
}

// Reports each cyclic component, then drops its weakest edges until the
// order is acyclic.
void discard_cycles(VersionGraph& g, const Key& key, std::vector<Anomaly>& anomalies) {
  bool reported = false;
  while (true) {
    const std::size_t n = g.nodes.size();
    std::vector<std::vector<VersionNode>> adj(n);
    for (const auto& [ends, e] : g.edges) adj[ends.first].push_back(ends.second);
    std::size_t count = 0;
    const auto comp = scc_ids(n, adj, count);
    std::vector<std::size_t> size(count, 0);
    for (std::size_t c : comp) ++size[c];
    bool cyclic = false;
    for (std::size_t c = 0; c < count; ++c) cyclic |= size[c] > 1;
    if (!cyclic) return;

    if (!reported) {
      // One finding per cyclic component: walk a shortest cycle through its
      // lowest node.
      std::vector<char> done(count, 0);
      for (VersionNode start = 0; start < n; ++start) {
        const std::size_t c = comp[start];
        if (size[c] < 2 || done[c]) continue;
        done[c] = 1;
        std::vector<VersionNode> parent(n, SIZE_MAX);
        std::vector<VersionNode> queue{start};
        bool closed = false;
        VersionNode last = start;
        for (std::size_t qi = 0; qi < queue.size() && !closed; ++qi) {
          for (VersionNode w : adj[queue[qi]]) {
            if (comp[w] != c) continue;
            if (w == start) {
              last = queue[qi];
              closed = true;
              break;
            }
            if (parent[w] == SIZE_MAX) {
              parent[w] = queue[qi];
              queue.push_back(w);
            }
          }
        }
        std::vector<VersionNode> cycle{last};
        while (cycle.back() != start) cycle.push_back(parent[cycle.back()]);
        std::reverse(cycle.begin(), cycle.end());
        Anomaly a;
        a.cls = AnomalyClass::cyclic_version_order;
        a.key = key;
        std::string text = "Inferred versions of key " + key_string(key) + " form a cycle: ";
        for (std::size_t i = 0; i < cycle.size(); ++i) {
          const VersionEdge& e = g.edges.at({cycle[i], cycle[(i + 1) % cycle.size()]});
          text += (i ? "; " : "") + edge_reason(e);
          for (const auto& [t1, t2] : e.why) {
            for (TxnId t : {t1, t2}) {
              if (std::none_of(a.witness.begin(), a.witness.end(), [&](const Participant& p) { return p.txn == t; })) {
                a.witness.push_back({t, std::nullopt});
              }
            }
          }
        }
        a.explanation = text + ". These orders were discarded.";
        anomalies.push_back(std::move(a));
      }
      reported = true;
    }

    // Within each cyclic component, drop the weakest class of internal edges.
    std::vector<int> weakest(count, 4);
    for (const auto& [ends, e] : g.edges) {
      if (comp[ends.first] == comp[ends.second] && size[comp[ends.first]] > 1) {
        int& w = weakest[comp[ends.first]];
        w = std::min(w, strength(e.sources));
      }
    }
    std::erase_if(g.edges, [&](const auto& kv) {
      const auto& [ends, e] = kv;
      const std::size_t c = comp[ends.first];
      return c == comp[ends.second] && size[c] > 1 && strength(e.sources) == weakest[c];
    });
  }
}

}  // namespace

RegisterOrders infer_register_order(const Observation& obs, const RegisterRules& rules) {
  RegisterOrders out;
  if (obs.model != Model::register_rw) return out;

  std::map<Key, VersionGraph> graphs;
  std::map<Key, std::unordered_map<Elem, TxnId>> writers;
  std::map<Key, std::unordered_map<Elem, int>> write_counts;
  std::map<Key, std::vector<Interval>> accessors;  // committed transactions touching the key
  std::map<Key, std::map<TxnId, std::pair<VersionId, VersionId>>> first_last;  // per txn access values

  for (const auto& t : obs.txns) {
    for (std::size_t i = 0; i < t.ops.size(); ++i) {
      const MicroOp& op = t.ops[i];
      if (op.kind == OpKind::write_register) ++write_counts[op.key][*op.arg];
    }
    if (t.aborted()) continue;
    // Final writes of non-aborted transactions are installed-version candidates.
    for (std::size_t i = t.ops.size(); i-- > 0;) {
      const MicroOp& op = t.ops[i];
      if (op.kind != OpKind::write_register) continue;
      bool later = false;
      for (std::size_t j = i + 1; j < t.ops.size(); ++j) later |= t.ops[j].kind == OpKind::write_register && t.ops[j].key == op.key;
      if (!later) writers[op.key].emplace(*op.arg, t.id);
    }
    if (!t.committed()) continue;
    std::map<Key, std::pair<VersionId, VersionId>> access;
    std::map<Key, VersionId> read_before_write;
    std::map<Key, VersionId> final_write;
    for (const MicroOp& op : t.ops) {
      VersionId v;
      if (op.kind == OpKind::write_register) {
        v = op.arg;
        final_write[op.key] = v;
      } else if (const auto* r = op.reg()) {
        v = r->value;
        if (!final_write.count(op.key)) read_before_write[op.key] = v;
      } else {
        continue;
      }
      auto [it, fresh] = access.emplace(op.key, std::make_pair(v, v));
      if (!fresh) it->second.second = v;
    }
    for (const auto& [k, fl] : access) {
      accessors[k].push_back({t.id, t.invoke_index, t.complete_index});
      first_last[k][t.id] = fl;
    }
    if (rules.writes_follow_reads) {
      for (const auto& [k, r] : read_before_write) {
        auto w = final_write.find(k);
        if (w != final_write.end()) graphs[k].add(r, w->second, VersionRule::writes_follow_reads, t.id, t.id);
      }
    }
  }

  std::set<Key> rejected;
  for (const auto& [k, counts] : write_counts) {
    for (const auto& [v, n] : counts) {
      if (n > 1) {
        rejected.insert(k);
        out.notes.push_back("key " + key_string(k) + " rejected for version inference: value " + std::to_string(v) +
                            " written " + std::to_string(n) + " times");
        break;
      }
    }
  }

  if (rules.init_state) {
    for (const auto& [k, ws] : writers) {
      std::vector<std::pair<Elem, TxnId>> sorted(ws.begin(), ws.end());
      std::sort(sorted.begin(), sorted.end());
      for (const auto& [v, t] : sorted) graphs[k].add(std::nullopt, v, VersionRule::init_state, t, t);
    }
  }
  if (rules.per_key_linearizable) {
    for (const auto& [k, ivs] : accessors) {
      const auto& fl = first_last[k];
      for (const auto& [a, b] : reduce_intervals(ivs)) {
        graphs[k].add(fl.at(a).second, fl.at(b).first, VersionRule::per_key_linearizable, a, b);
      }
    }
  }

  for (auto& [k, g] : graphs) {
    if (rejected.count(k)) continue;
    discard_cycles(g, k, out.anomalies);
    PartialVersionOrder order;
    order.key = k;
    for (auto& [ends, e] : g.edges) order.edges.push_back(std::move(e));
    if (auto w = writers.find(k); w != writers.end()) order.writer_of = w->second;
    out.orders.emplace(k, std::move(order));
  }
  for (const auto& [k, ws] : writers) {
    if (!rejected.count(k) && !out.orders.count(k)) {
      out.orders.emplace(k, PartialVersionOrder{k, {}, ws});
    }
  }
  return out;
}

TxnOrder process_order(const Observation& obs) {
  TxnOrder order;
  order.label = kProcess;
  std::map<std::int64_t, TxnId> last;
  for (const auto& t : obs.txns) {  // ids follow invocation order
    if (t.aborted()) continue;
    auto [it, fresh] = last.emplace(t.process, t.id);
    if (!fresh) {
      order.edges.emplace_back(it->second, t.id);
      it->second = t.id;
    }
  }
  std::sort(order.edges.begin(), order.edges.end());
  return order;
}

TxnOrder realtime_order(const Observation& obs) {
  std::vector<Interval> intervals;
  intervals.reserve(obs.txns.size());
  for (const auto& t : obs.txns) {
    if (!t.aborted()) intervals.push_back({t.id, t.invoke_index, t.complete_index});
  }
  return TxnOrder{kRealtime, reduce_intervals(intervals)};
}

}  // namespace histcheck
