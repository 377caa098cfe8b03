#include "histcheck/check.hpp"

#include <algorithm>
#include <chrono>
#include <iterator>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "histcheck/nca.hpp"
#include "histcheck/trace.hpp"

namespace histcheck {

const char* consistency_name(Consistency c) {
  switch (c) {
    case Consistency::read_uncommitted: return "read-uncommitted";
    case Consistency::read_committed: return "read-committed";
    case Consistency::snapshot_isolation: return "snapshot-isolation";
    case Consistency::serializable: return "serializable";
    case Consistency::strict_serializable: return "strict-serializable";
  }
  return "?";
}

std::optional<Consistency> parse_consistency(std::string_view name) {
  for (Consistency c : kAllConsistency) {
    if (name == consistency_name(c)) return c;
  }
  return std::nullopt;
}

std::set<AnomalyClass> violation_set(Consistency c) {
  using A = AnomalyClass;
  std::set<A> s{A::G0, A::garbage_read, A::duplicate_write};
  if (c == Consistency::read_uncommitted) return s;
  s.insert({A::G1a, A::G1b, A::G1c, A::dirty_update, A::internal_inconsistency, A::inconsistent_observation});
  if (c == Consistency::read_committed) return s;
  s.insert({A::G_single, A::cyclic_version_order});
  if (c == Consistency::snapshot_isolation) return s;
  s.insert(A::G2);
  return s;
}

LabelSet order_labels_for(Consistency c, bool process_order) {
  if (c == Consistency::strict_serializable) return kProcess | kRealtime;
  return process_order ? kProcess : 0;
}

namespace {

class Stopwatch {
 public:
  explicit Stopwatch(std::vector<StageTiming>& out) : out_(out), start_(std::chrono::steady_clock::now()) {}
  void lap(const char* stage) {
    const auto now = std::chrono::steady_clock::now();
    out_.push_back({stage, std::chrono::duration<double>(now - start_).count()});
    start_ = now;
  }

 private:
  std::vector<StageTiming>& out_;
  std::chrono::steady_clock::time_point start_;
};

template <typename T>
void append(std::vector<T>& to, std::vector<T> from) {
  for (auto& a : from) to.push_back(std::move(a));
}

}  // namespace

Analysis analyze(const Observation& obs, const CheckOptions& opts) {
  Analysis out;
  Report& r = out.report;
  r.model = opts.model;
  r.consistency = opts.consistency;
  r.txn_count = obs.txns.size();
  {
    std::unordered_set<Key, KeyHash> keys;
    for (const auto& t : obs.txns) {
      r.committed_count += t.committed();
      for (const auto& op : t.ops) keys.insert(op.key);
    }
    r.key_count = keys.size();
  }

  std::set<AnomalyClass> wanted = violation_set(opts.consistency);
  if (opts.anomalies) {
    std::set<AnomalyClass> both;
    std::set_intersection(wanted.begin(), wanted.end(), opts.anomalies->begin(), opts.anomalies->end(),
                          std::inserter(both, both.begin()));
    wanted = std::move(both);
  }

  Stopwatch clock(r.timing);
  std::vector<Anomaly> found;
  const WriteIndex idx = build_write_index(obs);
  clock.lap("write-index");

  std::unordered_set<Key, KeyHash> excluded;
  if (opts.model == Model::list_append) {
    auto inconsistent = check_observation_consistency(obs);
    auto bad = detect_garbage_and_duplicates(obs, idx);
    for (const auto* v : {&inconsistent, &bad}) {
      for (const auto& a : *v) excluded.insert(*a.key);
    }
    append(found, std::move(inconsistent));
    append(found, std::move(bad));
    clock.lap("traces");
  }

  append(found, find_internal_inconsistencies(obs, opts.exec));
  if (opts.model == Model::list_append) {
    append(found, find_aborted_reads(obs, idx));
    append(found, find_intermediate_reads(obs, idx));
    append(found, find_dirty_updates(obs, idx));
  } else {
    r.notes.push_back("register model: G1a, G1b and dirty-update detection are list-append only and were skipped");
  }
  clock.lap("non-cycle");

  if (opts.model == Model::list_append) {
    auto inferred = infer_list_append_chains(obs, idx, excluded, opts.exec);
    out.chains = std::move(inferred.chains);
    append(r.notes, std::move(inferred.diagnostics));
  } else {
    RegisterRules rules;
    rules.per_key_linearizable = opts.linearizable_keys;
    out.registers = infer_register_order(obs, rules);
    append(found, out.registers.anomalies);
    for (const auto& n : out.registers.notes) r.notes.push_back(n);
  }
  clock.lap("version-order");

  const LabelSet order = order_labels_for(opts.consistency, opts.process_order);
  std::vector<TxnOrder> orders;
  if (order & kProcess) orders.push_back(process_order(obs));
  if (order & kRealtime) orders.push_back(realtime_order(obs));
  clock.lap("txn-order");

  out.graph = opts.model == Model::list_append ? build_idsg(obs, out.chains, opts.exec) : build_idsg(obs, out.registers);
  merge_txn_orders(out.graph, orders, order);
  clock.lap("graph");

  std::set<AnomalyClass> cycle_classes;
  for (AnomalyClass c : wanted) {
    if (is_cycle_class(c)) cycle_classes.insert(c);
  }
  for (auto& w : find_cycles(out.graph, cycle_classes, order, opts.exec)) {
    Anomaly a;
    a.cls = w.cls;
    for (TxnId t : w.txns) a.witness.push_back({t, std::nullopt});
    a.explanation = explain(w, out.graph, obs);
    a.cycle = std::move(w);
    found.push_back(std::move(a));
  }
  clock.lap("cycles");

  for (AnomalyClass c : kAllClasses) {
    if (!wanted.count(c)) continue;
    for (auto& a : found) {
      if (a.cls == c) r.anomalies.push_back(a);
    }
  }
  for (const auto& a : r.anomalies) ++r.counts[a.cls];
  r.valid = r.anomalies.empty();
  return out;
}

Report check(const Observation& obs, const CheckOptions& opts) { return analyze(obs, opts).report; }

namespace {

std::string witness_string(const Anomaly& a) {
  std::ostringstream os;
  for (std::size_t i = 0; i < a.witness.size(); ++i) {
    os << (i ? ", " : "") << 'T' << a.witness[i].txn;
    if (a.witness[i].op) os << " op " << *a.witness[i].op;
  }
  return os.str();
}

}  // namespace

std::string render_text(const Report& r, bool with_timing) {
  std::ostringstream os;
  os << "Valid: " << (r.valid ? "true" : "false") << '\n';
  os << "Consistency: " << consistency_name(r.consistency) << " (" << model_name(r.model) << ")\n";
  os << "Transactions: " << r.txn_count << " (" << r.committed_count << " committed), keys: " << r.key_count << '\n';
  if (!r.counts.empty()) {
    os << "\nAnomalies:\n";
    for (const auto& [c, n] : r.counts) os << "  " << class_name(c) << ": " << n << '\n';
  }
  std::map<AnomalyClass, std::size_t> seen;
  for (const auto& a : r.anomalies) {
    os << '\n' << a.display_name() << " #" << ++seen[a.cls] << '\n';
    if (a.cycle) {
      os << a.explanation;
    } else {
      os << "  " << a.explanation << "\n  witness: " << witness_string(a) << '\n';
    }
  }
  if (!r.notes.empty()) {
    os << "\nNotes:\n";
    for (const auto& n : r.notes) os << "  " << n << '\n';
  }
  if (with_timing) {
    os << "\nTiming:\n";
    for (const auto& t : r.timing) os << "  " << t.stage << ": " << t.seconds << " s\n";
  }
  return os.str();
}

std::string render_json(const Report& r, bool with_timing) {
  nlohmann::ordered_json j;
  j["valid"] = r.valid;
  j["consistency"] = consistency_name(r.consistency);
  j["model"] = model_name(r.model);
  j["stats"] = {{"transactions", r.txn_count}, {"committed", r.committed_count}, {"keys", r.key_count}};
  auto& counts = j["counts"] = nlohmann::ordered_json::object();
  for (const auto& [c, n] : r.counts) counts[class_name(c)] = n;
  auto& list = j["anomalies"] = nlohmann::ordered_json::array();
  for (const auto& a : r.anomalies) {
    nlohmann::ordered_json e;
    e["class"] = class_name(a.cls);
    e["name"] = a.display_name();
    if (a.key) e["key"] = key_string(*a.key);
    auto& w = e["witness"] = nlohmann::ordered_json::array();
    for (const auto& p : a.witness) {
      nlohmann::ordered_json pj{{"txn", p.txn}};
      if (p.op) pj["op"] = *p.op;
      w.push_back(std::move(pj));
    }
    if (a.cycle) {
      auto labels = nlohmann::ordered_json::array();
      for (Label l : a.cycle->labels) labels.push_back(label_name(l));
      e["cycle"] = {{"txns", a.cycle->txns}, {"labels", std::move(labels)}};
    }
    e["explanation"] = a.explanation;
    list.push_back(std::move(e));
  }
  j["notes"] = r.notes;
  if (with_timing) {
    auto& t = j["timing"] = nlohmann::ordered_json::array();
    for (const auto& s : r.timing) t.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
  }
  return j.dump(2) + "\n";
}

}  // namespace histcheck
