#include "histcheck/nca.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace histcheck {

namespace {

std::string list_string(const std::vector<Elem>& xs) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? ", " : "") << xs[i];
  os << ']';
  return os.str();
}

bool ends_with(const std::vector<Elem>& xs, const std::vector<Elem>& suffix) {
  if (suffix.size() > xs.size()) return false;
  return std::equal(suffix.begin(), suffix.end(), xs.end() - static_cast<std::ptrdiff_t>(suffix.size()));
}

struct ListState {
  const Key* key;
  bool have_base = false;
  std::vector<Elem> expected;  // valid once have_base
  std::vector<Elem> own;       // appends made before any read
};

struct RegisterState {
  const Key* key;
  std::optional<Elem> value;  // nullopt: the initial version
};

std::vector<Anomaly> internal_list(const ObservedTransaction& t) {
  std::vector<Anomaly> out;
  std::vector<ListState> states;
  auto state_for = [&](const Key& k) -> ListState& {
    for (auto& s : states) {
      if (*s.key == k) return s;
    }
    states.push_back(ListState{&k, false, {}, {}});
    return states.back();
  };
  for (std::size_t i = 0; i < t.ops.size(); ++i) {
    const MicroOp& op = t.ops[i];
    ListState& s = state_for(op.key);
    if (op.kind == OpKind::append) {
      (s.have_base ? s.expected : s.own).push_back(*op.arg);
      continue;
    }
    const auto* seen = op.list();
    if (!seen) continue;
    std::string problem;
    if (s.have_base && *seen != s.expected) {
      problem = "expected " + list_string(s.expected);
    } else if (!s.have_base && !ends_with(*seen, s.own)) {
      problem = "expected a list ending in its own appends " + list_string(s.own);
    }
    if (!problem.empty()) {
      Anomaly a;
      a.cls = AnomalyClass::internal_inconsistency;
      a.key = op.key;
      a.witness = {{t.id, static_cast<int>(i)}};
      a.explanation = "T" + std::to_string(t.id) + " read key " + key_string(op.key) + " = " + list_string(*seen) +
                      ", but its own prior reads and writes " + problem + ".";
      out.push_back(std::move(a));
    }
    s.have_base = true;
    s.expected = *seen;
  }
  return out;
}

std::vector<Anomaly> internal_register(const ObservedTransaction& t) {
  std::vector<Anomaly> out;
  std::vector<RegisterState> states;
  auto find = [&](const Key& k) -> RegisterState* {
    for (auto& s : states) {
      if (*s.key == k) return &s;
    }
    return nullptr;
  };
  for (std::size_t i = 0; i < t.ops.size(); ++i) {
    const MicroOp& op = t.ops[i];
    RegisterState* s = find(op.key);
    if (op.kind == OpKind::write_register) {
      if (s) {
        s->value = op.arg;
      } else {
        states.push_back({&op.key, op.arg});
      }
      continue;
    }
    const auto* seen = op.reg();
    if (!seen) continue;
    if (s && s->value != seen->value) {
      Anomaly a;
      a.cls = AnomalyClass::internal_inconsistency;
      a.key = op.key;
      a.witness = {{t.id, static_cast<int>(i)}};
      a.explanation = "T" + std::to_string(t.id) + " read key " + key_string(op.key) + " = " +
                      version_string(seen->value) + ", but its own prior reads and writes expected " +
                      version_string(s->value) + ".";
      out.push_back(std::move(a));
    }
    if (s) {
      s->value = seen->value;
    } else {
      states.push_back({&op.key, seen->value});
    }
  }
  return out;
}

// The version a read observed once the reader's own trailing appends are
// removed; nullopt if the read does not end with them.
std::optional<std::vector<Elem>> external_version(const ObservedTransaction& t, std::size_t op_index) {
  const MicroOp& op = t.ops[op_index];
  std::vector<Elem> own;
  for (std::size_t j = 0; j < op_index; ++j) {
    if (t.ops[j].kind == OpKind::append && t.ops[j].key == op.key) own.push_back(*t.ops[j].arg);
  }
  const auto& seen = *op.list();
  if (!ends_with(seen, own)) return std::nullopt;
  return std::vector<Elem>(seen.begin(), seen.end() - static_cast<std::ptrdiff_t>(own.size()));
}

}  // namespace

std::vector<Anomaly> find_internal_inconsistencies(const Observation& obs, Exec exec) {
  std::vector<std::vector<Anomaly>> per_txn(obs.txns.size());
  for_each_index(exec, obs.txns.size(), [&](std::size_t i) {
    const auto& t = obs.txns[i];
    if (!t.committed()) return;
    per_txn[i] = obs.model == Model::list_append ? internal_list(t) : internal_register(t);
  });
  std::vector<Anomaly> out;
  for (auto& v : per_txn) {
    for (auto& a : v) out.push_back(std::move(a));
  }
  return out;
}

std::vector<Anomaly> find_aborted_reads(const Observation& obs, const WriteIndex& idx) {
  std::vector<Anomaly> out;
  if (obs.model != Model::list_append) return out;
  for (const auto& t : obs.txns) {
    if (!t.committed()) continue;
    for (std::size_t i = 0; i < t.ops.size(); ++i) {
      const auto* seen = t.ops[i].list();
      if (!seen || seen->empty()) continue;
      const RecoverResult r = recover_write(idx, t.ops[i].key, seen->back());
      if (!r.found() || !obs.txns[static_cast<std::size_t>(r.ref.txn)].aborted()) continue;
      Anomaly a;
      a.cls = AnomalyClass::G1a;
      a.key = t.ops[i].key;
      a.witness = {{r.ref.txn, r.ref.op}, {t.id, static_cast<int>(i)}};
      a.explanation = "T" + std::to_string(t.id) + " read key " + key_string(t.ops[i].key) + " = " +
                      list_string(*seen) + ", whose final element " + std::to_string(seen->back()) +
                      " was appended by T" + std::to_string(r.ref.txn) + ", which aborted.";
      out.push_back(std::move(a));
    }
  }
  return out;
}

std::vector<Anomaly> find_intermediate_reads(const Observation& obs, const WriteIndex& idx) {
  std::vector<Anomaly> out;
  if (obs.model != Model::list_append) return out;
  for (const auto& t : obs.txns) {
    if (!t.committed()) continue;
    for (std::size_t i = 0; i < t.ops.size(); ++i) {
      const auto* seen = t.ops[i].list();
      if (!seen) continue;
      std::vector<Elem> own;
      for (std::size_t j = 0; j < i; ++j) {
        if (t.ops[j].kind == OpKind::append && t.ops[j].key == t.ops[i].key) own.push_back(*t.ops[j].arg);
      }
      if (seen->size() <= own.size() || !ends_with(*seen, own)) continue;
      const Elem last = (*seen)[seen->size() - own.size() - 1];
      const RecoverResult r = recover_write(idx, t.ops[i].key, last);
      if (!r.found() || r.ref.final_write || r.ref.txn == t.id) continue;
      const auto version = external_version(t, i);
      Anomaly a;
      a.cls = AnomalyClass::G1b;
      a.key = t.ops[i].key;
      a.witness = {{r.ref.txn, r.ref.op}, {t.id, static_cast<int>(i)}};
      a.explanation = "T" + std::to_string(t.id) + " read key " + key_string(t.ops[i].key) + " = " +
                      list_string(*version) + ", but " + std::to_string(version->back()) +
                      " was not T" + std::to_string(r.ref.txn) + "'s final append to that key.";
      out.push_back(std::move(a));
    }
  }
  return out;
}

std::vector<Anomaly> find_dirty_updates(const Observation& obs, const WriteIndex& idx) {
  std::vector<Anomaly> out;
  if (obs.model != Model::list_append) return out;
  // Only keys with an aborted append can hold a dirty update.
  std::unordered_set<Key, KeyHash> tainted;
  for (const auto& t : obs.txns) {
    if (!t.aborted()) continue;
    for (const MicroOp& op : t.ops) {
      if (op.kind == OpKind::append) tainted.insert(op.key);
    }
  }
  std::unordered_set<KeyArg, KeyArgHash> reported;
  if (tainted.empty()) return out;
  // A read that is a prefix of the longest trace holds an aborted element
  // only if it extends past the trace's first one.
  const auto longest = longest_committed_reads(obs);
  std::unordered_map<Key, std::size_t, KeyHash> first_aborted;
  for (const auto& [k, tr] : longest) {
    std::size_t p = 0;
    while (p < tr.elements.size()) {
      const RecoverResult r = recover_write(idx, k, tr.elements[p]);
      if (r.found() && obs.txns[static_cast<std::size_t>(r.ref.txn)].aborted()) break;
      ++p;
    }
    first_aborted.emplace(k, p);
  }
  for (const auto& t : obs.txns) {
    if (!t.committed()) continue;
    for (std::size_t i = 0; i < t.ops.size(); ++i) {
      const MicroOp& op = t.ops[i];
      const auto* seen = op.list();
      if (!seen || seen->size() < 2 || !tainted.count(op.key)) continue;
      if (const auto& tr = longest.at(op.key);
          first_aborted.at(op.key) + 1 >= seen->size() && is_prefix(*seen, tr.elements)) {
        continue;
      }
      std::vector<RecoverResult> writers;
      writers.reserve(seen->size());
      for (Elem e : *seen) writers.push_back(recover_write(idx, op.key, e));
      auto status_of = [&](std::size_t pos) {
        return writers[pos].found() ? obs.txns[static_cast<std::size_t>(writers[pos].ref.txn)].status
                                    : Status::indeterminate;
      };
      for (std::size_t p = 0; p + 1 < seen->size(); ++p) {
        if (!writers[p].found() || status_of(p) != Status::aborted) continue;
        if (!reported.insert(KeyArg{op.key, (*seen)[p]}).second) continue;
        std::optional<std::size_t> committed_after;
        for (std::size_t q = p + 1; q < seen->size(); ++q) {
          if (writers[q].found() && status_of(q) == Status::committed) {
            committed_after = q;
            break;
          }
        }
        const WriteRef& bad = writers[p].ref;
        Anomaly a;
        a.cls = AnomalyClass::dirty_update;
        a.key = op.key;
        a.witness.push_back({bad.txn, bad.op});
        std::ostringstream os;
        os << "T" << t.id << " read key " << key_string(op.key) << " = " << list_string(*seen) << ", in which "
           << (*seen)[p] << " was appended by T" << bad.txn << ", which aborted";
        if (committed_after) {
          const WriteRef& good = writers[*committed_after].ref;
          a.witness.push_back({good.txn, good.op});
          os << ", and T" << good.txn << " committed an append of " << (*seen)[*committed_after]
             << " on top of it.";
        } else {
          os << "; the later elements come from transactions of unknown outcome, so either a dirty update "
                "or an aborted read occurred.";
        }
        a.witness.push_back({t.id, static_cast<int>(i)});
        a.explanation = os.str();
        out.push_back(std::move(a));
      }
    }
  }
  return out;
}

}  // namespace histcheck
