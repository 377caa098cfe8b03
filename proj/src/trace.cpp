#include "histcheck/trace.hpp"

#include <algorithm>
#include <sstream>
#include <utility>

namespace histcheck {

namespace {

std::string list_string(const std::vector<Elem>& xs) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? ", " : "") << xs[i];
  os << ']';
  return os.str();
}

}  // namespace

bool is_prefix(const std::vector<Elem>& prefix, const std::vector<Elem>& of) {
  if (prefix.size() > of.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (prefix[i] != of[i]) return false;
  }
  return true;
}

const std::vector<WriteRef>* WriteIndex::find(const Key& key, Elem arg) const {
  auto it = by_key_arg_.find(KeyArg{key, arg});
  return it == by_key_arg_.end() ? nullptr : &it->second;
}

WriteIndex build_write_index(const Observation& obs) {
  WriteIndex idx;
  idx.by_key_arg_.reserve(obs.txns.size() * 2);
  for (const auto& t : obs.txns) {
    // Walk backwards so the first write seen per key is the final one.
    std::vector<const Key*> written;
    for (int i = static_cast<int>(t.ops.size()) - 1; i >= 0; --i) {
      const MicroOp& op = t.ops[static_cast<std::size_t>(i)];
      if (!op.is_write()) continue;
      bool final_write = true;
      for (const Key* k : written) {
        if (*k == op.key) {
          final_write = false;
          break;
        }
      }
      if (final_write) written.push_back(&op.key);
      idx.by_key_arg_[KeyArg{op.key, *op.arg}].push_back(WriteRef{t.id, i, final_write});
    }
  }
  return idx;
}

RecoverResult recover_write(const WriteIndex& idx, const Key& key, Elem element) {
  const auto* refs = idx.find(key, element);
  if (!refs || refs->empty()) return {RecoverResult::Kind::not_found, {}};
  if (refs->size() > 1) return {RecoverResult::Kind::ambiguous, refs->front()};
  return {RecoverResult::Kind::found, refs->front()};
}

std::unordered_map<Key, KeyTrace, KeyHash> longest_committed_reads(const Observation& obs) {
  struct Best {
    const std::vector<Elem>* seen;
    TxnId txn;
    int op;
  };
  std::unordered_map<Key, Best, KeyHash> best;
  for (const auto& t : obs.txns) {
    if (!t.committed()) continue;
    for (std::size_t i = 0; i < t.ops.size(); ++i) {
      const auto* seen = t.ops[i].list();
      if (!seen) continue;
      auto [it, fresh] = best.try_emplace(t.ops[i].key, Best{seen, t.id, static_cast<int>(i)});
      // Strictly longer wins, so ties keep the lowest reader.
      if (!fresh && seen->size() > it->second.seen->size()) it->second = Best{seen, t.id, static_cast<int>(i)};
    }
  }
  std::unordered_map<Key, KeyTrace, KeyHash> out;
  out.reserve(best.size());
  for (const auto& [k, b] : best) out.emplace(k, KeyTrace{k, *b.seen, b.txn, b.op});
  return out;
}

std::optional<KeyTrace> longest_committed_read(const Observation& obs, const Key& key) {
  std::optional<KeyTrace> best;
  for (const auto& t : obs.txns) {
    if (!t.committed()) continue;
    for (std::size_t i = 0; i < t.ops.size(); ++i) {
      const auto* seen = t.ops[i].list();
      if (!seen || t.ops[i].key != key) continue;
      if (!best || seen->size() > best->elements.size()) {
        best = KeyTrace{key, *seen, t.id, static_cast<int>(i)};
      }
    }
  }
  return best;
}

std::unordered_map<Key, std::vector<ReadRef>, KeyHash> committed_reads_by_key(const Observation& obs) {
  std::unordered_map<Key, std::vector<ReadRef>, KeyHash> out;
  for (const auto& t : obs.txns) {
    if (!t.committed()) continue;
    for (std::size_t i = 0; i < t.ops.size(); ++i) {
      const MicroOp& op = t.ops[i];
      if (!op.is_read() || !op.known()) continue;
      std::size_t own = 0;
      for (std::size_t j = 0; j < i; ++j) {
        if (t.ops[j].is_write() && t.ops[j].key == op.key) ++own;
      }
      out[op.key].push_back(ReadRef{t.id, static_cast<int>(i), own});
    }
  }
  return out;
}

std::vector<Anomaly> check_observation_consistency(const Observation& obs) {
  std::vector<Anomaly> out;
  if (obs.model != Model::list_append) return out;
  const auto longest = longest_committed_reads(obs);
  for (const auto& t : obs.txns) {
    if (!t.committed()) continue;
    for (std::size_t i = 0; i < t.ops.size(); ++i) {
      const auto* seen = t.ops[i].list();
      if (!seen) continue;
      const KeyTrace& tr = longest.at(t.ops[i].key);
      if (is_prefix(*seen, tr.elements)) continue;
      Anomaly a;
      a.cls = AnomalyClass::inconsistent_observation;
      a.key = t.ops[i].key;
      a.witness = {{t.id, static_cast<int>(i)}, {tr.source_txn, tr.source_op}};
      std::ostringstream os;
      os << "T" << t.id << " read key " << key_string(t.ops[i].key) << " = " << list_string(*seen)
         << ", which is not a prefix of " << list_string(tr.elements) << " read by T" << tr.source_txn
         << "; every interpretation contains an aborted read.";
      a.explanation = os.str();
      out.push_back(std::move(a));
    }
  }
  return out;
}

std::unordered_set<Elem> unobserved_prefix(const KeyTrace& trace, const WriteIndex& idx) {
  std::unordered_set<Elem> prior;
  for (Elem e : trace.elements) {
    if (idx.find(trace.key, e)) break;
    prior.insert(e);
  }
  return prior;
}

std::vector<Anomaly> detect_garbage_and_duplicates(const Observation& obs, const WriteIndex& idx) {
  std::vector<Anomaly> out;
  if (obs.model != Model::list_append) return out;
  const auto longest = longest_committed_reads(obs);
  std::unordered_map<Key, std::unordered_set<Elem>, KeyHash> prior;
  for (const auto& [k, tr] : longest) prior.emplace(k, unobserved_prefix(tr, idx));

  // A read that is a prefix of a clean longest trace cannot contain a
  // garbage or duplicate element, so only the others need a full scan.
  std::unordered_set<Key, KeyHash> clean;
  for (const auto& [k, tr] : longest) {
    const auto& key_prior = prior.at(k);
    std::vector<Elem> sorted = tr.elements;
    std::sort(sorted.begin(), sorted.end());
    bool ok = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
    for (std::size_t i = 0; ok && i < tr.elements.size(); ++i) {
      const auto* refs = idx.find(k, tr.elements[i]);
      ok = refs ? refs->size() == 1 : key_prior.count(tr.elements[i]) > 0;
    }
    if (ok) clean.insert(k);
  }

  std::unordered_set<KeyArg, KeyArgHash> reported;  // one finding per (key, element)
  auto first_time = [&](const Key& k, Elem e) { return reported.insert(KeyArg{k, e}).second; };

  for (const auto& t : obs.txns) {
    if (!t.committed()) continue;
    for (std::size_t i = 0; i < t.ops.size(); ++i) {
      const MicroOp& op = t.ops[i];
      const auto* seen = op.list();
      if (!seen) continue;
      if (clean.count(op.key) && is_prefix(*seen, longest.at(op.key).elements)) continue;
      const auto& key_prior = prior.at(op.key);
      std::unordered_set<Elem> in_this_read;
      for (Elem e : *seen) {
        const bool repeated = !in_this_read.insert(e).second;
        const auto* refs = idx.find(op.key, e);
        if (!refs) {
          if (key_prior.count(e) || !first_time(op.key, e)) continue;
          Anomaly a;
          a.cls = AnomalyClass::garbage_read;
          a.key = op.key;
          a.witness = {{t.id, static_cast<int>(i)}};
          a.explanation = "T" + std::to_string(t.id) + " read " + std::to_string(e) + " from key " +
                          key_string(op.key) + ", but no transaction ever appended it.";
          out.push_back(std::move(a));
        } else if (repeated || refs->size() > 1) {
          if (!first_time(op.key, e)) continue;
          Anomaly a;
          a.cls = AnomalyClass::duplicate_write;
          a.key = op.key;
          a.witness = {{t.id, static_cast<int>(i)}};
          for (const WriteRef& w : *refs) a.witness.push_back({w.txn, w.op});
          std::ostringstream os;
          os << "T" << t.id << " read key " << key_string(op.key) << " = " << list_string(*seen) << ", in which "
             << e;
          if (repeated) {
            os << " appears more than once";
          } else {
            os << " was appended by " << refs->size() << " different operations";
          }
          os << '.';
          a.explanation = os.str();
          out.push_back(std::move(a));
        }
      }
    }
  }
  return out;
}

}  // namespace histcheck
