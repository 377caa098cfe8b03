#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "histcheck/anomaly.hpp"
#include "histcheck/types.hpp"

namespace histcheck {

using KeyHash = std::hash<Key>;

struct KeyArg {
  Key key;
  Elem arg = 0;
  bool operator==(const KeyArg&) const = default;
};

struct KeyArgHash {
  std::size_t operator()(const KeyArg& ka) const noexcept {
    return KeyHash{}(ka.key) * 1000003u ^ std::hash<Elem>{}(ka.arg);
  }
};

// One write of an argument to a key. `final_write` is set when the
// transaction does not write the key again later.
struct WriteRef {
  TxnId txn = 0;
  int op = 0;
  bool final_write = true;
  bool operator==(const WriteRef&) const = default;
};

// Maps every (key, argument) written anywhere in an observation to the ops
// that wrote it. A pair with exactly one writer is recoverable.
class WriteIndex {
 public:
  using Map = std::unordered_map<KeyArg, std::vector<WriteRef>, KeyArgHash>;

  const std::vector<WriteRef>* find(const Key& key, Elem arg) const;
  const Map& entries() const { return by_key_arg_; }
  std::size_t size() const { return by_key_arg_.size(); }
  bool operator==(const WriteIndex&) const = default;

 private:
  friend WriteIndex build_write_index(const Observation& obs);
  Map by_key_arg_;
};

WriteIndex build_write_index(const Observation& obs);

struct RecoverResult {
  enum class Kind { found, not_found, ambiguous };
  Kind kind = Kind::not_found;
  WriteRef ref;

  bool found() const { return kind == Kind::found; }
};

RecoverResult recover_write(const WriteIndex& idx, const Key& key, Elem element);

// The longest list observed by a committed read of a key.
struct KeyTrace {
  Key key;
  std::vector<Elem> elements;
  TxnId source_txn = 0;
  int source_op = 0;
};

std::optional<KeyTrace> longest_committed_read(const Observation& obs, const Key& key);
std::unordered_map<Key, KeyTrace, KeyHash> longest_committed_reads(const Observation& obs);

// A committed read, with how many of its own transaction's writes to the
// same key precede it.
struct ReadRef {
  TxnId txn = 0;
  int op = 0;
  std::size_t own_writes_before = 0;
};

// Committed reads with concrete values, grouped by key, in (txn, op) order.
std::unordered_map<Key, std::vector<ReadRef>, KeyHash> committed_reads_by_key(const Observation& obs);

std::vector<Anomaly> check_observation_consistency(const Observation& obs);

// Elements at the head of a key's longest trace that no observed transaction
// wrote. They are treated as state written before the history began rather
// than as garbage.
std::unordered_set<Elem> unobserved_prefix(const KeyTrace& trace, const WriteIndex& idx);

std::vector<Anomaly> detect_garbage_and_duplicates(const Observation& obs, const WriteIndex& idx);

bool is_prefix(const std::vector<Elem>& prefix, const std::vector<Elem>& of);

}  // namespace histcheck
