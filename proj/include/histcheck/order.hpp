#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "histcheck/anomaly.hpp"
#include "histcheck/parallel.hpp"
#include "histcheck/trace.hpp"
#include "histcheck/types.hpp"

namespace histcheck {

// Inferred total order over the installed versions of one list key, from
// the initial version up to the longest version read before any write.
struct VersionChain {
  Key key;
  std::vector<VersionId> versions;  // versions[0] is the initial version
  std::unordered_map<Elem, TxnId> writer_of;

  // Position of a version in the chain, if present.
  std::optional<std::size_t> position(const VersionId& v) const;
  std::optional<TxnId> writer(const VersionId& v) const;

 private:
  friend std::optional<VersionChain> infer_chain_from_reads(const Observation&, const WriteIndex&, const Key&,
                                                            const std::vector<ReadRef>&, std::string*);
  std::unordered_map<Elem, std::size_t> pos_;
};

using ChainMap = std::unordered_map<Key, VersionChain, KeyHash>;

// x_f selection plus intermediate stripping for one key. Returns nullopt when
// no committed transaction read the key before writing it, or when the chosen
// trace holds an unrecoverable element (reported through `diagnostic`).
std::optional<VersionChain> infer_list_append_chain(const Observation& obs, const WriteIndex& idx, const Key& key,
                                                    std::string* diagnostic = nullptr);

std::optional<VersionChain> infer_chain_from_reads(const Observation& obs, const WriteIndex& idx, const Key& key,
                                                   const std::vector<ReadRef>& reads, std::string* diagnostic);

struct ChainInference {
  ChainMap chains;
  std::vector<std::string> diagnostics;  // sorted for determinism
};

// Chains for every read key not in `excluded`. Keys are independent, so the
// parallel path distributes them across threads.
ChainInference infer_list_append_chains(const Observation& obs, const WriteIndex& idx,
                                        const std::unordered_set<Key, KeyHash>& excluded, Exec exec = Exec::serial);

enum class VersionRule : std::uint8_t {
  init_state = 1,
  writes_follow_reads = 2,
  per_key_linearizable = 4,
};

const char* rule_name(VersionRule r);

struct RegisterRules {
  bool init_state = true;
  bool writes_follow_reads = true;
  bool per_key_linearizable = false;
};

struct VersionEdge {
  VersionId from;
  VersionId to;
  std::uint8_t sources = 0;                     // VersionRule bitmask
  std::vector<std::pair<TxnId, TxnId>> why;     // transactions that justify it
};

// Partial order over register versions of one key.
struct PartialVersionOrder {
  Key key;
  std::vector<VersionEdge> edges;
  std::unordered_map<Elem, TxnId> writer_of;

  bool has_edge(const VersionId& a, const VersionId& b) const;
};

struct RegisterOrders {
  std::map<Key, PartialVersionOrder> orders;
  std::vector<Anomaly> anomalies;  // cyclic-version-order findings
  std::vector<std::string> notes;  // keys rejected for duplicate writes
};

RegisterOrders infer_register_order(const Observation& obs, const RegisterRules& rules);

struct TxnOrder {
  Label label = kProcess;
  std::vector<std::pair<TxnId, TxnId>> edges;
};

TxnOrder process_order(const Observation& obs);

// Transitive reduction of "T1 completed before T2 was invoked" over
// non-aborted transactions, computed in one sweep over the events.
TxnOrder realtime_order(const Observation& obs);

}  // namespace histcheck
