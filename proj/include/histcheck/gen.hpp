#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "histcheck/anomaly.hpp"
#include "histcheck/types.hpp"

namespace histcheck {

struct GenConfig {
  int key_count = 100;
  int max_writes_per_key = 100;
  int ops_min = 1;
  int ops_max = 5;
  int txn_count = 1000;
  int process_count = 10;
  double read_fraction = 0.5;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument describing the first bad field.
  void validate() const;
};

enum class SimBase { serializable, snapshot_isolation };

enum class Injector {
  g0,
  g_single,
  g2_write_skew,
  aborted_read,
  intermediate_read,
  dirty_update,
  lost_update,
};

inline constexpr Injector kAllInjectors[] = {
    Injector::g0,           Injector::g_single,          Injector::g2_write_skew, Injector::aborted_read,
    Injector::intermediate_read, Injector::dirty_update, Injector::lost_update,
};

const char* injector_name(Injector i);
std::optional<Injector> parse_injector(std::string_view name);
// The class a checker should report for histories carrying this injector.
AnomalyClass injector_target(Injector i);

const char* base_name(SimBase b);
std::optional<SimBase> parse_base(std::string_view name);

struct SimMode {
  SimBase base = SimBase::serializable;
  std::map<Injector, double> injectors;  // per committing transaction
  double info_fraction = 0.01;           // commits reported as indeterminate
  double abort_probability = 0.02;       // spontaneous aborts

  bool clean() const;
};

using TxnRequest = std::vector<MicroOp>;

// Requests over a sliding window of `key_count` live keys. A key retires
// after `max_writes_per_key` appends and is replaced by a fresh one. Append
// arguments count up per key from 1.
std::vector<TxnRequest> generate_workload(const GenConfig& cfg);

// The dependency graph and version orders the simulator actually produced.
struct GroundTruth {
  struct Edge {
    TxnId from = 0;
    TxnId to = 0;
    Label label = kWW;
    bool operator<(const Edge& o) const {
      return std::tie(from, to, label) < std::tie(o.from, o.to, o.label);
    }
    bool operator==(const Edge&) const = default;
  };
  std::vector<Edge> edges;                     // sorted
  std::map<Key, std::vector<Elem>> versions;   // installed versions per key, oldest first

  bool has_edge(TxnId from, TxnId to, Label label) const;
  bool operator==(const GroundTruth&) const = default;
};

std::string truth_json(const GroundTruth& truth);
GroundTruth parse_truth_json(const std::string& text);

struct SimResult {
  Observation obs;
  std::optional<GroundTruth> truth;  // clean serializable runs only
  int episodes = 0;                  // injected anomaly episodes completed
};

// Deterministic logical-time simulation of `cfg.process_count` clients
// submitting `requests` to a multi-version list store.
SimResult run_simdb(const std::vector<TxnRequest>& requests, const GenConfig& cfg, const SimMode& mode,
                    std::uint64_t seed);

// generate_workload followed by run_simdb with cfg.seed.
SimResult simulate(const GenConfig& cfg, const SimMode& mode);

}  // namespace histcheck
