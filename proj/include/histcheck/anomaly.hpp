#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "histcheck/types.hpp"

namespace histcheck {

enum class AnomalyClass {
  inconsistent_observation,
  garbage_read,
  duplicate_write,
  internal_inconsistency,
  G1a,
  G1b,
  dirty_update,
  cyclic_version_order,
  G0,
  G1c,
  G_single,
  G2,
};

inline constexpr AnomalyClass kAllClasses[] = {
    AnomalyClass::inconsistent_observation, AnomalyClass::garbage_read,
    AnomalyClass::duplicate_write,          AnomalyClass::internal_inconsistency,
    AnomalyClass::G1a,                      AnomalyClass::G1b,
    AnomalyClass::dirty_update,             AnomalyClass::cyclic_version_order,
    AnomalyClass::G0,                       AnomalyClass::G1c,
    AnomalyClass::G_single,                 AnomalyClass::G2,
};

const char* class_name(AnomalyClass c);
std::optional<AnomalyClass> parse_class(std::string_view name);
bool is_cycle_class(AnomalyClass c);

// Dependency labels on serialization-graph edges. A LabelSet is a bitmask.
enum Label : std::uint8_t {
  kWW = 1,
  kWR = 2,
  kRW = 4,
  kProcess = 8,
  kRealtime = 16,
};
using LabelSet = std::uint8_t;

inline constexpr LabelSet kDataLabels = kWW | kWR | kRW;
inline constexpr LabelSet kOrderLabels = kProcess | kRealtime;

const char* label_name(Label l);
std::string labels_string(LabelSet s);

struct CycleWitness {
  std::vector<TxnId> txns;    // cycle order; edge i runs txns[i] -> txns[i+1 mod n]
  std::vector<Label> labels;  // label chosen for each edge
  AnomalyClass cls = AnomalyClass::G2;
  bool uses_process = false;
  bool uses_realtime = false;

  // e.g. "G-single" or "G-single-realtime".
  std::string display_name() const;
  bool operator==(const CycleWitness&) const = default;
};

// True when the witness's label multiset satisfies its class definition.
bool satisfies_class(const CycleWitness& w);

struct Participant {
  TxnId txn = 0;
  std::optional<int> op;
  bool operator==(const Participant&) const = default;
};

struct Anomaly {
  AnomalyClass cls = AnomalyClass::G2;
  std::vector<Participant> witness;
  std::string explanation;
  std::optional<Key> key;
  std::optional<CycleWitness> cycle;

  std::string display_name() const;
  bool operator==(const Anomaly&) const = default;
};

}  // namespace histcheck
