#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "histcheck/anomaly.hpp"
#include "histcheck/graph.hpp"
#include "histcheck/order.hpp"
#include "histcheck/parallel.hpp"
#include "histcheck/types.hpp"

namespace histcheck {

enum class Consistency {
  read_uncommitted,
  read_committed,
  snapshot_isolation,
  serializable,
  strict_serializable,
};

inline constexpr Consistency kAllConsistency[] = {
    Consistency::read_uncommitted, Consistency::read_committed, Consistency::snapshot_isolation,
    Consistency::serializable,     Consistency::strict_serializable,
};

const char* consistency_name(Consistency c);
std::optional<Consistency> parse_consistency(std::string_view name);

// Anomaly classes that violate the given model.
std::set<AnomalyClass> violation_set(Consistency c);

// Transaction-order labels used in cycle search.
LabelSet order_labels_for(Consistency c, bool process_order);

struct CheckOptions {
  Model model = Model::list_append;
  Consistency consistency = Consistency::serializable;
  std::optional<std::set<AnomalyClass>> anomalies;  // intersected with the violation set
  bool linearizable_keys = false;
  bool process_order = false;
  Exec exec = Exec::serial;
};

struct StageTiming {
  std::string stage;
  double seconds = 0;
};

struct Report {
  bool valid = true;
  Model model = Model::list_append;
  Consistency consistency = Consistency::serializable;
  std::vector<Anomaly> anomalies;  // ordered by class, then by detector order
  std::map<AnomalyClass, std::size_t> counts;
  std::vector<std::string> notes;
  std::vector<StageTiming> timing;
  std::size_t txn_count = 0;
  std::size_t committed_count = 0;
  std::size_t key_count = 0;
};

// Everything the pipeline derived, for callers that need more than the report.
struct Analysis {
  Report report;
  Dsg graph;
  ChainMap chains;
  RegisterOrders registers;
};

Analysis analyze(const Observation& obs, const CheckOptions& opts);
Report check(const Observation& obs, const CheckOptions& opts);

std::string render_text(const Report& r, bool with_timing = false);
std::string render_json(const Report& r, bool with_timing = false);

}  // namespace histcheck
