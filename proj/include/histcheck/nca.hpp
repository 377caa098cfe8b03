#pragma once

#include <vector>

#include "histcheck/anomaly.hpp"
#include "histcheck/parallel.hpp"
#include "histcheck/trace.hpp"
#include "histcheck/types.hpp"

namespace histcheck {

// Reads that contradict the transaction's own earlier reads and writes.
std::vector<Anomaly> find_internal_inconsistencies(const Observation& obs, Exec exec = Exec::serial);

// G1a: a committed read whose version (its last element) was written by an
// aborted transaction.
std::vector<Anomaly> find_aborted_reads(const Observation& obs, const WriteIndex& idx);

// G1b: a committed read whose version was written by a non-final append of
// another transaction.
std::vector<Anomaly> find_intermediate_reads(const Observation& obs, const WriteIndex& idx);

// A committed read whose trace contains an aborted element followed by a
// later element. When a committed writer follows, every interpretation has a
// dirty update; when only indeterminate writers follow, every interpretation
// has either a dirty update or an aborted read, and the finding says so.
std::vector<Anomaly> find_dirty_updates(const Observation& obs, const WriteIndex& idx);

}  // namespace histcheck
