#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "histcheck/check.hpp"
#include "histcheck/gen.hpp"

namespace histcheck {

struct FuzzConfig {
  int rounds = 100;
  GenConfig gen;                 // gen.seed is ignored; each round derives its own
  SimMode mode;
  Consistency expect = Consistency::strict_serializable;
  std::uint64_t seed = 0;
  std::string failure_path = "fuzz-failure.jsonl";  // empty: do not write
  Exec exec = Exec::parallel;
};

// Per-round seed, a splitmix64 step of the base seed and round number.
std::uint64_t round_seed(std::uint64_t base, int round);

// Problems found in one simulated history: reported anomalies, IDSG edges
// absent from the ground truth, and chains that disagree with it.
std::vector<std::string> check_round(const SimResult& sim, Consistency expect);

struct FuzzResult {
  int rounds = 0;
  std::optional<int> failing_round;  // lowest failing round
  std::uint64_t failing_seed = 0;
  std::vector<std::string> problems;
  std::string history_path;          // where the failing history was written
};

FuzzResult run_fuzz(const FuzzConfig& cfg);

}  // namespace histcheck
