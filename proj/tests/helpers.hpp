#pragma once

#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "histcheck/anomaly.hpp"
#include "histcheck/check.hpp"
#include "histcheck/histio.hpp"

namespace testing {

inline histcheck::Observation history(const std::string& jsonl,
                                      histcheck::Model model = histcheck::Model::list_append) {
  std::istringstream in(jsonl);
  return histcheck::parse_history(in, model);
}

// One transaction per entry, run one after another, each on its own process.
// `end` is the completion type: "ok", "fail" or "info".
struct Step {
  std::string ops;
  std::string end = "ok";
};

inline std::string serial(const std::vector<Step>& steps) {
  std::string out;
  int index = 0;
  for (std::size_t p = 0; p < steps.size(); ++p) {
    // Invocations carry null for every read.
    auto invoke = nlohmann::json::parse(steps[p].ops);
    for (auto& op : invoke) {
      if (op[0] == "r") op[2] = nullptr;
    }
    for (const std::string type : {std::string("invoke"), steps[p].end}) {
      const std::string ops = type == "invoke" ? invoke.dump() : steps[p].ops;
      out += R"({"index": )" + std::to_string(index++) + R"(, "type": ")" + type + R"(", "process": )" +
             std::to_string(p) + R"(, "value": )" + ops + "}\n";
    }
  }
  return out;
}

inline std::string committed(const std::vector<std::string>& ops_per_txn) {
  std::vector<Step> steps;
  for (const auto& ops : ops_per_txn) steps.push_back({ops});
  return serial(steps);
}

inline std::string fixture(const std::string& name) { return std::string(HISTCHECK_FIXTURES) + "/" + name; }

inline std::size_t count(const histcheck::Report& r, histcheck::AnomalyClass c) {
  auto it = r.counts.find(c);
  return it == r.counts.end() ? 0 : it->second;
}

inline std::size_t cycle_count(const histcheck::Report& r) {
  std::size_t n = 0;
  for (const auto& a : r.anomalies) n += histcheck::is_cycle_class(a.cls);
  return n;
}

}  // namespace testing
