#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "histcheck/types.hpp"

namespace histcheck {

// Raised for malformed or inconsistent history input. `line` is 1-based, or
// 0 when the problem is not tied to a single record.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class EventType { invoke, ok, fail, info };

const char* event_type_name(EventType t);

struct EventRecord {
  std::int64_t index = 0;
  EventType type = EventType::invoke;
  std::int64_t process = 0;
  std::vector<MicroOp> ops;  // empty for fail/info: their values are ignored
  std::size_t line = 0;
};

// Reads newline-delimited event records. Duplicate indexes are rejected;
// the result is sorted by index.
std::vector<EventRecord> parse_events(std::istream& in, Model model);

// Pairs each invocation with the next completion on its process. Transaction
// ids follow invocation order. Expects events sorted by index.
std::vector<ObservedTransaction> pair_events(std::vector<EventRecord> events);

Observation parse_history(std::istream& in, Model model);
Observation parse_history_file(const std::string& path, Model model);

void write_history(std::ostream& out, const Observation& obs);
std::string write_history(const Observation& obs);

}  // namespace histcheck
