#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace histcheck {

using Elem = std::int64_t;
using TxnId = std::int32_t;

// Object identifier. Histories may name objects by integer or by string.
using Key = std::variant<std::int64_t, std::string>;

std::string key_string(const Key& key);

// A version of an object: nullopt is the initial version, otherwise the
// element (list-append) or value (register) that produced it.
using VersionId = std::optional<Elem>;

std::string version_string(const VersionId& v);

enum class Model { list_append, register_rw };

enum class OpKind { append, read, write_register, read_register };

enum class Status { committed, aborted, indeterminate };

struct Unknown {
  bool operator==(const Unknown&) const = default;
};

// Observed value of a register read. nullopt means the read returned the
// initial (null) version.
struct RegisterValue {
  std::optional<Elem> value;
  bool operator==(const RegisterValue&) const = default;
};

using Observed = std::variant<Unknown, std::vector<Elem>, RegisterValue>;

struct MicroOp {
  OpKind kind = OpKind::read;
  Key key;
  std::optional<Elem> arg;
  Observed observed;

  bool is_write() const { return kind == OpKind::append || kind == OpKind::write_register; }
  bool is_read() const { return !is_write(); }
  bool known() const { return !std::holds_alternative<Unknown>(observed); }
  const std::vector<Elem>* list() const { return std::get_if<std::vector<Elem>>(&observed); }
  const RegisterValue* reg() const { return std::get_if<RegisterValue>(&observed); }

  bool operator==(const MicroOp&) const = default;

  static MicroOp append(Key k, Elem v) { return {OpKind::append, std::move(k), v, Unknown{}}; }
  static MicroOp read(Key k) { return {OpKind::read, std::move(k), std::nullopt, Unknown{}}; }
  static MicroOp read(Key k, std::vector<Elem> seen) {
    return {OpKind::read, std::move(k), std::nullopt, std::move(seen)};
  }
  static MicroOp write(Key k, Elem v) {
    return {OpKind::write_register, std::move(k), v, Unknown{}};
  }
  static MicroOp read_reg(Key k) { return {OpKind::read_register, std::move(k), std::nullopt, Unknown{}}; }
  static MicroOp read_reg(Key k, std::optional<Elem> seen) {
    return {OpKind::read_register, std::move(k), std::nullopt, RegisterValue{seen}};
  }
};

struct ObservedTransaction {
  TxnId id = 0;
  std::int64_t process = 0;
  Status status = Status::indeterminate;
  std::vector<MicroOp> ops;
  std::int64_t invoke_index = 0;
  std::optional<std::int64_t> complete_index;

  bool committed() const { return status == Status::committed; }
  bool aborted() const { return status == Status::aborted; }
  bool operator==(const ObservedTransaction&) const = default;
};

struct Observation {
  std::vector<ObservedTransaction> txns;
  Model model = Model::list_append;
  std::int64_t max_index = -1;

  bool operator==(const Observation&) const = default;
};

const char* model_name(Model m);
const char* status_name(Status s);

// Renders a transaction's ops the way they appear in a history record.
std::string ops_string(const ObservedTransaction& txn);

}  // namespace histcheck
