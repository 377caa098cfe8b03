#include "histcheck/anomaly.hpp"
#include "histcheck/types.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace histcheck {

std::string key_string(const Key& key) {
  if (const auto* i = std::get_if<std::int64_t>(&key)) return std::to_string(*i);
  return std::get<std::string>(key);
}

std::string version_string(const VersionId& v) { return v ? std::to_string(*v) : "nil"; }

const char* model_name(Model m) {
  return m == Model::list_append ? "list-append" : "register";
}

const char* status_name(Status s) {
  switch (s) {
    case Status::committed: return "committed";
    case Status::aborted: return "aborted";
    case Status::indeterminate: return "indeterminate";
  }
  return "?";
}

namespace {

void put_key(std::ostringstream& os, const Key& k) {
  if (const auto* s = std::get_if<std::string>(&k)) {
    os << '"' << *s << '"';
  } else {
    os << std::get<std::int64_t>(k);
  }
}

}  // namespace

std::string ops_string(const ObservedTransaction& txn) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < txn.ops.size(); ++i) {
    const MicroOp& op = txn.ops[i];
    if (i) os << ',';
    os << "[\"";
    switch (op.kind) {
      case OpKind::append: os << "append"; break;
      case OpKind::write_register: os << "w"; break;
      default: os << "r"; break;
    }
    os << "\",";
    put_key(os, op.key);
    os << ',';
    if (op.arg) {
      os << *op.arg;
    } else if (const auto* l = op.list()) {
      os << '[';
      for (std::size_t j = 0; j < l->size(); ++j) os << (j ? "," : "") << (*l)[j];
      os << ']';
    } else if (const auto* r = op.reg()) {
      os << version_string(r->value);
    } else {
      os << "null";
    }
    os << ']';
  }
  os << ']';
  return os.str();
}

const char* class_name(AnomalyClass c) {
  switch (c) {
    case AnomalyClass::inconsistent_observation: return "inconsistent-observation";
    case AnomalyClass::garbage_read: return "garbage-read";
    case AnomalyClass::duplicate_write: return "duplicate-write";
    case AnomalyClass::internal_inconsistency: return "internal-inconsistency";
    case AnomalyClass::G1a: return "G1a";
    case AnomalyClass::G1b: return "G1b";
    case AnomalyClass::dirty_update: return "dirty-update";
    case AnomalyClass::cyclic_version_order: return "cyclic-version-order";
    case AnomalyClass::G0: return "G0";
    case AnomalyClass::G1c: return "G1c";
    case AnomalyClass::G_single: return "G-single";
    case AnomalyClass::G2: return "G2";
  }
  return "?";
}

std::optional<AnomalyClass> parse_class(std::string_view name) {
  for (AnomalyClass c : kAllClasses) {
    if (name == class_name(c)) return c;
  }
  return std::nullopt;
}

bool is_cycle_class(AnomalyClass c) {
  return c == AnomalyClass::G0 || c == AnomalyClass::G1c || c == AnomalyClass::G_single ||
         c == AnomalyClass::G2;
}

const char* label_name(Label l) {
  switch (l) {
    case kWW: return "ww";
    case kWR: return "wr";
    case kRW: return "rw";
    case kProcess: return "process";
    case kRealtime: return "realtime";
  }
  return "?";
}

std::string labels_string(LabelSet s) {
  static constexpr std::array<Label, 5> order{kWW, kWR, kRW, kProcess, kRealtime};
  std::string out;
  for (Label l : order) {
    if (s & l) {
      if (!out.empty()) out += ',';
      out += label_name(l);
    }
  }
  return out;
}

std::string CycleWitness::display_name() const {
  std::string name = class_name(cls);
  if (uses_process) name += "-process";
  if (uses_realtime) name += "-realtime";
  return name;
}

bool satisfies_class(const CycleWitness& w) {
  if (w.txns.size() < 2 || w.txns.size() != w.labels.size()) return false;
  std::vector<TxnId> sorted = w.txns;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return false;
  std::size_t ww = 0, wr = 0, rw = 0, order = 0;
  for (Label l : w.labels) {
    switch (l) {
      case kWW: ++ww; break;
      case kWR: ++wr; break;
      case kRW: ++rw; break;
      default: ++order; break;
    }
  }
  const bool flags_ok = ((order > 0) == (w.uses_process || w.uses_realtime));
  switch (w.cls) {
    case AnomalyClass::G0: return flags_ok && rw == 0 && wr == 0 && ww > 0;
    case AnomalyClass::G1c: return flags_ok && rw == 0 && wr > 0;
    case AnomalyClass::G_single: return flags_ok && rw == 1;
    case AnomalyClass::G2: return flags_ok && rw >= 1;
    default: return false;
  }
}

std::string Anomaly::display_name() const {
  return cycle ? cycle->display_name() : std::string(class_name(cls));
}

}  // namespace histcheck
