#include "histcheck/histio.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace histcheck {

using nlohmann::json;

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

const char* event_type_name(EventType t) {
  switch (t) {
    case EventType::invoke: return "invoke";
    case EventType::ok: return "ok";
    case EventType::fail: return "fail";
    case EventType::info: return "info";
  }
  return "?";
}

namespace {

EventType parse_type(const std::string& s, std::size_t line) {
  if (s == "invoke") return EventType::invoke;
  if (s == "ok") return EventType::ok;
  if (s == "fail") return EventType::fail;
  if (s == "info") return EventType::info;
  throw ParseError(line, "unknown event type \"" + s + "\"");
}

Key parse_key(const json& j, std::size_t line) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_string()) return j.get<std::string>();
  throw ParseError(line, "key must be an integer or string");
}

Elem parse_elem(const json& j, std::size_t line) {
  if (!j.is_number_integer()) throw ParseError(line, "expected integer element, got " + j.dump());
  return j.get<Elem>();
}

MicroOp parse_op(const json& j, Model model, bool completed, std::size_t line) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_string()) {
    throw ParseError(line, "micro-op must be [op, key, value], got " + j.dump());
  }
  const std::string f = j[0].get<std::string>();
  MicroOp op;
  op.key = parse_key(j[1], line);
  const json& v = j[2];
  if (model == Model::list_append) {
    if (f == "append") {
      op.kind = OpKind::append;
      op.arg = parse_elem(v, line);
    } else if (f == "r") {
      op.kind = OpKind::read;
      if (completed) {
        if (v.is_null()) throw ParseError(line, "ok read of " + key_string(op.key) + " has no observed value");
        if (!v.is_array()) throw ParseError(line, "list read must observe an array, got " + v.dump());
        std::vector<Elem> seen;
        seen.reserve(v.size());
        for (const json& e : v) seen.push_back(parse_elem(e, line));
        op.observed = std::move(seen);
      } else if (!v.is_null()) {
        throw ParseError(line, "invocation read must carry null");
      }
    } else {
      throw ParseError(line, "unknown list-append op \"" + f + "\"");
    }
  } else {
    if (f == "w") {
      op.kind = OpKind::write_register;
      op.arg = parse_elem(v, line);
    } else if (f == "r") {
      op.kind = OpKind::read_register;
      if (completed) {
        op.observed = RegisterValue{v.is_null() ? std::nullopt : std::optional<Elem>(parse_elem(v, line))};
      } else if (!v.is_null()) {
        throw ParseError(line, "invocation read must carry null");
      }
    } else {
      throw ParseError(line, "unknown register op \"" + f + "\"");
    }
  }
  return op;
}

EventRecord parse_record(const std::string& text, Model model, std::size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line, std::string("malformed record: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line, "record must be an object");
  for (const char* field : {"index", "type", "process"}) {
    if (!j.contains(field)) throw ParseError(line, std::string("missing field \"") + field + "\"");
  }
  if (!j["index"].is_number_integer()) throw ParseError(line, "index must be an integer");
  if (!j["process"].is_number_integer()) throw ParseError(line, "process must be an integer");
  if (!j["type"].is_string()) throw ParseError(line, "type must be a string");

  EventRecord ev;
  ev.line = line;
  ev.index = j["index"].get<std::int64_t>();
  ev.process = j["process"].get<std::int64_t>();
  ev.type = parse_type(j["type"].get<std::string>(), line);
  if (ev.type == EventType::invoke || ev.type == EventType::ok) {
    auto it = j.find("value");
    if (it == j.end() || !it->is_array()) throw ParseError(line, "value must be an array of micro-ops");
    ev.ops.reserve(it->size());
    for (const json& op : *it) ev.ops.push_back(parse_op(op, model, ev.type == EventType::ok, line));
  }
  return ev;
}

// The completion must describe the same micro-ops that were invoked.
void check_same_shape(const std::vector<MicroOp>& invoked, std::size_t inv_line, const EventRecord& ok) {
  if (invoked.size() != ok.ops.size()) {
    throw ParseError(ok.line, "completion has " + std::to_string(ok.ops.size()) + " ops but invocation on line " +
                                  std::to_string(inv_line) + " has " + std::to_string(invoked.size()));
  }
  for (std::size_t i = 0; i < invoked.size(); ++i) {
    const MicroOp& a = invoked[i];
    const MicroOp& b = ok.ops[i];
    if (a.kind != b.kind || a.key != b.key || a.arg != b.arg) {
      throw ParseError(ok.line, "op " + std::to_string(i) + " does not match its invocation on line " +
                                    std::to_string(inv_line));
    }
  }
}

}  // namespace

std::vector<EventRecord> parse_events(std::istream& in, Model model) {
  std::vector<EventRecord> events;
  std::unordered_map<std::int64_t, std::size_t> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    EventRecord ev = parse_record(text, model, line);
    auto [it, fresh] = seen.emplace(ev.index, line);
    if (!fresh) {
      throw ParseError(line, "duplicate event index " + std::to_string(ev.index) + " (first on line " +
                                 std::to_string(it->second) + ")");
    }
    events.push_back(std::move(ev));
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const EventRecord& a, const EventRecord& b) { return a.index < b.index; });
  return events;
}

std::vector<ObservedTransaction> pair_events(std::vector<EventRecord> events) {
  std::vector<ObservedTransaction> txns;
  std::vector<std::size_t> invoke_lines;
  std::unordered_map<std::int64_t, std::size_t> open;  // process -> txn slot

  for (EventRecord& ev : events) {
    if (ev.type == EventType::invoke) {
      if (open.count(ev.process)) {
        throw ParseError(ev.line, "process " + std::to_string(ev.process) +
                                      " invoked a transaction while another is still open");
      }
      ObservedTransaction t;
      t.id = static_cast<TxnId>(txns.size());
      t.process = ev.process;
      t.status = Status::indeterminate;
      t.ops = std::move(ev.ops);
      t.invoke_index = ev.index;
      open.emplace(ev.process, txns.size());
      txns.push_back(std::move(t));
      invoke_lines.push_back(ev.line);
      continue;
    }
    auto it = open.find(ev.process);
    if (it == open.end()) {
      throw ParseError(ev.line, std::string(event_type_name(ev.type)) + " completion on process " +
                                    std::to_string(ev.process) + " has no matching invocation");
    }
    ObservedTransaction& t = txns[it->second];
    const std::size_t inv_line = invoke_lines[it->second];
    open.erase(it);
    t.complete_index = ev.index;
    switch (ev.type) {
      case EventType::ok:
        check_same_shape(t.ops, inv_line, ev);
        t.status = Status::committed;
        t.ops = std::move(ev.ops);
        break;
      case EventType::fail: t.status = Status::aborted; break;
      default: t.status = Status::indeterminate; break;
    }
  }
  return txns;
}

Observation parse_history(std::istream& in, Model model) {
  Observation obs;
  obs.model = model;
  auto events = parse_events(in, model);
  if (!events.empty()) obs.max_index = events.back().index;
  obs.txns = pair_events(std::move(events));
  return obs;
}

Observation parse_history_file(const std::string& path, Model model) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open " + path);
  return parse_history(in, model);
}

namespace {

json key_json(const Key& k) {
  if (const auto* s = std::get_if<std::string>(&k)) return *s;
  return std::get<std::int64_t>(k);
}

json ops_json(const std::vector<MicroOp>& ops, bool with_observed) {
  json arr = json::array();
  for (const MicroOp& op : ops) {
    json third;
    if (op.arg) {
      third = *op.arg;
    } else if (with_observed) {
      if (const auto* l = op.list()) {
        third = *l;
      } else if (const auto* r = op.reg(); r && r->value) {
        third = *r->value;
      }
    }
    const char* f = op.kind == OpKind::append ? "append" : op.kind == OpKind::write_register ? "w" : "r";
    arr.push_back(json::array({f, key_json(op.key), std::move(third)}));
  }
  return arr;
}

struct OutEvent {
  std::int64_t index;
  EventType type;
  const ObservedTransaction* txn;
};

}  // namespace

void write_history(std::ostream& out, const Observation& obs) {
  std::vector<OutEvent> events;
  events.reserve(obs.txns.size() * 2);
  for (const auto& t : obs.txns) {
    events.push_back({t.invoke_index, EventType::invoke, &t});
    if (t.complete_index) {
      EventType type = t.status == Status::committed ? EventType::ok
                       : t.status == Status::aborted ? EventType::fail
                                                     : EventType::info;
      events.push_back({*t.complete_index, type, &t});
    }
  }
  std::sort(events.begin(), events.end(), [](const OutEvent& a, const OutEvent& b) { return a.index < b.index; });
  for (const OutEvent& ev : events) {
    nlohmann::ordered_json rec;
    rec["index"] = ev.index;
    rec["type"] = event_type_name(ev.type);
    rec["process"] = ev.txn->process;
    rec["value"] = ops_json(ev.txn->ops, ev.type == EventType::ok);
    out << rec.dump() << '\n';
  }
}

std::string write_history(const Observation& obs) {
  std::ostringstream os;
  write_history(os, obs);
  return os.str();
}

}  // namespace histcheck
