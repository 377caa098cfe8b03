#include "histcheck/gen.hpp"

#include <algorithm>
#include <deque>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace histcheck {

void GenConfig::validate() const {
  if (key_count <= 0) throw std::invalid_argument("key count must be positive");
  if (max_writes_per_key <= 0) throw std::invalid_argument("max writes per key must be positive");
  if (ops_min <= 0 || ops_max < ops_min) throw std::invalid_argument("ops range must satisfy 1 <= min <= max");
  if (txn_count < 0) throw std::invalid_argument("transaction count must not be negative");
  if (process_count <= 0) throw std::invalid_argument("process count must be positive");
  if (!(read_fraction >= 0.0 && read_fraction <= 1.0)) throw std::invalid_argument("read fraction must lie in [0, 1]");
}

const char* injector_name(Injector i) {
  switch (i) {
    case Injector::g0: return "g0";
    case Injector::g_single: return "g-single";
    case Injector::g2_write_skew: return "g2-write-skew";
    case Injector::aborted_read: return "aborted-read";
    case Injector::intermediate_read: return "intermediate-read";
    case Injector::dirty_update: return "dirty-update";
    case Injector::lost_update: return "lost-update";
  }
  return "?";
}

std::optional<Injector> parse_injector(std::string_view name) {
  for (Injector i : kAllInjectors) {
    if (name == injector_name(i)) return i;
  }
  return std::nullopt;
}

AnomalyClass injector_target(Injector i) {
  switch (i) {
    case Injector::g0: return AnomalyClass::G0;
    case Injector::g_single: return AnomalyClass::G_single;
    case Injector::g2_write_skew: return AnomalyClass::G2;
    case Injector::aborted_read: return AnomalyClass::G1a;
    case Injector::intermediate_read: return AnomalyClass::G1b;
    case Injector::dirty_update: return AnomalyClass::dirty_update;
    case Injector::lost_update: return AnomalyClass::inconsistent_observation;
  }
  return AnomalyClass::G2;
}

const char* base_name(SimBase b) { return b == SimBase::serializable ? "serializable" : "snapshot-isolation"; }

std::optional<SimBase> parse_base(std::string_view name) {
  if (name == "serializable") return SimBase::serializable;
  if (name == "snapshot-isolation" || name == "si") return SimBase::snapshot_isolation;
  return std::nullopt;
}

bool SimMode::clean() const {
  return std::all_of(injectors.begin(), injectors.end(), [](const auto& kv) { return kv.second <= 0.0; });
}

std::vector<TxnRequest> generate_workload(const GenConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> op_count(cfg.ops_min, cfg.ops_max);
  std::uniform_int_distribution<int> slot(0, cfg.key_count - 1);
  std::bernoulli_distribution is_read(cfg.read_fraction);

  std::vector<std::int64_t> window(static_cast<std::size_t>(cfg.key_count));
  for (int i = 0; i < cfg.key_count; ++i) window[static_cast<std::size_t>(i)] = i;
  std::int64_t next_key = cfg.key_count;
  std::unordered_map<std::int64_t, Elem> appends;

  std::vector<TxnRequest> out;
  out.reserve(static_cast<std::size_t>(cfg.txn_count));
  for (int t = 0; t < cfg.txn_count; ++t) {
    TxnRequest req;
    const int n = op_count(rng);
    for (int i = 0; i < n; ++i) {
      auto& k = window[static_cast<std::size_t>(slot(rng))];
      if (is_read(rng)) {
        req.push_back(MicroOp::read(k));
        continue;
      }
      Elem& count = appends[k];
      req.push_back(MicroOp::append(k, ++count));
      if (count >= cfg.max_writes_per_key) {
        appends.erase(k);
        k = next_key++;
      }
    }
    out.push_back(std::move(req));
  }
  return out;
}

bool GroundTruth::has_edge(TxnId from, TxnId to, Label label) const {
  return std::binary_search(edges.begin(), edges.end(), Edge{from, to, label});
}

std::string truth_json(const GroundTruth& truth) {
  nlohmann::ordered_json j;
  auto& edges = j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : truth.edges) {
    edges.push_back({{"from", e.from}, {"to", e.to}, {"label", label_name(e.label)}});
  }
  auto& orders = j["version_orders"] = nlohmann::ordered_json::array();
  for (const auto& [k, vs] : truth.versions) {
    nlohmann::ordered_json entry;
    if (const auto* i = std::get_if<std::int64_t>(&k)) {
      entry["key"] = *i;
    } else {
      entry["key"] = std::get<std::string>(k);
    }
    entry["versions"] = vs;
    orders.push_back(std::move(entry));
  }
  return j.dump() + "\n";
}

GroundTruth parse_truth_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  GroundTruth t;
  for (const auto& e : j.at("edges")) {
    const auto label = e.at("label").get<std::string>();
    Label l = label == "ww" ? kWW : label == "wr" ? kWR : label == "rw" ? kRW : throw std::invalid_argument(label);
    t.edges.push_back({e.at("from").get<TxnId>(), e.at("to").get<TxnId>(), l});
  }
  std::sort(t.edges.begin(), t.edges.end());
  for (const auto& o : j.at("version_orders")) {
    Key k = o.at("key").is_string() ? Key{o.at("key").get<std::string>()} : Key{o.at("key").get<std::int64_t>()};
    t.versions[k] = o.at("versions").get<std::vector<Elem>>();
  }
  return t;
}

namespace {

constexpr std::int64_t kEpisodeKeyBase = 1'000'000'000;

struct Entry {
  Elem elem;
  std::int64_t ts;
};

// One scripted anomaly spread over consecutive committing transactions.
struct Episode {
  Injector kind;
  int stage = 0;
  Key a;
  Key b;
  std::set<Key> first_keys;  // keys of the stage-0 transaction (write skew)
};

int stage_count(Injector k) {
  switch (k) {
    case Injector::aborted_read:
    case Injector::intermediate_read: return 2;
    default: return 3;
  }
}

bool stage_aborts(Injector k, int stage) {
  return stage == 0 && (k == Injector::aborted_read || k == Injector::dirty_update);
}

std::vector<MicroOp> stage_ops(const Episode& ep) {
  using V = std::vector<Elem>;
  const Key& a = ep.a;
  const Key& b = ep.b;
  switch (ep.kind) {
    case Injector::aborted_read:
      return ep.stage == 0 ? std::vector{MicroOp::append(a, 1)} : std::vector{MicroOp::read(a, V{1})};
    case Injector::intermediate_read:
      return ep.stage == 0 ? std::vector{MicroOp::append(a, 1), MicroOp::append(a, 2)}
                           : std::vector{MicroOp::read(a, V{1})};
    case Injector::dirty_update:
      if (ep.stage == 0) return {MicroOp::append(a, 1)};
      if (ep.stage == 1) return {MicroOp::append(a, 2)};
      return {MicroOp::read(a, V{1, 2})};
    case Injector::lost_update:
      if (ep.stage == 0) return {MicroOp::append(a, 1), MicroOp::read(a, V{1})};
      if (ep.stage == 1) return {MicroOp::append(a, 2)};
      return {MicroOp::read(a, V{2})};
    case Injector::g0:
      if (ep.stage == 0) return {MicroOp::append(a, 1), MicroOp::append(b, 1)};
      if (ep.stage == 1) return {MicroOp::append(a, 2), MicroOp::append(b, 2)};
      return {MicroOp::read(a, V{1, 2}), MicroOp::read(b, V{2, 1})};
    case Injector::g_single:
      if (ep.stage == 0) return {MicroOp::append(a, 1), MicroOp::append(b, 1)};
      if (ep.stage == 1) return {MicroOp::read(a, V{1}), MicroOp::read(b, V{})};
      return {MicroOp::read(b, V{1})};
    case Injector::g2_write_skew:
      if (ep.stage == 0) return {MicroOp::read(a, V{}), MicroOp::append(b, 1)};
      if (ep.stage == 1) return {MicroOp::read(b, V{}), MicroOp::append(a, 1)};
      return {MicroOp::read(a, V{1}), MicroOp::read(b, V{1})};
  }
  return {};
}

std::set<Key> keys_of(const std::vector<MicroOp>& ops) {
  std::set<Key> ks;
  for (const auto& op : ops) ks.insert(op.key);
  return ks;
}

struct Open {
  TxnId id;
  std::int64_t snapshot;
};

class Simulator {
 public:
  Simulator(const GenConfig& cfg, const SimMode& mode, std::uint64_t seed)
      : cfg_(cfg), mode_(mode), rng_(seed ^ 0x9e3779b97f4a7c15ULL), track_truth_(mode.clean() && mode.base == SimBase::serializable) {
    if (track_truth_) truth_.emplace();
  }

  SimResult run(const std::vector<TxnRequest>& requests) {
    const int procs = cfg_.process_count;
    std::vector<std::optional<Open>> open(static_cast<std::size_t>(procs));
    std::vector<std::int64_t> process_of(static_cast<std::size_t>(procs));
    for (int p = 0; p < procs; ++p) process_of[static_cast<std::size_t>(p)] = p;
    std::uniform_int_distribution<int> pick(0, procs - 1);
    std::size_t next = 0;
    int busy = 0;

    while (next < requests.size() || busy > 0) {
      auto p = static_cast<std::size_t>(pick(rng_));
      if (!open[p] && next == requests.size()) continue;
      if (!open[p]) {
        ObservedTransaction t;
        t.id = static_cast<TxnId>(obs_.txns.size());
        t.process = process_of[p];
        t.ops = requests[next++];
        t.invoke_index = index_++;
        open[p] = Open{t.id, clock_};
        obs_.txns.push_back(std::move(t));
        ++busy;
      } else {
        const bool crashed = complete(*open[p]);
        // Like a client that timed out, the slot continues as a fresh process.
        if (crashed) process_of[p] += procs;
        open[p].reset();
        --busy;
      }
    }
    obs_.max_index = index_ - 1;
    SimResult out;
    out.obs = std::move(obs_);
    out.episodes = episodes_done_;
    if (truth_) {
      finish_truth();
      out.truth = std::move(truth_);
    }
    return out;
  }

 private:
  std::vector<Elem> visible(std::int64_t key, std::optional<std::int64_t> snapshot) const {
    std::vector<Elem> out;
    auto it = store_.find(key);
    if (it == store_.end()) return out;
    for (const Entry& e : it->second) {
      if (snapshot && e.ts > *snapshot) break;
      out.push_back(e.elem);
    }
    return out;
  }

  // Returns true when the completion was reported as indeterminate.
  bool complete(const Open& o) {
    ObservedTransaction& t = obs_.txns[static_cast<std::size_t>(o.id)];
    const bool si = mode_.base == SimBase::snapshot_isolation;
    const std::optional<std::int64_t> snapshot = si ? std::optional{o.snapshot} : std::nullopt;

    std::unordered_map<std::int64_t, std::vector<Elem>> local;
    for (MicroOp& op : t.ops) {
      const auto k = std::get<std::int64_t>(op.key);
      auto it = local.find(k);
      if (it == local.end()) it = local.emplace(k, visible(k, snapshot)).first;
      if (op.kind == OpKind::append) {
        it->second.push_back(*op.arg);
      } else {
        op.observed = it->second;
      }
    }

    bool commit = true;
    if (si) {
      for (const MicroOp& op : t.ops) {
        if (op.kind != OpKind::append) continue;
        auto it = store_.find(std::get<std::int64_t>(op.key));
        if (it != store_.end() && !it->second.empty() && it->second.back().ts > o.snapshot) commit = false;
      }
    }
    if (commit && std::bernoulli_distribution(mode_.abort_probability)(rng_)) commit = false;

    bool participant = false;
    if (commit) {
      const auto role = assign_role(t);
      participant = role.participant;
      if (role.abort) commit = false;
    }

    bool info = false;
    if (commit) {
      ++clock_;
      if (truth_) record_truth(t);
      for (const MicroOp& op : t.ops) {
        if (op.kind != OpKind::append) continue;
        if (const auto* k = std::get_if<std::int64_t>(&op.key); k && *k < kEpisodeKeyBase) {
          store_[*k].push_back(Entry{*op.arg, clock_});
        }
      }
      info = !participant && std::bernoulli_distribution(mode_.info_fraction)(rng_);
      t.status = info ? Status::indeterminate : Status::committed;
    } else {
      t.status = Status::aborted;
    }
    if (!t.committed()) {
      for (MicroOp& op : t.ops) op.observed = Unknown{};
    }
    t.complete_index = index_++;
    return info;
  }

  struct Role {
    bool participant = false;
    bool abort = false;
  };

  Role assign_role(ObservedTransaction& t) {
    Role role;
    const auto own_keys = keys_of(t.ops);
    for (auto it = active_.begin(); it != active_.end();) {
      Episode& ep = *it;
      if (role.participant) {
        // Write skew needs its second transaction to commit right after the first.
        it = ep.kind == Injector::g2_write_skew && ep.stage == 1 ? active_.erase(it) : std::next(it);
        continue;
      }
      if (ep.kind == Injector::g2_write_skew && ep.stage == 1) {
        const bool overlap = std::any_of(own_keys.begin(), own_keys.end(), [&](const Key& k) { return ep.first_keys.count(k) > 0; });
        if (overlap) {
          it = active_.erase(it);
          continue;
        }
      }
      apply_stage(t, ep, role);
      if (ep.stage == stage_count(ep.kind)) {
        ++episodes_done_;
        it = active_.erase(it);
      } else {
        ++it;
      }
    }
    if (role.participant) return role;
    for (const auto& [kind, p] : mode_.injectors) {
      if (p <= 0.0 || !std::bernoulli_distribution(p)(rng_)) continue;
      Episode ep{kind, 0, Key{next_episode_key_++}, Key{next_episode_key_++}, own_keys};
      apply_stage(t, ep, role);
      active_.push_back(std::move(ep));
      break;
    }
    return role;
  }

  void apply_stage(ObservedTransaction& t, Episode& ep, Role& role) {
    for (auto& op : stage_ops(ep)) t.ops.push_back(std::move(op));
    role.participant = true;
    role.abort = stage_aborts(ep.kind, ep.stage);
    ++ep.stage;
  }

  void record_truth(const ObservedTransaction& t) {
    std::set<std::int64_t> written;
    for (const MicroOp& op : t.ops) {
      const auto k = std::get<std::int64_t>(op.key);
      if (op.kind == OpKind::append) {
        written.insert(k);
        continue;
      }
      if (written.count(k) || !pure_read_seen_.insert({t.id, k}).second) continue;
      const auto& inst = installed_[k];
      if (!inst.empty() && inst.back().second != t.id) truth_->edges.push_back({inst.back().second, t.id, kWR});
      pending_rw_.push_back({t.id, k, inst.size()});
    }
    for (std::int64_t k : written) {
      Elem last = 0;
      for (const MicroOp& op : t.ops) {
        if (op.kind == OpKind::append && std::get<std::int64_t>(op.key) == k) last = *op.arg;
      }
      auto& inst = installed_[k];
      if (!inst.empty()) truth_->edges.push_back({inst.back().second, t.id, kWW});
      inst.emplace_back(last, t.id);
    }
  }

  void finish_truth() {
    for (const auto& r : pending_rw_) {
      const auto& inst = installed_[r.key];
      if (r.position < inst.size() && inst[r.position].second != r.reader) {
        truth_->edges.push_back({r.reader, inst[r.position].second, kRW});
      }
    }
    std::sort(truth_->edges.begin(), truth_->edges.end());
    truth_->edges.erase(std::unique(truth_->edges.begin(), truth_->edges.end()), truth_->edges.end());
    for (const auto& [k, inst] : installed_) {
      auto& vs = truth_->versions[Key{k}];
      for (const auto& [e, w] : inst) vs.push_back(e);
    }
  }

  struct PendingRw {
    TxnId reader;
    std::int64_t key;
    std::size_t position;  // index of the version installed after the one read
  };

  const GenConfig& cfg_;
  const SimMode& mode_;
  std::mt19937_64 rng_;
  bool track_truth_;
  Observation obs_;
  std::int64_t index_ = 0;
  std::int64_t clock_ = 0;
  std::unordered_map<std::int64_t, std::vector<Entry>> store_;
  std::deque<Episode> active_;
  std::int64_t next_episode_key_ = kEpisodeKeyBase;
  int episodes_done_ = 0;
  std::optional<GroundTruth> truth_;
  std::map<std::int64_t, std::vector<std::pair<Elem, TxnId>>> installed_;
  std::set<std::pair<TxnId, std::int64_t>> pure_read_seen_;
  std::vector<PendingRw> pending_rw_;
};

}  // namespace

SimResult run_simdb(const std::vector<TxnRequest>& requests, const GenConfig& cfg, const SimMode& mode,
                    std::uint64_t seed) {
  cfg.validate();
  return Simulator(cfg, mode, seed).run(requests);
}

SimResult simulate(const GenConfig& cfg, const SimMode& mode) {
  return run_simdb(generate_workload(cfg), cfg, mode, cfg.seed);
}

}  // namespace histcheck
