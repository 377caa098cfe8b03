#include "histcheck/fuzz.hpp"

#include <atomic>
#include <climits>
#include <fstream>
#include <sstream>

#include "histcheck/histio.hpp"
#include "histcheck/trace.hpp"

namespace histcheck {

std::uint64_t round_seed(std::uint64_t base, int round) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(round) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

bool prefix_of(const std::vector<Elem>& a, const std::vector<Elem>& b) { return is_prefix(a, b); }

void check_chains(const SimResult& sim, const Analysis& an, std::vector<std::string>& problems) {
  const Observation& obs = sim.obs;
  const GroundTruth& truth = *sim.truth;
  const WriteIndex idx = build_write_index(obs);

  std::map<Key, std::vector<Elem>> chain_elems;
  for (const auto& [k, chain] : an.chains) {
    auto& elems = chain_elems[k];
    for (std::size_t i = 1; i < chain.versions.size(); ++i) elems.push_back(*chain.versions[i]);
    auto it = truth.versions.find(k);
    static const std::vector<Elem> none;
    const auto& expected = it == truth.versions.end() ? none : it->second;
    if (!prefix_of(elems, expected)) {
      problems.push_back("chain of key " + key_string(k) + " is not a prefix of the installed version order");
    }
  }

  for (const auto& t : obs.txns) {
    if (!t.committed()) continue;
    for (std::size_t i = 0; i < t.ops.size(); ++i) {
      const auto* seen = t.ops[i].list();
      if (!seen) continue;
      const Key& k = t.ops[i].key;
      std::size_t own = 0;
      for (std::size_t j = 0; j < i; ++j) own += t.ops[j].kind == OpKind::append && t.ops[j].key == k;
      if (own > seen->size()) continue;
      std::vector<Elem> installed;
      for (std::size_t p = 0; p + own < seen->size(); ++p) {
        const auto r = recover_write(idx, k, (*seen)[p]);
        if (r.found() && r.ref.final_write) installed.push_back((*seen)[p]);
      }
      auto c = chain_elems.find(k);
      if (c == chain_elems.end()) {
        if (!installed.empty() && own == 0) problems.push_back("key " + key_string(k) + " was read but has no chain");
        continue;
      }
      const bool pure = own == 0;
      const bool agrees = pure ? prefix_of(installed, c->second)
                               : (prefix_of(installed, c->second) || prefix_of(c->second, installed));
      auto it = truth.versions.find(k);
      const bool true_prefix = it != truth.versions.end() ? prefix_of(installed, it->second) : installed.empty();
      if (!agrees || !true_prefix) {
        std::ostringstream os;
        os << "T" << t.id << " read of key " << key_string(k) << " disagrees with the inferred chain";
        problems.push_back(os.str());
      }
    }
  }
}

}  // namespace

std::vector<std::string> check_round(const SimResult& sim, Consistency expect) {
  std::vector<std::string> problems;
  CheckOptions opts;
  opts.consistency = expect;
  const Analysis an = analyze(sim.obs, opts);
  for (const auto& a : an.report.anomalies) problems.push_back(a.display_name() + ": " + a.explanation);
  if (!sim.truth) return problems;

  for (const auto& e : an.graph.edges()) {
    for (Label l : {kWW, kWR, kRW}) {
      if ((e.labels & l) && !sim.truth->has_edge(e.from, e.to, l)) {
        problems.push_back("IDSG edge T" + std::to_string(e.from) + " " + label_name(l) + " T" +
                           std::to_string(e.to) + " is not in the ground-truth graph");
      }
    }
  }
  check_chains(sim, an, problems);
  return problems;
}

FuzzResult run_fuzz(const FuzzConfig& cfg) {
  FuzzResult out;
  out.rounds = cfg.rounds;
  std::vector<std::vector<std::string>> problems(static_cast<std::size_t>(std::max(cfg.rounds, 0)));
  std::atomic<int> lowest{INT_MAX};

  auto round = [&](int r) {
    if (r > lowest.load()) return;
    GenConfig gen = cfg.gen;
    gen.seed = round_seed(cfg.seed, r);
    auto p = check_round(simulate(gen, cfg.mode), cfg.expect);
    if (p.empty()) return;
    problems[static_cast<std::size_t>(r)] = std::move(p);
    int cur = lowest.load();
    while (r < cur && !lowest.compare_exchange_weak(cur, r)) {
    }
  };
  if (cfg.exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int r = 0; r < cfg.rounds; ++r) round(r);
  } else {
    for (int r = 0; r < cfg.rounds; ++r) round(r);
  }

  if (lowest.load() == INT_MAX) return out;
  const int r = lowest.load();
  out.failing_round = r;
  out.failing_seed = round_seed(cfg.seed, r);
  out.problems = std::move(problems[static_cast<std::size_t>(r)]);
  if (!cfg.failure_path.empty()) {
    GenConfig gen = cfg.gen;
    gen.seed = out.failing_seed;
    const SimResult sim = simulate(gen, cfg.mode);
    std::ofstream(cfg.failure_path) << write_history(sim.obs);
    if (sim.truth) std::ofstream(cfg.failure_path + ".truth.json") << truth_json(*sim.truth);
    out.history_path = cfg.failure_path;
  }
  return out;
}

}  // namespace histcheck
