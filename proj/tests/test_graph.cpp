#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "histcheck/graph.hpp"
#include "histcheck/histio.hpp"
#include "histcheck/order.hpp"
#include "oracles.hpp"

using namespace histcheck;
using testing::committed;
using testing::fixture;
using testing::history;
using testing::serial;

namespace {

struct Built {
  Observation obs;
  Dsg g;
};

Built build(Observation obs) {
  const auto idx = build_write_index(obs);
  const auto chains = infer_list_append_chains(obs, idx, {}, Exec::serial);
  Dsg g = build_idsg(obs, chains.chains, Exec::serial);
  return {std::move(obs), std::move(g)};
}

Built tidb() { return build(parse_history_file(fixture("tidb.jsonl"), Model::list_append)); }
Built fig2() { return build(parse_history_file(fixture("fig2.jsonl"), Model::list_append)); }

// Every edge of the witness exists in the graph with the chosen label.
bool well_formed(const CycleWitness& w, const Dsg& g) {
  if (w.txns.size() < 2 || w.txns.size() != w.labels.size()) return false;
  for (std::size_t i = 0; i < w.txns.size(); ++i) {
    if (!(g.labels(w.txns[i], w.txns[(i + 1) % w.txns.size()]) & w.labels[i])) return false;
  }
  return satisfies_class(w);
}

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("TiDB dependency edges") {
    const auto [obs, g] = tidb();
    CHECK(g.labels(0, 1) == kRW);
    CHECK(g.labels(1, 0) == kWW);
    CHECK(g.labels(0, 2) == kWR);
    CHECK(g.edge_count() == 3);
    const EdgeWhy* rw = g.why(0, 1, kRW);
    REQUIRE(rw);
    CHECK(rw->key == Key{34});
    CHECK(rw->from == VersionId{1});
    CHECK(rw->to == VersionId{5});
  }

  TEST_CASE("Fig. 2 dependency edges") {
    const auto [obs, g] = fig2();
    CHECK((g.labels(0, 1) & kRW) != 0);
    CHECK((g.labels(1, 2) & kWR) != 0);
    CHECK((g.labels(2, 0) & kWW) != 0);
    CHECK(g.why(0, 1, kRW)->key == Key{255});
    CHECK(g.why(1, 2, kWR)->key == Key{255});
    CHECK(g.why(2, 0, kWW)->key == Key{256});
  }

  TEST_CASE("a single transaction has no edges") {
    const auto [obs, g] = build(history(committed({R"([["append", 1, 1], ["r", 1, [1]]])"})));
    CHECK(g.edge_count() == 0);
  }

  TEST_CASE("add_edge keeps one edge per pair") {
    Dsg g(3);
    CHECK(g.add_edge(0, 1, kWW));
    CHECK_FALSE(g.add_edge(0, 1, kWW));
    CHECK(g.add_edge(0, 1, kProcess));
    CHECK_FALSE(g.add_edge(2, 2, kWW));
    CHECK(g.edge_count() == 1);
    CHECK(g.labels(0, 1) == (kWW | kProcess));
    REQUIRE(g.out(0).size() == 1);
    CHECK(g.out(0)[0].second == (kWW | kProcess));
  }

  TEST_CASE("merging transaction orders") {
    Dsg g(3);
    merge_txn_orders(g, {TxnOrder{kRealtime, {{1, 2}}}}, kRealtime);
    CHECK(g.edge_count() == 1);
    CHECK(g.labels(1, 2) == kRealtime);

    merge_txn_orders(g, {TxnOrder{kProcess, {{0, 1}}}}, kRealtime);
    CHECK(g.edge_count() == 1);

    auto [obs, t] = tidb();
    const std::vector<TxnOrder> orders{process_order(obs), realtime_order(obs)};
    merge_txn_orders(t, orders, kOrderLabels);
    const auto once = t.edges();
    merge_txn_orders(t, orders, kOrderLabels);
    REQUIRE(t.edges().size() == once.size());
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(t.edges()[i].labels == once[i].labels);

    Dsg both(2);
    both.add_edge(0, 1, kWW);
    merge_txn_orders(both, {TxnOrder{kProcess, {{0, 1}}}}, kProcess);
    CHECK(both.edge_count() == 1);
    CHECK(both.labels(0, 1) == (kWW | kProcess));
  }

  TEST_CASE("TiDB has one component") {
    const auto [obs, g] = tidb();
    CHECK(strongly_connected_components(g, kDataLabels) == std::vector<std::vector<TxnId>>{{0, 1}});
    Dsg dag(3);
    dag.add_edge(0, 1, kWW);
    dag.add_edge(1, 2, kWR);
    dag.add_edge(0, 2, kRW);
    CHECK(strongly_connected_components(dag, kDataLabels).empty());
  }

  TEST_CASE("components equal pairwise reachability") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> density(0.02, 0.2);
    const LabelSet filters[] = {kDataLabels, kWW, kWW | kWR, kDataLabels | kOrderLabels};
    std::size_t nontrivial = 0;
    for (int round = 0; round < 200; ++round) {
      const auto m = oracle::random_matrix(rng, 12, density(rng), kDataLabels | kOrderLabels);
      const LabelSet filter = filters[round % 4];
      const auto expected = oracle::brute_scc(m, filter);
      nontrivial += !expected.empty();
      CAPTURE(round);
      CHECK(strongly_connected_components(m.to_dsg(), filter) == expected);
    }
    CHECK(nontrivial > 20);
  }

  TEST_CASE("TiDB G-single witness") {
    const auto [obs, g] = tidb();
    const auto ws = find_anomaly_cycles(g, AnomalyClass::G_single, 0);
    REQUIRE(ws.size() == 1);
    CHECK(ws[0].txns == std::vector<TxnId>{0, 1});
    CHECK(ws[0].labels == std::vector<Label>{kRW, kWW});
    CHECK(find_anomaly_cycles(g, AnomalyClass::G0, 0).empty());
    CHECK(find_anomaly_cycles(g, AnomalyClass::G1c, 0).empty());
  }

  TEST_CASE("mutual non-observation is G2 and not G-single") {
    const auto [obs, g] = build(history(committed({R"([["append", 1, 1], ["r", 2, []]])",
                                                    R"([["append", 2, 1], ["r", 1, []]])",
                                                    R"([["r", 1, [1]], ["r", 2, [1]]])"})));
    CHECK(g.labels(0, 1) == kRW);
    CHECK(g.labels(1, 0) == kRW);
    const auto found = find_cycles(g, {AnomalyClass::G0, AnomalyClass::G1c, AnomalyClass::G_single, AnomalyClass::G2}, 0);
    REQUIRE(found.size() == 1);
    CHECK(found[0].cls == AnomalyClass::G2);
    CHECK(found[0].labels == std::vector<Label>{kRW, kRW});
  }

  TEST_CASE("G-single search agrees with simple-cycle enumeration") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> density(0.05, 0.25);
    std::size_t yes = 0, no = 0;
    for (int round = 0; round < 200; ++round) {
      const auto m = oracle::random_matrix(rng, 10, density(rng), kDataLabels);
      const Dsg g = m.to_dsg();
      const auto ws = find_anomaly_cycles(g, AnomalyClass::G_single, 0);
      const bool expected = oracle::has_g_single(m);
      (expected ? yes : no) += 1;
      CAPTURE(round);
      CHECK(!ws.empty() == expected);
      for (const auto& w : ws) CHECK(well_formed(w, g));
    }
    CHECK(yes > 20);
    CHECK(no > 20);
  }

  TEST_CASE("witnesses of every class are well formed") {
    std::mt19937_64 rng(3);
    for (int round = 0; round < 100; ++round) {
      const auto m = oracle::random_matrix(rng, 10, 0.15, kDataLabels | kOrderLabels);
      const Dsg g = m.to_dsg();
      for (AnomalyClass c : {AnomalyClass::G0, AnomalyClass::G1c, AnomalyClass::G_single, AnomalyClass::G2}) {
        for (const auto& w : find_anomaly_cycles(g, c, kOrderLabels)) {
          CHECK(w.cls == c);
          CHECK(well_formed(w, g));
        }
      }
    }
  }

  TEST_CASE("serial and parallel cycle search agree") {
    std::mt19937_64 rng(4);
    const std::set<AnomalyClass> all{AnomalyClass::G0, AnomalyClass::G1c, AnomalyClass::G_single, AnomalyClass::G2};
    for (int round = 0; round < 50; ++round) {
      const Dsg g = oracle::random_matrix(rng, 40, 0.04, kDataLabels | kOrderLabels).to_dsg();
      CHECK(find_cycles(g, all, kOrderLabels, Exec::serial) == find_cycles(g, all, kOrderLabels, Exec::parallel));
    }
  }

  TEST_CASE("TiDB explanation") {
    const auto [obs, g] = tidb();
    const auto ws = find_anomaly_cycles(g, AnomalyClass::G_single, 0);
    REQUIRE(ws.size() == 1);
    const std::string text = explain(ws[0], g, obs);
    CHECK(text.find("Let:\n  T1 = txn 0") != std::string::npos);
    CHECK(text.find("T1 < T2, because T1 did not observe T2's append of 5 to 34.") != std::string::npos);
    CHECK(text.find("However, T2 < T1, because T1 appended 4 after T2 appended 5 to 34: a contradiction!") !=
          std::string::npos);
  }

  TEST_CASE("Fig. 2 explanation") {
    const auto [obs, g] = fig2();
    const auto ws = find_anomaly_cycles(g, AnomalyClass::G_single, 0);
    REQUIRE(ws.size() == 1);
    const std::string text = explain(ws[0], g, obs);
    CHECK(text.find("because T1 did not observe T2's append of 8 to 255") != std::string::npos);
    CHECK(text.find("because T3 observed T2's append of 8 to key 255") != std::string::npos);
    CHECK(text.find("because T1 appended 3 after T3 appended 4 to 256") != std::string::npos);
  }

  TEST_CASE("realtime edges are explained") {
    const auto obs = history(committed({R"([["append", 1, 1]])", R"([["r", 1, []]])", R"([["r", 1, [1]]])"}));
    auto [o, g] = build(obs);
    merge_txn_orders(g, {realtime_order(o)}, kRealtime);
    const auto ws = find_cycles(g, {AnomalyClass::G_single}, kRealtime);
    REQUIRE(ws.size() == 1);
    CHECK(ws[0].uses_realtime);
    CHECK(ws[0].display_name() == "G-single-realtime");
    CHECK(explain(ws[0], g, o).find("T2 completed before T1 began") != std::string::npos);
  }

  TEST_CASE("DOT output") {
    const auto [obs, g] = tidb();
    const std::string dot = to_dot(g);
    CHECK(dot.rfind("digraph", 0) == 0);
    CHECK(dot.find("T0 -> T1") != std::string::npos);
    CHECK(dot.find("rw") != std::string::npos);
    const std::string only = to_dot(g, {0, 1});
    CHECK(only.find("T2") == std::string::npos);
    CHECK(to_dot(g) == dot);
  }

  TEST_CASE("graph construction is deterministic") {
    const auto obs = parse_history_file(fixture("fig2.jsonl"), Model::list_append);
    const auto idx = build_write_index(obs);
    const auto chains = infer_list_append_chains(obs, idx, {}, Exec::parallel);
    const Dsg a = build_idsg(obs, chains.chains, Exec::serial);
    const Dsg b = build_idsg(obs, chains.chains, Exec::parallel);
    REQUIRE(a.edges().size() == b.edges().size());
    for (std::size_t i = 0; i < a.edges().size(); ++i) {
      CHECK(a.edges()[i].from == b.edges()[i].from);
      CHECK(a.edges()[i].to == b.edges()[i].to);
      CHECK(a.edges()[i].labels == b.edges()[i].labels);
    }
    CHECK(to_dot(a) == to_dot(b));
  }

  TEST_CASE("register dependency edges") {
    const auto obs = history(committed({R"([["w", 1, 1]])", R"([["r", 1, 1], ["w", 1, 2]])", R"([["r", 1, 1]])"}),
                             Model::register_rw);
    const auto orders = infer_register_order(obs, RegisterRules{});
    const Dsg g = build_idsg(obs, orders);
    CHECK(g.labels(0, 1) == (kWW | kWR));
    CHECK(g.labels(0, 2) == kWR);
    CHECK(g.labels(2, 1) == kRW);
  }
}
