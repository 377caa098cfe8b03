#include <doctest.h>

#include "helpers.hpp"
#include "histcheck/histio.hpp"
#include "histcheck/nca.hpp"

using namespace histcheck;
using testing::committed;
using testing::fixture;
using testing::history;
using testing::serial;

namespace {

Observation tidb() { return parse_history_file(fixture("tidb.jsonl"), Model::list_append); }

}  // namespace

TEST_SUITE("nca") {
  TEST_CASE("internal inconsistency in the FaunaDB history") {
    const auto obs = parse_history_file(fixture("faunadb.jsonl"), Model::list_append);
    const auto found = find_internal_inconsistencies(obs, Exec::serial);
    REQUIRE(found.size() == 1);
    CHECK(found[0].cls == AnomalyClass::internal_inconsistency);
    CHECK(found[0].key == Key{0});
  }

  TEST_CASE("internal inconsistency in the Dgraph register history") {
    const auto obs = parse_history_file(fixture("dgraph_internal.jsonl"), Model::register_rw);
    const auto found = find_internal_inconsistencies(obs, Exec::serial);
    REQUIRE(found.size() == 1);
    CHECK(found[0].key == Key{10});
  }

  TEST_CASE("self-consistent transactions") {
    CHECK(find_internal_inconsistencies(
              history(committed({R"([["r", 1, [1]], ["append", 1, 2], ["r", 1, [1, 2]]])"})), Exec::serial)
              .empty());
    CHECK(find_internal_inconsistencies(tidb(), Exec::serial).empty());
    // A later read that lost an earlier one's elements.
    CHECK(find_internal_inconsistencies(history(committed({R"([["r", 1, [1, 2]], ["r", 1, [1]]])"})), Exec::serial)
              .size() == 1);
    // A register read that disagrees with the transaction's own write.
    CHECK(find_internal_inconsistencies(
              history(committed({R"([["w", 3, 1], ["r", 3, 1], ["r", 4, 2], ["r", 4, 3]])"}), Model::register_rw),
              Exec::serial)
              .size() == 1);
  }

  TEST_CASE("serial and parallel internal checks agree") {
    const auto obs = history(committed({R"([["append", 0, 6], ["r", 0, []]])", R"([["r", 1, [1]], ["r", 1, []]])",
                                        R"([["r", 2, [1]], ["append", 2, 2], ["r", 2, [1, 2]]])"}));
    CHECK(find_internal_inconsistencies(obs, Exec::serial) == find_internal_inconsistencies(obs, Exec::parallel));
  }

  TEST_CASE("aborted read") {
    const auto obs = history(serial({{R"([["append", 1, 9]])", "fail"}, {R"([["r", 1, [9]]])"}}));
    const auto found = find_aborted_reads(obs, build_write_index(obs));
    REQUIRE(found.size() == 1);
    CHECK(found[0].cls == AnomalyClass::G1a);
    CHECK(found[0].witness[0].txn == 0);
    CHECK(found[0].witness[1].txn == 1);
    CHECK(find_aborted_reads(tidb(), build_write_index(tidb())).empty());
  }

  TEST_CASE("elements of indeterminate transactions are not aborted reads") {
    const auto obs = history(serial({{R"([["append", 1, 9]])", "info"}, {R"([["r", 1, [9]]])"}}));
    CHECK(find_aborted_reads(obs, build_write_index(obs)).empty());
  }

  TEST_CASE("intermediate read") {
    const auto obs = history(committed({R"([["append", 1, 1], ["append", 1, 2]])", R"([["r", 1, [1]]])"}));
    const auto found = find_intermediate_reads(obs, build_write_index(obs));
    REQUIRE(found.size() == 1);
    CHECK(found[0].cls == AnomalyClass::G1b);

    const auto final_version = history(committed({R"([["append", 1, 1], ["append", 1, 2]])", R"([["r", 1, [1, 2]]])"}));
    CHECK(find_intermediate_reads(final_version, build_write_index(final_version)).empty());

    const auto own = history(committed({R"([["append", 1, 1], ["r", 1, [1]], ["append", 1, 2]])"}));
    CHECK(find_intermediate_reads(own, build_write_index(own)).empty());
  }

  TEST_CASE("intermediate read seen under the reader's own append") {
    const auto obs = history(
        committed({R"([["append", 1, 1], ["append", 1, 2]])", R"([["append", 1, 7], ["r", 1, [1, 7]]])"}));
    CHECK(find_intermediate_reads(obs, build_write_index(obs)).size() == 1);
  }

  TEST_CASE("dirty update") {
    const auto obs = history(serial({{R"([["append", 1, 1]])", "fail"}, {R"([["append", 1, 2]])"}, {R"([["r", 1, [1, 2]]])"}}));
    const auto found = find_dirty_updates(obs, build_write_index(obs));
    REQUIRE(found.size() == 1);
    CHECK(found[0].cls == AnomalyClass::dirty_update);
    REQUIRE(found[0].witness.size() == 3);
    CHECK(found[0].witness[0].txn == 0);
    CHECK(found[0].witness[1].txn == 1);
    CHECK(found[0].witness[2].txn == 2);
    CHECK(found[0].explanation.find("committed an append of 2 on top of it") != std::string::npos);
  }

  TEST_CASE("an aborted element at the end of every read is only an aborted read") {
    const auto obs = history(serial({{R"([["append", 1, 1]])"}, {R"([["append", 1, 2]])", "fail"}, {R"([["r", 1, [1, 2]]])"}}));
    const auto idx = build_write_index(obs);
    CHECK(find_dirty_updates(obs, idx).empty());
    CHECK(find_aborted_reads(obs, idx).size() == 1);
    CHECK(find_dirty_updates(tidb(), build_write_index(tidb())).empty());
  }

  TEST_CASE("dirty update followed only by indeterminate appends") {
    const auto obs = history(serial({{R"([["append", 1, 1]])", "fail"}, {R"([["append", 1, 2]])", "info"}, {R"([["r", 1, [1, 2]]])"}}));
    const auto found = find_dirty_updates(obs, build_write_index(obs));
    REQUIRE(found.size() == 1);
    CHECK(found[0].witness.size() == 2);
    CHECK(found[0].explanation.find("either a dirty update or an aborted read") != std::string::npos);
  }

  TEST_CASE("each dirty element is reported once") {
    const auto obs = history(serial({{R"([["append", 1, 1]])", "fail"},
                                     {R"([["append", 1, 2]])"},
                                     {R"([["r", 1, [1, 2]]])"},
                                     {R"([["r", 1, [1, 2]]])"}}));
    CHECK(find_dirty_updates(obs, build_write_index(obs)).size() == 1);
  }
}
