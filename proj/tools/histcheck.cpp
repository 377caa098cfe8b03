#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "histcheck/check.hpp"
#include "histcheck/fuzz.hpp"
#include "histcheck/gen.hpp"
#include "histcheck/histio.hpp"

using namespace histcheck;

namespace {

constexpr int kExitValid = 0;
constexpr int kExitInput = 1;
constexpr int kExitViolations = 2;

std::map<Injector, double> parse_injections(const std::vector<std::string>& specs) {
  std::map<Injector, double> out;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    const auto name = s.substr(0, eq);
    const auto inj = parse_injector(name);
    if (!inj) throw CLI::ValidationError("--inject", "unknown injector '" + name + "'");
    double p = 1.0;
    if (eq != std::string::npos) {
      try {
        p = std::stod(s.substr(eq + 1));
      } catch (const std::exception&) {
        throw CLI::ValidationError("--inject", "bad probability in '" + s + "'");
      }
    }
    if (p < 0.0 || p > 1.0) throw CLI::ValidationError("--inject", "probability out of range in '" + s + "'");
    out[*inj] = p;
  }
  return out;
}

std::set<AnomalyClass> parse_classes(const std::string& list) {
  std::set<AnomalyClass> out;
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    const auto c = parse_class(name);
    if (!c) throw CLI::ValidationError("--anomalies", "unknown anomaly class '" + name + "'");
    out.insert(*c);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"histcheck: infer dependency graphs from transaction histories and report isolation anomalies"};
  app.require_subcommand(1);

  // check
  auto* check_cmd = app.add_subcommand("check", "check a history file");
  std::string input, model_s = "list-append", consistency_s = "serializable", anomalies_s, format = "text", dot_path;
  bool linearizable = false, process = false, timing = false, serial = false;
  check_cmd->add_option("file", input, "history file")->required();
  check_cmd->add_option("--model", model_s, "list-append or register")->check(CLI::IsMember({"list-append", "register"}));
  check_cmd->add_option("--consistency", consistency_s, "expected consistency model")
      ->check(CLI::IsMember({"read-uncommitted", "read-committed", "snapshot-isolation", "serializable",
                             "strict-serializable"}));
  check_cmd->add_option("--anomalies", anomalies_s, "comma-separated classes to report");
  check_cmd->add_flag("--linearizable-keys", linearizable, "infer register versions from per-key real-time order");
  check_cmd->add_flag("--process-order", process, "add process-order edges to cycle search");
  check_cmd->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
  check_cmd->add_option("--dot", dot_path, "write the dependency graph of the reported cycles as Graphviz");
  check_cmd->add_flag("--timing", timing, "include per-stage timings");
  check_cmd->add_flag("--serial", serial, "use the serial reference kernels");

  // gen
  auto* gen_cmd = app.add_subcommand("gen", "generate a simulated history");
  GenConfig gen;
  std::string mode_s = "serializable", out_path;
  std::vector<std::string> inject;
  double info_fraction = 0.01;
  gen_cmd->add_option("--txns", gen.txn_count, "transactions")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--keys", gen.key_count, "live keys")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--max-writes", gen.max_writes_per_key, "appends per key before retirement")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--ops-min", gen.ops_min, "minimum operations per transaction")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--ops-max", gen.ops_max, "maximum operations per transaction")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--processes", gen.process_count, "concurrent clients")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--read-fraction", gen.read_fraction, "probability an operation is a read")->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--mode", mode_s, "serializable or snapshot-isolation")
      ->check(CLI::IsMember({"serializable", "snapshot-isolation"}));
  gen_cmd->add_option("--inject", inject, "injector=probability, repeatable");
  gen_cmd->add_option("--info-fraction", info_fraction, "commits reported as indeterminate")->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--seed", gen.seed, "random seed");
  gen_cmd->add_option("--out", out_path, "output history file")->required();

  // fuzz
  auto* fuzz_cmd = app.add_subcommand("fuzz", "generate and check histories in a loop");
  FuzzConfig fuzz;
  std::string fuzz_mode = "serializable", expect_s = "strict-serializable";
  std::vector<std::string> fuzz_inject;
  fuzz_cmd->add_option("--rounds", fuzz.rounds, "rounds")->check(CLI::NonNegativeNumber);
  fuzz_cmd->add_option("--txns", fuzz.gen.txn_count, "transactions per round")->check(CLI::NonNegativeNumber);
  fuzz_cmd->add_option("--seed", fuzz.seed, "base seed");
  fuzz_cmd->add_option("--mode", fuzz_mode, "serializable or snapshot-isolation")
      ->check(CLI::IsMember({"serializable", "snapshot-isolation"}));
  fuzz_cmd->add_option("--expect", expect_s, "consistency model to check against")
      ->check(CLI::IsMember({"read-uncommitted", "read-committed", "snapshot-isolation", "serializable",
                             "strict-serializable"}));
  fuzz_cmd->add_option("--inject", fuzz_inject, "injector=probability, repeatable");
  fuzz_cmd->add_option("--out", fuzz.failure_path, "where to write a failing history");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitValid : kExitInput;
  }

  try {
    if (*check_cmd) {
      CheckOptions opts;
      opts.model = model_s == "register" ? Model::register_rw : Model::list_append;
      opts.consistency = *parse_consistency(consistency_s);
      if (!anomalies_s.empty()) opts.anomalies = parse_classes(anomalies_s);
      opts.linearizable_keys = linearizable;
      opts.process_order = process;
      opts.exec = serial ? Exec::serial : Exec::parallel;

      Observation obs;
      try {
        obs = parse_history_file(input, opts.model);
      } catch (const std::exception& e) {
        std::cerr << input << ": " << e.what() << '\n';
        return kExitInput;
      }
      const Analysis an = analyze(obs, opts);
      std::cout << (format == "json" ? render_json(an.report, timing) : render_text(an.report, timing));
      if (!dot_path.empty()) {
        std::vector<TxnId> nodes;
        for (const auto& a : an.report.anomalies) {
          if (a.cycle) nodes.insert(nodes.end(), a.cycle->txns.begin(), a.cycle->txns.end());
        }
        std::ofstream dot(dot_path);
        if (!dot) {
          std::cerr << "cannot write " << dot_path << '\n';
          return kExitInput;
        }
        dot << to_dot(an.graph, nodes.empty() ? std::vector<TxnId>{} : nodes);
      }
      return an.report.valid ? kExitValid : kExitViolations;
    }

    if (*gen_cmd) {
      SimMode mode;
      mode.base = *parse_base(mode_s);
      mode.injectors = parse_injections(inject);
      mode.info_fraction = info_fraction;
      const SimResult sim = simulate(gen, mode);
      std::ofstream out(out_path);
      if (!out) {
        std::cerr << "cannot write " << out_path << '\n';
        return kExitInput;
      }
      write_history(out, sim.obs);
      if (sim.truth) std::ofstream(out_path + ".truth.json") << truth_json(*sim.truth);
      std::size_t committed = 0;
      for (const auto& t : sim.obs.txns) committed += t.committed();
      std::cout << "wrote " << sim.obs.txns.size() << " transactions (" << committed << " committed) to " << out_path
                << "; keys " << gen.key_count << ", seed " << gen.seed << ", mode " << base_name(mode.base);
      if (!mode.injectors.empty()) std::cout << ", episodes " << sim.episodes;
      std::cout << '\n';
      return kExitValid;
    }

    if (*fuzz_cmd) {
      fuzz.mode.base = *parse_base(fuzz_mode);
      fuzz.mode.injectors = parse_injections(fuzz_inject);
      fuzz.expect = *parse_consistency(expect_s);
      const FuzzResult r = run_fuzz(fuzz);
      if (!r.failing_round) {
        std::cout << "fuzz: " << r.rounds << " rounds, no problems (seed " << fuzz.seed << ")\n";
        return kExitValid;
      }
      std::cout << "fuzz: round " << *r.failing_round << " failed, round seed " << r.failing_seed;
      if (!r.history_path.empty()) std::cout << ", history " << r.history_path;
      std::cout << '\n';
      for (std::size_t i = 0; i < r.problems.size() && i < 10; ++i) std::cout << "  " << r.problems[i] << '\n';
      if (r.problems.size() > 10) std::cout << "  ... " << r.problems.size() - 10 << " more\n";
      return kExitViolations;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
