// Command-line front end. Exit codes: 0 ok, 1 config/input error,
// 2 numerical failure, 3 check failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "dfl/gradcheck.hpp"
#include "dfl/harness.hpp"
#include "dfl/results.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kNumericalError = 2;
constexpr int kCheckFailure = 3;

nlohmann::json read_json(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw dfl::ConfigError("cannot open config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw dfl::ConfigError(path + ": " + e.what());
  }
}

struct Overrides {
  std::string config;
  std::optional<std::string> method, task, mode, edges, features;
  std::optional<int> k, iters;
  std::optional<std::uint64_t> seed;
  std::optional<double> beta, lr;
  std::string stem;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config, "JSON run configuration");
    cmd->add_option("--method", method, "clusternet, gcn-e2e, train-<algo> or 2stage-<algo>");
    cmd->add_option("--task", task, "community or facility");
    cmd->add_option("--mode", mode, "learn+opt, opt-only, inductive, finetune, finetune-only, 1-train");
    cmd->add_option("--edges", edges, "edge-list file (replaces the configured dataset)");
    cmd->add_option("--features", features, "node feature file");
    cmd->add_option("-k", k, "cluster count / facility budget");
    cmd->add_option("--iters", iters, "training iterations");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--beta", beta, "clustering inverse temperature");
    cmd->add_option("--lr", lr, "learning rate");
    cmd->add_option("--out", stem, "result file stem (default derived from the run)");
  }

  dfl::RunConfig resolve() const {
    nlohmann::json j = read_json(config);
    if (method) j["method"] = *method;
    if (task) j["task"] = *task;
    if (mode) j["mode"] = *mode;
    if (k) j["k"] = *k;
    if (iters) j["iters"] = *iters;
    if (seed) j["seed"] = *seed;
    if (beta) j["beta"] = *beta;
    if (lr) j["lr"] = *lr;
    if (edges) {
      j["dataset"] = {{"edges", *edges}};
      if (features) j["dataset"]["features"] = *features;
    }
    return dfl::config_from_json(j);
  }
};

std::string default_stem(const dfl::ExperimentResult& r) {
  std::string s = r.dataset + "_" + r.task + "_" + r.mode + "_" + r.method + "_" + r.instance + "_s" +
                  std::to_string(r.seed);
  for (char& c : s)
    if (c == '/' || c == '+' || c == '#' || c == ' ') c = '-';
  return s;
}

void print_summary(const dfl::ExperimentResult& r) {
  std::cout << r.method << " [" << r.task << ", " << r.mode << "] " << r.instance
            << ": objective(full)=" << r.objective_full << " objective(train)=" << r.objective_train;
  if (r.task == "community") std::cout << " communities=" << r.communities;
  if (r.auc) std::cout << " auc=" << *r.auc;
  std::cout << " train=" << r.runtime_train_s << "s forward=" << r.runtime_forward_s << "s\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-focused graph optimization: ClusterNet and baselines"};
  app.require_subcommand(1);

  auto* split = app.add_subcommand("split", "hold out a fraction of edges and save the manifest");
  std::string split_edges_path, split_out;
  double split_fraction = 0.6;
  std::uint64_t split_seed = 0;
  split->add_option("--edges", split_edges_path, "edge-list file")->required();
  split->add_option("--fraction", split_fraction, "fraction of edges held out");
  split->add_option("--seed", split_seed, "random seed");
  split->add_option("-o,--out", split_out, "manifest path")->required();

  auto* generate = app.add_subcommand("generate", "sample a stochastic block model edge list");
  std::vector<int> blocks{100, 100};
  double p_in = 0.1, p_out = 0.01;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  generate->add_option("--blocks", blocks, "block sizes")->delimiter(',');
  generate->add_option("--p-in", p_in, "within-block edge probability");
  generate->add_option("--p-out", p_out, "between-block edge probability");
  generate->add_option("--seed", gen_seed, "random seed");
  generate->add_option("-o,--out", gen_out, "edge-list path")->required();

  auto* run = app.add_subcommand("run", "run one method on one graph");
  Overrides run_opts;
  run_opts.attach(run);

  auto* inductive = app.add_subcommand("inductive", "train on graph lists and evaluate on test graphs");
  Overrides ind_opts;
  ind_opts.attach(inductive);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  std::string suite = "all";
  gradcheck->add_option("--suite", suite, "tensor_ad, softkmeans, decisions or all");

  auto* table = app.add_subcommand("table", "aggregate result files into a table");
  std::string table_dir, table_format = "md";
  table->add_option("--dir", table_dir, "results directory (default $DFL_RESULTS_DIR or ./results)");
  table->add_option("--format", table_format, "md or csv")->check(CLI::IsMember({"md", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*split) {
      const dfl::Graph g = dfl::load_edge_list(split_edges_path);
      const dfl::EdgeSplit s = dfl::split_edges(g, split_fraction, split_seed);
      dfl::save_split_manifest(s, split_out);
      std::cout << "held " << s.held_edges.size() << " of " << g.num_edges() << " edges -> " << split_out
                << '\n';
    } else if (*generate) {
      const dfl::Graph g = dfl::generate_sbm(blocks, p_in, p_out, gen_seed);
      dfl::save_edge_list(g, gen_out);
      std::cout << g.num_nodes() << " nodes, " << g.num_edges() << " edges -> " << gen_out << '\n';
    } else if (*run) {
      const dfl::RunConfig cfg = run_opts.resolve();
      const dfl::Problem p = dfl::make_problem(dfl::load_dataset(cfg.dataset), cfg, cfg.dataset.name);
      const dfl::ExperimentResult r = dfl::run_method(p, cfg);
      dfl::save_result(r, dfl::results_dir(), run_opts.stem.empty() ? default_stem(r) : run_opts.stem);
      print_summary(r);
    } else if (*inductive) {
      const dfl::RunConfig cfg = ind_opts.resolve();
      const auto results = dfl::run_inductive(cfg);
      for (std::size_t i = 0; i < results.size(); ++i) {
        const std::string stem = (ind_opts.stem.empty() ? default_stem(results[i]) : ind_opts.stem + "_" + std::to_string(i));
        dfl::save_result(results[i], dfl::results_dir(), stem);
        print_summary(results[i]);
      }
    } else if (*gradcheck) {
      std::vector<dfl::CheckResult> results;
      for (const auto& c : dfl::gradcheck_cases(suite)) results.push_back(dfl::run_case(c));
      dfl::print_report(results, std::cout);
      for (const auto& r : results)
        if (!r.passed) return kCheckFailure;
    } else if (*table) {
      const auto rows = dfl::aggregate(dfl::load_results(table_dir.empty() ? dfl::results_dir() : std::filesystem::path(table_dir)));
      if (table_format == "csv") dfl::write_table_csv(rows, std::cout);
      else dfl::write_table_markdown(rows, std::cout);
    }
  } catch (const dfl::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n' << e.dump().dump(2) << '\n';
    return kNumericalError;
  } catch (const dfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return 0;
}
