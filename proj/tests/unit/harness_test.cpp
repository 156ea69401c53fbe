#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "dfl/harness.hpp"

namespace dfl {
namespace {

Graph two_k5() {
  std::vector<Edge> e;
  for (int b = 0; b < 2; ++b)
    for (int u = 0; u < 5; ++u)
      for (int v = u + 1; v < 5; ++v) e.emplace_back(5 * b + u, 5 * b + v);
  e.emplace_back(0, 5);
  return Graph(10, std::move(e));
}

Graph path(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return Graph(n, std::move(e));
}

RunConfig small_config() {
  RunConfig cfg;
  cfg.k = 2;
  cfg.iters = 40;
  cfg.hidden = 16;
  cfg.embed = 8;
  cfg.seed = 3;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Config, JsonRoundTrip) {
  RunConfig cfg = small_config();
  cfg.task = "facility";
  cfg.beta = 12.5;
  cfg.squash = "centered";
  cfg.dataset.name = "sbm";
  cfg.dataset.sbm = SbmSpec{{10, 20}, 0.3, 0.02, 9};
  const nlohmann::json j = to_json(cfg);
  EXPECT_EQ(to_json(config_from_json(j)), j);
  EXPECT_EQ(config_from_json(j).effective_beta(), 12.5);
  EXPECT_EQ(config_from_json(j).effective_eta(), 12.5);
}

TEST(Config, DefaultBetaDependsOnTask) {
  RunConfig cfg;
  EXPECT_EQ(cfg.effective_beta(), 50.0);
  cfg.task = "facility";
  EXPECT_EQ(cfg.effective_beta(), 30.0);
}

TEST(Config, RejectsUnknownKeysAndValues) {
  nlohmann::json j = to_json(small_config());
  j["learning_rate"] = 0.1;
  EXPECT_THROW(config_from_json(j), ConfigError);
  nlohmann::json bad = to_json(small_config());
  bad["task"] = "routing";
  EXPECT_THROW(config_from_json(bad), ConfigError);
  RunConfig cfg = small_config();
  cfg.method = "nope";
  const Problem p = make_problem(two_k5(), cfg, "two-k5");
  EXPECT_THROW(run_method(p, cfg), ConfigError);
}

TEST(OptOnly, ClusterNetFindsTwoCliques) {
  RunConfig cfg = small_config();
  cfg.mode = "opt-only";
  cfg.iters = 150;
  cfg.fallback_features = "spectral";
  const Problem p = make_problem(two_k5(), cfg, "two-k5");
  EXPECT_EQ(p.observed.graph().num_edges(), p.full.graph().num_edges());
  const ExperimentResult r = run_method(p, cfg);
  EXPECT_NEAR(r.objective_full, modularity_value({0, 0, 0, 0, 0, 1, 1, 1, 1, 1}, two_k5()), 0.02);
}

TEST(OptOnly, FacilityOnPath) {
  RunConfig cfg = small_config();
  cfg.task = "facility";
  cfg.mode = "opt-only";
  cfg.k = 3;
  cfg.iters = 150;
  cfg.fallback_features = "spectral";
  const Problem p = make_problem(path(9), cfg, "path9");
  const ExperimentResult r = run_method(p, cfg);
  EXPECT_EQ(r.solution.size(), 3u);
  EXPECT_LE(r.objective_full, 3.0);
}

TEST(LearnOpt, TrainBaselineOnFullGraphEqualsOptOnly) {
  const Graph g = generate_sbm({15, 15, 15}, 0.3, 0.03, 4);
  RunConfig cfg = small_config();
  cfg.k = 3;
  cfg.method = "train-cnm";
  cfg.mode = "opt-only";
  const ExperimentResult opt = run_method(make_problem(g, cfg, "sbm"), cfg);
  EXPECT_NEAR(opt.objective_full, cnm(g, 3).modularity, 1e-12);
  cfg.mode = "learn+opt";
  const Problem p = make_problem(g, cfg, "sbm");
  EXPECT_LT(p.observed.graph().num_edges(), g.num_edges());
  EXPECT_EQ(p.held_count, g.num_edges() - p.observed.graph().num_edges());
  const ExperimentResult r = run_method(p, cfg);
  EXPECT_NEAR(r.objective_full, modularity_value(r.solution, g), 1e-12);
  EXPECT_NEAR(r.objective_train, modularity_value(r.solution, p.observed.graph()), 1e-12);
}

TEST(LearnOpt, HeldEdgesNeverReachTraining) {
  const Graph g = generate_sbm({12, 12}, 0.4, 0.05, 6);
  RunConfig cfg = small_config();
  const Problem p = make_problem(g, cfg, "sbm");
  Problem poisoned = p;
  // Replace the held edges with a dense random set on the full view.
  std::vector<Edge> edges = p.observed.graph().edges();
  for (int u = 0; u < 24; u += 2)
    for (int v = u + 1; v < 24; v += 3) edges.emplace_back(u, v);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  poisoned.full = FullGraph(g.with_edges(edges));
  const ExperimentResult a = run_method(p, cfg);
  const ExperimentResult b = run_method(poisoned, cfg);
  EXPECT_EQ(a.train_losses, b.train_losses);
  EXPECT_EQ(a.solution, b.solution);
  EXPECT_NE(a.objective_full, b.objective_full);
}

TEST(Results, JsonRoundTripAndObjective) {
  RunConfig cfg = small_config();
  const Graph g = two_k5();
  const Problem p = make_problem(g, cfg, "two-k5");
  const ExperimentResult r = run_method(p, cfg);
  EXPECT_NEAR(r.objective_full, modularity_value(r.solution, g), 1e-12);
  const ExperimentResult back = result_from_json(to_json(r));
  EXPECT_EQ(to_json(back), to_json(r));
  EXPECT_EQ(back.solution, r.solution);
}

TEST(Results, SolutionFilesAreBitIdentical) {
  RunConfig cfg = small_config();
  const Problem p = make_problem(two_k5(), cfg, "two-k5");
  const auto dir = std::filesystem::temp_directory_path() / "dfl_harness_test";
  std::filesystem::create_directories(dir);
  save_result(run_method(p, cfg), dir, "a");
  save_result(run_method(p, cfg), dir, "b");
  EXPECT_EQ(slurp(dir / "a.solution.json"), slurp(dir / "b.solution.json"));
  const ExperimentResult loaded = load_result(dir / "a.json");
  EXPECT_EQ(loaded.method, "clusternet");
  std::filesystem::remove_all(dir);
}

RunConfig inductive_config() {
  RunConfig cfg = inductive_defaults();
  cfg.k = 2;
  cfg.iters = 10;
  cfg.hidden = 8;
  cfg.embed = 8;
  cfg.finetune_iters = 5;
  cfg.fallback_features = "spectral";
  for (std::uint64_t s : {11, 12, 13}) cfg.train_graphs.push_back({"train", {}, {}, SbmSpec{{10, 10}, 0.4, 0.05, s}});
  for (std::uint64_t s : {21, 22}) cfg.test_graphs.push_back({"test", {}, {}, SbmSpec{{10, 10}, 0.4, 0.05, s}});
  return cfg;
}

TEST(Inductive, OneTrainUsesOnlyFirstGraph) {
  RunConfig one = inductive_config();
  one.mode = "1-train";
  RunConfig first = inductive_config();
  first.mode = "inductive";
  first.train_graphs.resize(1);
  const auto a = run_inductive(one);
  const auto b = run_inductive(first);
  ASSERT_EQ(a.size(), 2u);
  ASSERT_EQ(b.size(), 2u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].solution, b[i].solution);
    EXPECT_EQ(a[i].objective_full, b[i].objective_full);
  }
}

TEST(Inductive, FinetuneCountsUpdates) {
  RunConfig cfg = inductive_config();
  for (const ExperimentResult& r : run_inductive(cfg)) EXPECT_EQ(r.test_gradient_updates, 0);
  cfg.mode = "finetune";
  for (const ExperimentResult& r : run_inductive(cfg)) EXPECT_EQ(r.test_gradient_updates, 5);
  const auto train = inductive_train_problems(cfg);
  ASSERT_EQ(train.size(), 3u);
  EXPECT_EQ(train[0].observed.graph().num_edges(), train[0].full.graph().num_edges());
  const auto test = inductive_test_problems(cfg);
  EXPECT_LT(test[0].observed.graph().num_edges(), test[0].full.graph().num_edges());
}

ExperimentResult fake(const std::string& method, const std::string& instance, double obj,
                      const std::string& task = "community") {
  ExperimentResult r;
  r.method = method;
  r.task = task;
  r.dataset = "d";
  r.instance = instance;
  r.objective_full = obj;
  return r;
}

TEST(Table, TiesCountForEveryWinner) {
  const auto rows = aggregate({fake("a", "1", 0.5), fake("b", "1", 0.5), fake("c", "1", 0.2), fake("a", "2", 0.1),
                               fake("b", "2", 0.3)});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].method, "a");
  EXPECT_DOUBLE_EQ(*rows[0].mean_objective, 0.3);
  EXPECT_DOUBLE_EQ(*rows[0].top_fraction, 0.5);
  EXPECT_DOUBLE_EQ(*rows[1].top_fraction, 1.0);
  EXPECT_DOUBLE_EQ(*rows[2].top_fraction, 0.0);
}

TEST(Table, FacilityPrefersLowerObjective) {
  const auto rows = aggregate({fake("a", "1", 2.0, "facility"), fake("b", "1", 3.0, "facility")});
  EXPECT_DOUBLE_EQ(*rows[0].top_fraction, 1.0);
  EXPECT_DOUBLE_EQ(*rows[1].top_fraction, 0.0);
}

TEST(Table, MissingValuesAreBlank) {
  const auto rows = aggregate({fake("a", "1", std::nan(""))});
  EXPECT_FALSE(rows[0].mean_objective.has_value());
  std::ostringstream csv;
  write_table_csv(rows, csv);
  EXPECT_NE(csv.str().find("a,,"), std::string::npos) << csv.str();
}

}  // namespace
}  // namespace dfl
