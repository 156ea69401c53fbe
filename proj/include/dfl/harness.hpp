#pragma once

// Experiment orchestration. Training code receives only an ObservedGraph;
// reported objectives are computed only from a FullGraph. The two views wrap
// the same Graph type under different tags so they cannot be swapped.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfl/baselines.hpp"
#include "dfl/decisions.hpp"
#include "dfl/gcn.hpp"
#include "dfl/graph.hpp"
#include "dfl/results.hpp"
#include "dfl/soft_kmeans.hpp"
#include "dfl/twostage.hpp"
#include "json.hpp"

namespace dfl {

struct ObservedTag {};
struct FullTag {};

template <class Tag>
class GraphView {
 public:
  GraphView() = default;
  explicit GraphView(Graph g) : g_(std::move(g)) {}
  const Graph& graph() const { return g_; }

 private:
  Graph g_;
};

using ObservedGraph = GraphView<ObservedTag>;
using FullGraph = GraphView<FullTag>;

/// Config problems (exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss during training (exit code 2). `dump` holds the state.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, nlohmann::json dump)
      : std::runtime_error(what), dump_(std::move(dump)) {}
  const nlohmann::json& dump() const { return dump_; }

 private:
  nlohmann::json dump_;
};

struct SbmSpec {
  std::vector<int> blocks{100, 100};
  double p_in = 0.1;
  double p_out = 0.01;
  std::uint64_t seed = 0;
};

struct DatasetSpec {
  std::string name;
  std::optional<std::filesystem::path> edges;
  std::optional<std::filesystem::path> features;
  std::optional<SbmSpec> sbm;
};

struct KmeansSchedule {
  int initial = 1;
  int later = 5;
  int switch_iter = 500;
  int at(int iter) const { return iter < switch_iter ? initial : later; }
};

struct RunConfig {
  std::string task = "community";  // community | facility
  std::string mode = "learn+opt";  // learn+opt | opt-only | inductive | finetune | finetune-only | 1-train
  std::string method = "clusternet";
  int k = 5;
  std::optional<double> beta;  // 50 community, 30 facility
  double gamma = 100.0;
  std::optional<double> eta;  // defaults to beta
  double lr = 0.01;
  int iters = 1000;
  KmeansSchedule kmeans;
  int final_kmeans_iters = 100;
  double dropout = 0.0;
  int hidden = 50;
  int embed = 50;
  std::uint64_t seed = 0;
  double fraction_held = 0.6;
  int rounding_trials = 10;
  double facility_temperature = 100.0;
  std::string squash = "shifted";      // shifted | centered
  std::string backward = "approximate";  // approximate | exact
  LinkHyper link;
  DatasetSpec dataset;
  // Inductive runs.
  std::vector<DatasetSpec> train_graphs;
  std::vector<DatasetSpec> test_graphs;
  int finetune_iters = 50;
  /// Features for graphs without a feature file: degree | identity | random | spectral.
  std::string fallback_features = "degree";

  double effective_beta() const;
  double effective_eta() const;
  Task task_kind() const;
  ClusterConfig cluster_config(int updates) const;
  SelectionConfig selection_config() const;
  void validate() const;
};

/// Defaults for inductive runs (beta 70, lr .001, dropout .2,
/// 70 iterations, 10 k-means updates).
RunConfig inductive_defaults();

nlohmann::json to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// One graph prepared for a run.
struct Problem {
  std::string name;
  FullGraph full;
  ObservedGraph observed;
  Tensor features;  // computed from the observed graph when none are supplied
  std::size_t held_count = 0;
};

Graph load_dataset(const DatasetSpec& spec);

/// Restricts facility problems to the largest component, then splits edges
/// (learn+opt) or observes all of them (opt-only).
Problem make_problem(const Graph& g, const RunConfig& cfg, const std::string& name);

struct TrainedClusterNet {
  GcnParams params;
  std::vector<Tensor> centers;  // last centers per training graph
  std::vector<double> losses;
  int gradient_updates = 0;
};

/// Decision-focused training of the GCN + clustering pipeline on observed graphs.
/// Each entry of `graphs` contributes its loss every iteration.
TrainedClusterNet train_clusternet(const std::vector<const ObservedGraph*>& graphs,
                                   const std::vector<const Tensor*>& features, const RunConfig& cfg,
                                   std::optional<GcnParams> init = std::nullopt);

ExperimentResult run_clusternet(const Problem& p, const RunConfig& cfg);
ExperimentResult run_baseline(const Problem& p, const RunConfig& cfg);
ExperimentResult run_twostage(const Problem& p, const RunConfig& cfg);
/// Dispatches on cfg.method.
ExperimentResult run_method(const Problem& p, const RunConfig& cfg);

/// Inference with fixed params: forward, cluster to convergence, decode,
/// round, evaluate on the full graph.
ExperimentResult evaluate_clusternet(const Problem& p, const RunConfig& cfg, const GcnParams& params,
                                     const std::optional<Tensor>& warm_centers = std::nullopt);

/// Fully observed training problems and 40%-observed test problems.
std::vector<Problem> inductive_train_problems(const RunConfig& cfg);
std::vector<Problem> inductive_test_problems(const RunConfig& cfg);

/// Trains on cfg.train_graphs (only the first in 1-train mode), then evaluates
/// every test graph according to cfg.mode.
std::vector<ExperimentResult> run_inductive(const RunConfig& cfg);

std::vector<std::string> method_names();

}  // namespace dfl
