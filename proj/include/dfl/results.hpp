#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace dfl {

struct ExperimentResult {
  std::string method;
  std::string task;  // "community" | "facility"
  std::string mode;
  std::string dataset;
  std::string instance;  // groups results that compete against each other
  std::uint64_t seed = 0;

  double objective_full = 0.0;
  double objective_train = 0.0;
  double runtime_train_s = 0.0;
  double runtime_forward_s = 0.0;

  std::vector<int> solution;  // labels per node, or selected node ids
  int communities = 0;        // partition only
  std::optional<double> auc;  // two-stage only
  std::string prediction_mode;
  std::vector<double> train_losses;
  int test_gradient_updates = 0;
  nlohmann::json config;
};

nlohmann::json to_json(const ExperimentResult& r);
ExperimentResult result_from_json(const nlohmann::json& j);

/// Writes <stem>.json (full record) and <stem>.solution.json (solution only,
/// byte-stable across identical runs).
void save_result(const ExperimentResult& r, const std::filesystem::path& dir, const std::string& stem);
ExperimentResult load_result(const std::filesystem::path& path);

/// DFL_RESULTS_DIR or ./results.
std::filesystem::path results_dir();

struct TableRow {
  std::string method;
  std::optional<double> mean_objective;
  std::optional<double> top_fraction;  // share of instances where the method is best, ties included
  int runs = 0;
};

/// Higher objective wins for community detection, lower for facility location.
std::vector<TableRow> aggregate(const std::vector<ExperimentResult>& results);
std::vector<ExperimentResult> load_results(const std::filesystem::path& dir);

void write_table_csv(const std::vector<TableRow>& rows, std::ostream& os);
void write_table_markdown(const std::vector<TableRow>& rows, std::ostream& os);

}  // namespace dfl
