#include "dfl/results.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <map>
#include <set>
#include <stdexcept>

namespace dfl {
namespace {

constexpr double kTieTol = 1e-9;

std::string fmt(const std::optional<double>& v, int precision) {
  if (!v) return "";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << *v;
  return os.str();
}

}  // namespace

nlohmann::json to_json(const ExperimentResult& r) {
  nlohmann::json j{{"method", r.method},
                   {"task", r.task},
                   {"mode", r.mode},
                   {"dataset", r.dataset},
                   {"instance", r.instance},
                   {"seed", r.seed},
                   {"objective_full", r.objective_full},
                   {"objective_train", r.objective_train},
                   {"runtime_train_s", r.runtime_train_s},
                   {"runtime_forward_s", r.runtime_forward_s},
                   {"solution", r.solution},
                   {"communities", r.communities},
                   {"prediction_mode", r.prediction_mode},
                   {"train_losses", r.train_losses},
                   {"test_gradient_updates", r.test_gradient_updates},
                   {"config", r.config}};
  j["auc"] = r.auc ? nlohmann::json(*r.auc) : nlohmann::json(nullptr);
  return j;
}

ExperimentResult result_from_json(const nlohmann::json& j) {
  ExperimentResult r;
  r.method = j.at("method").get<std::string>();
  r.task = j.at("task").get<std::string>();
  r.mode = j.value("mode", "");
  r.dataset = j.value("dataset", "");
  r.instance = j.value("instance", "");
  r.seed = j.value("seed", std::uint64_t{0});
  const auto obj = j.find("objective_full");
  r.objective_full = obj != j.end() && obj->is_number() ? obj->get<double>()
                                                         : std::numeric_limits<double>::quiet_NaN();
  r.objective_train = j.value("objective_train", 0.0);
  r.runtime_train_s = j.value("runtime_train_s", 0.0);
  r.runtime_forward_s = j.value("runtime_forward_s", 0.0);
  r.solution = j.value("solution", std::vector<int>{});
  r.communities = j.value("communities", 0);
  if (j.contains("auc") && !j["auc"].is_null()) r.auc = j["auc"].get<double>();
  r.prediction_mode = j.value("prediction_mode", "");
  r.train_losses = j.value("train_losses", std::vector<double>{});
  r.test_gradient_updates = j.value("test_gradient_updates", 0);
  r.config = j.value("config", nlohmann::json::object());
  return r;
}

void save_result(const ExperimentResult& r, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / (stem + ".json"));
    if (!out) throw std::runtime_error("cannot write results to " + dir.string());
    out << to_json(r).dump(2) << '\n';
  }
  std::ofstream sol(dir / (stem + ".solution.json"));
  sol << nlohmann::json{{"task", r.task}, {"solution", r.solution}}.dump() << '\n';
}

ExperimentResult load_result(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return result_from_json(nlohmann::json::parse(in));
}

std::filesystem::path results_dir() {
  if (const char* env = std::getenv("DFL_RESULTS_DIR"); env && *env) return env;
  return "results";
}

std::vector<ExperimentResult> load_results(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.path().extension() == ".json" && name.find(".solution.") == std::string::npos)
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ExperimentResult> out;
  for (const auto& f : files) out.push_back(load_result(f));
  return out;
}

std::vector<TableRow> aggregate(const std::vector<ExperimentResult>& results) {
  std::map<std::string, std::vector<const ExperimentResult*>> by_method;
  std::map<std::string, std::vector<const ExperimentResult*>> by_instance;
  for (const auto& r : results) {
    by_method[r.method].push_back(&r);
    by_instance[r.dataset + "/" + r.instance].push_back(&r);
  }

  std::map<std::string, int> wins, entered;
  for (const auto& [key, group] : by_instance) {
    const bool maximize = group.front()->task != "facility";
    double best = maximize ? -INFINITY : INFINITY;
    for (const auto* r : group)
      best = maximize ? std::max(best, r->objective_full) : std::min(best, r->objective_full);
    std::set<std::string> winners, present;
    for (const auto* r : group) {
      present.insert(r->method);
      if (std::abs(r->objective_full - best) <= kTieTol) winners.insert(r->method);
    }
    for (const auto& m : present) ++entered[m];
    for (const auto& m : winners) ++wins[m];
  }

  std::vector<TableRow> rows;
  for (const auto& [method, group] : by_method) {
    TableRow row;
    row.method = method;
    row.runs = static_cast<int>(group.size());
    double sum = 0.0;
    int finite = 0;
    for (const auto* r : group)
      if (std::isfinite(r->objective_full)) {
        sum += r->objective_full;
        ++finite;
      }
    if (finite > 0) row.mean_objective = sum / finite;
    if (entered[method] > 0) row.top_fraction = static_cast<double>(wins[method]) / entered[method];
    rows.push_back(row);
  }
  return rows;
}

void write_table_csv(const std::vector<TableRow>& rows, std::ostream& os) {
  os << "method,avg,top_pct,runs\n";
  for (const auto& r : rows) {
    os << r.method << ',' << fmt(r.mean_objective, 6) << ','
       << fmt(r.top_fraction ? std::optional<double>(*r.top_fraction * 100.0) : std::nullopt, 1) << ','
       << r.runs << '\n';
  }
}

void write_table_markdown(const std::vector<TableRow>& rows, std::ostream& os) {
  os << "| method | Avg. | % | runs |\n|---|---|---|---|\n";
  for (const auto& r : rows) {
    os << "| " << r.method << " | " << fmt(r.mean_objective, 4) << " | "
       << fmt(r.top_fraction ? std::optional<double>(*r.top_fraction * 100.0) : std::nullopt, 1)
       << " | " << r.runs << " |\n";
  }
}

}  // namespace dfl
