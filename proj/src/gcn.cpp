#include "dfl/gcn.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace dfl {
namespace {

constexpr int kCheckpointVersion = 1;

Tensor glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(rows, cols);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

nlohmann::json tensor_json(const Tensor& t) {
  return {{"rows", t.rows()}, {"cols", t.cols()},
          {"values", std::vector<double>(t.values().begin(), t.values().end())}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
  return Tensor(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("values").get<std::vector<double>>());
}

}  // namespace

GcnParams init_gcn_params(std::size_t d, std::size_t h, std::size_t p, std::uint64_t seed,
                          double dropout_p) {
  if (d == 0 || h == 0 || p == 0) throw std::invalid_argument("init_gcn_params: zero dimension");
  std::mt19937_64 rng(seed);
  GcnParams params;
  params.w1 = glorot(d, h, rng);
  params.w2 = glorot(h, p, rng);
  params.dropout_p = dropout_p;
  return params;
}

GcnOutput gcn_forward(const Tensor& adj, const Tensor& x, const GcnParams& params, bool train_mode,
                      std::uint64_t dropout_seed) {
  if (adj.rows() != adj.cols() || adj.rows() != x.rows()) {
    throw std::invalid_argument("gcn_forward: adjacency " + shape_string(adj) +
                                " does not match features " + shape_string(x));
  }
  if (x.cols() != params.input_dim()) {
    throw std::invalid_argument("gcn_forward: features " + shape_string(x) +
                                " do not match first-layer weights " + shape_string(params.w1));
  }
  const double p = train_mode ? params.dropout_p : 0.0;
  GcnOutput out{ad::Var{}, ad::parameter(params.w1), ad::parameter(params.w2)};
  const ad::Var a = ad::constant(adj);
  ad::Var h = ad::dropout(ad::constant(x), p, dropout_seed);
  h = ad::relu(ad::matmul(a, ad::matmul(h, out.w1)));
  h = ad::dropout(h, p, dropout_seed ^ 0x9e3779b97f4a7c15ULL);
  out.embeddings = ad::matmul(a, ad::matmul(h, out.w2));
  return out;
}

void apply_gradients(Adam& opt, GcnParams& params, const GcnOutput& out) {
  Tensor* slots[] = {&params.w1, &params.w2};
  const Tensor grads[] = {out.w1.grad(), out.w2.grad()};
  opt.step(slots, grads);
}

void save_gcn_checkpoint(const GcnParams& params, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "dfl-gcn-checkpoint";
  j["version"] = kCheckpointVersion;
  j["dropout"] = params.dropout_p;
  j["w1"] = tensor_json(params.w1);
  j["w2"] = tensor_json(params.w2);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

GcnParams load_gcn_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const auto j = nlohmann::json::parse(in);
  if (j.value("format", "") != "dfl-gcn-checkpoint" || j.value("version", 0) != kCheckpointVersion) {
    throw std::runtime_error(path.string() + ": not a version " +
                             std::to_string(kCheckpointVersion) + " GCN checkpoint");
  }
  GcnParams params;
  params.w1 = tensor_from_json(j.at("w1"));
  params.w2 = tensor_from_json(j.at("w2"));
  params.dropout_p = j.at("dropout").get<double>();
  if (params.w1.cols() != params.w2.rows())
    throw std::runtime_error(path.string() + ": inconsistent layer shapes");
  return params;
}

}  // namespace dfl
