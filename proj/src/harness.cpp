#include "dfl/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "dfl/adam.hpp"
#include "dfl/gradcheck.hpp"

namespace dfl {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class T>
T take(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config field '" + key + "' in " + where);
}

nlohmann::json dataset_json(const DatasetSpec& d) {
  nlohmann::json j{{"name", d.name}};
  if (d.edges) j["edges"] = d.edges->string();
  if (d.features) j["features"] = d.features->string();
  if (d.sbm) {
    j["sbm"] = {{"blocks", d.sbm->blocks}, {"p_in", d.sbm->p_in}, {"p_out", d.sbm->p_out},
                {"seed", d.sbm->seed}};
  }
  return j;
}

DatasetSpec dataset_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("dataset entries must be objects");
  reject_unknown(j, {"name", "edges", "features", "sbm"}, "dataset");
  DatasetSpec d;
  d.name = take<std::string>(j, "name", "");
  if (j.contains("edges")) d.edges = take<std::string>(j, "edges", "");
  if (j.contains("features")) d.features = take<std::string>(j, "features", "");
  if (j.contains("sbm")) {
    const auto& s = j["sbm"];
    reject_unknown(s, {"blocks", "p_in", "p_out", "seed"}, "dataset.sbm");
    SbmSpec spec;
    spec.blocks = take(s, "blocks", spec.blocks);
    spec.p_in = take(s, "p_in", spec.p_in);
    spec.p_out = take(s, "p_out", spec.p_out);
    spec.seed = take(s, "seed", spec.seed);
    d.sbm = spec;
  }
  if (d.name.empty()) d.name = d.edges ? d.edges->stem().string() : "sbm";
  return d;
}

struct GraphData {
  Tensor adj;
  Tensor modularity;
  double edges = 0.0;
  DistanceTable dist;
  kernels::SortedDistances table;
};

GraphData prepare(const Graph& g, Task task) {
  GraphData d;
  d.adj = normalized_adjacency(g);
  if (task == Task::community) {
    d.modularity = modularity_matrix(g);
    d.edges = static_cast<double>(g.num_edges());
  } else {
    d.dist = all_pairs_bfs(g);
    d.table = sort_distances(d.dist, default_empty_distance(d.dist));
  }
  return d;
}

std::string strip_prefix(const std::string& method, const std::string& prefix) {
  return method.rfind(prefix, 0) == 0 ? method.substr(prefix.size()) : method;
}

ExperimentResult base_result(const Problem& p, const RunConfig& cfg) {
  ExperimentResult r;
  r.method = cfg.method;
  r.task = cfg.task;
  r.mode = cfg.mode;
  r.dataset = cfg.dataset.name;
  r.instance = p.name;
  r.seed = cfg.seed;
  r.config = to_json(cfg);
  return r;
}

void score_partition(ExperimentResult& r, const Problem& p, std::vector<int> labels) {
  r.objective_full = modularity_value(labels, p.full.graph());
  r.objective_train = modularity_value(labels, p.observed.graph());
  r.communities = count_communities(labels);
  r.solution = std::move(labels);
}

void score_selection(ExperimentResult& r, const Problem& p, std::vector<int> nodes) {
  r.objective_full = facility_value(nodes, all_pairs_bfs(p.full.graph()));
  r.objective_train = facility_value(nodes, all_pairs_bfs(p.observed.graph()));
  r.solution = std::move(nodes);
}

std::vector<int> round_selection(const std::vector<double>& x, const Graph& observed,
                                 const RunConfig& cfg) {
  const DistanceTable dist = all_pairs_bfs(observed);
  return pipage_round(
      x, cfg.rounding_trials, [&](const std::vector<int>& s) { return facility_value(s, dist); },
      cfg.seed);
}

std::size_t predicted_extra_edges(const Problem& p, const RunConfig& cfg) {
  if (cfg.mode == "opt-only") return 0;
  const double m = static_cast<double>(p.observed.graph().num_edges());
  return static_cast<std::size_t>(std::llround(m * cfg.fraction_held / (1.0 - cfg.fraction_held)));
}

}  // namespace

// -- config ------------------------------------------------------------------

double RunConfig::effective_beta() const {
  if (beta) return *beta;
  return task == "facility" ? 30.0 : 50.0;
}

double RunConfig::effective_eta() const { return eta ? *eta : effective_beta(); }

Task RunConfig::task_kind() const { return task == "facility" ? Task::facility : Task::community; }

ClusterConfig RunConfig::cluster_config(int updates) const {
  ClusterConfig c;
  c.k = k;
  c.beta = effective_beta();
  c.max_iters = updates;
  c.tol = 0.0;
  return c;
}

SelectionConfig RunConfig::selection_config() const {
  SelectionConfig s;
  s.k = k;
  s.eta = effective_eta();
  s.gamma = gamma;
  s.mapping = squash == "centered" ? SquashMapping::centered : SquashMapping::shifted;
  return s;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (task != "community" && task != "facility") fail("task must be community or facility");
  static const std::set<std::string> modes{"learn+opt", "opt-only", "inductive",
                                           "finetune",  "finetune-only", "1-train"};
  if (!modes.count(mode)) fail("unknown mode '" + mode + "'");
  if (k < 1) fail("k must be >= 1");
  if (effective_beta() <= 0.0) fail("beta must be > 0");
  if (effective_eta() <= 0.0) fail("eta must be > 0");
  if (lr <= 0.0) fail("lr must be > 0");
  if (iters < 0 || finetune_iters < 0) fail("iteration counts must be >= 0");
  if (kmeans.initial < 1 || kmeans.later < 1) fail("kmeans updates must be >= 1");
  if (final_kmeans_iters < 1) fail("final_kmeans_iters must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0,1)");
  if (hidden < 1 || embed < 1) fail("hidden and embed must be >= 1");
  if (fraction_held <= 0.0 || fraction_held >= 1.0) fail("fraction_held must be in (0,1)");
  if (rounding_trials < 1) fail("rounding_trials must be >= 1");
  if (squash != "shifted" && squash != "centered") fail("squash must be shifted or centered");
  if (backward != "approximate" && backward != "exact") fail("backward must be approximate or exact");
  if (fallback_features != "degree" && fallback_features != "identity" && fallback_features != "random" &&
      fallback_features != "spectral")
    fail("fallback_features must be degree, identity, random or spectral");
  if (link.negative_ratio < 1) fail("link.negative_ratio must be >= 1");
  if (link.edge_dropout < 0.0 || link.edge_dropout >= 1.0) fail("link.edge_dropout must be in [0,1)");
}

RunConfig inductive_defaults() {
  RunConfig c;
  c.mode = "inductive";
  c.beta = 70.0;
  c.lr = 0.001;
  c.dropout = 0.2;
  c.iters = 70;
  c.kmeans = {10, 10, 0};
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j{{"task", c.task},
                   {"mode", c.mode},
                   {"method", c.method},
                   {"k", c.k},
                   {"beta", c.effective_beta()},
                   {"gamma", c.gamma},
                   {"eta", c.effective_eta()},
                   {"lr", c.lr},
                   {"iters", c.iters},
                   {"kmeans", {{"initial", c.kmeans.initial}, {"later", c.kmeans.later},
                               {"switch_iter", c.kmeans.switch_iter}}},
                   {"final_kmeans_iters", c.final_kmeans_iters},
                   {"dropout", c.dropout},
                   {"hidden", c.hidden},
                   {"embed", c.embed},
                   {"seed", c.seed},
                   {"fraction_held", c.fraction_held},
                   {"rounding_trials", c.rounding_trials},
                   {"facility_temperature", c.facility_temperature},
                   {"squash", c.squash},
                   {"backward", c.backward},
                   {"link", {{"hidden", c.link.hidden}, {"embed", c.link.embed},
                             {"epochs", c.link.epochs}, {"lr", c.link.lr},
                             {"negative_ratio", c.link.negative_ratio},
                             {"edge_dropout", c.link.edge_dropout}}},
                   {"dataset", dataset_json(c.dataset)},
                   {"finetune_iters", c.finetune_iters},
                   {"fallback_features", c.fallback_features}};
  j["train_graphs"] = nlohmann::json::array();
  for (const auto& d : c.train_graphs) j["train_graphs"].push_back(dataset_json(d));
  j["test_graphs"] = nlohmann::json::array();
  for (const auto& d : c.test_graphs) j["test_graphs"].push_back(dataset_json(d));
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"task", "mode", "method", "k", "beta", "gamma", "eta", "lr", "iters", "kmeans",
                  "final_kmeans_iters", "dropout", "hidden", "embed", "seed", "fraction_held",
                  "rounding_trials", "facility_temperature", "squash", "backward", "link", "dataset",
                  "train_graphs", "test_graphs", "finetune_iters", "fallback_features"},
                 "config");
  const std::string mode = take<std::string>(j, "mode", "learn+opt");
  RunConfig c = (mode == "inductive" || mode == "finetune" || mode == "finetune-only" || mode == "1-train")
                    ? inductive_defaults()
                    : RunConfig{};
  c.mode = mode;
  c.task = take(j, "task", c.task);
  c.method = take(j, "method", c.method);
  c.k = take(j, "k", c.k);
  if (j.contains("beta")) c.beta = take(j, "beta", 0.0);
  c.gamma = take(j, "gamma", c.gamma);
  if (j.contains("eta")) c.eta = take(j, "eta", 0.0);
  c.lr = take(j, "lr", c.lr);
  c.iters = take(j, "iters", c.iters);
  if (j.contains("kmeans")) {
    const auto& km = j["kmeans"];
    reject_unknown(km, {"initial", "later", "switch_iter"}, "kmeans");
    c.kmeans.initial = take(km, "initial", c.kmeans.initial);
    c.kmeans.later = take(km, "later", c.kmeans.later);
    c.kmeans.switch_iter = take(km, "switch_iter", c.kmeans.switch_iter);
  }
  c.final_kmeans_iters = take(j, "final_kmeans_iters", c.final_kmeans_iters);
  c.dropout = take(j, "dropout", c.dropout);
  c.hidden = take(j, "hidden", c.hidden);
  c.embed = take(j, "embed", c.embed);
  c.seed = take(j, "seed", c.seed);
  c.fraction_held = take(j, "fraction_held", c.fraction_held);
  c.rounding_trials = take(j, "rounding_trials", c.rounding_trials);
  c.facility_temperature = take(j, "facility_temperature", c.facility_temperature);
  c.squash = take(j, "squash", c.squash);
  c.backward = take(j, "backward", c.backward);
  if (j.contains("link")) {
    const auto& l = j["link"];
    reject_unknown(l, {"hidden", "embed", "epochs", "lr", "negative_ratio", "edge_dropout"}, "link");
    c.link.hidden = take(l, "hidden", c.link.hidden);
    c.link.embed = take(l, "embed", c.link.embed);
    c.link.epochs = take(l, "epochs", c.link.epochs);
    c.link.lr = take(l, "lr", c.link.lr);
    c.link.negative_ratio = take(l, "negative_ratio", c.link.negative_ratio);
    c.link.edge_dropout = take(l, "edge_dropout", c.link.edge_dropout);
  }
  if (j.contains("dataset")) c.dataset = dataset_from_json(j["dataset"]);
  for (const char* key : {"train_graphs", "test_graphs"}) {
    if (!j.contains(key)) continue;
    if (!j[key].is_array()) throw ConfigError(std::string(key) + " must be an array");
    auto& dst = std::string(key) == "train_graphs" ? c.train_graphs : c.test_graphs;
    for (const auto& d : j[key]) dst.push_back(dataset_from_json(d));
  }
  c.finetune_iters = take(j, "finetune_iters", c.finetune_iters);
  c.fallback_features = take(j, "fallback_features", c.fallback_features);
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

// -- problems ----------------------------------------------------------------

Graph load_dataset(const DatasetSpec& spec) {
  if (spec.sbm) return generate_sbm(spec.sbm->blocks, spec.sbm->p_in, spec.sbm->p_out, spec.sbm->seed);
  if (!spec.edges) throw ConfigError("dataset '" + spec.name + "' has neither edges nor sbm");
  EdgeListOptions opts;
  opts.features = spec.features;
  return load_edge_list(*spec.edges, opts);
}

Problem make_problem(const Graph& g_in, const RunConfig& cfg, const std::string& name) {
  Graph g = cfg.task == "facility" ? largest_connected_component(g_in).graph : g_in;
  Problem p;
  p.name = name;
  if (cfg.mode == "opt-only") {
    p.observed = ObservedGraph(g);
  } else {
    const EdgeSplit split = split_edges(g, cfg.fraction_held, cfg.seed);
    p.observed = ObservedGraph(g.with_edges(split.train_edges));
    p.held_count = split.held_edges.size();
  }
  if (g.features()) {
    p.features = *g.features();
  } else if (cfg.fallback_features == "identity") {
    p.features = Tensor::identity(static_cast<std::size_t>(g.num_nodes()));
  } else if (cfg.fallback_features == "random") {
    p.features = random_tensor(static_cast<std::size_t>(g.num_nodes()), 64, cfg.seed ^ 0xfea7ULL);
  } else if (cfg.fallback_features == "spectral") {
    p.features = spectral_features(p.observed.graph(), 32, 50, cfg.seed ^ 0xfea7ULL);
  } else {
    p.features = degree_bucket_features(p.observed.graph());
  }
  p.full = FullGraph(std::move(g));
  return p;
}

// -- ClusterNet --------------------------------------------------------------

TrainedClusterNet train_clusternet(const std::vector<const ObservedGraph*>& graphs,
                                   const std::vector<const Tensor*>& features, const RunConfig& cfg,
                                   std::optional<GcnParams> init) {
  if (graphs.empty() || graphs.size() != features.size())
    throw std::invalid_argument("train_clusternet: need one feature matrix per graph");
  const Task task = cfg.task_kind();
  const BackwardMode bmode = cfg.backward == "exact" ? BackwardMode::exact : BackwardMode::approximate;
  std::vector<GraphData> data;
  for (const auto* g : graphs) data.push_back(prepare(g->graph(), task));

  TrainedClusterNet out;
  out.params = init ? *init
                    : init_gcn_params(features[0]->cols(), cfg.hidden, cfg.embed, cfg.seed, cfg.dropout);
  out.params.dropout_p = cfg.dropout;
  out.centers.resize(graphs.size());
  Adam opt(AdamConfig{.lr = cfg.lr});
  const SelectionConfig sel = cfg.selection_config();

  for (int it = 0; it < cfg.iters; ++it) {
    Tensor g1(out.params.w1.rows(), out.params.w1.cols());
    Tensor g2(out.params.w2.rows(), out.params.w2.cols());
    double total = 0.0;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
      const std::uint64_t dseed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(it) * 131ULL + gi;
      const GcnOutput enc = gcn_forward(data[gi].adj, *features[gi], out.params, true, dseed);
      const ad::Var emb = ad::l2_normalize_rows(enc.embeddings);
      if (out.centers[gi].empty()) out.centers[gi] = kmeanspp_init(emb.value(), cfg.k, cfg.seed + gi);
      const ClusterOutput cl = cluster_layer(emb, out.centers[gi], cfg.cluster_config(cfg.kmeans.at(it)), bmode);
      out.centers[gi] = cl.state.mu;

      ad::Var loss;
      if (task == Task::community) {
        loss = ad::scale(modularity_loss(cl.r, data[gi].modularity, data[gi].edges), -1.0);
      } else {
        const SoftSelection s = select_from_clusters(emb, cl.mu, sel);
        loss = expected_facility_loss(s.x, data[gi].table, cfg.facility_temperature);
      }
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite loss at iteration " + std::to_string(it),
                             {{"iteration", it},
                              {"graph", gi},
                              {"loss", nullptr},
                              {"w1_norm", out.params.w1.frobenius_norm()},
                              {"w2_norm", out.params.w2.frobenius_norm()},
                              {"centers", to_json(cl.state)}});
      }
      total += value;
      ad::backward(loss);
      g1 += enc.w1.grad();
      g2 += enc.w2.grad();
    }
    Tensor* slots[] = {&out.params.w1, &out.params.w2};
    const Tensor grads[] = {g1, g2};
    opt.step(slots, grads);
    ++out.gradient_updates;
    out.losses.push_back(total);
  }
  return out;
}

ExperimentResult evaluate_clusternet(const Problem& p, const RunConfig& cfg, const GcnParams& params,
                                     const std::optional<Tensor>& warm_centers) {
  ExperimentResult r = base_result(p, cfg);
  const auto t0 = Clock::now();
  const Graph& obs = p.observed.graph();
  const GcnOutput enc = gcn_forward(normalized_adjacency(obs), p.features, params, false);
  const ad::Var emb = ad::l2_normalize_rows(ad::detach(enc.embeddings));
  ClusterConfig ccfg = cfg.cluster_config(cfg.final_kmeans_iters);
  ccfg.tol = 1e-4;
  const Tensor init = warm_centers && !warm_centers->empty() ? *warm_centers
                                                             : kmeanspp_init(emb.value(), cfg.k, cfg.seed);
  const ClusterState state = kmeans_forward(emb.value(), init, ccfg);
  if (!state.r.all_finite()) {
    throw NumericalError("non-finite assignments at evaluation", {{"centers", to_json(state)}});
  }
  if (cfg.task_kind() == Task::community) {
    score_partition(r, p, round_partition(state.r));
  } else {
    const SoftSelection s = select_from_clusters(emb, ad::constant(state.mu), cfg.selection_config());
    const auto xs = s.x.value().values();
    score_selection(r, p, round_selection(std::vector<double>(xs.begin(), xs.end()), obs, cfg));
  }
  r.runtime_forward_s = seconds_since(t0);
  return r;
}

ExperimentResult run_clusternet(const Problem& p, const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const TrainedClusterNet trained = train_clusternet({&p.observed}, {&p.features}, cfg);
  const double train_s = seconds_since(t0);
  ExperimentResult r = evaluate_clusternet(p, cfg, trained.params, trained.centers[0]);
  r.method = "clusternet";
  r.runtime_train_s = train_s;
  r.train_losses = trained.losses;
  return r;
}

// -- baselines ---------------------------------------------------------------

ExperimentResult run_baseline(const Problem& p, const RunConfig& cfg) {
  ExperimentResult r = base_result(p, cfg);
  const std::string algo = strip_prefix(cfg.method, "train-");
  const Graph& obs = p.observed.graph();
  const auto t0 = Clock::now();
  const bool community = cfg.task_kind() == Task::community;

  if (algo == "gcn-e2e") {
    E2eHyper h;
    h.hidden = cfg.hidden;
    h.iters = cfg.iters;
    h.lr = cfg.lr;
    h.dropout = cfg.dropout;
    h.gamma = cfg.gamma;
    h.facility_temperature = cfg.facility_temperature;
    const Tensor decision = gcn_e2e(obs, p.features, cfg.k, cfg.task_kind(), cfg.seed, h);
    r.runtime_train_s = seconds_since(t0);
    const auto t1 = Clock::now();
    if (community) {
      score_partition(r, p, round_partition(decision));
    } else {
      const auto xs = decision.values();
      score_selection(r, p, round_selection(std::vector<double>(xs.begin(), xs.end()), obs, cfg));
    }
    r.runtime_forward_s = seconds_since(t1);
    return r;
  }

  if (community) {
    std::vector<int> labels;
    if (algo == "cnm") labels = cnm(obs, cfg.k).labels;
    else if (algo == "newman") labels = newman_leading_eigenvector(obs, cfg.k).labels;
    else if (algo == "sc") labels = spectral_clustering_modularity(obs, cfg.k, cfg.seed).labels;
    else throw ConfigError("method '" + cfg.method + "' is not a community baseline");
    r.runtime_forward_s = seconds_since(t0);
    score_partition(r, p, std::move(labels));
  } else {
    const DistanceTable dist = all_pairs_bfs(obs);
    std::vector<int> nodes;
    if (algo == "greedy") nodes = greedy_facility(dist, cfg.k);
    else if (algo == "gonzalez") nodes = gonzalez(dist, cfg.k, cfg.seed);
    else throw ConfigError("method '" + cfg.method + "' is not a facility baseline");
    r.runtime_forward_s = seconds_since(t0);
    score_selection(r, p, std::move(nodes));
  }
  return r;
}

ExperimentResult run_twostage(const Problem& p, const RunConfig& cfg) {
  ExperimentResult r = base_result(p, cfg);
  const std::string algo = strip_prefix(cfg.method, "2stage-");
  const Graph& obs = p.observed.graph();
  const auto t0 = Clock::now();
  const LinkPredictor model = train_link_predictor(obs, p.features, cfg.link, cfg.seed);
  r.runtime_train_s = seconds_since(t0);
  r.train_losses = model.loss_history;

  const auto t1 = Clock::now();
  const PredictionMode pmode = algo == "sc" ? PredictionMode::expected : PredictionMode::top_m;
  r.prediction_mode = to_string(pmode);
  const PredictedGraph pg = predict_adjacency(model, obs, predicted_extra_edges(p, cfg), pmode);
  if (cfg.task_kind() == Task::community) {
    std::vector<int> labels;
    if (algo == "cnm") labels = cnm(pg.graph, cfg.k).labels;
    else if (algo == "newman") labels = newman_leading_eigenvector(pg.graph, cfg.k).labels;
    else if (algo == "sc") labels = spectral_clustering(weighted_modularity_matrix(pg.probs), cfg.k, cfg.seed);
    else throw ConfigError("method '" + cfg.method + "' is not a community baseline");
    r.runtime_forward_s = seconds_since(t1);
    score_partition(r, p, std::move(labels));
  } else {
    const DistanceTable dist = all_pairs_bfs(pg.graph);
    std::vector<int> nodes;
    if (algo == "greedy") nodes = greedy_facility(dist, cfg.k);
    else if (algo == "gonzalez") nodes = gonzalez(dist, cfg.k, cfg.seed);
    else throw ConfigError("method '" + cfg.method + "' is not a facility baseline");
    r.runtime_forward_s = seconds_since(t1);
    score_selection(r, p, std::move(nodes));
  }

  // Held edges are read here, after every decision has been made.
  const Graph& full = p.full.graph();
  std::vector<Edge> held;
  for (const auto& [u, v] : full.edges())
    if (!obs.has_edge(u, v)) held.push_back({u, v});
  if (!held.empty()) r.auc = link_auc(model, obs, held, cfg.seed + 1);
  return r;
}

ExperimentResult run_method(const Problem& p, const RunConfig& cfg) {
  if (cfg.method == "clusternet") return run_clusternet(p, cfg);
  if (cfg.method.rfind("2stage-", 0) == 0) return run_twostage(p, cfg);
  const std::string algo = strip_prefix(cfg.method, "train-");
  const auto names = baseline_names();
  if (std::find(names.begin(), names.end(), algo) != names.end()) return run_baseline(p, cfg);
  std::string valid;
  for (const auto& m : method_names()) valid += (valid.empty() ? "" : ", ") + m;
  throw ConfigError("unknown method '" + cfg.method + "'; valid: " + valid);
}

std::vector<std::string> method_names() {
  return {"clusternet",   "gcn-e2e",        "train-cnm",     "train-newman", "train-sc",
          "train-greedy", "train-gonzalez", "2stage-cnm",    "2stage-newman", "2stage-sc",
          "2stage-greedy", "2stage-gonzalez"};
}

// -- inductive -----------------------------------------------------------------

std::vector<Problem> inductive_train_problems(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.mode = "opt-only";
  std::vector<Problem> out;
  for (std::size_t i = 0; i < cfg.train_graphs.size(); ++i)
    out.push_back(make_problem(load_dataset(cfg.train_graphs[i]), c,
                               cfg.train_graphs[i].name + "#" + std::to_string(i)));
  return out;
}

std::vector<Problem> inductive_test_problems(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.mode = "learn+opt";
  std::vector<Problem> out;
  for (std::size_t i = 0; i < cfg.test_graphs.size(); ++i) {
    c.seed = cfg.seed + i;
    out.push_back(make_problem(load_dataset(cfg.test_graphs[i]), c,
                               cfg.test_graphs[i].name + "#" + std::to_string(i)));
  }
  return out;
}

std::vector<ExperimentResult> run_inductive(const RunConfig& cfg) {
  if (cfg.test_graphs.empty()) throw ConfigError("inductive run needs test_graphs");
  const bool needs_training = cfg.mode != "finetune-only";
  if (needs_training && cfg.train_graphs.empty()) throw ConfigError("inductive run needs train_graphs");

  std::optional<TrainedClusterNet> shared;
  double train_s = 0.0;
  if (needs_training) {
    std::vector<Problem> train = inductive_train_problems(cfg);
    if (cfg.mode == "1-train") train.resize(1);
    std::vector<const ObservedGraph*> graphs;
    std::vector<const Tensor*> feats;
    for (const auto& p : train) {
      graphs.push_back(&p.observed);
      feats.push_back(&p.features);
    }
    const auto t0 = Clock::now();
    shared = train_clusternet(graphs, feats, cfg);
    train_s = seconds_since(t0);
  }

  const std::string label = cfg.mode == "inductive" ? "clusternet"
                            : cfg.mode == "1-train"  ? "clusternet-1train"
                                                     : "clusternet-" + cfg.mode;
  std::vector<ExperimentResult> results;
  for (const Problem& p : inductive_test_problems(cfg)) {
    ExperimentResult r;
    if (cfg.mode == "inductive" || cfg.mode == "1-train") {
      r = evaluate_clusternet(p, cfg, shared->params);
      r.runtime_train_s = train_s;
      r.test_gradient_updates = 0;
    } else {
      RunConfig ft = cfg;
      ft.iters = cfg.finetune_iters;
      ft.seed = cfg.seed;
      const auto t0 = Clock::now();
      const TrainedClusterNet tuned =
          train_clusternet({&p.observed}, {&p.features}, ft,
                           shared ? std::optional<GcnParams>(shared->params) : std::nullopt);
      const double tune_s = seconds_since(t0);
      r = evaluate_clusternet(p, cfg, tuned.params, tuned.centers[0]);
      r.runtime_train_s = train_s + tune_s;
      r.train_losses = tuned.losses;
      r.test_gradient_updates = tuned.gradient_updates;
    }
    r.method = label;
    r.dataset = "inductive";
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace dfl
