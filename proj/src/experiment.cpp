// Copyright 2026 The CFRR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cfrr/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "cfrr/matching.hpp"
#include "cfrr/mlp.hpp"

namespace cfrr {

namespace fs = std::filesystem;

namespace {

std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt_f4(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  return out;
}

// Deterministic fingerprint of a log's content.
std::string log_hash(const ExposureLog& log) {
  std::ostringstream ss;
  ss << log.pair_space.side_u << ';' << log.pair_space.side_v << ';' << log.pair_space.symmetric
     << ';';
  for (const auto& it : log.interactions) {
    ss << it.u << ',' << it.v << ',' << it.exposed << ',';
    if (it.outcome) ss << fmt_g17(*it.outcome);
    ss << ',' << it.timestamp << ';';
  }
  return hash_hex(fnv1a64(ss.str()));
}

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t index) {
  return RngStream(seed).derive(index).seed();
}

// Seed-index registry for the per-run derived streams.
enum SeedSlot : std::uint64_t {
  kSlotDataset = 10,
  kSlotSplit = 11,
  kSlotTrain = 12,
  kSlotDegrade = 13,
  kSlotUnexposed = 14,
  kSlotEval = 15,
};

nlohmann::json train_config_to_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate},
          {"embedding_dim", t.embedding_dim},
          {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},
          {"patience", t.patience},
          {"joint_propensity", t.joint_propensity},
          {"joint_refit_rounds", t.joint_refit_rounds},
          {"valid_user_cap", t.valid_user_cap},
          {"valid_candidates", t.valid_candidates},
          {"reg_lambda", t.objective.reg_lambda},
          {"clip_c", t.objective.clip_c},
          {"dr_uniform_sample_size", t.objective.dr_uniform_sample_size},
          {"dr_resample_per_batch", t.objective.dr_resample_per_batch},
          {"ips_normalization", t.objective.ips_normalization == IpsNormalization::kBatchMean
                                    ? "batch_mean"
                                    : "population"},
          {"outcome",
           {{"hidden", t.outcome.hidden},
            {"learning_rate", t.outcome.learning_rate},
            {"max_epochs", t.outcome.max_epochs},
            {"batch_size", t.outcome.batch_size},
            {"valid_fraction", t.outcome.valid_fraction},
            {"patience", t.outcome.patience}}}};
}

void train_config_from_json(const nlohmann::json& j, TrainConfig* t) {
  t->learning_rate = get_or(j, "learning_rate", t->learning_rate);
  t->embedding_dim = get_or(j, "embedding_dim", t->embedding_dim);
  t->batch_size = get_or(j, "batch_size", t->batch_size);
  t->max_epochs = get_or(j, "max_epochs", t->max_epochs);
  t->patience = get_or(j, "patience", t->patience);
  t->joint_propensity = get_or(j, "joint_propensity", t->joint_propensity);
  t->joint_refit_rounds = get_or(j, "joint_refit_rounds", t->joint_refit_rounds);
  t->valid_user_cap = get_or(j, "valid_user_cap", t->valid_user_cap);
  t->valid_candidates = get_or(j, "valid_candidates", t->valid_candidates);
  t->objective.reg_lambda = get_or(j, "reg_lambda", t->objective.reg_lambda);
  t->objective.clip_c = get_or(j, "clip_c", t->objective.clip_c);
  t->objective.dr_uniform_sample_size =
      get_or(j, "dr_uniform_sample_size", t->objective.dr_uniform_sample_size);
  t->objective.dr_resample_per_batch =
      get_or(j, "dr_resample_per_batch", t->objective.dr_resample_per_batch);
  if (j.contains("ips_normalization")) {
    const auto s = j.at("ips_normalization").get<std::string>();
    if (s == "batch_mean")
      t->objective.ips_normalization = IpsNormalization::kBatchMean;
    else if (s == "population")
      t->objective.ips_normalization = IpsNormalization::kPopulation;
    else
      throw ConfigError("unknown ips_normalization: " + s);
  }
  if (j.contains("outcome")) {
    const auto& o = j.at("outcome");
    t->outcome.hidden = get_or(o, "hidden", t->outcome.hidden);
    t->outcome.learning_rate = get_or(o, "learning_rate", t->outcome.learning_rate);
    t->outcome.max_epochs = get_or(o, "max_epochs", t->outcome.max_epochs);
    t->outcome.batch_size = get_or(o, "batch_size", t->outcome.batch_size);
    t->outcome.valid_fraction = get_or(o, "valid_fraction", t->outcome.valid_fraction);
    t->outcome.patience = get_or(o, "patience", t->outcome.patience);
  }
}

nlohmann::json propensity_spec_to_json(const PropensitySpec& p) {
  return {{"kind", p.kind == PropensityKind::kGbdt ? "gbdt" : "logistic"},
          {"n_rounds", p.gbdt.n_rounds},
          {"learning_rate", p.gbdt.learning_rate},
          {"max_depth", p.gbdt.max_depth},
          {"leaf_reg", p.gbdt.leaf_reg},
          {"floor", p.floor},
          {"unexposed_ratio", p.unexposed_ratio},
          {"feature_mode",
           p.feature_mode == PropensityFeatureMode::kFull ? "full" : "degraded"},
          {"degrade_noise", p.degrade_noise}};
}

void propensity_spec_from_json(const nlohmann::json& j, PropensitySpec* p) {
  if (j.contains("kind")) {
    const auto s = j.at("kind").get<std::string>();
    if (s == "gbdt")
      p->kind = PropensityKind::kGbdt;
    else if (s == "logistic")
      p->kind = PropensityKind::kLogistic;
    else
      throw ConfigError("unknown propensity kind: " + s);
  }
  p->gbdt.n_rounds = get_or(j, "n_rounds", p->gbdt.n_rounds);
  p->gbdt.learning_rate = get_or(j, "learning_rate", p->gbdt.learning_rate);
  p->gbdt.max_depth = get_or(j, "max_depth", p->gbdt.max_depth);
  p->gbdt.leaf_reg = get_or(j, "leaf_reg", p->gbdt.leaf_reg);
  p->floor = get_or(j, "floor", p->floor);
  p->unexposed_ratio = get_or(j, "unexposed_ratio", p->unexposed_ratio);
  if (j.contains("feature_mode")) {
    const auto s = j.at("feature_mode").get<std::string>();
    if (s == "full")
      p->feature_mode = PropensityFeatureMode::kFull;
    else if (s == "degraded")
      p->feature_mode = PropensityFeatureMode::kDegraded;
    else
      throw ConfigError("unknown feature_mode: " + s);
  }
  p->degrade_noise = get_or(j, "degrade_noise", p->degrade_noise);
}

struct SeedDataset {
  ExposureLog log;
  std::string dataset_hash;
};

SeedDataset materialize_dataset(const ExperimentConfig& config, std::uint64_t seed) {
  SeedDataset out;
  if (config.dataset.kind == "synth") {
    SynthConfig sc = config.dataset.synth;
    sc.seed = derived_seed(seed, kSlotDataset);
    const LatentWorld world = generate_world(sc);
    out.log = simulate_log(world, sc);
  } else if (config.dataset.kind == "log") {
    std::uint32_t n = config.dataset.n_users;
    PairSpace probe = PairSpace::make_symmetric(UINT32_MAX);
    ExposureLog raw = read_log_csv(config.dataset.log_path, probe);
    if (n == 0) {
      for (const auto& it : raw.interactions) n = std::max({n, it.u + 1, it.v + 1});
    }
    raw.pair_space = PairSpace::make_symmetric(n);
    raw.validate();
    out.log = std::move(raw);
  } else {
    throw ConfigError("unknown dataset kind: " + config.dataset.kind);
  }
  out.dataset_hash = log_hash(out.log);
  return out;
}

struct PreparedRun {
  LogSplits splits;
  PairFeaturizer featurizer;
  ExposureLog propensity_log;  // exposed rows plus sampled unexposed
  std::optional<PropensityModel> propensity;
  double propensity_auc = 0.0;
  TrainConfig train_config;
};

TrainConfig effective_train_config(const ExperimentConfig& config, const MethodSpec& method,
                                   std::uint64_t seed) {
  TrainConfig t = config.train;
  train_config_from_json(method.train_override, &t);
  t.objective.kind = method.objective;
  t.seed = derived_seed(seed, kSlotTrain);
  return t;
}

PropensitySpec effective_propensity_spec(const ExperimentConfig& config,
                                         const MethodSpec& method) {
  PropensitySpec p = config.propensity;
  propensity_spec_from_json(method.propensity_override, &p);
  return p;
}

PreparedRun prepare_run(const ExperimentConfig& config, const MethodSpec& method,
                        std::uint64_t seed, const ExposureLog& log) {
  SplitSpec split = config.split;
  split.seed = derived_seed(seed, kSlotSplit);
  LogSplits splits = split_log(log, split);

  const PropensitySpec pspec = effective_propensity_spec(config, method);
  PairFeaturizer featurizer(splits.train, pspec.feature_mode, pspec.degrade_noise,
                            derived_seed(seed, kSlotDegrade));

  PreparedRun run{std::move(splits), std::move(featurizer), {}, std::nullopt, 0.0,
                  effective_train_config(config, method, seed)};

  if (method.objective != ObjectiveKind::kNaive) {
    // Exposure labels come from the full log (every exposed row is a
    // positive), unexposed rows are subsampled from the rest of the pair
    // space; features always come from the train split.
    run.propensity_log =
        sample_unexposed(log, pspec.unexposed_ratio, derived_seed(seed, kSlotUnexposed));
    PropensityFitConfig fit_config;
    fit_config.kind = pspec.kind;
    fit_config.gbdt = pspec.gbdt;
    fit_config.floor = pspec.floor;
    run.propensity = fit_propensity(run.propensity_log, run.featurizer, fit_config);

    std::vector<double> scores, labels;
    scores.reserve(run.propensity_log.size());
    for (const auto& it : run.propensity_log.interactions) {
      scores.push_back(run.propensity->predict_theta(run.featurizer, it.u, it.v));
      labels.push_back(it.exposed ? 1.0 : 0.0);
    }
    run.propensity_auc = auc_score(scores, labels);
  }
  return run;
}

void write_matching_csv(const ScoringModel& model, const MatchingSpec& spec,
                        std::uint32_t n_users, const std::string& path) {
  // Documented bipartition of the symmetric pool: even ids propose, odd ids
  // receive.
  std::vector<UserId> side_a, side_b;
  for (UserId u = 0; u < n_users; ++u) (u % 2 == 0 ? side_a : side_b).push_back(u);

  Matching matching;
  if (spec.algorithm == "gale_shapley") {
    const auto prefs_a = preferences_from_scores(model, side_a, side_b, spec.top_k);
    const auto prefs_b = preferences_from_scores(model, side_b, side_a, spec.top_k);
    matching = gale_shapley(prefs_a, prefs_b);
  } else if (spec.algorithm == "max_weight") {
    std::vector<std::vector<double>> weights(side_a.size(),
                                             std::vector<double>(side_b.size()));
    for (std::size_t i = 0; i < side_a.size(); ++i)
      for (std::size_t j = 0; j < side_b.size(); ++j)
        weights[i][j] = model.score(side_a[i], side_b[j]);
    matching = max_weight_matching(weights, spec.exact_threshold);
  } else {
    throw ConfigError("unknown matching algorithm: " + spec.algorithm);
  }

  auto out = open_out(path);
  out << "u,v,score\n";
  for (const auto& [a, b] : matching.pairs) {
    const UserId u = side_a[a], v = side_b[b];
    out << u << ',' << v << ',' << fmt_g17(model.score(u, v)) << '\n';
  }
  for (const int a : matching.unmatched_proposers) out << side_a[a] << ",,\n";
  for (const int b : matching.unmatched_receivers) out << side_b[b] << ",,\n";
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    c.dataset.kind = get_or<std::string>(d, "kind", "synth");
    if (d.contains("synth")) {
      const auto& s = d.at("synth");
      c.dataset.synth.n_users = get_or(s, "n_users", c.dataset.synth.n_users);
      c.dataset.synth.latent_dim = get_or(s, "latent_dim", c.dataset.synth.latent_dim);
      c.dataset.synth.target_log_size =
          get_or(s, "target_log_size", c.dataset.synth.target_log_size);
      c.dataset.synth.bias_strength = get_or(s, "bias_strength", c.dataset.synth.bias_strength);
      c.dataset.synth.popularity_spread =
          get_or(s, "popularity_spread", c.dataset.synth.popularity_spread);
      c.dataset.synth.target_match_rate =
          get_or(s, "target_match_rate", c.dataset.synth.target_match_rate);
    }
    c.dataset.log_path = get_or<std::string>(d, "log_path", "");
    c.dataset.n_users = get_or(d, "n_users", c.dataset.n_users);
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    const auto mode = get_or<std::string>(s, "mode", "random");
    if (mode == "random")
      c.split.mode = SplitMode::kRandom;
    else if (mode == "temporal")
      c.split.mode = SplitMode::kTemporal;
    else
      throw ConfigError("unknown split mode: " + mode);
    if (s.contains("fractions")) {
      const auto f = s.at("fractions").get<std::vector<double>>();
      if (f.size() != 3) throw ConfigError("split.fractions must have 3 entries");
      c.split.train_fraction = f[0];
      c.split.valid_fraction = f[1];
      c.split.test_fraction = f[2];
    }
  }
  if (!j.contains("methods")) throw ConfigError("config requires a methods list");
  for (const auto& mj : j.at("methods")) {
    MethodSpec m;
    if (mj.is_string()) {
      m.name = mj.get<std::string>();
      m.objective = objective_kind_from_string(m.name);
    } else {
      if (!mj.contains("objective") && !mj.contains("name"))
        throw ConfigError("method entries need a name or objective");
      const auto objective_name = mj.contains("objective")
                                      ? mj.at("objective").get<std::string>()
                                      : mj.at("name").get<std::string>();
      m.objective = objective_kind_from_string(objective_name);
      m.name = get_or<std::string>(mj, "name", objective_name);
      m.train_override = get_or(mj, "train", nlohmann::json::object());
      m.propensity_override = get_or(mj, "propensity", nlohmann::json::object());
    }
    c.methods.push_back(std::move(m));
  }
  c.seeds = get_or(j, "seeds", std::vector<std::uint64_t>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  if (j.contains("train")) train_config_from_json(j.at("train"), &c.train);
  if (j.contains("propensity")) propensity_spec_from_json(j.at("propensity"), &c.propensity);
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    c.eval.n_eval_users = get_or(e, "n_eval_users", c.eval.n_eval_users);
    c.eval.candidates_per_user = get_or(e, "candidates_per_user", c.eval.candidates_per_user);
    c.eval.relevance_threshold = get_or(e, "relevance_threshold", c.eval.relevance_threshold);
  }
  if (j.contains("matching")) {
    const auto& m = j.at("matching");
    c.matching.enabled = get_or(m, "enabled", false);
    c.matching.algorithm = get_or<std::string>(m, "algorithm", c.matching.algorithm);
    c.matching.top_k = get_or(m, "top_k", c.matching.top_k);
    c.matching.exact_threshold = get_or(m, "exact_threshold", c.matching.exact_threshold);
  }
  c.baseline_method = get_or<std::string>(j, "baseline_method", "");
  c.out_dir = get_or<std::string>(j, "out_dir", "");
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ConfigError("config requires at least one method");
  if (seeds.empty()) throw ConfigError("config requires at least one seed");
  std::set<std::string> names;
  for (const auto& m : methods)
    if (!names.insert(m.name).second) throw ConfigError("duplicate method name: " + m.name);
  if (!baseline_method.empty() && !names.count(baseline_method))
    throw ConfigError("baseline_method not in methods: " + baseline_method);
  if (dataset.kind == "log" && dataset.log_path.empty())
    throw ConfigError("dataset.kind=log requires log_path");
  split.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["dataset"] = {{"kind", dataset.kind},
                  {"synth",
                   {{"n_users", dataset.synth.n_users},
                    {"latent_dim", dataset.synth.latent_dim},
                    {"target_log_size", dataset.synth.target_log_size},
                    {"bias_strength", dataset.synth.bias_strength},
                    {"popularity_spread", dataset.synth.popularity_spread},
                    {"target_match_rate", dataset.synth.target_match_rate}}},
                  {"log_path", dataset.log_path},
                  {"n_users", dataset.n_users}};
  j["split"] = {{"mode", split.mode == SplitMode::kRandom ? "random" : "temporal"},
                {"fractions",
                 {split.train_fraction, split.valid_fraction, split.test_fraction}}};
  nlohmann::json methods_json = nlohmann::json::array();
  for (const auto& m : methods)
    methods_json.push_back({{"name", m.name},
                            {"objective", to_string(m.objective)},
                            {"train", m.train_override},
                            {"propensity", m.propensity_override}});
  j["methods"] = std::move(methods_json);
  j["seeds"] = seeds;
  j["train"] = train_config_to_json(train);
  j["propensity"] = propensity_spec_to_json(propensity);
  j["eval"] = {{"n_eval_users", eval.n_eval_users},
               {"candidates_per_user", eval.candidates_per_user},
               {"relevance_threshold", eval.relevance_threshold}};
  j["matching"] = {{"enabled", matching.enabled},
                   {"algorithm", matching.algorithm},
                   {"top_k", matching.top_k},
                   {"exact_threshold", matching.exact_threshold}};
  j["baseline_method"] = baseline_method;
  j["out_dir"] = out_dir;
  return j;
}

std::string ExperimentConfig::config_hash() const { return hash_hex(fnv1a64(to_json().dump())); }

namespace {

RunRow run_with_dataset(const ExperimentConfig& config, const MethodSpec& method,
                        std::uint64_t seed, const SeedDataset& dataset,
                        TrainResult* train_out, double* total_seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRow row;
  row.method = method.name;
  row.seed = seed;
  row.dataset_hash = dataset.dataset_hash;
  row.config_hash = config.config_hash();

  PreparedRun run = prepare_run(config, method, seed, dataset.log);
  row.propensity_auc = run.propensity_auc;

  const PropensityModel* prop = run.propensity ? &*run.propensity : nullptr;
  TrainResult result = train(run.splits.train, run.splits.valid, run.propensity_log, prop,
                             &run.featurizer, run.train_config);
  row.best_epoch = result.best_epoch;
  row.epochs_trained = static_cast<int>(result.epochs.size());
  row.outcome_auc = result.outcome_model_auc;
  row.ips_normalization = result.ips_normalization;
  if (result.status == TrainStatus::kDiverged) row.status = "diverged";

  EvalProtocol protocol = config.eval;
  protocol.seed = derived_seed(seed, kSlotEval);
  const std::uint32_t n_users = dataset.log.pair_space.side_u;
  row.metrics =
      evaluate_model(result.model, run.splits.test, run.splits.train, protocol, n_users);

  if (total_seconds)
    *total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (train_out) *train_out = std::move(result);
  return row;
}

}  // namespace

SingleRunResult run_single(const ExperimentConfig& config, const MethodSpec& method,
                           std::uint64_t seed) {
  const SeedDataset dataset = materialize_dataset(config, seed);
  SingleRunResult out;
  out.row = run_with_dataset(config, method, seed, dataset, &out.train_result,
                             &out.total_seconds);
  return out;
}

void write_runs_csv(const std::vector<RunRow>& rows, const std::string& path) {
  auto out = open_out(path);
  out << "method,seed,dataset_hash,config_hash,ndcg_at_10,mrr,coverage_at_10,gini_exposure,"
         "n_eval_users,best_epoch,epochs_trained,propensity_auc,outcome_auc,"
         "ips_normalization,status\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.seed << ',' << r.dataset_hash << ',' << r.config_hash << ','
        << fmt_g17(r.metrics.ndcg_at_10) << ',' << fmt_g17(r.metrics.mrr) << ','
        << fmt_g17(r.metrics.coverage_at_10) << ',' << fmt_g17(r.metrics.gini_exposure) << ','
        << r.metrics.n_eval_users << ',' << r.best_epoch << ',' << r.epochs_trained << ','
        << fmt_g17(r.propensity_auc) << ',' << fmt_g17(r.outcome_auc) << ','
        << r.ips_normalization << ',' << r.status << '\n';
  }
}

std::vector<RunRow> read_runs_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty runs file: " + path);
  std::vector<RunRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        f.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (f.size() != 15) throw DataError(path + ": malformed runs row");
    RunRow r;
    r.method = f[0];
    r.seed = std::stoull(f[1]);
    r.dataset_hash = f[2];
    r.config_hash = f[3];
    r.metrics.ndcg_at_10 = std::stod(f[4]);
    r.metrics.mrr = std::stod(f[5]);
    r.metrics.coverage_at_10 = std::stod(f[6]);
    r.metrics.gini_exposure = std::stod(f[7]);
    r.metrics.n_eval_users = std::stoull(f[8]);
    r.best_epoch = std::stoi(f[9]);
    r.epochs_trained = std::stoi(f[10]);
    r.propensity_auc = std::stod(f[11]);
    r.outcome_auc = std::stod(f[12]);
    r.ips_normalization = f[13];
    r.status = f[14];
    rows.push_back(std::move(r));
  }
  return rows;
}

nlohmann::json aggregate_runs(const std::vector<RunRow>& rows,
                              const std::string& baseline_method) {
  if (rows.empty()) throw DataError("aggregate_runs: no rows");

  // Dataset hashes must agree across methods within each seed.
  std::map<std::uint64_t, std::string> seed_hash;
  for (const auto& r : rows) {
    auto [it, inserted] = seed_hash.emplace(r.seed, r.dataset_hash);
    if (!inserted && it->second != r.dataset_hash)
      throw DataError("aggregate_runs: mismatched dataset hashes for seed " +
                      std::to_string(r.seed));
  }

  std::vector<std::string> method_order;
  for (const auto& r : rows)
    if (std::find(method_order.begin(), method_order.end(), r.method) == method_order.end())
      method_order.push_back(r.method);
  const std::string baseline = baseline_method.empty() ? method_order.front() : baseline_method;

  const auto metric_names =
      std::vector<std::string>{"ndcg_at_10", "mrr", "coverage_at_10", "gini_exposure"};
  const auto metric_value = [](const RunRow& r, const std::string& name) {
    if (name == "ndcg_at_10") return r.metrics.ndcg_at_10;
    if (name == "mrr") return r.metrics.mrr;
    if (name == "coverage_at_10") return r.metrics.coverage_at_10;
    return r.metrics.gini_exposure;
  };

  nlohmann::json methods_json;
  std::vector<std::string> failed;
  for (const auto& name : method_order) {
    nlohmann::json mj;
    for (const auto& metric : metric_names) {
      std::vector<double> values;
      for (const auto& r : rows)
        if (r.method == name && r.status == "ok") values.push_back(metric_value(r, metric));
      if (values.empty()) continue;
      mj[metric] = {{"mean", mean(values)},
                    {"std", values.size() > 1 ? sample_std(values) : 0.0}};
      mj["n_runs"] = values.size();
    }
    methods_json[name] = std::move(mj);
  }
  for (const auto& r : rows)
    if (r.status != "ok")
      failed.push_back(r.method + "/seed" + std::to_string(r.seed) + ":" + r.status);

  // Paired comparisons against the baseline, one p-value per
  // (method, metric), Bonferroni over all of them.
  struct Comparison {
    std::string method, metric;
    double t = 0.0, p = 1.0, d = 0.0;
    std::size_t n = 0;
  };
  std::vector<Comparison> comparisons;
  for (const auto& name : method_order) {
    if (name == baseline) continue;
    for (const auto& metric : metric_names) {
      std::vector<double> a, b;
      for (const auto& seed_pair : seed_hash) {
        const std::uint64_t seed = seed_pair.first;
        const RunRow* ra = nullptr;
        const RunRow* rb = nullptr;
        for (const auto& r : rows) {
          if (r.seed != seed || r.status != "ok") continue;
          if (r.method == name) ra = &r;
          if (r.method == baseline) rb = &r;
        }
        if (ra && rb) {
          a.push_back(metric_value(*ra, metric));
          b.push_back(metric_value(*rb, metric));
        }
      }
      if (a.size() < 2) continue;
      Comparison c;
      c.method = name;
      c.metric = metric;
      c.n = a.size();
      c.t = paired_t_statistic(a, b);
      c.p = paired_t_test(a, b);
      try {
        c.d = cohens_d(a, b);
      } catch (const std::invalid_argument&) {
        c.d = 0.0;  // zero pooled spread
      }
      comparisons.push_back(std::move(c));
    }
  }

  std::vector<double> p_values;
  for (const auto& c : comparisons) p_values.push_back(c.p);
  std::vector<bool> significant;
  if (!p_values.empty()) significant = bonferroni(p_values, 0.05);

  nlohmann::json comparisons_json = nlohmann::json::array();
  for (std::size_t i = 0; i < comparisons.size(); ++i) {
    const auto& c = comparisons[i];
    comparisons_json.push_back({{"method", c.method},
                                {"baseline", baseline},
                                {"metric", c.metric},
                                {"t_statistic", c.t},
                                {"p_value", c.p},
                                {"cohens_d", c.d},
                                {"n_pairs", c.n},
                                {"significant", static_cast<bool>(significant[i])}});
  }

  nlohmann::json j;
  j["methods"] = std::move(methods_json);
  j["method_order"] = method_order;
  j["baseline"] = baseline;
  j["comparisons"] = std::move(comparisons_json);
  j["bonferroni_m"] = p_values.size();
  j["alpha"] = 0.05;
  j["failed_runs"] = failed;
  return j;
}

void cmd_synth(const SynthCommandOptions& options) {
  if (options.out_dir.empty()) throw ConfigError("synth: output directory required");
  options.config.validate();
  ensure_dir(options.out_dir);
  const fs::path dir(options.out_dir);

  const LatentWorld world = generate_world(options.config);
  const ExposureLog log = simulate_log(world, options.config);

  {
    auto out = open_out((dir / "factors.csv").string());
    out << "user";
    for (std::uint32_t k = 0; k < world.latent_dim; ++k) out << ",f" << k;
    out << ",popularity\n";
    for (UserId u = 0; u < world.n_users; ++u) {
      out << u;
      for (const double f : world.factor(u)) out << ',' << fmt_g17(f);
      out << ',' << fmt_g17(world.popularity[u]) << '\n';
    }
  }
  write_log_csv(log, (dir / "log.csv").string());

  const bool dump_theta =
      options.dump_theta == 1 || (options.dump_theta < 0 && world.n_users <= 2000);
  if (dump_theta) {
    auto out = open_out((dir / "theta.csv").string());
    out << "u,v,theta\n";
    for (UserId u = 0; u < world.n_users; ++u)
      for (UserId v = u + 1; v < world.n_users; ++v)
        out << u << ',' << v << ','
            << fmt_g17(logging_propensity(world, u, v, options.config)) << '\n';
  }

  nlohmann::json config_echo = {{"n_users", options.config.n_users},
                                {"latent_dim", options.config.latent_dim},
                                {"target_log_size", options.config.target_log_size},
                                {"bias_strength", options.config.bias_strength},
                                {"popularity_spread", options.config.popularity_spread},
                                {"target_match_rate", options.config.target_match_rate},
                                {"seed", options.config.seed}};
  const std::string config_hash = hash_hex(fnv1a64(config_echo.dump()));

  nlohmann::json world_json = {{"config", config_echo},
                               {"config_hash", config_hash},
                               {"match_offset", world.match_offset},
                               {"exposure_offset", world.exposure_offset},
                               {"pairs_subsampled", world.pairs_subsampled},
                               {"exposed_count", log.size()}};
  {
    auto out = open_out((dir / "world.json").string());
    out << world_json.dump(2) << '\n';
  }

  nlohmann::json manifest = {{"command", "synth"},
                             {"config", config_echo},
                             {"config_hash", config_hash},
                             {"uniform_logging", options.config.bias_strength == 0.0},
                             {"pairs_subsampled", world.pairs_subsampled},
                             {"theta_dumped", dump_theta}};
  nlohmann::json files;
  for (const auto& name : {"factors.csv", "log.csv", "world.json"})
    files[name] = hash_hex(hash_file((dir / name).string()));
  if (dump_theta) files["theta.csv"] = hash_hex(hash_file((dir / "theta.csv").string()));
  manifest["files"] = std::move(files);
  auto out = open_out((dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

void cmd_ingest(const IngestCommandOptions& options) {
  if (options.out_dir.empty()) throw ConfigError("ingest: output directory required");
  ensure_dir(options.out_dir);
  const fs::path dir(options.out_dir);

  EdgeList graph = load_edgelist(options.path, options.directed);
  if (options.max_users >= 2 && options.max_users < graph.n_nodes)
    graph = cap_users(graph, options.max_users, options.seed);

  const auto positives = reciprocal_positives(graph);
  if (positives.empty()) throw DataError(options.path + ": no reciprocal positives");
  const PairSpace space = PairSpace::make_symmetric(graph.n_nodes);
  const auto negatives = negative_sample(positives, space, options.seed);

  ExposureLog log;
  const bool has_ts = graph.has_timestamps();
  if (has_ts) {
    // Mutual pairs adopt the completing edge's time; each sampled negative
    // mirrors the timestamp of its paired positive so temporal splits stay
    // label-balanced.
    std::map<std::pair<UserId, UserId>, std::int64_t> pair_time;
    for (const auto& e : graph.edges) {
      const auto key = std::make_pair(std::min(e.src, e.dst), std::max(e.src, e.dst));
      const auto it = pair_time.find(key);
      if (it == pair_time.end())
        pair_time[key] = *e.timestamp;
      else
        it->second = std::max(it->second, *e.timestamp);
    }
    std::vector<std::int64_t> timestamps;
    timestamps.reserve(positives.size() * 2);
    for (const auto& p : positives) timestamps.push_back(pair_time.at(p));
    for (std::size_t i = 0; i < negatives.size(); ++i)
      timestamps.push_back(timestamps[i % positives.size()]);
    log = to_exposure_log(positives, negatives, space, &timestamps);
  } else {
    log = to_exposure_log(positives, negatives, space);
  }
  write_log_csv(log, (dir / "log.csv").string());
  write_id_map_json(graph, (dir / "idmap.json").string());

  nlohmann::json config_echo = {{"path", options.path},
                                {"directed", options.directed},
                                {"max_users", options.max_users},
                                {"seed", options.seed}};
  nlohmann::json manifest = {{"command", "ingest"},
                             {"config", config_echo},
                             {"config_hash", hash_hex(fnv1a64(config_echo.dump()))},
                             {"n_nodes", graph.n_nodes},
                             {"n_edges", graph.edges.size()},
                             {"n_positives", positives.size()},
                             {"n_negatives", negatives.size()},
                             {"has_timestamps", has_ts},
                             {"temporal_split_degraded", !has_ts}};
  nlohmann::json files;
  for (const auto& name : {"log.csv", "idmap.json"})
    files[name] = hash_hex(hash_file((dir / name).string()));
  manifest["files"] = std::move(files);
  auto out = open_out((dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

void cmd_run(const ExperimentConfig& config) {
  config.validate();
  if (config.out_dir.empty()) throw ConfigError("run: out_dir required");
  ensure_dir(config.out_dir);
  const fs::path dir(config.out_dir);
  ensure_dir((dir / "checkpoints").string());
  ensure_dir((dir / "train_logs").string());
  if (config.matching.enabled) ensure_dir((dir / "matching").string());

  std::vector<RunRow> rows;
  nlohmann::json timing = nlohmann::json::array();
  for (const std::uint64_t seed : config.seeds) {
    const SeedDataset dataset = materialize_dataset(config, seed);
    for (const auto& method : config.methods) {
      const std::string run_name = method.name + "_seed" + std::to_string(seed);
      try {
        TrainResult result;
        double seconds = 0.0;
        RunRow row = run_with_dataset(config, method, seed, dataset, &result, &seconds);
        rows.push_back(row);

        nlohmann::json checkpoint = {{"model", result.model.to_json()},
                                     {"method", method.name},
                                     {"seed", seed},
                                     {"config_hash", config.config_hash()},
                                     {"best_epoch", result.best_epoch},
                                     {"epochs_trained", result.epochs.size()}};
        {
          auto out = open_out((dir / "checkpoints" / (run_name + ".json")).string());
          out << checkpoint.dump() << '\n';
        }
        {
          auto out = open_out((dir / "train_logs" / (run_name + ".jsonl")).string());
          for (const auto& e : result.epochs)
            out << nlohmann::json{{"epoch", e.epoch},
                                  {"train_objective", e.train_objective},
                                  {"snips_full", e.snips_full},
                                  {"valid_ndcg10", e.valid_ndcg10},
                                  {"propensity_hash", e.propensity_hash}}
                       .dump()
                << '\n';
        }
        if (config.matching.enabled)
          write_matching_csv(result.model, config.matching,
                             dataset.log.pair_space.side_u,
                             (dir / "matching" / (run_name + ".csv")).string());

        nlohmann::json trun = {{"type", "run"},
                               {"method", method.name},
                               {"seed", seed},
                               {"total_seconds", seconds},
                               {"outcome_fit_seconds", result.outcome_fit_seconds}};
        nlohmann::json epochs_seconds = nlohmann::json::array();
        for (const auto& e : result.epochs) epochs_seconds.push_back(e.wall_seconds);
        trun["epoch_seconds"] = std::move(epochs_seconds);
        timing.push_back(std::move(trun));
      } catch (const std::exception& ex) {
        std::cerr << "warning: run " << run_name << " failed: " << ex.what() << '\n';
        RunRow row;
        row.method = method.name;
        row.seed = seed;
        row.dataset_hash = dataset.dataset_hash;
        row.config_hash = config.config_hash();
        row.status = std::string("failed:") + ex.what();
        // Commas would corrupt the CSV row.
        std::replace(row.status.begin(), row.status.end(), ',', ';');
        rows.push_back(row);
      }
    }
  }

  write_runs_csv(rows, (dir / "runs.csv").string());
  const nlohmann::json aggregate = aggregate_runs(rows, config.baseline_method);
  {
    auto out = open_out((dir / "aggregate.json").string());
    nlohmann::json full = aggregate;
    full["config"] = config.to_json();
    full["config_hash"] = config.config_hash();
    out << full.dump(2) << '\n';
  }
  {
    auto out = open_out((dir / "aggregate.csv").string());
    out << "method,metric,mean,std,config_hash\n";
    for (const auto& name : aggregate.at("method_order").get<std::vector<std::string>>()) {
      const auto& mj = aggregate.at("methods").at(name);
      for (const auto& metric : {"ndcg_at_10", "mrr", "coverage_at_10", "gini_exposure"}) {
        if (!mj.contains(metric)) continue;
        out << name << ',' << metric << ',' << fmt_g17(mj.at(metric).at("mean").get<double>())
            << ',' << fmt_g17(mj.at(metric).at("std").get<double>()) << ','
            << config.config_hash() << '\n';
      }
    }
  }
  {
    auto out = open_out((dir / "timing.jsonl").string());
    for (const auto& t : timing) out << t.dump() << '\n';
  }
  nlohmann::json manifest = {{"command", "run"},
                             {"config", config.to_json()},
                             {"config_hash", config.config_hash()},
                             {"n_rows", rows.size()}};
  nlohmann::json files;
  for (const auto& name : {"runs.csv", "aggregate.json", "aggregate.csv"})
    files[name] = hash_hex(hash_file((dir / name).string()));
  manifest["files"] = std::move(files);
  auto out = open_out((dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

void cmd_report(const std::string& run_dir) {
  const fs::path dir(run_dir);
  if (!fs::exists(dir / "runs.csv")) throw DataError(run_dir + ": no runs.csv");
  const auto rows = read_runs_csv((dir / "runs.csv").string());
  if (rows.empty()) throw DataError(run_dir + ": runs.csv has no rows");

  std::string baseline;
  nlohmann::json aggregate;
  if (fs::exists(dir / "aggregate.json")) {
    std::ifstream in((dir / "aggregate.json").string());
    in >> aggregate;
    baseline = aggregate.value("baseline", "");
  }
  const nlohmann::json agg = aggregate_runs(rows, baseline);

  const std::vector<std::string> metric_names{"ndcg_at_10", "mrr", "coverage_at_10",
                                              "gini_exposure"};
  const std::vector<bool> higher_better{true, true, true, false};
  const auto method_order = agg.at("method_order").get<std::vector<std::string>>();

  // Best method(s) per metric; ties all marked.
  std::map<std::string, std::vector<std::string>> best;
  for (std::size_t mi = 0; mi < metric_names.size(); ++mi) {
    double best_value = higher_better[mi] ? -1e300 : 1e300;
    for (const auto& name : method_order) {
      if (!agg.at("methods").at(name).contains(metric_names[mi])) continue;
      const double v = agg.at("methods").at(name).at(metric_names[mi]).at("mean").get<double>();
      if (higher_better[mi] ? v > best_value : v < best_value) best_value = v;
    }
    for (const auto& name : method_order) {
      if (!agg.at("methods").at(name).contains(metric_names[mi])) continue;
      const double v = agg.at("methods").at(name).at(metric_names[mi]).at("mean").get<double>();
      if (v == best_value) best[metric_names[mi]].push_back(name);
    }
  }

  // Significance stars vs the baseline (Bonferroni-corrected).
  std::set<std::pair<std::string, std::string>> starred;
  for (const auto& c : agg.at("comparisons"))
    if (c.at("significant").get<bool>())
      starred.emplace(c.at("method").get<std::string>(), c.at("metric").get<std::string>());

  {
    auto out = open_out((dir / "table.md").string());
    out << "| Method | NDCG@10 | MRR | Coverage@10 | Gini-Exposure |\n";
    out << "|---|---|---|---|---|\n";
    for (const auto& name : method_order) {
      out << "| " << name << " |";
      for (const auto& metric : metric_names) {
        const auto& mj = agg.at("methods").at(name);
        if (!mj.contains(metric)) {
          out << " - |";
          continue;
        }
        const double m = mj.at(metric).at("mean").get<double>();
        const double s = mj.at(metric).at("std").get<double>();
        std::string cell = fmt_f4(m) + " ± " + fmt_f4(s);
        const auto& winners = best.at(metric);
        if (std::find(winners.begin(), winners.end(), name) != winners.end())
          cell = "**" + cell + "**";
        if (starred.count({name, metric})) cell += "*";
        out << ' ' << cell << " |";
      }
      out << '\n';
    }
    out << "\nBest value per column in bold; ties share the mark. `*` = significant vs "
        << agg.at("baseline").get<std::string>()
        << " (paired t-test, Bonferroni-corrected p < 0.05).\n";
  }

  {
    auto out = open_out((dir / "plot_data.csv").string());
    out << "method,metric,mean,std\n";
    for (const auto& name : method_order) {
      for (const auto& metric : metric_names) {
        const auto& mj = agg.at("methods").at(name);
        if (!mj.contains(metric)) continue;
        out << name << ',' << metric << ','
            << fmt_g17(mj.at(metric).at("mean").get<double>()) << ','
            << fmt_g17(mj.at(metric).at("std").get<double>()) << '\n';
      }
    }
  }
}

}  // namespace cfrr
