// Copyright 2026 The SiloFed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "silofed/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "silofed/errors.hpp"

namespace silofed::experiment {

namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// --- strict JSON helpers -------------------------------------------------

void require_keys(const json& obj, const std::string& where,
                  std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) throw FormatError(where + ": unknown key \"" + key + "\"");
  }
}

const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf") return kInf;
  }
  throw FormatError(where + ": expected a number");
}

double get_number(const json& obj, const char* key, const std::string& where, double fallback) {
  const json* v = find(obj, key);
  return v == nullptr ? fallback : as_number(*v, where + "." + key);
}

int get_int(const json& obj, const char* key, const std::string& where, int fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_number_integer()) throw FormatError(where + "." + key + ": expected an integer");
  return v->get<int>();
}

bool get_bool(const json& obj, const char* key, const std::string& where, bool fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_boolean()) throw FormatError(where + "." + key + ": expected a boolean");
  return v->get<bool>();
}

std::string get_string(const json& obj, const char* key, const std::string& where,
                       const std::string& fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_string()) throw FormatError(where + "." + key + ": expected a string");
  return v->get<std::string>();
}

meanest::MeanEstProblem parse_problem(const json& obj, const std::string& where) {
  require_keys(obj, where,
               {"silos", "per_silo_n", "data_var", "heterogeneity", "meta_center", "clip",
                "silo_n", "silo_data_var", "silo_dp_noise"});
  meanest::MeanEstProblem p;
  p.silos = get_int(obj, "silos", where, 2);
  p.per_silo_n = get_int(obj, "per_silo_n", where, 1);
  p.data_var = get_number(obj, "data_var", where, 0.0);
  p.heterogeneity = get_number(obj, "heterogeneity", where, 0.0);
  p.meta_center = get_number(obj, "meta_center", where, 0.0);
  p.clip = get_number(obj, "clip", where, 0.0);
  if (const json* v = find(obj, "silo_n")) p.silo_n = v->get<std::vector<int>>();
  if (const json* v = find(obj, "silo_data_var")) p.silo_data_var = v->get<std::vector<double>>();
  if (const json* v = find(obj, "silo_dp_noise")) p.silo_dp_noise = v->get<std::vector<double>>();
  meanest::validate_problem(p);
  return p;
}

DatasetSpec parse_dataset(const json& obj) {
  const std::string where = "dataset";
  require_keys(obj, where,
               {"generator", "seed", "silos", "train_per_silo", "test_per_silo", "dim", "tau2",
                "label_noise", "task", "num_classes", "clusters", "mask_rate", "csv_dir",
                "problem"});
  DatasetSpec spec;
  spec.generator = get_string(obj, "generator", where, "");
  if (spec.generator.empty()) throw FormatError(where + ": missing \"generator\"");
  spec.seed = static_cast<std::uint64_t>(get_int(obj, "seed", where, 1));
  spec.silos = get_int(obj, "silos", where, 2);
  spec.train_per_silo = get_int(obj, "train_per_silo", where, 1);
  spec.test_per_silo = get_int(obj, "test_per_silo", where, 0);
  spec.dim = get_int(obj, "dim", where, 1);
  spec.tau2 = get_number(obj, "tau2", where, 0.0);
  spec.label_noise = get_number(obj, "label_noise", where, 0.0);
  const std::string task = get_string(obj, "task", where, "regression");
  if (task == "classification") {
    spec.task = datasets::TaskSpec::classification(get_int(obj, "num_classes", where, 2));
  } else if (task == "regression") {
    spec.task = datasets::TaskSpec::regression();
  } else {
    throw FormatError(where + ".task: expected classification or regression");
  }
  spec.cluster.num_clusters = get_int(obj, "clusters", where, 1);
  spec.cluster.intra_silo_mask_rate = get_number(obj, "mask_rate", where, 0.0);
  spec.csv_dir = get_string(obj, "csv_dir", where, "");
  if (const json* v = find(obj, "problem")) spec.problem = parse_problem(*v, where + ".problem");

  if (spec.generator != "heterogeneous_linear" && spec.generator != "clustered" &&
      spec.generator != "mean_estimation" && spec.generator != "csv") {
    throw FormatError(where + ".generator: unknown generator \"" + spec.generator + "\"");
  }
  if (spec.generator == "csv" && spec.csv_dir.empty()) {
    throw FormatError(where + ": csv generator needs \"csv_dir\"");
  }
  return spec;
}

fed::TrainerConfig parse_trainer(const json& obj, double* delta_out) {
  const std::string where = "trainer";
  require_keys(obj, where,
               {"rounds", "clip", "sampling_rate", "learning_rate", "delta",
                "weighted_aggregation", "loss", "num_classes", "finetune_switch_fraction",
                "clusters", "eps_select_fraction", "cluster_rounds_fraction",
                "precondition_fraction"});
  fed::TrainerConfig trainer;
  trainer.rounds = get_int(obj, "rounds", where, 1);
  trainer.clip = get_number(obj, "clip", where, 1.0);
  trainer.sampling_rate = get_number(obj, "sampling_rate", where, 1.0);
  trainer.learning_rate = get_number(obj, "learning_rate", where, 0.1);
  *delta_out = get_number(obj, "delta", where, 1e-5);
  trainer.weighted_aggregation = get_bool(obj, "weighted_aggregation", where, true);
  const std::string loss = get_string(obj, "loss", where, "squared_error");
  if (loss == "hinge") {
    trainer.loss = models::LossKind::hinge();
  } else if (loss == "squared_error") {
    trainer.loss = models::LossKind::squared_error();
  } else if (loss == "softmax") {
    trainer.loss = models::LossKind::softmax(get_int(obj, "num_classes", where, 2));
  } else {
    throw FormatError(where + ".loss: expected hinge, squared_error or softmax");
  }
  trainer.finetune_switch_fraction = get_number(obj, "finetune_switch_fraction", where, 0.5);
  trainer.clusters = get_int(obj, "clusters", where, 1);
  trainer.eps_select_fraction = get_number(obj, "eps_select_fraction", where, 0.03);
  trainer.cluster_rounds_fraction = get_number(obj, "cluster_rounds_fraction", where, 0.1);
  trainer.precondition_fraction = get_number(obj, "precondition_fraction", where, 0.1);
  return trainer;
}

SweepAxes parse_sweep(const json& obj, Kind kind) {
  const std::string where = "sweep";
  require_keys(obj, where, {"methods", "epsilons", "lambdas", "seeds"});
  SweepAxes axes;
  if (const json* v = find(obj, "methods")) {
    for (const auto& m : *v) axes.methods.push_back(fed::method_from_name(m.get<std::string>()));
  }
  if (const json* v = find(obj, "epsilons")) {
    for (const auto& e : *v) {
      const double eps = as_number(e, where + ".epsilons");
      if (!std::isinf(eps) && eps <= 0.0) {
        throw FormatError(where + ".epsilons: entries must be positive or \"inf\"");
      }
      axes.epsilons.push_back(eps);
    }
  }
  if (const json* v = find(obj, "lambdas")) {
    for (const auto& l : *v) {
      const double lambda = as_number(l, where + ".lambdas");
      if (lambda < 0.0) throw FormatError(where + ".lambdas: entries must be >= 0");
      axes.lambdas.push_back(lambda);
    }
  }
  if (const json* v = find(obj, "seeds")) {
    for (const auto& s : *v) {
      if (!s.is_number_integer()) throw FormatError(where + ".seeds: expected integers");
      axes.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  if (kind == Kind::kFederated && axes.methods.empty()) {
    throw FormatError(where + ": federated sweeps need at least one method");
  }
  if (axes.epsilons.empty()) axes.epsilons.push_back(kInf);
  if (axes.lambdas.empty()) axes.lambdas.push_back(0.0);
  if (axes.seeds.empty()) throw FormatError(where + ": need at least one seed");
  return axes;
}

std::vector<accounting::TnbParams> parse_tnb(const json& arr) {
  const std::string where = "tnb";
  if (!arr.is_array() || arr.empty()) throw FormatError(where + ": expected a non-empty array");
  std::vector<accounting::TnbParams> out;
  for (const auto& obj : arr) {
    require_keys(obj, where, {"eta", "gamma", "expected_h"});
    accounting::TnbParams params;
    params.eta = get_number(obj, "eta", where, 0.0);
    const json* gamma = find(obj, "gamma");
    const json* expected = find(obj, "expected_h");
    if ((gamma == nullptr) == (expected == nullptr)) {
      throw FormatError(where + ": give exactly one of \"gamma\" or \"expected_h\"");
    }
    params.gamma = gamma != nullptr
                       ? as_number(*gamma, where + ".gamma")
                       : accounting::tnb_gamma_for_mean(params.eta,
                                                        as_number(*expected, where + ".expected_h"));
    accounting::validate_tnb(params);
    out.push_back(params);
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(source + ": " + e.what());
  }
  if (!root.is_object()) throw FormatError(source + ": top level must be an object");
  require_keys(root, source,
               {"version", "kind", "output", "report_intermediate", "dataset", "trainer",
                "sweep", "problem", "epsilon", "delta", "trials", "seed", "tnb"});

  ExperimentConfig config;
  config.version = get_int(root, "version", source, 1);
  if (config.version != 1) throw FormatError(source + ": unsupported config version");
  const std::string kind = get_string(root, "kind", source, "");
  if (kind == "federated") {
    config.kind = Kind::kFederated;
  } else if (kind == "mean_estimation") {
    config.kind = Kind::kMeanEstimation;
  } else if (kind == "tuning_study") {
    config.kind = Kind::kTuningStudy;
  } else {
    throw FormatError(source + ".kind: expected federated, mean_estimation or tuning_study");
  }
  config.output = get_string(root, "output", source, "results.csv");
  config.report_intermediate = get_bool(root, "report_intermediate", source, false);

  switch (config.kind) {
    case Kind::kFederated: {
      const json* dataset = find(root, "dataset");
      if (dataset == nullptr) throw FormatError(source + ": missing \"dataset\"");
      config.dataset = parse_dataset(*dataset);
      const json* trainer = find(root, "trainer");
      if (trainer == nullptr) throw FormatError(source + ": missing \"trainer\"");
      config.trainer = parse_trainer(*trainer, &config.delta);
      const json* sweep = find(root, "sweep");
      if (sweep == nullptr) throw FormatError(source + ": missing \"sweep\"");
      config.sweep = parse_sweep(*sweep, config.kind);
      break;
    }
    case Kind::kMeanEstimation:
    case Kind::kTuningStudy: {
      const json* problem = find(root, "problem");
      if (problem == nullptr) throw FormatError(source + ": missing \"problem\"");
      config.problem = parse_problem(*problem, "problem");
      config.problem_epsilon = get_number(root, "epsilon", source, 1.0);
      config.delta = get_number(root, "delta", source, 1e-5);
      config.trials = get_int(root, "trials", source, 0);
      config.study_seed = static_cast<std::uint64_t>(get_int(root, "seed", source, 0));
      if (config.kind == Kind::kTuningStudy) {
        const json* tnb = find(root, "tnb");
        if (tnb == nullptr) throw FormatError(source + ": missing \"tnb\"");
        config.tnb = parse_tnb(*tnb);
        if (const json* sweep = find(root, "sweep")) {
          config.sweep = parse_sweep(*sweep, config.kind);
        } else {
          throw FormatError(source + ": tuning_study needs sweep.lambdas");
        }
      } else {
        const json* sweep = find(root, "sweep");
        if (sweep == nullptr) throw FormatError(source + ": missing \"sweep\"");
        config.sweep = parse_sweep(*sweep, config.kind);
      }
      break;
    }
  }
  return config;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

namespace {

// "delta" key lives in trainer but applies per budget; re-check here.
const char* kCsvHeader =
    "method,lambda,epsilon,delta,seed,round,train_metric,test_metric,realized_epsilon";

datasets::FederationData build_dataset(const DatasetSpec& spec) {
  if (spec.generator == "heterogeneous_linear") {
    return datasets::gen_heterogeneous_linear(spec.silos, spec.train_per_silo, spec.dim,
                                              spec.tau2, spec.label_noise, spec.task, spec.seed,
                                              spec.test_per_silo);
  }
  if (spec.generator == "clustered") {
    return datasets::gen_clustered(spec.silos, spec.train_per_silo, spec.dim, spec.cluster,
                                   spec.seed, spec.test_per_silo);
  }
  if (spec.generator == "mean_estimation") {
    return datasets::gen_mean_estimation(spec.problem, spec.seed);
  }
  return datasets::load_csv_silos(spec.csv_dir, spec.task);
}

struct SweepPoint {
  fed::Method method = fed::Method::kLocal;
  double epsilon = kInf;
  double lambda = 0.0;
};

struct PointResult {
  std::vector<ResultRow> rows;
  bool failed = false;
};

ResultRow base_row(const std::string& method, double lambda, double epsilon, double delta) {
  ResultRow row;
  row.method = method;
  row.lambda = lambda;
  row.epsilon = epsilon;
  row.delta = std::isinf(epsilon) ? 0.0 : delta;
  return row;
}

void append_agg_row(std::vector<ResultRow>& rows, const std::vector<ResultRow>& seed_rows) {
  if (seed_rows.empty()) return;
  ResultRow agg = seed_rows.front();
  agg.seed = "agg";
  agg.round = "final";
  double train = 0.0, test = 0.0, realized = 0.0;
  for (const auto& r : seed_rows) {
    train += r.train_metric;
    test += r.test_metric;
    realized = std::max(realized, r.realized_epsilon);
  }
  agg.train_metric = train / seed_rows.size();
  agg.test_metric = test / seed_rows.size();
  agg.realized_epsilon = realized;
  rows.push_back(agg);
}

PointResult run_federated_point(const ExperimentConfig& config,
                                const datasets::FederationData& data, const SweepPoint& point,
                                std::int64_t seed_offset, std::ostream& log,
                                std::mutex& log_mutex) {
  PointResult result;
  std::vector<ResultRow> final_rows;
  for (std::uint64_t seed : config.sweep.seeds) {
    seed = static_cast<std::uint64_t>(static_cast<std::int64_t>(seed) + seed_offset);
    ResultRow row = base_row(fed::method_name(point.method), point.lambda, point.epsilon,
                             config.delta);
    row.seed = std::to_string(seed);
    try {
      fed::TrainerConfig trainer = config.trainer;
      trainer.method = point.method;
      trainer.lambda = point.lambda;
      trainer.budgets.clear();
      if (!std::isinf(point.epsilon)) trainer.budgets.push_back({point.epsilon, config.delta});
      if (config.report_intermediate) {
        trainer.record_every = std::max(1, (trainer.rounds + 19) / 20);
      }
      const fed::RunReport report = fed::run(trainer, data, seed);
      if (config.report_intermediate) {
        for (const auto& rec : report.history) {
          ResultRow mid = row;
          mid.round = std::to_string(rec.round);
          mid.train_metric = rec.train_metric;
          mid.test_metric = rec.test_metric;
          mid.realized_epsilon = rec.realized_eps;
          result.rows.push_back(mid);
        }
      }
      row.round = "final";
      row.train_metric = report.final_train_metric;
      row.test_metric = report.final_test_metric;
      row.realized_epsilon = report.realized_eps.empty()
                                 ? 0.0
                                 : *std::max_element(report.realized_eps.begin(),
                                                     report.realized_eps.end());
      result.rows.push_back(row);
      final_rows.push_back(row);
    } catch (const std::exception& e) {
      {
        std::lock_guard<std::mutex> guard(log_mutex);
        log << "run failed (" << row.method << ", eps=" << format_number(row.epsilon)
            << ", lambda=" << format_number(row.lambda) << ", seed=" << row.seed
            << "): " << e.what() << "\n";
      }
      row.round = "error";
      row.train_metric = row.test_metric = row.realized_epsilon =
          std::numeric_limits<double>::quiet_NaN();
      result.rows.push_back(row);
      result.failed = true;
    }
  }
  append_agg_row(result.rows, final_rows);
  return result;
}

PointResult run_mean_estimation_point(const ExperimentConfig& config, const SweepPoint& point,
                                      std::int64_t seed_offset) {
  PointResult result;
  meanest::MeanEstProblem problem = config.problem;
  if (std::isinf(point.epsilon)) {
    problem.dp_noise = 0.0;
  } else {
    problem.dp_noise = accounting::gaussian_sigma_for_budget(problem.effective_clip(),
                                                             {point.epsilon, config.delta});
  }
  const double theory = meanest::error_at_lambda(problem, point.lambda);
  std::vector<ResultRow> final_rows;
  for (std::uint64_t seed : config.sweep.seeds) {
    seed = static_cast<std::uint64_t>(static_cast<std::int64_t>(seed) + seed_offset);
    ResultRow row = base_row("mean_est", point.lambda, point.epsilon, config.delta);
    row.seed = std::to_string(seed);
    row.round = "final";
    row.train_metric = theory;  // closed form; test column holds the simulation
    row.test_metric = config.trials > 0
                          ? meanest::simulate(problem, point.lambda, config.trials, seed).mse
                          : theory;
    row.realized_epsilon = std::isinf(point.epsilon) ? 0.0 : point.epsilon;
    result.rows.push_back(row);
    final_rows.push_back(row);
  }
  append_agg_row(result.rows, final_rows);
  return result;
}

}  // namespace

std::string ResultRow::header() { return kCsvHeader; }

std::string ResultRow::to_csv() const {
  std::ostringstream out;
  out << method << ',' << format_number(lambda) << ',' << format_number(epsilon) << ','
      << format_number(delta) << ',' << seed << ',' << round << ','
      << format_number(train_metric) << ',' << format_number(test_metric) << ','
      << format_number(realized_epsilon);
  return out.str();
}

SweepOutcome run_sweep(const ExperimentConfig& config, const std::string& out_dir, int workers,
                       std::int64_t seed_offset, std::ostream& log) {
  namespace fs = std::filesystem;
  SweepOutcome outcome;
  const fs::path out_path = fs::path(out_dir.empty() ? "." : out_dir) / config.output;
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  outcome.csv_path = out_path.string();

  if (config.kind == Kind::kTuningStudy) {
    meanest::TuningStudyConfig study;
    study.lambda_grid = config.sweep.lambdas;
    study.tnb = config.tnb;
    study.budget = {config.problem_epsilon, config.delta};
    study.trials = config.trials;
    study.seed = config.study_seed + static_cast<std::uint64_t>(seed_offset);
    const meanest::TuningStudy result = meanest::tuning_cost_study(config.problem, study);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + outcome.csv_path);
    out << meanest::tuning_study_csv(result);
    return outcome;
  }

  // Cartesian sweep points in config order.
  std::vector<SweepPoint> points;
  const std::vector<fed::Method> methods =
      config.kind == Kind::kFederated ? config.sweep.methods
                                      : std::vector<fed::Method>{fed::Method::kMrMtl};
  for (const auto method : methods) {
    for (double eps : config.sweep.epsilons) {
      for (double lambda : config.sweep.lambdas) {
        points.push_back({method, eps, lambda});
      }
    }
  }

  std::optional<datasets::FederationData> data;
  if (config.kind == Kind::kFederated) data = build_dataset(config.dataset);

  std::vector<PointResult> results(points.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  const auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) break;
      if (config.kind == Kind::kFederated) {
        results[i] =
            run_federated_point(config, *data, points[i], seed_offset, log, log_mutex);
      } else {
        results[i] = run_mean_estimation_point(config, points[i], seed_offset);
      }
    }
  };
  int nworkers = workers;
  if (nworkers <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    nworkers = hw == 0 ? 1 : static_cast<int>(hw);
  }
  nworkers = std::min<int>(nworkers, static_cast<int>(points.size()));
  if (nworkers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nworkers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + outcome.csv_path);
  out << kCsvHeader << "\n";
  for (const auto& result : results) {
    if (result.failed) ++outcome.failures;
    for (const auto& row : result.rows) {
      // write-time budget re-check
      if (row.round != "error" && !std::isinf(row.epsilon) &&
          row.realized_epsilon > row.epsilon * (1.0 + 1e-9)) {
        throw std::logic_error("row exceeds its configured privacy budget: " + row.to_csv());
      }
      out << row.to_csv() << "\n";
      outcome.rows.push_back(row);
    }
  }
  return outcome;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const std::size_t comma = line.find(',', pos);
    cells.push_back(
        line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return cells;
}

double parse_metric(const std::string& cell, const std::string& where) {
  if (cell == "inf") return kInf;
  if (cell == "-inf") return -kInf;
  if (cell == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw FormatError(where + ": bad number '" + cell + "'");
  }
}

}  // namespace

void emit_summary(const std::string& csv_path, std::ostream& out, bool maximize) {
  std::ifstream in(csv_path);
  if (!in) throw FormatError("cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(csv_path + ":1: empty file");
  if (line != kCsvHeader) throw FormatError(csv_path + ":1: unexpected header");

  struct Best {
    ResultRow row;
    bool from_agg = false;
    bool set = false;
  };
  std::map<std::string, Best> best_by_method;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    const std::string where = csv_path + ":" + std::to_string(line_no);
    if (cells.size() != 9) throw FormatError(where + ": expected 9 columns");
    ResultRow row;
    row.method = cells[0];
    row.lambda = parse_metric(cells[1], where);
    row.epsilon = parse_metric(cells[2], where);
    row.delta = parse_metric(cells[3], where);
    row.seed = cells[4];
    row.round = cells[5];
    row.train_metric = parse_metric(cells[6], where);
    row.test_metric = parse_metric(cells[7], where);
    row.realized_epsilon = parse_metric(cells[8], where);
    if (row.round == "error" || std::isnan(row.test_metric)) continue;
    if (row.round != "final") continue;  // summaries use final-round rows

    Best& best = best_by_method[row.method];
    const bool is_agg = row.seed == "agg";
    const bool better = maximize ? row.test_metric > best.row.test_metric
                                 : row.test_metric < best.row.test_metric;
    // Aggregate rows shadow per-seed rows entirely.
    if (!best.set || (is_agg && !best.from_agg) || (is_agg == best.from_agg && better)) {
      best.row = row;
      best.from_agg = is_agg;
      best.set = true;
    }
  }

  out << "method          test_metric      epsilon    lambda   (seed)\n";
  for (const auto& [method, best] : best_by_method) {
    if (!best.set) continue;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-14s %12s %12s %9s   %s\n", method.c_str(),
                  format_number(best.row.test_metric).c_str(),
                  format_number(best.row.epsilon).c_str(),
                  format_number(best.row.lambda).c_str(), best.row.seed.c_str());
    out << buf;
  }
}

}  // namespace silofed::experiment
