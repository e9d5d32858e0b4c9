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

#include "silofed/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "silofed/errors.hpp"
#include "silofed/rng.hpp"

namespace silofed::datasets {

namespace fs = std::filesystem;

namespace {

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::swap(idx[i - 1], idx[rng.below(i)]);
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// `noise` is a flip probability for classification, a std for regression.
// The noise variate is always consumed, so datasets generated from one seed
// at different noise levels share the same features.
double label_for(const TaskSpec& task, double score, double noise, Rng& rng) {
  if (task.is_classification()) {
    double y = score >= 0.0 ? 1.0 : 0.0;
    if (rng.uniform() < noise) y = 1.0 - y;
    return y;
  }
  return score + noise * rng.normal();
}

SiloDataset make_linear_silo(const std::string& id, int n, std::span<const double> weights,
                             std::span<const double> mask, const TaskSpec& task,
                             double label_noise, Rng& rng) {
  const int dim = static_cast<int>(weights.size());
  SiloDataset silo;
  silo.silo_id = id;
  silo.dim = dim;
  silo.features.reserve(static_cast<std::size_t>(n) * dim);
  silo.labels.reserve(n);
  std::vector<double> x(dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) {
      x[j] = rng.normal();
      if (!mask.empty()) x[j] *= mask[j];
    }
    const double score = dot(x, weights);
    silo.labels.push_back(label_for(task, score, label_noise, rng));
    silo.features.insert(silo.features.end(), x.begin(), x.end());
  }
  return silo;
}

}  // namespace

void validate_silo(const SiloDataset& silo, const TaskSpec& task) {
  if (silo.size() < 1) throw ParameterError("silo '" + silo.silo_id + "' is empty");
  if (silo.dim < 1) throw ParameterError("silo '" + silo.silo_id + "' has no features");
  if (silo.features.size() != static_cast<std::size_t>(silo.size()) * silo.dim) {
    throw ParameterError("silo '" + silo.silo_id + "' has a ragged feature matrix");
  }
  for (double v : silo.features) {
    if (!std::isfinite(v)) {
      throw ParameterError("silo '" + silo.silo_id + "' contains non-finite features");
    }
  }
  for (double y : silo.labels) {
    if (!std::isfinite(y)) {
      throw ParameterError("silo '" + silo.silo_id + "' contains non-finite labels");
    }
    if (task.is_classification()) {
      const int c = static_cast<int>(y);
      if (static_cast<double>(c) != y || c < 0 || c >= task.num_classes) {
        throw ParameterError("silo '" + silo.silo_id + "' has label outside [0, num_classes)");
      }
    }
  }
}

void validate_federation(const FederationData& data) {
  if (data.num_silos() < 2) throw ParameterError("a federation needs at least 2 silos");
  if (data.test.size() != data.train.size()) {
    throw ParameterError("train/test silo lists must align");
  }
  const int dim = data.dim();
  for (std::size_t k = 0; k < data.train.size(); ++k) {
    validate_silo(data.train[k], data.task);
    validate_silo(data.test[k], data.task);
    if (data.train[k].silo_id != data.test[k].silo_id) {
      throw ParameterError("train/test silo ids must match per position");
    }
    if (data.train[k].dim != dim || data.test[k].dim != dim) {
      throw ParameterError("all silos must share one feature dimension");
    }
  }
}

FederationData gen_heterogeneous_linear(int silos, int train_per_silo, int dim, double tau2,
                                        double label_noise, TaskSpec task, std::uint64_t seed,
                                        int test_per_silo) {
  if (silos < 2) throw ParameterError("need at least 2 silos");
  if (train_per_silo < 1 || dim < 1) throw ParameterError("invalid dataset dimensions");
  if (tau2 < 0.0) throw ParameterError("tau2 must be >= 0");
  if (label_noise < 0.0) throw ParameterError("label noise must be >= 0");
  if (task.is_classification() && label_noise > 1.0) {
    throw ParameterError("classification label noise is a flip probability in [0, 1]");
  }
  if (test_per_silo <= 0) test_per_silo = std::max(1, (train_per_silo + 3) / 4);

  // Shared meta weight; unit scale keeps scores O(sqrt(dim)).
  Rng meta_rng(derive_seed(seed, 0x6d657461));
  std::vector<double> theta(dim);
  for (double& v : theta) v = meta_rng.normal();

  FederationData data;
  data.task = task;
  const double tau = std::sqrt(tau2);
  for (int k = 0; k < silos; ++k) {
    Rng weight_rng(derive_seed(seed, 1, k));
    std::vector<double> w_k(dim);
    for (int j = 0; j < dim; ++j) w_k[j] = theta[j] + tau * weight_rng.normal();
    const std::string id = "silo" + std::to_string(k);
    Rng train_rng(derive_seed(seed, 2, k));
    Rng test_rng(derive_seed(seed, 3, k));
    data.train.push_back(
        make_linear_silo(id, train_per_silo, w_k, {}, task, label_noise, train_rng));
    data.test.push_back(
        make_linear_silo(id, test_per_silo, w_k, {}, task, label_noise, test_rng));
  }
  return data;
}

FederationData gen_clustered(int silos, int train_per_silo, int dim, const ClusterSpec& spec,
                             std::uint64_t seed, int test_per_silo) {
  if (silos < 2) throw ParameterError("need at least 2 silos");
  if (train_per_silo < 1 || dim < 1) throw ParameterError("invalid dataset dimensions");
  const int clusters = spec.num_clusters;
  if (clusters < 1 || clusters > silos) throw ParameterError("cluster count must lie in [1, K]");
  if (silos % clusters != 0) throw ParameterError("cluster count must divide the silo count");
  if (clusters > dim) throw ParameterError("orthogonal cluster weights need G <= dim");
  if (spec.intra_silo_mask_rate < 0.0 || spec.intra_silo_mask_rate > 1.0) {
    throw ParameterError("mask rate must lie in [0, 1]");
  }
  if (test_per_silo <= 0) test_per_silo = std::max(1, (train_per_silo + 3) / 4);

  // Cluster weights: Gram-Schmidt on random directions, first of them the
  // base vector, all scaled to norm sqrt(dim).
  Rng cluster_rng(derive_seed(seed, 0x636c7573));
  std::vector<std::vector<double>> basis;
  while (static_cast<int>(basis.size()) < clusters) {
    std::vector<double> v(dim);
    for (double& x : v) x = cluster_rng.normal();
    for (const auto& u : basis) {
      const double proj = dot(v, u);
      for (int j = 0; j < dim; ++j) v[j] -= proj * u[j];
    }
    const double norm = std::sqrt(dot(v, v));
    if (norm < 1e-9) continue;  // rare degenerate draw; redraw
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  const double scale = std::sqrt(static_cast<double>(dim));
  for (auto& u : basis) {
    for (double& x : u) x *= scale;
  }

  const int per_cluster = silos / clusters;
  const int masked = static_cast<int>(std::lround(spec.intra_silo_mask_rate * dim));

  FederationData data;
  data.task = TaskSpec::classification(2);
  for (int k = 0; k < silos; ++k) {
    const int g = k / per_cluster;
    // Fixed silo mask: `masked` coordinates zeroed, sampled without replacement.
    std::vector<double> mask(dim, 1.0);
    if (masked > 0) {
      Rng mask_rng(derive_seed(seed, 4, k));
      std::vector<int> coords(dim);
      std::iota(coords.begin(), coords.end(), 0);
      shuffle_indices(coords, mask_rng);
      for (int m = 0; m < masked; ++m) mask[coords[m]] = 0.0;
    }
    const std::string id = "silo" + std::to_string(k);
    Rng train_rng(derive_seed(seed, 5, k));
    Rng test_rng(derive_seed(seed, 6, k));
    data.train.push_back(
        make_linear_silo(id, train_per_silo, basis[g], mask, data.task, 0.0, train_rng));
    data.test.push_back(
        make_linear_silo(id, test_per_silo, basis[g], mask, data.task, 0.0, test_rng));
  }
  return data;
}

FederationData gen_mean_estimation(const meanest::MeanEstProblem& problem, std::uint64_t seed) {
  meanest::validate_problem(problem);
  FederationData data;
  data.task = TaskSpec::regression();
  const double tau = std::sqrt(problem.heterogeneity);
  for (int k = 0; k < problem.silos; ++k) {
    Rng rng(derive_seed(seed, 7, k));
    const double w_k = problem.meta_center + tau * rng.normal();
    const double sigma = std::sqrt(problem.data_var_of(k));
    const int n = problem.n_of(k);
    const auto fill = [&](SiloDataset& silo, int count) {
      silo.silo_id = "silo" + std::to_string(k);
      silo.dim = 1;
      silo.features.assign(count, 1.0);
      silo.labels.reserve(count);
      for (int i = 0; i < count; ++i) silo.labels.push_back(w_k + sigma * rng.normal());
    };
    SiloDataset train, test;
    fill(train, n);
    fill(test, n);
    data.train.push_back(std::move(train));
    data.test.push_back(std::move(test));
  }
  return data;
}

namespace {

SiloDataset parse_csv_silo(const fs::path& path, const std::string& silo_id) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  SiloDataset silo;
  silo.silo_id = silo_id;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> values;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = line.find(',', pos);
      const std::string cell =
          line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
        values.push_back(v);
      } catch (const std::exception&) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) +
                          ": non-numeric cell '" + cell + "'");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (values.size() < 2) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": need a label and at least one feature");
    }
    for (double v : values) {
      if (!std::isfinite(v)) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": non-finite value");
      }
    }
    const int row_dim = static_cast<int>(values.size()) - 1;
    if (silo.dim == 0) {
      silo.dim = row_dim;
    } else if (silo.dim != row_dim) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": ragged row, expected " +
                        std::to_string(silo.dim) + " features, got " + std::to_string(row_dim));
    }
    silo.labels.push_back(values[0]);
    silo.features.insert(silo.features.end(), values.begin() + 1, values.end());
  }
  if (silo.size() == 0) throw FormatError(path.string() + ": no data rows");
  return silo;
}

}  // namespace

FederationData load_csv_silos(const std::string& directory, TaskSpec task) {
  const fs::path dir(directory);
  if (!fs::is_directory(dir)) throw FormatError("not a directory: " + directory);

  std::map<std::string, std::pair<fs::path, fs::path>> pairs;  // id -> (train, test)
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    const auto match = [&](const std::string& suffix) -> std::string {
      if (name.size() > suffix.size() &&
          name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
        return name.substr(0, name.size() - suffix.size());
      }
      return {};
    };
    if (const std::string id = match("_train.csv"); !id.empty()) {
      pairs[id].first = entry.path();
    } else if (const std::string id = match("_test.csv"); !id.empty()) {
      pairs[id].second = entry.path();
    }
  }
  if (pairs.empty()) throw FormatError("no silo files found in " + directory);

  FederationData data;
  data.task = task;
  for (const auto& [id, files] : pairs) {
    if (files.first.empty()) throw FormatError("missing " + id + "_train.csv in " + directory);
    if (files.second.empty()) throw FormatError("missing " + id + "_test.csv in " + directory);
    data.train.push_back(parse_csv_silo(files.first, id));
    data.test.push_back(parse_csv_silo(files.second, id));
  }
  const int dim = data.dim();
  for (const auto& silo : data.train) {
    if (silo.dim != dim) {
      throw FormatError("silo '" + silo.silo_id + "' has " + std::to_string(silo.dim) +
                        " features but the federation uses " + std::to_string(dim));
    }
  }
  validate_federation(data);
  return data;
}

FederationData train_test_split(const std::vector<SiloDataset>& pools, TaskSpec task,
                                double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0) || !(test_fraction < 1.0)) {
    throw ParameterError("test fraction must lie strictly inside (0, 1)");
  }
  FederationData data;
  data.task = task;
  for (std::size_t k = 0; k < pools.size(); ++k) {
    const SiloDataset& pool = pools[k];
    if (pool.size() < 2) {
      throw ParameterError("silo '" + pool.silo_id + "' has fewer than 2 examples to split");
    }
    const int n = pool.size();
    int n_test = static_cast<int>(std::lround(test_fraction * n));
    n_test = std::clamp(n_test, 1, n - 1);

    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(seed, 8, k));
    shuffle_indices(idx, rng);

    SiloDataset train, test;
    train.silo_id = test.silo_id = pool.silo_id;
    train.dim = test.dim = pool.dim;
    for (int i = 0; i < n; ++i) {
      SiloDataset& dst = i < n_test ? test : train;
      const auto row = pool.row(idx[i]);
      dst.features.insert(dst.features.end(), row.begin(), row.end());
      dst.labels.push_back(pool.labels[idx[i]]);
    }
    data.train.push_back(std::move(train));
    data.test.push_back(std::move(test));
  }
  validate_federation(data);
  return data;
}

}  // namespace silofed::datasets
