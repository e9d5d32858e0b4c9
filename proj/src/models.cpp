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

#include "silofed/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "silofed/errors.hpp"

namespace silofed::models {

namespace {

double dot_plus_bias(const LinearModel& model, std::span<const double> x, int c) {
  double s = model.bias[c];
  const double* w = model.weights.data() + static_cast<std::size_t>(c) * model.dim;
  for (int j = 0; j < model.dim; ++j) s += w[j] * x[j];
  return s;
}

void check_example(const LinearModel& model, const LossKind& loss, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.dim) {
    throw ParameterError("example dimension does not match the model");
  }
  const int expected = loss.kind == LossKind::kSoftmax ? loss.num_classes : 1;
  if (model.outputs != expected) {
    throw ParameterError("model output count does not match the loss");
  }
}

// Stable softmax probabilities of the logits.
void softmax_probs(std::span<const double> logits, std::span<double> probs) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    probs[c] = std::exp(logits[c] - m);
    z += probs[c];
  }
  for (double& p : probs) p /= z;
}

}  // namespace

LossKind LossKind::softmax(int num_classes) {
  if (num_classes < 2) throw ParameterError("softmax needs at least 2 classes");
  return {kSoftmax, num_classes};
}

LinearModel LinearModel::zeros(int dim, int outputs) {
  if (dim < 1 || outputs < 1) throw ParameterError("model dimensions must be >= 1");
  LinearModel m;
  m.dim = dim;
  m.outputs = outputs;
  m.weights.assign(static_cast<std::size_t>(dim) * outputs, 0.0);
  m.bias.assign(outputs, 0.0);
  return m;
}

int output_count(const LossKind& loss, const datasets::TaskSpec& task) {
  if (loss.kind == LossKind::kSoftmax) return loss.num_classes;
  (void)task;
  return 1;
}

std::vector<double> flatten(const LinearModel& model) {
  std::vector<double> out;
  out.reserve(model.parameter_count());
  out.insert(out.end(), model.weights.begin(), model.weights.end());
  out.insert(out.end(), model.bias.begin(), model.bias.end());
  return out;
}

LinearModel unflatten(std::span<const double> params, int dim, int outputs) {
  LinearModel m = LinearModel::zeros(dim, outputs);
  if (params.size() != static_cast<std::size_t>(m.parameter_count())) {
    throw ParameterError("flat parameter vector has the wrong length");
  }
  std::copy(params.begin(), params.begin() + static_cast<std::size_t>(dim) * outputs,
            m.weights.begin());
  std::copy(params.begin() + static_cast<std::size_t>(dim) * outputs, params.end(),
            m.bias.begin());
  return m;
}

void example_gradient(const LinearModel& model, const LossKind& loss, std::span<const double> x,
                      double y, std::span<double> out) {
  check_example(model, loss, x);
  if (out.size() != static_cast<std::size_t>(model.parameter_count())) {
    throw ParameterError("gradient buffer has the wrong length");
  }
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t bias_base = static_cast<std::size_t>(model.dim) * model.outputs;

  switch (loss.kind) {
    case LossKind::kSquaredError: {
      const double residual = dot_plus_bias(model, x, 0) - y;
      for (int j = 0; j < model.dim; ++j) out[j] = residual * x[j];
      out[bias_base] = residual;
      break;
    }
    case LossKind::kHinge: {
      const double sign = y >= 0.5 ? 1.0 : -1.0;
      const double margin = sign * dot_plus_bias(model, x, 0);
      if (margin < 1.0) {  // kink at margin == 1 contributes 0
        for (int j = 0; j < model.dim; ++j) out[j] = -sign * x[j];
        out[bias_base] = -sign;
      }
      break;
    }
    case LossKind::kSoftmax: {
      const int classes = loss.num_classes;
      const int label = static_cast<int>(y);
      if (label < 0 || label >= classes) throw ParameterError("softmax label out of range");
      std::vector<double> logits(classes), probs(classes);
      for (int c = 0; c < classes; ++c) logits[c] = dot_plus_bias(model, x, c);
      softmax_probs(logits, probs);
      for (int c = 0; c < classes; ++c) {
        const double coeff = probs[c] - (c == label ? 1.0 : 0.0);
        double* col = out.data() + static_cast<std::size_t>(c) * model.dim;
        for (int j = 0; j < model.dim; ++j) col[j] = coeff * x[j];
        out[bias_base + c] = coeff;
      }
      break;
    }
  }
}

std::vector<std::vector<double>> per_example_gradients(const LinearModel& model,
                                                       const LossKind& loss,
                                                       const datasets::SiloDataset& batch,
                                                       std::span<const int> indices) {
  if (batch.size() == 0) throw ParameterError("empty batch");
  std::vector<int> all;
  if (indices.empty()) {
    all.resize(batch.size());
    std::iota(all.begin(), all.end(), 0);
    indices = all;
  }
  std::vector<std::vector<double>> grads;
  grads.reserve(indices.size());
  for (int i : indices) {
    std::vector<double> g(model.parameter_count());
    example_gradient(model, loss, batch.row(i), batch.labels[i], g);
    grads.push_back(std::move(g));
  }
  return grads;
}

double example_loss(const LinearModel& model, const LossKind& loss, std::span<const double> x,
                    double y) {
  check_example(model, loss, x);
  switch (loss.kind) {
    case LossKind::kSquaredError: {
      const double residual = dot_plus_bias(model, x, 0) - y;
      return 0.5 * residual * residual;
    }
    case LossKind::kHinge: {
      const double sign = y >= 0.5 ? 1.0 : -1.0;
      return std::max(0.0, 1.0 - sign * dot_plus_bias(model, x, 0));
    }
    case LossKind::kSoftmax: {
      const int classes = loss.num_classes;
      const int label = static_cast<int>(y);
      std::vector<double> logits(classes), probs(classes);
      for (int c = 0; c < classes; ++c) logits[c] = dot_plus_bias(model, x, c);
      softmax_probs(logits, probs);
      return -std::log(std::max(probs[label], 1e-300));
    }
  }
  return 0.0;
}

Evaluation evaluate(const LinearModel& model, const LossKind& loss,
                    const datasets::SiloDataset& data) {
  if (data.size() == 0) throw ParameterError("cannot evaluate on an empty dataset");
  double loss_sum = 0.0;
  double error_sum = 0.0;
  for (int i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    const double y = data.labels[i];
    loss_sum += example_loss(model, loss, x, y);
    switch (loss.kind) {
      case LossKind::kSquaredError: {
        const double d = dot_plus_bias(model, x, 0) - y;
        error_sum += d * d;
        break;
      }
      case LossKind::kHinge: {
        const int predicted = dot_plus_bias(model, x, 0) >= 0.0 ? 1 : 0;
        error_sum += predicted == static_cast<int>(y) ? 0.0 : 1.0;
        break;
      }
      case LossKind::kSoftmax: {
        int best = 0;
        double best_score = dot_plus_bias(model, x, 0);
        for (int c = 1; c < loss.num_classes; ++c) {
          const double s = dot_plus_bias(model, x, c);
          if (s > best_score) {
            best_score = s;
            best = c;
          }
        }
        error_sum += best == static_cast<int>(y) ? 0.0 : 1.0;
        break;
      }
    }
  }
  const double n = data.size();
  return {loss_sum / n, error_sum / n};
}

}  // namespace silofed::models
