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

#ifndef SILOFED_MODELS_HPP_
#define SILOFED_MODELS_HPP_

#include <span>
#include <vector>

#include "silofed/datasets.hpp"

namespace silofed::models {

struct LossKind {
  enum Kind { kHinge, kSquaredError, kSoftmax };
  Kind kind = kSquaredError;
  int num_classes = 1;  // softmax only

  static LossKind hinge() { return {kHinge, 2}; }
  static LossKind squared_error() { return {kSquaredError, 1}; }
  static LossKind softmax(int num_classes);
};

// Linear map R^d -> R^m; m = 1 for regression / binary-hinge, m = num_classes
// for softmax. Parameters flatten to [weights column-major, bias].
struct LinearModel {
  int dim = 0;
  int outputs = 1;
  std::vector<double> weights;  // d*m, weight(j, c) = weights[c*d + j]
  std::vector<double> bias;     // m

  static LinearModel zeros(int dim, int outputs);
  int parameter_count() const { return dim * outputs + outputs; }
  double weight(int j, int c) const { return weights[static_cast<std::size_t>(c) * dim + j]; }
};

int output_count(const LossKind& loss, const datasets::TaskSpec& task);

std::vector<double> flatten(const LinearModel& model);
LinearModel unflatten(std::span<const double> params, int dim, int outputs);

// Gradient of the per-example loss at (x, y), written into `out` in flat
// parameter order. Hinge labels are class indices {0, 1} mapped to signs
// (-1, +1); the subgradient at the hinge kink is 0.
void example_gradient(const LinearModel& model, const LossKind& loss, std::span<const double> x,
                      double y, std::span<double> out);

std::vector<std::vector<double>> per_example_gradients(const LinearModel& model,
                                                       const LossKind& loss,
                                                       const datasets::SiloDataset& batch,
                                                       std::span<const int> indices = {});

double example_loss(const LinearModel& model, const LossKind& loss, std::span<const double> x,
                    double y);

struct Evaluation {
  double mean_loss = 0.0;
  double error = 0.0;  // misclassification rate (classification) or MSE (regression)
};

Evaluation evaluate(const LinearModel& model, const LossKind& loss,
                    const datasets::SiloDataset& data);

}  // namespace silofed::models

#endif  // SILOFED_MODELS_HPP_
