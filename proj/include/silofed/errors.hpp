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

#ifndef SILOFED_ERRORS_HPP_
#define SILOFED_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace silofed {

// Invalid argument to a library operation (bad range, mismatched shapes, ...).
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// Noise calibration could not meet the privacy target within search bounds.
class CalibrationError : public std::runtime_error {
 public:
  explicit CalibrationError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file (CSV dataset, JSON config).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// A privacy plan cannot fit the configured budget (e.g. selection overhead
// alone exceeds epsilon).
class InfeasiblePlanError : public std::runtime_error {
 public:
  explicit InfeasiblePlanError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace silofed

#endif  // SILOFED_ERRORS_HPP_
