// Copyright 2026 The bidlab Authors.
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

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bidlab {

// Invalid construction parameters (grid size, bidder count, flags).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Internal invariant violated (non-finite Q values and the like).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Regressor matrix is not of full column rank.
class RankDeficientError : public std::runtime_error {
 public:
  RankDeficientError(const std::string& what, std::vector<std::string> cols)
      : std::runtime_error(what), collinear_(std::move(cols)) {}
  const std::vector<std::string>& collinear_columns() const {
    return collinear_;
  }

 private:
  std::vector<std::string> collinear_;
};

// Dataset lacks required columns.
class MissingColumnsError : public std::runtime_error {
 public:
  explicit MissingColumnsError(std::vector<std::string> cols)
      : std::runtime_error(describe(cols)), missing_(std::move(cols)) {}
  const std::vector<std::string>& missing() const { return missing_; }

 private:
  static std::string describe(const std::vector<std::string>& cols) {
    std::string s = "dataset is missing columns:";
    for (const auto& c : cols) s += " " + c;
    return s;
  }
  std::vector<std::string> missing_;
};

}  // namespace bidlab
