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

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "bidlab/trial.hpp"

namespace bidlab {

// Two admissible values per covariate. Each trial draws every covariate
// independently and uniformly from its pair.
struct ArmTable {
  std::array<int, 2> num_bidders{2, 4};
  std::array<double, 2> alpha{0.01, 0.1};
  std::array<double, 2> gamma{0.0, 0.95};
  std::array<bool, 2> egreedy{false, true};
  std::array<int, 2> design{0, 1};
  std::array<bool, 2> asynchronous{false, true};
  std::array<bool, 2> feedback{false, true};
  std::array<int, 2> num_actions{6, 11};
  std::array<double, 2> decay{0.9999, 0.99995};
};

struct ExperimentConfig {
  int num_trials = 427;
  std::uint64_t master_seed = 1;
  int max_episodes = kDefaultMaxEpisodes;
  ArmTable arms;
  std::filesystem::path output = "dataset.csv";
  int parallelism = 1;
};

void validate(const ExperimentConfig& config);

struct TrialRecord {
  int trial = 0;
  TrialConfig config;
  TrialOutcomes outcomes;
  // Set when the trial aborted; outcomes are then NaN / -1.
  bool failed = false;
  std::string error;
};

struct Dataset {
  std::vector<TrialRecord> records;
  std::uint64_t master_seed = 0;
  ArmTable arms;
  std::string version = BIDLAB_VERSION;
};

// Header of the dataset CSV, in column order.
const std::vector<std::string>& dataset_columns();

// Deterministic in (master_seed, trial_index) alone.
TrialConfig sample_trial_config(const ArmTable& arms, int trial_index,
                                std::uint64_t master_seed,
                                int max_episodes = kDefaultMaxEpisodes);

struct Progress {
  int done = 0;
  int total = 0;
  double elapsed_seconds = 0.0;
};
using ProgressCallback = std::function<void(const Progress&)>;

// Runs every trial on a pool of `parallelism` workers. Records come back in
// trial order whatever the interleaving. Does not touch the filesystem.
Dataset run_trials(const ExperimentConfig& config,
                   const ProgressCallback& progress = {});

// run_trials, then persists the dataset to config.output and a sidecar
// "<output>.meta.json". The output is checked for writability before any
// trial runs; rows are staged in "<output>.partial" and renamed into place
// only once complete. Throws IoError.
Dataset run_experiment(const ExperimentConfig& config,
                       const ProgressCallback& progress = {});

void write_dataset(std::ostream& out, const Dataset& ds);
void write_dataset(const Dataset& ds, const std::filesystem::path& path);

// Parses a dataset CSV. Columns may appear in any order; the twelve
// analysis columns are required (MissingColumnsError), the rest default.
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);

nlohmann::json to_json(const ArmTable& arms);
ArmTable arm_table_from_json(const nlohmann::json& j);

// Keys: num_trials, master_seed, max_episodes, arms, output, parallelism.
// Absent keys keep their defaults; unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);

nlohmann::json dataset_metadata(const Dataset& ds, double wall_seconds);

}  // namespace bidlab
