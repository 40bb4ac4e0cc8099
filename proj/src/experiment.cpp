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

#include "bidlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "bidlab/errors.hpp"
#include "bidlab/format.hpp"

namespace bidlab {
namespace {

constexpr std::uint64_t kTrialSeedSalt = 0x5eedULL << 32;

template <typename T>
T pick(const std::array<T, 2>& arms, RandomStream& rng) {
  return arms[rng.index(2)];
}

const std::vector<std::string>& required_columns() {
  static const std::vector<std::string> cols = {
      "design", "N",           "alpha", "gamma",   "egreedy",
      "asynchronous", "feedback", "num_actions", "decay", "bid2val",
      "vol",    "episodes"};
  return cols;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

int as_int(double v, const char* name) {
  if (!std::isfinite(v) || v != std::floor(v)) {
    throw DomainError(std::string("column ") + name + " must hold integers");
  }
  return static_cast<int>(v);
}

bool as_flag(double v, const char* name) {
  if (v != 0.0 && v != 1.0) {
    throw DomainError(std::string("column ") + name + " must hold 0 or 1");
  }
  return v == 1.0;
}

template <typename T>
void read_pair(const nlohmann::json& j, const char* key,
               std::array<T, 2>& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) {
    throw ConfigError(std::string("arm '") + key + "' needs exactly 2 values");
  }
  if constexpr (std::is_same_v<T, bool>) {
    out = {v[0].get<int>() != 0, v[1].get<int>() != 0};
  } else {
    out = {v[0].get<T>(), v[1].get<T>()};
  }
}

}  // namespace

void validate(const ExperimentConfig& c) {
  if (c.num_trials < 1) throw ConfigError("num_trials must be positive");
  if (c.max_episodes < 1) throw ConfigError("max_episodes must be positive");
  if (c.parallelism < 1) throw ConfigError("parallelism must be positive");
  for (int d : c.arms.design) payment_rule_from_code(d);
  // Every arm combination must be a valid trial.
  for (int i = 0; i < 2; ++i) {
    TrialConfig t;
    t.num_bidders = c.arms.num_bidders[i];
    t.alpha = c.arms.alpha[i];
    t.gamma = c.arms.gamma[i];
    t.num_actions = c.arms.num_actions[i];
    t.decay = c.arms.decay[i];
    t.max_episodes = c.max_episodes;
    validate(t);
  }
}

const std::vector<std::string>& dataset_columns() {
  static const std::vector<std::string> cols = {
      "trial",   "design",   "N",           "alpha", "gamma",
      "egreedy", "asynchronous", "feedback", "num_actions", "decay",
      "bid2val", "vol",      "episodes",    "converged", "seed"};
  return cols;
}

TrialConfig sample_trial_config(const ArmTable& arms, int trial_index,
                                std::uint64_t master_seed, int max_episodes) {
  const auto index = static_cast<std::uint64_t>(trial_index);
  RandomStream rng(derive_seed(master_seed, index));
  TrialConfig c;
  c.design = payment_rule_from_code(pick(arms.design, rng));
  c.num_bidders = pick(arms.num_bidders, rng);
  c.alpha = pick(arms.alpha, rng);
  c.gamma = pick(arms.gamma, rng);
  c.egreedy = pick(arms.egreedy, rng);
  c.asynchronous = pick(arms.asynchronous, rng);
  c.feedback = pick(arms.feedback, rng);
  c.num_actions = pick(arms.num_actions, rng);
  c.decay = pick(arms.decay, rng);
  c.max_episodes = max_episodes;
  c.seed = derive_seed(master_seed ^ kTrialSeedSalt, index);
  return c;
}

Dataset run_trials(const ExperimentConfig& config,
                   const ProgressCallback& progress) {
  validate(config);
  Dataset ds;
  ds.master_seed = config.master_seed;
  ds.arms = config.arms;
  ds.records.resize(config.num_trials);

  const auto start = std::chrono::steady_clock::now();
  std::atomic<int> next{0};
  std::mutex progress_mutex;
  int done = 0;

  auto worker = [&] {
    for (int i = next++; i < config.num_trials; i = next++) {
      TrialRecord& rec = ds.records[i];
      rec.trial = i;
      rec.config = sample_trial_config(config.arms, i, config.master_seed,
                                       config.max_episodes);
      try {
        rec.outcomes = run_trial(rec.config).outcomes;
      } catch (const std::exception& e) {
        rec.failed = true;
        rec.error = e.what();
        rec.outcomes = {std::nan(""), std::nan(""), -1, false};
      }
      std::lock_guard lock(progress_mutex);
      ++done;
      if (progress) {
        const std::chrono::duration<double> dt =
            std::chrono::steady_clock::now() - start;
        progress({done, config.num_trials, dt.count()});
      }
    }
  };

  const int width = std::min(config.parallelism, config.num_trials);
  if (width <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(width);
    for (int w = 0; w < width; ++w) pool.emplace_back(worker);
  }
  return ds;
}

Dataset run_experiment(const ExperimentConfig& config,
                       const ProgressCallback& progress) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();

  std::filesystem::path partial = config.output;
  partial += ".partial";
  std::ofstream out(partial, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write to " + config.output.string());
  }

  Dataset ds = run_trials(config, progress);
  write_dataset(out, ds);
  out.close();
  if (!out) throw IoError("failed writing " + partial.string());

  std::error_code ec;
  std::filesystem::rename(partial, config.output, ec);
  if (ec) {
    throw IoError("cannot move " + partial.string() + " into place: " +
                  ec.message());
  }

  const std::chrono::duration<double> wall =
      std::chrono::steady_clock::now() - start;
  std::filesystem::path meta = config.output;
  meta += ".meta.json";
  std::ofstream mout(meta);
  mout << dataset_metadata(ds, wall.count()).dump(2) << '\n';
  if (!mout) throw IoError("failed writing " + meta.string());
  return ds;
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  const auto& cols = dataset_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out << (i ? "," : "") << cols[i];
  }
  out << '\n';
  for (const TrialRecord& r : ds.records) {
    const TrialConfig& c = r.config;
    out << r.trial << ',' << design_code(c.design) << ',' << c.num_bidders
        << ',' << format_double(c.alpha) << ',' << format_double(c.gamma)
        << ',' << int(c.egreedy) << ',' << int(c.asynchronous) << ','
        << int(c.feedback) << ',' << c.num_actions << ','
        << format_double(c.decay) << ','
        << format_double(r.outcomes.bid2val) << ','
        << format_double(r.outcomes.vol) << ',' << r.outcomes.episodes << ','
        << int(r.outcomes.converged) << ',' << c.seed << '\n';
  }
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write to " + path.string());
  write_dataset(out, ds);
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("dataset is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::map<std::string, std::size_t, std::less<>> where;
  const auto header = split(line);
  for (std::size_t i = 0; i < header.size(); ++i) {
    where.emplace(std::string(header[i]), i);
  }
  std::vector<std::string> missing;
  for (const auto& c : required_columns()) {
    if (!where.contains(c)) missing.push_back(c);
  }
  if (!missing.empty()) throw MissingColumnsError(std::move(missing));

  Dataset ds;
  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw DomainError("row " + std::to_string(row + 1) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
    }
    auto num = [&](const char* name) {
      return parse_double(fields[where.find(name)->second]);
    };
    auto opt = [&](const char* name, double fallback) {
      auto it = where.find(name);
      return it == where.end() ? fallback : parse_double(fields[it->second]);
    };

    TrialRecord r;
    r.trial = as_int(opt("trial", row), "trial");
    TrialConfig& c = r.config;
    c.design = payment_rule_from_code(as_int(num("design"), "design"));
    c.num_bidders = as_int(num("N"), "N");
    c.alpha = num("alpha");
    c.gamma = num("gamma");
    c.egreedy = as_flag(num("egreedy"), "egreedy");
    c.asynchronous = as_flag(num("asynchronous"), "asynchronous");
    c.feedback = as_flag(num("feedback"), "feedback");
    c.num_actions = as_int(num("num_actions"), "num_actions");
    c.decay = num("decay");
    r.outcomes.bid2val = num("bid2val");
    r.outcomes.vol = num("vol");
    r.outcomes.episodes = as_int(num("episodes"), "episodes");
    r.outcomes.converged = as_flag(opt("converged", 0), "converged");
    if (auto it = where.find("seed"); it != where.end()) {
      const auto text = fields[it->second];
      std::uint64_t seed = 0;
      auto [end, ec] =
          std::from_chars(text.data(), text.data() + text.size(), seed);
      if (ec != std::errc() || end != text.data() + text.size()) {
        throw DomainError("bad seed '" + std::string(text) + "'");
      }
      c.seed = seed;
    }
    r.failed = !std::isfinite(r.outcomes.bid2val);
    ds.records.push_back(std::move(r));
    ++row;
  }
  return ds;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset(in);
}

nlohmann::json to_json(const ArmTable& a) {
  auto flags = [](const std::array<bool, 2>& f) {
    return nlohmann::json::array({int(f[0]), int(f[1])});
  };
  return {{"N", a.num_bidders},
          {"alpha", a.alpha},
          {"gamma", a.gamma},
          {"egreedy", flags(a.egreedy)},
          {"design", a.design},
          {"asynchronous", flags(a.asynchronous)},
          {"feedback", flags(a.feedback)},
          {"num_actions", a.num_actions},
          {"decay", a.decay}};
}

ArmTable arm_table_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {
      "N",            "alpha",    "gamma",       "egreedy", "design",
      "asynchronous", "feedback", "num_actions", "decay"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown arm '" + key + "'");
    }
  }
  ArmTable a;
  read_pair(j, "N", a.num_bidders);
  read_pair(j, "alpha", a.alpha);
  read_pair(j, "gamma", a.gamma);
  read_pair(j, "egreedy", a.egreedy);
  read_pair(j, "design", a.design);
  read_pair(j, "asynchronous", a.asynchronous);
  read_pair(j, "feedback", a.feedback);
  read_pair(j, "num_actions", a.num_actions);
  read_pair(j, "decay", a.decay);
  return a;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {
      "num_trials", "master_seed", "max_episodes",
      "arms",       "output",      "parallelism"};
  if (!j.is_object()) throw ConfigError("experiment config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  ExperimentConfig c;
  try {
    c.num_trials = j.value("num_trials", c.num_trials);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.max_episodes = j.value("max_episodes", c.max_episodes);
    c.parallelism = j.value("parallelism", c.parallelism);
    if (j.contains("output")) c.output = j.at("output").get<std::string>();
    if (j.contains("arms")) c.arms = arm_table_from_json(j.at("arms"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"num_trials", c.num_trials},
          {"master_seed", c.master_seed},
          {"max_episodes", c.max_episodes},
          {"arms", to_json(c.arms)},
          {"output", c.output.string()},
          {"parallelism", c.parallelism}};
}

nlohmann::json dataset_metadata(const Dataset& ds, double wall_seconds) {
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& r : ds.records) {
    if (r.failed) failures.push_back({{"trial", r.trial}, {"error", r.error}});
  }
  return {{"master_seed", ds.master_seed},
          {"arms", to_json(ds.arms)},
          {"tool_version", ds.version},
          {"num_trials", ds.records.size()},
          {"failures", failures},
          {"wall_seconds", wall_seconds},
          {"columns", dataset_columns()}};
}

}  // namespace bidlab
