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

#include "bidlab/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <thread>

#include "bidlab/errors.hpp"
#include "bidlab/experiment.hpp"
#include "bidlab/format.hpp"
#include "bidlab/stats.hpp"
#include "bidlab/trial.hpp"

namespace bidlab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kOutDirEnv = "BIDLAB_OUT_DIR";

fs::path default_out_dir() {
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return ".";
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write to " + path.string());
  return out;
}

void finish_output(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

PaymentRule parse_design(const std::string& s) {
  if (s == "first" || s == "1") return PaymentRule::FirstPrice;
  if (s == "second" || s == "0") return PaymentRule::SecondPrice;
  throw ConfigError("design must be first|second|1|0, got '" + s + "'");
}

json to_json(const TrialConfig& c) {
  return {{"design", std::string(to_string(c.design))},
          {"N", c.num_bidders},
          {"alpha", c.alpha},
          {"gamma", c.gamma},
          {"egreedy", c.egreedy},
          {"asynchronous", c.asynchronous},
          {"feedback", c.feedback},
          {"num_actions", c.num_actions},
          {"decay", c.decay},
          {"max_episodes", c.max_episodes},
          {"seed", c.seed},
          {"convergence", c.convergence == ConvergenceRule::WinningBid
                              ? "winning-bid"
                              : "greedy-policy"}};
}

ConvergenceRule parse_convergence(const std::string& s) {
  if (s == "winning-bid") return ConvergenceRule::WinningBid;
  if (s == "greedy-policy") return ConvergenceRule::GreedyPolicy;
  throw ConfigError("convergence must be winning-bid|greedy-policy");
}

void apply_json(TrialConfig& c, const json& j) {
  static const std::vector<std::string> known = {
      "design",   "N",           "alpha", "gamma",        "egreedy",
      "asynchronous", "feedback", "num_actions", "decay", "max_episodes",
      "seed",     "convergence"};
  if (!j.is_object()) throw ConfigError("trial config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  try {
    if (j.contains("design")) {
      const auto& d = j.at("design");
      c.design = d.is_string() ? parse_design(d.get<std::string>())
                               : payment_rule_from_code(d.get<int>());
    }
    c.num_bidders = j.value("N", c.num_bidders);
    c.alpha = j.value("alpha", c.alpha);
    c.gamma = j.value("gamma", c.gamma);
    c.egreedy = j.value("egreedy", c.egreedy);
    c.asynchronous = j.value("asynchronous", c.asynchronous);
    c.feedback = j.value("feedback", c.feedback);
    c.num_actions = j.value("num_actions", c.num_actions);
    c.decay = j.value("decay", c.decay);
    c.max_episodes = j.value("max_episodes", c.max_episodes);
    c.seed = j.value("seed", c.seed);
    if (j.contains("convergence")) {
      c.convergence = parse_convergence(j.at("convergence").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad trial config: ") + e.what());
  }
}

struct TrialFlags {
  std::string config;
  std::string design = "first";
  int n = 4;
  double alpha = 0.1;
  double gamma = 0.99;
  bool egreedy = false;
  bool asynchronous = true;
  bool feedback = true;
  int actions = 6;
  double decay = 0.9999;
  int max_episodes = kDefaultMaxEpisodes;
  std::uint64_t seed = 0;
  std::string convergence = "winning-bid";
  std::string out_dir;
  std::string log;
  std::string moving_average;
  std::string outcomes;
  int thin = 100;
  int trailing = kOutcomeWindow;
  bool bids = false;
};

struct ExperimentFlags {
  std::string config;
  int trials = 427;
  std::uint64_t seed = 1;
  int max_episodes = kDefaultMaxEpisodes;
  std::string out;
  int parallel = 0;
  std::string out_dir;
};

struct AnalyzeFlags {
  std::string in;
  std::string out_dir;
  bool tables = false;
  bool boxplots = false;
  bool cate = false;
};

int cmd_trial(const CLI::App& sub, const TrialFlags& f, std::ostream& out) {
  TrialConfig c;
  if (!f.config.empty()) apply_json(c, read_json_file(f.config));
  auto given = [&](const char* name) { return sub.count(name) > 0; };
  if (given("--design")) c.design = parse_design(f.design);
  if (given("--n")) c.num_bidders = f.n;
  if (given("--alpha")) c.alpha = f.alpha;
  if (given("--gamma")) c.gamma = f.gamma;
  if (given("--egreedy") || given("--boltzmann")) c.egreedy = f.egreedy;
  if (given("--async") || given("--sync")) c.asynchronous = f.asynchronous;
  if (given("--feedback") || given("--no-feedback")) c.feedback = f.feedback;
  if (given("--actions")) c.num_actions = f.actions;
  if (given("--decay")) c.decay = f.decay;
  if (given("--max-episodes")) c.max_episodes = f.max_episodes;
  if (given("--seed")) c.seed = f.seed;
  if (given("--convergence")) c.convergence = parse_convergence(f.convergence);
  validate(c);
  make_bid_grid(c.num_actions);

  const fs::path dir = f.out_dir.empty() ? default_out_dir() : fs::path(f.out_dir);
  const fs::path log_path = f.log.empty() ? dir / "trial_log.csv" : fs::path(f.log);
  const fs::path ma_path = f.moving_average.empty()
                               ? dir / "trial_moving_average.csv"
                               : fs::path(f.moving_average);
  const fs::path outcomes_path =
      f.outcomes.empty() ? dir / "trial_outcomes.json" : fs::path(f.outcomes);
  ensure_dir(dir);

  json effective = to_json(c);
  effective["log"] = log_path.string();
  effective["moving_average"] = ma_path.string();
  effective["outcomes"] = outcomes_path.string();
  effective["thin"] = f.thin;
  effective["trailing"] = f.trailing;
  out << effective.dump(2) << '\n';

  auto log_out = open_output(log_path);
  auto ma_out = open_output(ma_path);
  auto outcomes_out = open_output(outcomes_path);

  const TrialResult r = run_trial(c, {f.bids});

  write_episode_log_csv(log_out, r.log, f.thin, f.trailing);
  finish_output(log_out, log_path);

  const auto ma = moving_average(r.log.winning_bids, kOutcomeWindow);
  ma_out << "episode,moving_average\n";
  const int t = static_cast<int>(ma.size());
  const int thin = std::max(f.thin, 1);
  for (int e = 0; e < t; ++e) {
    if (e % thin != 0 && e < t - f.trailing) continue;
    ma_out << e << ',' << format_double(ma[e]) << '\n';
  }
  finish_output(ma_out, ma_path);

  const json outcomes = {
      {"bid2val", r.outcomes.bid2val},
      {"vol", r.outcomes.vol},
      {"episodes", r.outcomes.episodes},
      {"converged", r.outcomes.converged},
      {"terminal_winning_bid", r.log.winning_bids.back()}};
  outcomes_out << outcomes.dump(2) << '\n';
  finish_output(outcomes_out, outcomes_path);
  out << outcomes.dump(2) << '\n';
  return kExitOk;
}

int cmd_experiment(const CLI::App& sub, const ExperimentFlags& f,
                   std::ostream& out, std::ostream& err) {
  ExperimentConfig c;
  c.parallelism =
      std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  const fs::path dir = f.out_dir.empty() ? default_out_dir() : fs::path(f.out_dir);
  c.output = dir / "dataset.csv";
  if (!f.out_dir.empty()) ensure_dir(dir);
  if (!f.config.empty()) {
    const int default_parallel = c.parallelism;
    const fs::path default_output = c.output;
    const json j = read_json_file(f.config);
    c = experiment_config_from_json(j);
    if (!j.contains("parallelism")) c.parallelism = default_parallel;
    if (!j.contains("output")) c.output = default_output;
  }
  auto given = [&](const char* name) { return sub.count(name) > 0; };
  if (given("--trials")) c.num_trials = f.trials;
  if (given("--seed")) c.master_seed = f.seed;
  if (given("--max-episodes")) c.max_episodes = f.max_episodes;
  if (given("--out")) c.output = f.out;
  if (given("--parallel")) c.parallelism = f.parallel;
  validate(c);
  out << to_json(c).dump(2) << '\n';

  const int stride = std::max(1, c.num_trials / 20);
  const Dataset ds = run_experiment(c, [&](const Progress& p) {
    if (p.done % stride != 0 && p.done != p.total) return;
    const double eta =
        p.elapsed_seconds / p.done * (p.total - p.done);
    err << "[" << p.done << "/" << p.total << "] trials done, elapsed "
        << static_cast<int>(p.elapsed_seconds) << "s, eta "
        << static_cast<int>(eta) << "s\n";
  });

  int failed = 0;
  for (const auto& r : ds.records) failed += r.failed;
  out << "wrote " << ds.records.size() << " trials to " << c.output.string();
  if (failed) out << " (" << failed << " failed; see metadata)";
  out << '\n';
  return kExitOk;
}

int cmd_analyze(const AnalyzeFlags& f, std::ostream& out) {
  const bool all = !f.tables && !f.boxplots && !f.cate;
  const fs::path dir = f.out_dir.empty() ? default_out_dir() : fs::path(f.out_dir);
  const json effective = {{"in", f.in},
                          {"out_dir", dir.string()},
                          {"tables", all || f.tables},
                          {"boxplots", all || f.boxplots},
                          {"cate", all || f.cate}};
  out << effective.dump(2) << '\n';

  Dataset ds;
  try {
    ds = read_dataset(fs::path(f.in));
  } catch (const DomainError& e) {
    throw ConfigError(std::string("malformed dataset: ") + e.what());
  }
  const int excluded =
      static_cast<int>(ds.records.size() - usable_records(ds).size());
  if (excluded) out << "excluding " << excluded << " failed trials\n";
  ensure_dir(dir);

  auto write_file = [&](const fs::path& name, auto&& body) {
    auto file = open_output(dir / name);
    body(file);
    finish_output(file, dir / name);
  };

  if (all || f.tables) {
    const auto summary = summarize(ds);
    out << "Summary statistics\n" << render_summary_table(summary) << '\n';
    write_file("summary.csv", [&](std::ostream& o) { write_summary_csv(o, summary); });
    write_file("summary.txt", [&](std::ostream& o) { o << render_summary_table(summary); });

    for (const auto& pair : run_design_regressions(ds)) {
      const std::string stem = "regression_" + pair.on_all.outcome;
      const std::string text = render_regression_table(pair);
      out << text << '\n';
      write_file(stem + ".csv", [&](std::ostream& o) { write_regression_csv(o, pair); });
      write_file(stem + ".txt", [&](std::ostream& o) { o << text; });
    }
  }
  if (all || f.boxplots) {
    const auto rows = boxplot_by_design(ds);
    write_file("boxplot.csv", [&](std::ostream& o) { write_boxplot_csv(o, rows); });
    out << "wrote " << (dir / "boxplot.csv").string() << '\n';
  }
  if (all || f.cate) {
    std::vector<std::string> modifiers;
    for (const auto& c : covariate_names()) {
      if (c != "design") modifiers.push_back(c);
    }
    const CateResult cate = interacted_cate(ds, "bid2val", "design", modifiers);
    const std::string text = render_cate_table(cate);
    out << text << '\n';
    write_file("cate.csv", [&](std::ostream& o) { write_cate_csv(o, cate); });
    write_file("cate.txt", [&](std::ostream& o) { o << text; });
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Q-learning bidders in repeated common-value auctions",
               "bidlab"};
  app.require_subcommand(1);

  TrialFlags tf;
  auto* trial = app.add_subcommand(
      "trial", "Run one trial with explicit covariates and log its dynamics");
  trial->add_option("--config", tf.config,
                    "JSON file of trial settings; explicit flags override it");
  trial->add_option("--design", tf.design,
                    "Payment rule: first|second (arms 1,0; default first)");
  trial->add_option("--n", tf.n, "Number of bidders (arms 2,4; default 4)");
  trial->add_option("--alpha", tf.alpha,
                    "Learning rate (arms 0.01,0.1; default 0.1)");
  trial->add_option("--gamma", tf.gamma,
                    "Discount factor in [0,1) (arms 0.0,0.95; default 0.99)");
  trial->add_flag("--egreedy,!--boltzmann", tf.egreedy,
                  "Exploration: epsilon-greedy or Boltzmann (arms 1,0; "
                  "default Boltzmann)");
  trial->add_flag("--async,!--sync", tf.asynchronous,
                  "Update only the played bid, or every bid (arms 1,0; "
                  "default async)");
  trial->add_flag("--feedback,!--no-feedback", tf.feedback,
                  "Previous winning bid as state (arms 1,0; default on)");
  trial->add_option("--actions", tf.actions,
                    "Bid grid size, at least 2 (arms 6,11; default 6)");
  trial->add_option("--decay", tf.decay,
                    "Exploration decay per auction (arms 0.9999,0.99995; "
                    "default 0.9999)");
  trial->add_option("--max-episodes", tf.max_episodes,
                    "Auction cap (default 250000)");
  trial->add_option("--seed", tf.seed, "Trial seed (default 0)");
  trial->add_option("--convergence", tf.convergence,
                    "Stability rule: winning-bid|greedy-policy "
                    "(default winning-bid)");
  trial->add_option("--out-dir", tf.out_dir,
                    std::string("Directory for default output files "
                                "(default $") + kOutDirEnv + " or .)");
  trial->add_option("--log", tf.log,
                    "Episode log CSV (default <out-dir>/trial_log.csv)");
  trial->add_option("--moving-average", tf.moving_average,
                    "1000-auction moving average CSV "
                    "(default <out-dir>/trial_moving_average.csv)");
  trial->add_option("--outcomes", tf.outcomes,
                    "Outcomes JSON (default <out-dir>/trial_outcomes.json)");
  trial->add_option("--thin", tf.thin,
                    "Keep every k-th episode in the CSVs (default 100)");
  trial->add_option("--trailing", tf.trailing,
                    "Always keep the last n episodes (default 1000)");
  trial->add_flag("--bids", tf.bids, "Log every bidder's bid");

  ExperimentFlags ef;
  auto* experiment = app.add_subcommand(
      "experiment", "Run a randomized experiment and write the trial dataset");
  experiment->add_option("--config", ef.config,
                         "JSON experiment config; explicit flags override it");
  experiment->add_option("--trials", ef.trials,
                         "Number of trials (default 427)");
  experiment->add_option("--seed", ef.seed, "Master seed (default 1)");
  experiment->add_option("--max-episodes", ef.max_episodes,
                         "Auction cap per trial (default 250000)");
  experiment->add_option("--out", ef.out,
                         "Dataset CSV (default <out-dir>/dataset.csv)");
  experiment->add_option("--parallel", ef.parallel,
                         "Worker threads (default: hardware concurrency)");
  experiment->add_option("--out-dir", ef.out_dir,
                         std::string("Directory for the default dataset path "
                                     "(default $") + kOutDirEnv + " or .)");
  experiment->footer(
      "Covariate arms (override via --config): N {2,4}, alpha {0.01,0.1}, "
      "gamma {0.0,0.95}, egreedy {0,1}, design {0,1}, asynchronous {0,1}, "
      "feedback {0,1}, num_actions {6,11}, decay {0.9999,0.99995}.");

  AnalyzeFlags af;
  auto* analyze = app.add_subcommand(
      "analyze", "Summary, regression, heterogeneity and boxplot tables");
  analyze->add_option("--in", af.in, "Dataset CSV")->required();
  analyze->add_option("--out-dir", af.out_dir,
                      std::string("Directory for table files (default $") +
                          kOutDirEnv + " or .)");
  analyze->add_flag("--tables", af.tables,
                    "Summary statistics and the three regression pairs");
  analyze->add_flag("--boxplots", af.boxplots,
                    "Per-design five-number summaries of each outcome");
  analyze->add_flag("--cate", af.cate,
                    "Interacted OLS heterogeneity of the design effect");
  analyze->footer("With no selection flag, every artifact is produced.");

  app.add_subcommand("version", "Print the tool version");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*trial) return cmd_trial(*trial, tf, out);
    if (*experiment) return cmd_experiment(*experiment, ef, out, err);
    if (*analyze) return cmd_analyze(af, out);
    out << "bidlab " << BIDLAB_VERSION << '\n';
    return kExitOk;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const MissingColumnsError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const RankDeficientError& e) {
    err << "error: " << e.what() << '\n';
    return kExitAnalysis;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n'
        << "Run with --help for usage.\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return *analyze ? kExitAnalysis : kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitAnalysis;
  }
}

}  // namespace bidlab
