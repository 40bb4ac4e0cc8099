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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bidlab/auction.hpp"
#include "bidlab/cli.hpp"
#include "bidlab/experiment.hpp"
#include "bidlab/qlearn.hpp"
#include "bidlab/stats.hpp"
#include "bidlab/trial.hpp"
#include "oracles.hpp"

using namespace bidlab;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0,
                double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int workers() {
  return std::max(1u, std::thread::hardware_concurrency());
}

// Shared with criterion 8.
std::vector<TrialOutcomes> g_default_trials;
Dataset g_full_cap;

Verdict default_config_trials() {
  int spa_value = 0, fpa_shaded = 0;
  std::vector<double> spa_eps, fpa_eps;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TrialConfig c;
    c.seed = seed;
    c.design = PaymentRule::SecondPrice;
    const auto spa = run_trial(c);
    spa_value += spa.outcomes.bid2val == 1.0;
    spa_eps.push_back(spa.outcomes.episodes);
    g_default_trials.push_back(spa.outcomes);

    c.design = PaymentRule::FirstPrice;
    const auto fpa = run_trial(c);
    fpa_shaded += fpa.log.winning_bids.back() <= 0.8 + 1e-12;
    fpa_eps.push_back(fpa.outcomes.episodes);
    g_default_trials.push_back(fpa.outcomes);
  }
  const double ms = median(spa_eps), mf = median(fpa_eps);
  return {spa_value >= 8 && fpa_shaded >= 7 && mf > ms,
          fmt("SPA bid2val=1 in %.0f/10, FPA terminal<=0.8 in %.0f/10, "
              "median episodes FPA %.0f vs SPA %.0f",
              spa_value, fpa_shaded, mf, ms)};
}

Dataset g_mini;

Verdict treatment_effect() {
  ExperimentConfig c;
  c.num_trials = 60;
  c.max_episodes = 100'000;
  c.master_seed = 1;
  c.parallelism = workers();
  g_mini = run_trials(c);
  const std::vector<std::string> design = {"design"};
  const auto b = ols(make_design_matrix(g_mini, "bid2val", design));
  const auto v = ols(make_design_matrix(g_mini, "vol", design));
  const auto e = ols(make_design_matrix(g_mini, "episodes", design));
  const double tau = b["design"].estimate;
  const double p = b["design"].p_value;
  const bool ok = tau < 0 && p < 0.05 && tau >= -0.35 && tau <= -0.05 &&
                  v["design"].estimate > 0 && e["design"].estimate > 0;
  return {ok, fmt("tau=%.4f (p=%.2g), vol coef=%.4f, episodes coef=%.1f", tau,
                  p, v["design"].estimate, e["design"].estimate)};
}

Verdict efficiency_level() {
  double sum[2] = {0, 0};
  int n[2] = {0, 0};
  for (const auto& r : g_mini.records) {
    const int d = design_code(r.config.design);
    sum[d] += r.outcomes.bid2val;
    ++n[d];
  }
  const double spa = sum[0] / n[0], fpa = sum[1] / n[1];
  return {spa >= 0.90 && spa - fpa >= 0.05,
          fmt("SPA mean bid2val=%.4f (n=%.0f), FPA mean=%.4f (n=%.0f)", spa,
              n[0], fpa, n[1])};
}

Verdict counterfactual_oracle() {
  RandomStream cases(20261016);
  RandomStream draws(4242);
  const int n = 100'000;
  int comparisons = 0, failures = 0;
  double worst = 0.0;
  for (int c = 0; c < 200; ++c) {
    const BidGrid g(2 + static_cast<int>(cases.index(10)));
    const int rivals = 1 + static_cast<int>(cases.index(5));
    std::vector<double> bids(rivals + 1);
    for (int r = 1; r <= rivals; ++r) {
      bids[r] = g[static_cast<int>(cases.index(g.size()))];
    }
    const auto rule =
        cases.index(2) ? PaymentRule::FirstPrice : PaymentRule::SecondPrice;
    const std::vector<double> rival_bids(bids.begin() + 1, bids.end());
    const auto cf = counterfactual_action_values(rule, g, rival_bids);
    const double m = *std::max_element(rival_bids.begin(), rival_bids.end());
    const auto at_max = std::count(rival_bids.begin(), rival_bids.end(), m);

    for (int b = 0; b < g.size(); ++b) {
      bids[0] = g[b];
      // Extended precision keeps summation rounding far below 1e-12.
      long double total = 0.0L;
      for (int i = 0; i < n; ++i) {
        total += settle_auction(rule, g, bids, draws).rewards[0];
      }
      const double mean = static_cast<double>(total / n);
      // Reward is (1 - price) times a win indicator.
      const double p_win = g[b] > m ? 1.0 : g[b] == m ? 1.0 / (at_max + 1) : 0.0;
      std::vector<double> sorted = bids;
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      const double price =
          rule == PaymentRule::FirstPrice ? sorted[0] : sorted[1];
      const double se = (1.0 - price) * std::sqrt(p_win * (1 - p_win) / n);
      const double gap = std::abs(mean - cf[b].expected_reward);
      const double tol = std::max(3.0 * se, 1e-12);
      ++comparisons;
      if (gap > tol) ++failures;
      worst = std::max(worst, se > 0 ? gap / se : gap > 1e-12 ? 1e9 : 0.0);
    }
  }
  return {failures == 0,
          fmt("%.0f comparisons, %.0f outside 3 SE, worst |z|=%.2f",
              comparisons, failures, worst)};
}

Verdict regression_engine() {
  std::mt19937_64 gen(77);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01;
  double worst_coef = 0.0, worst_hc1 = 0.0;
  int monotone_violations = 0;
  for (int d = 0; d < 100; ++d) {
    const int m = 30 + static_cast<int>(u01(gen) * 300);
    const int p = 1 + d % 8;
    DesignMatrix dm;
    dm.outcome = "y";
    dm.x.resize(m, p + 1);
    dm.x.col(0).setOnes();
    dm.names = {"Intercept"};
    Eigen::VectorXd beta(p + 1);
    for (int j = 0; j <= p; ++j) {
      // True coefficients kept away from zero so relative error is defined.
      beta[j] = (0.5 + 1.5 * u01(gen)) * (u01(gen) < 0.5 ? -1 : 1);
      if (j == 0) continue;
      for (int i = 0; i < m; ++i) dm.x(i, j) = n01(gen);
      dm.names.push_back("x" + std::to_string(j));
    }
    dm.y = dm.x * beta;
    for (int i = 0; i < m; ++i) {
      dm.y[i] += 0.1 * (1 + std::abs(dm.x(i, p))) * n01(gen);
    }

    const auto fit = ols(dm, true);
    const Eigen::VectorXd ne = oracle::normal_equations(dm.x, dm.y);
    for (int j = 0; j <= p; ++j) {
      worst_coef = std::max(worst_coef,
                            std::abs(fit.coefficients[j].estimate - ne[j]) /
                                std::abs(ne[j]));
    }
    const Eigen::MatrixXd hand = oracle::hc1_by_hand(dm.x, fit.residuals);
    for (int j = 0; j <= p; ++j) {
      const double se_hand = std::sqrt(hand(j, j));
      worst_hc1 = std::max(
          worst_hc1,
          std::abs(fit.coefficients[j].std_error - se_hand) / se_hand);
    }

    double previous = -1.0;
    for (int k = 0; k <= p; ++k) {
      DesignMatrix sub;
      sub.outcome = "y";
      sub.y = dm.y;
      sub.x = dm.x.leftCols(k + 1);
      sub.names.assign(dm.names.begin(), dm.names.begin() + k + 1);
      const double r2 = ols(sub, true).r_squared;
      // Allow for rounding between separate factorizations.
      if (r2 < previous - 1e-12) ++monotone_violations;
      previous = r2;
    }
  }
  return {worst_coef <= 1e-8 && worst_hc1 <= 1e-10 && monotone_violations == 0,
          fmt("max coef rel err=%.2e, max HC1 SE rel err=%.2e, R2 "
              "violations=%.0f",
              worst_coef, worst_hc1, monotone_violations)};
}

Verdict qlearning_laws() {
  RandomStream rng(606);
  bool collapse = true, identity = true, bounded = true, normalized = true;

  for (int c = 0; c < 10'000; ++c) {
    const int k = 2 + static_cast<int>(rng.index(10));
    QTable q = init_q_table(k, k, rng);
    const int s = static_cast<int>(rng.index(k));
    const int a = static_cast<int>(rng.index(k));
    const int next = static_cast<int>(rng.index(k));
    const double r = rng.uniform();
    const QTable before = q;
    QTable after = q;
    update_async(q, s, a, r, next, AgentParams{1.0, 0.0, true, true});
    collapse &= q.values(s, a) == r;
    update_async(after, s, a, r, next, AgentParams{0.0, 0.9, true, true});
    identity &= after.values == before.values;
  }

  for (double gamma : {0.0, 0.9, 0.99}) {
    const int k = 6;
    QTable qa = init_q_table(k, k, rng);
    QTable qs = init_q_table(k, k, rng);
    const double bound = std::max(1.0, 1.0 / (1.0 - gamma));
    std::vector<double> rewards(k);
    std::vector<int> next(k);
    for (int i = 0; i < 1'000'000; ++i) {
      const AgentParams p{rng.uniform(), gamma, true, true};
      const int s = static_cast<int>(rng.index(k));
      update_async(qa, s, static_cast<int>(rng.index(k)), rng.uniform(),
                   static_cast<int>(rng.index(k)), p);
      if (i % 10 == 0) {
        for (int b = 0; b < k; ++b) {
          rewards[b] = rng.uniform();
          next[b] = static_cast<int>(rng.index(k));
        }
        update_sync(qs, s, std::span<const double>(rewards),
                    std::span<const int>(next), p);
      }
    }
    bounded &= qa.values.minCoeff() >= 0.0 && qa.values.maxCoeff() <= bound;
    bounded &= qs.values.minCoeff() >= 0.0 && qs.values.maxCoeff() <= bound;
  }

  double worst_norm = 0.0;
  for (int c = 0; c < 100'000; ++c) {
    const int k = 2 + static_cast<int>(rng.index(10));
    Eigen::RowVectorXd row(k);
    for (int a = 0; a < k; ++a) row(a) = 100.0 * rng.uniform();
    const double temp = 0.01 + rng.uniform();
    const auto p = boltzmann_probabilities(row, temp);
    worst_norm = std::max(worst_norm, std::abs(p.sum() - 1.0));
    normalized &= (p >= 0.0).all();
  }
  normalized &= worst_norm <= 1e-12;

  const int k = 6;
  QTable q;
  q.values.resize(1, k);
  q.values << 0.3, 0.1, 0.2, 0.9, 0.5, 0.4;
  ExplorationSchedule eps;
  eps.kind = Exploration::EpsilonGreedy;
  eps.param = 0.01;
  const int n = 1'000'000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += select_bid(q, 0, eps, rng) == 3;
  const double target = 0.99 + 0.01 / k;
  const double z = (hits / double(n) - target) /
                   std::sqrt(target * (1 - target) / n);
  const bool band = std::abs(z) <= 4.0;

  return {collapse && identity && bounded && normalized && band,
          fmt("collapse+identity %.0f, bounded %.0f, max |sum-1|=%.1e, "
              "argmax z=%.2f",
              collapse && identity, bounded, worst_norm, z)};
}

Verdict cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / "bidlab_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto run = [&](const std::string& parallel, const std::string& name) {
    std::ostringstream out, err;
    const std::vector<std::string> args = {
        "bidlab", "experiment", "--trials",          "20",
        "--seed", "42",         "--parallel",        parallel,
        "--out",  (dir / name).string()};
    return run_cli(args, out, err);
  };
  const int a = run("1", "p1.csv");
  const int b = run("8", "p8.csv");
  const int c = run("1", "again.csv");
  const std::string s1 = slurp(dir / "p1.csv");
  const bool same = a == 0 && b == 0 && c == 0 && !s1.empty() &&
                    s1 == slurp(dir / "p8.csv") &&
                    s1 == slurp(dir / "again.csv");
  if (a == 0) g_full_cap = read_dataset(dir / "p1.csv");
  fs::remove_all(dir);
  return {same, fmt("exit codes %.0f/%.0f/%.0f, %.0f bytes per file", a, b, c,
                    static_cast<double>(s1.size()))};
}

Verdict convergence_accounting() {
  const int floor_step = oracle::floor_hitting_time(0.9999, 0.01);
  const int minimum = floor_step + kConvergenceWindow;
  int checked = 0, capped = 0, too_early = 0, bad_cap = 0;
  auto check = [&](double decay, const TrialOutcomes& o) {
    if (decay == 0.9999) {
      ++checked;
      too_early += o.episodes < minimum;
    }
    if (!o.converged) {
      ++capped;
      bad_cap += o.episodes != kDefaultMaxEpisodes - 1;
    }
  };
  for (const auto& o : g_default_trials) check(0.9999, o);
  for (const auto& r : g_full_cap.records) check(r.config.decay, r.outcomes);
  return {checked > 0 && too_early == 0 && bad_cap == 0,
          fmt("%.0f trials at decay 0.9999, %.0f below %.0f; %.0f capped",
              checked, too_early, minimum, capped) +
              fmt(", %.0f not at 249999", bad_cap)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {"default-configuration trials", default_config_trials},
      {"treatment effect sign and size", treatment_effect},
      {"efficiency level", efficiency_level},
      {"counterfactual oracle equivalence", counterfactual_oracle},
      {"regression engine correctness", regression_engine},
      {"q-learning unit laws", qlearning_laws},
      {"determinism", cli_determinism},
      {"convergence accounting", convergence_accounting},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const std::chrono::duration<double> dt =
        std::chrono::steady_clock::now() - start;
    std::printf("%s  [%zu] %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].name, v.detail.c_str(), dt.count());
    std::fflush(stdout);
    failed += !v.pass;
  }
  std::printf("%d/%zu criteria passed\n",
              static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
