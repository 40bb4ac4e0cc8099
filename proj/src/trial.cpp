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

#include "bidlab/trial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "bidlab/format.hpp"

namespace bidlab {

void validate(const TrialConfig& c) {
  if (c.num_bidders < 2) throw ConfigError("at least 2 bidders are required");
  if (c.num_actions < 2) {
    throw ConfigError("bid grid needs at least 2 levels, got " +
                      std::to_string(c.num_actions));
  }
  if (c.num_actions > 1024) throw ConfigError("bid grid is too fine");
  if (!(c.alpha > 0.0 && c.alpha <= 1.0)) {
    throw ConfigError("alpha must lie in (0, 1]");
  }
  if (!(c.gamma >= 0.0 && c.gamma < 1.0)) {
    throw ConfigError("gamma must lie in [0, 1)");
  }
  if (!(c.decay > 0.0 && c.decay <= 1.0)) {
    throw ConfigError("decay must lie in (0, 1]");
  }
  if (c.max_episodes < 1) throw ConfigError("max_episodes must be positive");
}

bool ConvergenceMonitor::observe(int episode, bool changed, bool at_floor) {
  if (converged()) return true;
  if (!at_floor) {
    anchor_ = -1;
    return false;
  }
  if (changed || anchor_ < 0) {
    anchor_ = episode;
    return false;
  }
  if (episode - anchor_ >= window_) converged_at_ = episode;
  return converged();
}

TrialOutcomes compute_outcomes(std::span<const double> winning_bids,
                               int episodes, bool converged) {
  if (winning_bids.empty()) {
    throw DomainError("outcomes need at least one winning bid");
  }
  const std::size_t t = winning_bids.size();
  const std::size_t w = std::min<std::size_t>(kOutcomeWindow, t);
  const auto tail = winning_bids.last(w);

  TrialOutcomes out;
  out.bid2val = std::accumulate(tail.begin(), tail.end(), 0.0) / w;
  if (t > 1) {
    // Shifted by the first bid so a constant series gives exactly zero.
    const double shift = winning_bids.front();
    double sum = 0.0, ss = 0.0;
    for (double b : winning_bids) {
      sum += b - shift;
      ss += (b - shift) * (b - shift);
    }
    out.vol = std::sqrt(std::max(0.0, (ss - sum * sum / t) / (t - 1)));
  }
  out.episodes = episodes;
  out.converged = converged;
  return out;
}

namespace {

// Highest rival bid and its multiplicity, seen from a bidder who bid `own`,
// given the per-level bid counts of the whole field.
struct RivalTop {
  BidIndex level;
  int count;
};

RivalTop rival_top(std::span<const int> counts, BidIndex top, BidIndex own) {
  if (own != top) return {top, counts[top]};
  if (counts[top] >= 2) return {top, counts[top] - 1};
  for (BidIndex b = top - 1; b >= 0; --b) {
    if (counts[b] > 0) return {b, counts[b]};
  }
  return {0, 0};  // unreachable with two or more bidders
}

}  // namespace

TrialResult run_trial(const TrialConfig& config, const TrialOptions& options) {
  validate(config);
  const BidGrid grid(config.num_actions);
  const int n = config.num_bidders;
  const int k = grid.size();

  const AgentParams params{config.alpha, config.gamma, config.asynchronous,
                           config.feedback};
  const ExplorationSchedule schedule{
      config.egreedy ? Exploration::EpsilonGreedy : Exploration::Boltzmann,
      1.0, config.decay, kExplorationFloor, 1.0};

  // Stream 0 settles ties; stream i + 1 belongs to agent i.
  RandomStream auction_rng(derive_seed(config.seed, 0));
  std::vector<RandomStream> agent_rng;
  std::vector<Agent> agents;
  std::vector<std::vector<int>> greedy(n);
  agent_rng.reserve(n);
  agents.reserve(n);
  for (int i = 0; i < n; ++i) {
    agent_rng.emplace_back(derive_seed(config.seed, i + 1));
    agents.push_back(init_agent(params, k, schedule, agent_rng.back()));
    const QTable& q = agents.back().q;
    greedy[i].resize(q.num_states());
    for (int s = 0; s < q.num_states(); ++s) {
      greedy[i][s] = greedy_action(q.row(s));
    }
  }

  TrialResult result;
  EpisodeLog& log = result.log;
  log.num_bidders = n;
  log.winning_bids.reserve(config.max_episodes);
  log.prices.reserve(config.max_episodes);
  if (options.record_bids) {
    log.bids.reserve(static_cast<std::size_t>(config.max_episodes) * n);
  }

  std::vector<BidIndex> bids(n);
  std::vector<int> counts(k);
  std::vector<double> cf_rewards(k);
  std::vector<BidIndex> cf_next(k);
  std::vector<int> cf_states(k);
  ConvergenceMonitor monitor(kConvergenceWindow);

  int state = 0;
  int episode = 0;
  for (; episode < config.max_episodes; ++episode) {
    const bool at_floor = agents[0].schedule.at_floor();
    for (int i = 0; i < n; ++i) {
      bids[i] = select_bid(agents[i].q, state, agents[i].schedule,
                           agent_rng[i]);
    }
    const Settlement s = settle(config.design, grid, bids, auction_rng);
    const int next_state = config.feedback ? s.winning_bid : 0;

    if (!config.asynchronous) {
      std::fill(counts.begin(), counts.end(), 0);
      for (BidIndex b : bids) ++counts[b];
    }

    bool policy_changed = false;
    for (int i = 0; i < n; ++i) {
      QTable& q = agents[i].q;
      if (config.asynchronous) {
        const double reward = i == s.winner ? 1.0 - grid[s.price] : 0.0;
        update_async(q, state, bids[i], reward, next_state, params);
      } else {
        const RivalTop rt = rival_top(counts, s.winning_bid, bids[i]);
        counterfactual_rewards(config.design, grid, rt.level, rt.count,
                               cf_rewards, cf_next);
        for (int a = 0; a < k; ++a) {
          cf_states[a] = config.feedback ? cf_next[a] : 0;
        }
        update_sync(q, state, std::span<const double>(cf_rewards),
                    std::span<const int>(cf_states), params);
      }
      const int g = greedy_action(q.row(state));
      if (g != greedy[i][state]) {
        greedy[i][state] = g;
        policy_changed = true;
      }
      agents[i].schedule = decay_exploration(agents[i].schedule);
    }

    const bool changed =
        config.convergence == ConvergenceRule::GreedyPolicy
            ? policy_changed
            : episode > 0 && grid[s.winning_bid] != log.winning_bids.back();
    log.winning_bids.push_back(grid[s.winning_bid]);
    log.prices.push_back(grid[s.price]);
    if (options.record_bids) {
      for (BidIndex b : bids) log.bids.push_back(grid[b]);
    }

    if (monitor.observe(episode, changed, at_floor)) break;
    state = next_state;
  }

  const bool converged = monitor.converged();
  const int reported = converged ? monitor.converged_at()
                                 : config.max_episodes - 1;
  result.outcomes = compute_outcomes(log.winning_bids, reported, converged);
  return result;
}

void write_episode_log_csv(std::ostream& out, const EpisodeLog& log, int thin,
                           int trailing) {
  thin = std::max(thin, 1);
  out << "episode,winning_bid,price";
  if (log.has_bids()) {
    for (int i = 0; i < log.num_bidders; ++i) out << ",bid_" << i;
  }
  out << '\n';
  const int t = log.size();
  for (int e = 0; e < t; ++e) {
    if (e % thin != 0 && e < t - trailing) continue;
    out << e << ',' << format_double(log.winning_bids[e]) << ','
        << format_double(log.prices[e]);
    if (log.has_bids()) {
      for (int i = 0; i < log.num_bidders; ++i) {
        out << ',' << format_double(log.bids[e * log.num_bidders + i]);
      }
    }
    out << '\n';
  }
}

}  // namespace bidlab
