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

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "bidlab/auction.hpp"
#include "bidlab/qlearn.hpp"

namespace bidlab {

inline constexpr int kDefaultMaxEpisodes = 250'000;
inline constexpr int kConvergenceWindow = 1'000;
inline constexpr int kOutcomeWindow = 1'000;
inline constexpr double kExplorationFloor = 0.01;

// What must stay unchanged, once exploration is at its floor, for a trial
// to count as converged.
enum class ConvergenceRule {
  // The realized winning bid.
  WinningBid,
  // Every agent's greedy action at every state visited.
  GreedyPolicy,
};

// One trial's initial conditions. Defaults are the single-trial example
// configuration (four Boltzmann bidders, asynchronous, with feedback).
struct TrialConfig {
  int num_bidders = 4;
  double alpha = 0.1;
  double gamma = 0.99;
  bool egreedy = false;
  PaymentRule design = PaymentRule::FirstPrice;
  bool asynchronous = true;
  bool feedback = true;
  int num_actions = 6;
  double decay = 0.9999;
  int max_episodes = kDefaultMaxEpisodes;
  std::uint64_t seed = 0;
  ConvergenceRule convergence = ConvergenceRule::WinningBid;
};

// Throws ConfigError describing the first invalid field.
void validate(const TrialConfig& config);

struct TrialOptions {
  bool record_bids = false;
};

// Per-episode series. Bids are stored only when requested.
struct EpisodeLog {
  int num_bidders = 0;
  std::vector<double> winning_bids;
  std::vector<double> prices;
  std::vector<double> bids;  // row-major, num_bidders per episode

  int size() const { return static_cast<int>(winning_bids.size()); }
  bool has_bids() const { return !bids.empty(); }
};

struct TrialOutcomes {
  double bid2val = 0.0;
  double vol = 0.0;
  int episodes = 0;
  bool converged = false;
};

struct TrialResult {
  TrialOutcomes outcomes;
  EpisodeLog log;
};

// Tracks stability once exploration has hit its floor. The first post-floor
// episode anchors a window and any change re-anchors it. Convergence is
// declared `window` episodes after the anchor.
class ConvergenceMonitor {
 public:
  explicit ConvergenceMonitor(int window = kConvergenceWindow)
      : window_(window) {}

  // Call once per episode, after updates. `at_floor` refers to the
  // exploration parameter the episode was played with.
  bool observe(int episode, bool changed, bool at_floor);

  bool converged() const { return converged_at_ >= 0; }
  int converged_at() const { return converged_at_; }
  int anchor() const { return anchor_; }

 private:
  int window_;
  int anchor_ = -1;
  int converged_at_ = -1;
};

// bid2val over the last min(1000, T) winning bids, vol as the sample
// standard deviation of the full series. Throws DomainError when empty.
TrialOutcomes compute_outcomes(std::span<const double> winning_bids,
                               int episodes, bool converged);

TrialResult run_trial(const TrialConfig& config,
                      const TrialOptions& options = {});

// CSV rows "episode,winning_bid,price[,bid_0,...]". With thin > 1, keeps
// every thin-th episode plus the final `trailing` episodes.
void write_episode_log_csv(std::ostream& out, const EpisodeLog& log,
                           int thin = 1, int trailing = 0);

}  // namespace bidlab
