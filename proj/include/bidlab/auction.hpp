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

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "bidlab/random.hpp"

namespace bidlab {

// Index into a BidGrid. Agents act on indices; values are derived.
using BidIndex = int;

// The discrete bid space {0, 1/K, ..., 1}, expressed as fractions of the
// common value (normalized to 1).
class BidGrid {
 public:
  // Throws ConfigError when num_actions < 2.
  explicit BidGrid(int num_actions);

  int size() const { return static_cast<int>(levels_.size()); }
  double step() const { return 1.0 / (size() - 1); }
  double operator[](BidIndex i) const { return levels_[i]; }
  const Eigen::ArrayXd& levels() const { return levels_; }

  // Grid index of a value, or -1 when the value is not a grid level.
  BidIndex index_of(double value) const;
  // As index_of, but throws DomainError for off-grid values.
  BidIndex checked_index(double value) const;

 private:
  Eigen::ArrayXd levels_;
};

BidGrid make_bid_grid(int num_actions);

enum class PaymentRule : std::uint8_t { FirstPrice, SecondPrice };

// Dataset encoding: 1 for first price, 0 for second price.
constexpr int design_code(PaymentRule rule) {
  return rule == PaymentRule::FirstPrice ? 1 : 0;
}
PaymentRule payment_rule_from_code(int design);
std::string_view to_string(PaymentRule rule);

// Minimal settlement in index space; what the trial loop consumes.
struct Settlement {
  int winner = 0;
  BidIndex winning_bid = 0;
  BidIndex price = 0;
  int tie_count = 0;
};

struct AuctionOutcome {
  int winner = 0;
  double winning_bid = 0.0;
  double price = 0.0;
  std::vector<double> rewards;
  int tie_count = 0;
};

// Settles one sealed-bid auction over grid indices. Draws exactly one
// uniform from `rng` when two or more bidders share the highest bid and
// none otherwise. Throws ConfigError with fewer than two bidders and
// DomainError for out-of-range indices.
Settlement settle(PaymentRule rule, const BidGrid& grid,
                  std::span<const BidIndex> bids, RandomStream& rng);

// Value-space settlement with per-bidder rewards.
AuctionOutcome settle_auction(PaymentRule rule, const BidGrid& grid,
                              std::span<const double> bids,
                              RandomStream& rng);

struct CounterfactualValue {
  double candidate_bid = 0.0;
  double expected_reward = 0.0;
  double counterfactual_winning_bid = 0.0;
  BidIndex winning_index = 0;
};

// Expected reward of every grid level against fixed rival bids, taking the
// exact expectation over uniform tie-breaking. Result is indexed by bid.
// Throws ConfigError for an empty rival set and DomainError for off-grid
// rival bids.
std::vector<CounterfactualValue> counterfactual_action_values(
    PaymentRule rule, const BidGrid& grid, std::span<const double> rival_bids);

// Allocation-free form used by the synchronous update. `rival_max` is the
// highest rival index and `rivals_at_max` how many rivals bid it. Writes
// one reward and one next-bid index per grid level.
void counterfactual_rewards(PaymentRule rule, const BidGrid& grid,
                            BidIndex rival_max, int rivals_at_max,
                            std::span<double> rewards,
                            std::span<BidIndex> winning_bids);

}  // namespace bidlab
