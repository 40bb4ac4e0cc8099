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

#include "bidlab/auction.hpp"

#include <cmath>
#include <string>

#include "bidlab/errors.hpp"

namespace bidlab {
namespace {

constexpr double kGridTolerance = 1e-9;

}  // namespace

BidGrid::BidGrid(int num_actions) {
  if (num_actions < 2) {
    throw ConfigError("bid grid needs at least 2 levels, got " +
                      std::to_string(num_actions));
  }
  const int k = num_actions - 1;
  levels_.resize(num_actions);
  for (int i = 0; i < num_actions; ++i) {
    levels_[i] = static_cast<double>(i) / k;
  }
}

BidIndex BidGrid::index_of(double value) const {
  if (!std::isfinite(value)) return -1;
  const double scaled = value * (size() - 1);
  const double nearest = std::round(scaled);
  if (nearest < 0 || nearest > size() - 1) return -1;
  if (std::abs(scaled - nearest) > kGridTolerance * (size() - 1)) return -1;
  return static_cast<BidIndex>(nearest);
}

BidIndex BidGrid::checked_index(double value) const {
  const BidIndex i = index_of(value);
  if (i < 0) {
    throw DomainError("bid " + std::to_string(value) +
                      " is not a level of the " + std::to_string(size()) +
                      "-level grid");
  }
  return i;
}

BidGrid make_bid_grid(int num_actions) { return BidGrid(num_actions); }

PaymentRule payment_rule_from_code(int design) {
  switch (design) {
    case 0:
      return PaymentRule::SecondPrice;
    case 1:
      return PaymentRule::FirstPrice;
    default:
      throw ConfigError("design must be 0 (second price) or 1 (first price)");
  }
}

std::string_view to_string(PaymentRule rule) {
  return rule == PaymentRule::FirstPrice ? "first" : "second";
}

Settlement settle(PaymentRule rule, const BidGrid& grid,
                  std::span<const BidIndex> bids, RandomStream& rng) {
  const int n = static_cast<int>(bids.size());
  if (n < 2) throw ConfigError("an auction needs at least 2 bidders");

  Settlement out;
  BidIndex best = -1;
  BidIndex runner_up = -1;
  int ties = 0;
  for (int i = 0; i < n; ++i) {
    const BidIndex b = bids[i];
    if (b < 0 || b >= grid.size()) {
      throw DomainError("bid index " + std::to_string(b) + " is off the grid");
    }
    if (b > best) {
      runner_up = best;
      best = b;
      ties = 1;
      out.winner = i;
    } else if (b == best) {
      ++ties;
    } else if (b > runner_up) {
      runner_up = b;
    }
  }

  if (ties > 1) {
    // The draw picks the j-th maximal bidder in index order.
    std::size_t j = rng.index(static_cast<std::size_t>(ties));
    for (int i = 0; i < n; ++i) {
      if (bids[i] == best && j-- == 0) {
        out.winner = i;
        break;
      }
    }
    runner_up = best;
  }

  out.winning_bid = best;
  out.tie_count = ties;
  out.price = rule == PaymentRule::FirstPrice ? best : runner_up;
  return out;
}

AuctionOutcome settle_auction(PaymentRule rule, const BidGrid& grid,
                              std::span<const double> bids,
                              RandomStream& rng) {
  if (bids.size() < 2) throw ConfigError("an auction needs at least 2 bidders");
  std::vector<BidIndex> idx(bids.size());
  for (std::size_t i = 0; i < bids.size(); ++i) {
    idx[i] = grid.checked_index(bids[i]);
  }
  const Settlement s = settle(rule, grid, idx, rng);

  AuctionOutcome out;
  out.winner = s.winner;
  out.winning_bid = grid[s.winning_bid];
  out.price = grid[s.price];
  out.tie_count = s.tie_count;
  out.rewards.assign(bids.size(), 0.0);
  out.rewards[s.winner] = 1.0 - out.price;
  return out;
}

void counterfactual_rewards(PaymentRule rule, const BidGrid& grid,
                            BidIndex rival_max, int rivals_at_max,
                            std::span<double> rewards,
                            std::span<BidIndex> winning_bids) {
  const int levels = grid.size();
  for (BidIndex b = 0; b < levels; ++b) {
    double r = 0.0;
    if (b > rival_max) {
      const double price =
          rule == PaymentRule::FirstPrice ? grid[b] : grid[rival_max];
      r = 1.0 - price;
    } else if (b == rival_max) {
      r = (1.0 - grid[b]) / (rivals_at_max + 1);
    }
    rewards[b] = r;
    winning_bids[b] = b > rival_max ? b : rival_max;
  }
}

std::vector<CounterfactualValue> counterfactual_action_values(
    PaymentRule rule, const BidGrid& grid,
    std::span<const double> rival_bids) {
  if (rival_bids.empty()) {
    throw ConfigError("counterfactual values need at least one rival bid");
  }
  BidIndex m = -1;
  int k = 0;
  for (double v : rival_bids) {
    const BidIndex b = grid.checked_index(v);
    if (b > m) {
      m = b;
      k = 1;
    } else if (b == m) {
      ++k;
    }
  }

  std::vector<double> rewards(grid.size());
  std::vector<BidIndex> next(grid.size());
  counterfactual_rewards(rule, grid, m, k, rewards, next);

  std::vector<CounterfactualValue> out(grid.size());
  for (BidIndex b = 0; b < grid.size(); ++b) {
    out[b] = {grid[b], rewards[b], grid[next[b]], next[b]};
  }
  return out;
}

}  // namespace bidlab
