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

#include <algorithm>
#include <cmath>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bidlab/auction.hpp"
#include "bidlab/errors.hpp"
#include "bidlab/random.hpp"

namespace bidlab {

// Tabular action values, one row per state and one column per bid level.
template <typename Scalar>
struct BasicQTable {
  using Matrix =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Matrix values;

  int num_states() const { return static_cast<int>(values.rows()); }
  int num_actions() const { return static_cast<int>(values.cols()); }
  auto row(int state) const { return values.row(state); }
};

using QTable = BasicQTable<double>;

enum class Exploration { EpsilonGreedy, Boltzmann };

// Exploration parameter (epsilon or temperature) with multiplicative decay
// toward an absorbing floor.
struct ExplorationSchedule {
  Exploration kind = Exploration::Boltzmann;
  double param = 1.0;
  double decay = 0.9999;
  double floor = 0.01;
  double initial = 1.0;

  bool at_floor() const { return param <= floor; }
};

struct AgentParams {
  double alpha = 0.1;
  double gamma = 0.95;
  bool asynchronous = true;
  bool feedback = true;
};

struct Agent {
  QTable q;
  ExplorationSchedule schedule;
};

inline void validate(const AgentParams& p) {
  if (!(p.alpha >= 0.0 && p.alpha <= 1.0)) {
    throw ConfigError("alpha must lie in [0, 1]");
  }
  if (!(p.gamma >= 0.0 && p.gamma < 1.0)) {
    throw ConfigError("gamma must lie in [0, 1)");
  }
}

inline void validate(const ExplorationSchedule& s) {
  if (!(s.decay > 0.0 && s.decay <= 1.0)) {
    throw ConfigError("decay must lie in (0, 1]");
  }
  if (!(s.floor > 0.0 && s.floor <= s.initial)) {
    throw ConfigError("exploration floor must lie in (0, initial]");
  }
}

// Number of states an agent distinguishes: one per possible previous
// winning bid with feedback, a single state without.
inline int num_states_for(bool feedback, int grid_size) {
  return feedback ? grid_size : 1;
}

// Q values are drawn i.i.d. UNIF(0,1) in state-major order.
template <typename Scalar = double>
BasicQTable<Scalar> init_q_table(int num_states, int num_actions,
                                 RandomStream& rng) {
  if (num_actions < 2) throw ConfigError("an agent needs at least 2 actions");
  if (num_states < 1) throw ConfigError("an agent needs at least 1 state");
  BasicQTable<Scalar> q;
  q.values.resize(num_states, num_actions);
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      q.values(s, a) = static_cast<Scalar>(rng.uniform());
    }
  }
  return q;
}

inline Agent init_agent(const AgentParams& params, int grid_size,
                        ExplorationSchedule schedule, RandomStream& rng) {
  validate(params);
  validate(schedule);
  schedule.param = schedule.initial;
  return {init_q_table(num_states_for(params.feedback, grid_size), grid_size,
                       rng),
          schedule};
}

// First index of the row maximum.
template <typename Derived>
int greedy_action(const Eigen::DenseBase<Derived>& row) {
  int best = 0;
  auto best_value = row(0);
  for (Eigen::Index a = 1; a < row.size(); ++a) {
    if (row(a) > best_value) {
      best_value = row(a);
      best = static_cast<int>(a);
    }
  }
  return best;
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& row) {
  if (!row.derived().array().isFinite().all()) {
    throw InvariantError("non-finite Q value encountered");
  }
}

// Softmax of row / temperature, evaluated after subtracting the row max.
template <typename Derived>
Eigen::ArrayXd boltzmann_probabilities(const Eigen::DenseBase<Derived>& row,
                                       double temperature) {
  require_finite(row);
  const Eigen::ArrayXd q = row.derived().template cast<double>().array();
  Eigen::ArrayXd w = ((q - q.maxCoeff()) / temperature).exp();
  return w / w.sum();
}

template <typename Derived>
Eigen::ArrayXd epsilon_greedy_probabilities(
    const Eigen::DenseBase<Derived>& row, double epsilon) {
  require_finite(row);
  const auto k = row.size();
  Eigen::ArrayXd p = Eigen::ArrayXd::Constant(k, epsilon / k);
  p(greedy_action(row)) += 1.0 - epsilon;
  return p;
}

// Draws a bid index for `state`. Epsilon-greedy uses one uniform draw, plus
// one more when exploring; Boltzmann always uses exactly one.
template <typename Scalar>
int select_bid(const BasicQTable<Scalar>& q, int state,
               const ExplorationSchedule& sched, RandomStream& rng) {
  if (state < 0 || state >= q.num_states()) {
    throw DomainError("state " + std::to_string(state) + " out of range");
  }
  const auto row = q.row(state);
  require_finite(row);
  const int k = q.num_actions();

  if (sched.kind == Exploration::EpsilonGreedy) {
    if (rng.uniform() < sched.param) {
      return static_cast<int>(rng.index(static_cast<std::size_t>(k)));
    }
    return greedy_action(row);
  }

  const double top = static_cast<double>(row.maxCoeff());
  double weights[64];
  std::vector<double> heap;
  double* w = weights;
  if (k > 64) {
    heap.resize(k);
    w = heap.data();
  }
  double total = 0.0;
  for (int a = 0; a < k; ++a) {
    w[a] = std::exp((static_cast<double>(row(a)) - top) / sched.param);
    total += w[a];
  }
  const double target = rng.uniform() * total;
  double cum = 0.0;
  for (int a = 0; a < k - 1; ++a) {
    cum += w[a];
    if (target < cum) return a;
  }
  return k - 1;
}

// Temporal-difference target written into a single cell.
template <typename Scalar>
void update_async(BasicQTable<Scalar>& q, int state, int action, double reward,
                  int next_state, const AgentParams& params) {
  if (!(reward >= 0.0 && reward <= 1.0)) {
    throw DomainError("reward " + std::to_string(reward) +
                      " outside [0, 1]");
  }
  const double continuation =
      static_cast<double>(q.values.row(next_state).maxCoeff());
  Scalar& cell = q.values(state, action);
  cell = static_cast<Scalar>((1.0 - params.alpha) * cell +
                             params.alpha *
                                 (reward + params.gamma * continuation));
}

// Updates every action in `state` at once. Continuations are read from the
// table as it stood before the call, so the result for each action equals
// update_async applied to that action alone.
template <typename Scalar>
void update_sync(BasicQTable<Scalar>& q, int state,
                 std::span<const double> rewards,
                 std::span<const int> next_states, const AgentParams& params) {
  const int k = q.num_actions();
  if (static_cast<int>(rewards.size()) != k ||
      static_cast<int>(next_states.size()) != k) {
    throw DomainError("synchronous update needs one value per action");
  }
  double continuation[64];
  std::vector<double> heap;
  double* cont = continuation;
  if (k > 64) {
    heap.resize(k);
    cont = heap.data();
  }
  for (int a = 0; a < k; ++a) {
    if (!(rewards[a] >= 0.0 && rewards[a] <= 1.0)) {
      throw DomainError("counterfactual reward outside [0, 1]");
    }
    cont[a] = static_cast<double>(q.values.row(next_states[a]).maxCoeff());
  }
  for (int a = 0; a < k; ++a) {
    Scalar& cell = q.values(state, a);
    cell = static_cast<Scalar>((1.0 - params.alpha) * cell +
                               params.alpha *
                                   (rewards[a] + params.gamma * cont[a]));
  }
}

// Counterfactual form: next state is the counterfactual winning bid with
// feedback, the singleton state without.
template <typename Scalar>
void update_sync(BasicQTable<Scalar>& q, int state,
                 std::span<const CounterfactualValue> cfs,
                 const AgentParams& params) {
  if (static_cast<int>(cfs.size()) != q.num_actions()) {
    throw DomainError("synchronous update needs one value per action");
  }
  std::vector<double> rewards(cfs.size());
  std::vector<int> next(cfs.size());
  for (std::size_t a = 0; a < cfs.size(); ++a) {
    rewards[a] = cfs[a].expected_reward;
    next[a] = params.feedback ? cfs[a].winning_index : 0;
  }
  update_sync(q, state, std::span<const double>(rewards),
              std::span<const int>(next), params);
}

inline ExplorationSchedule decay_exploration(ExplorationSchedule sched) {
  sched.param = std::max(sched.floor, sched.param * sched.decay);
  return sched;
}

// Writes "state,action,value" rows.
void write_q_table_csv(std::ostream& out, const QTable& q);

}  // namespace bidlab
