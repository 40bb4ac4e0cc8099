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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "bidlab/trial.hpp"

using namespace bidlab;

TEST_CASE("outcomes from a winning-bid series") {
  const std::vector<double> flat(1500, 0.8);
  const auto o = compute_outcomes(flat, 1499, false);
  CHECK(o.bid2val == doctest::Approx(0.8));
  CHECK(o.vol == 0.0);
  CHECK(o.episodes == 1499);

  const std::vector<double> two = {0.4, 0.8};
  const auto p = compute_outcomes(two, 1, false);
  CHECK(p.vol == doctest::Approx(std::sqrt(0.08)));
  CHECK(p.vol == doctest::Approx(0.28284271247461906));
  CHECK(p.bid2val == doctest::Approx(0.6));

  std::vector<double> tail(3000, 0.2);
  std::fill(tail.end() - 1000, tail.end(), 1.0);
  CHECK(compute_outcomes(tail, 2999, false).bid2val == doctest::Approx(1.0));

  const std::vector<double> single = {0.6};
  CHECK(compute_outcomes(single, 0, false).vol == 0.0);

  CHECK_THROWS_AS(compute_outcomes(std::vector<double>{}, 0, false),
                  DomainError);
}

TEST_CASE("convergence monitor") {
  ConvergenceMonitor m(10);
  SUBCASE("nothing counts before the floor") {
    for (int e = 0; e < 100; ++e) CHECK_FALSE(m.observe(e, false, false));
    CHECK(m.anchor() == -1);
  }
  SUBCASE("stable for a full window after the floor") {
    for (int e = 0; e < 5; ++e) m.observe(e, false, false);
    bool done = false;
    int e = 5;
    for (; e < 100 && !done; ++e) done = m.observe(e, false, true);
    CHECK(done);
    CHECK(m.anchor() == 5);
    CHECK(m.converged_at() == 15);
  }
  SUBCASE("a change resets the window") {
    for (int e = 0; e < 8; ++e) m.observe(e, false, true);
    CHECK(m.anchor() == 0);
    m.observe(8, true, true);
    CHECK(m.anchor() == 8);
    for (int e = 9; e < 18; ++e) CHECK_FALSE(m.observe(e, false, true));
    CHECK(m.observe(18, false, true));
    CHECK(m.converged_at() == 18);
  }
}

TEST_CASE("trial config validation") {
  TrialConfig c;
  c.num_actions = 1;
  CHECK_THROWS_AS(run_trial(c), ConfigError);
  c = {};
  c.num_bidders = 1;
  CHECK_THROWS_AS(run_trial(c), ConfigError);
  c = {};
  c.gamma = 1.0;
  CHECK_THROWS_AS(run_trial(c), ConfigError);
  c = {};
  c.max_episodes = 0;
  CHECK_THROWS_AS(run_trial(c), ConfigError);
}

TEST_CASE("cap binds before the window can fill") {
  TrialConfig c;
  c.max_episodes = 50;
  const auto r = run_trial(c);
  CHECK_FALSE(r.outcomes.converged);
  CHECK(r.outcomes.episodes == 49);
  CHECK(r.log.size() == 50);
}

TEST_CASE("trials are deterministic") {
  TrialConfig c;
  c.seed = 3;
  c.max_episodes = 20'000;
  c.asynchronous = false;
  c.num_bidders = 3;
  const auto a = run_trial(c, {true});
  const auto b = run_trial(c, {true});
  CHECK(a.log.winning_bids == b.log.winning_bids);
  CHECK(a.log.prices == b.log.prices);
  CHECK(a.log.bids == b.log.bids);
  CHECK(a.outcomes.bid2val == b.outcomes.bid2val);
  CHECK(a.outcomes.vol == b.outcomes.vol);

  c.seed = 4;
  const auto d = run_trial(c, {true});
  CHECK(d.log.bids != a.log.bids);
}

TEST_CASE("log invariants across configurations") {
  for (int design = 0; design < 2; ++design) {
    for (int mode = 0; mode < 4; ++mode) {
      TrialConfig c;
      c.design = payment_rule_from_code(design);
      c.asynchronous = mode & 1;
      c.feedback = mode & 2;
      c.egreedy = mode == 1;
      c.num_bidders = 2 + mode;
      c.max_episodes = 5000;
      c.seed = 10 * design + mode;
      const auto r = run_trial(c, {true});
      const auto& log = r.log;
      for (int e = 0; e < log.size(); ++e) {
        double top = 0.0;
        for (int i = 0; i < log.num_bidders; ++i) {
          top = std::max(top, log.bids[e * log.num_bidders + i]);
        }
        CHECK(log.winning_bids[e] == top);
        if (c.design == PaymentRule::FirstPrice) {
          CHECK(log.prices[e] == log.winning_bids[e]);
        } else {
          CHECK(log.prices[e] <= log.winning_bids[e]);
        }
      }
      CHECK(r.outcomes.bid2val <= 1.0);
      CHECK(r.outcomes.bid2val >= 0.0);
      CHECK(r.outcomes.episodes >= 0);
      CHECK(r.outcomes.episodes <= c.max_episodes - 1);
    }
  }
}

TEST_CASE("second price with the default configuration bids the value") {
  TrialConfig c;
  c.design = PaymentRule::SecondPrice;
  c.seed = 7;
  const auto r = run_trial(c);
  CHECK(r.outcomes.converged);
  CHECK(r.outcomes.bid2val == 1.0);
  CHECK(r.outcomes.episodes >= 46'050 + kConvergenceWindow);
  CHECK(r.log.winning_bids.back() == 1.0);
}

TEST_CASE("first price with the default configuration settles below value") {
  TrialConfig c;
  c.design = PaymentRule::FirstPrice;
  c.seed = 7;
  const auto r = run_trial(c);
  CHECK(r.outcomes.converged);
  CHECK(r.log.winning_bids.back() <= 0.8 + 1e-12);
  CHECK(r.outcomes.episodes >= 46'050 + kConvergenceWindow);
}

TEST_CASE("episode log csv with thinning") {
  EpisodeLog log;
  log.num_bidders = 2;
  for (int e = 0; e < 10; ++e) {
    log.winning_bids.push_back(0.5);
    log.prices.push_back(0.25);
    log.bids.push_back(0.5);
    log.bids.push_back(0.25);
  }
  std::ostringstream full;
  write_episode_log_csv(full, log);
  std::istringstream in(full.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "episode,winning_bid,price,bid_0,bid_1");
  std::getline(in, line);
  CHECK(line == "0,0.5,0.25,0.5,0.25");

  std::ostringstream thin;
  write_episode_log_csv(thin, log, 4, 2);
  // Rows 0, 4, 8 from thinning plus trailing rows 8, 9.
  const std::string s = thin.str();
  CHECK(std::count(s.begin(), s.end(), '\n') == 1 + 4);
}
