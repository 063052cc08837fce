#include <gtest/gtest.h>

#include <cmath>

#include "enshare/knapsack.hpp"
#include "enshare/rng.hpp"
#include "enshare/scheduler.hpp"

using namespace enshare;

namespace {

SchedulingInstance single_infra(std::vector<double> demands, double budget, double price,
                                bool soh_ok = true) {
  SchedulingInstance in;
  in.price = price;
  InfraSubproblem sp{InfraId{1}, budget, soh_ok, {}};
  for (std::size_t k = 0; k < demands.size(); ++k) {
    sp.sites.push_back({SiteId{static_cast<std::int32_t>(k + 1)}, demands[k]});
  }
  in.infras.push_back(sp);
  return in;
}

SchedulingInstance random_instance(Rng& rng) {
  SchedulingInstance in;
  in.price = rng.uniform(0.05, 0.5);
  const int n_infra = 1 + static_cast<int>(rng.below(3));
  std::int32_t site = 1;
  for (int i = 0; i < n_infra; ++i) {
    InfraSubproblem sp{InfraId{i + 1}, rng.uniform(0.0, 50.0), rng.uniform() > 0.1, {}};
    const int n = 1 + static_cast<int>(rng.below(12));
    for (int k = 0; k < n; ++k) sp.sites.push_back({SiteId{site++}, rng.uniform(0.0, 10.0)});
    in.infras.push_back(sp);
  }
  return in;
}

}  // namespace

TEST(Knapsack, DpMatchesBruteforceOnIntegers) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    KnapsackProblem p;
    const auto n = 1 + rng.below(12);
    for (std::uint64_t k = 0; k < n; ++k) {
      const auto w = static_cast<std::int64_t>(rng.below(8));
      p.weights.push_back(w);
      p.values.push_back(w * 3 + static_cast<std::int64_t>(rng.below(2)));  // many ties
    }
    p.capacity = static_cast<std::int64_t>(rng.below(30));
    const auto a = solve_knapsack_dp(p);
    const auto b = solve_knapsack_bruteforce(p);
    ASSERT_EQ(a.value, b.value);
    ASSERT_EQ(a.chosen, b.chosen);
    ASSERT_LE(a.weight, p.capacity);
  }
}

TEST(Knapsack, BruteforceRefusesLargeProblems) {
  KnapsackProblem p;
  p.weights.assign(21, 1);
  p.values.assign(21, 1);
  EXPECT_THROW(solve_knapsack_bruteforce(p), std::exception);
}

TEST(Scheduler, PicksTheLargerDemandThatFits) {
  const auto in = single_infra({3.0, 4.0}, 5.0, 0.28);
  const auto plan = solve_knapsack_dp(in);
  EXPECT_FALSE(plan.battery_selected(SiteId{1}));
  EXPECT_TRUE(plan.battery_selected(SiteId{2}));
  EXPECT_NEAR(plan.avoided_cost, 1.12, 1e-12);
  EXPECT_NEAR(plan.grid_cost, 0.84, 1e-12);
}

TEST(Scheduler, ZeroBudgetMeansAllGrid) {
  const auto plan = solve_knapsack_dp(single_infra({1.0, 2.0, 3.0}, 0.0, 0.28));
  for (const auto& d : plan.decisions) EXPECT_FALSE(d.battery);
}

TEST(Scheduler, AmpleBudgetMeansAllBattery) {
  const auto plan = solve_knapsack_dp(single_infra({1.0, 2.0, 3.0}, 6.0, 0.28));
  for (const auto& d : plan.decisions) EXPECT_TRUE(d.battery);
}

TEST(Scheduler, SohLockForcesGrid) {
  const auto plan = solve_knapsack_dp(single_infra({1.0}, 50.0, 0.28, false));
  EXPECT_FALSE(plan.battery_selected(SiteId{1}));
}

TEST(Scheduler, SingleSiteAgainstBudget) {
  EXPECT_TRUE(solve_bruteforce(single_infra({2.0}, 3.0, 0.28)).battery_selected(SiteId{1}));
  EXPECT_FALSE(solve_bruteforce(single_infra({4.0}, 3.0, 0.28)).battery_selected(SiteId{1}));
}

TEST(Scheduler, DpEqualsBruteforceAndIsFeasible) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto in = random_instance(rng);
    const auto a = solve_knapsack_dp(in);
    const auto b = solve_bruteforce(in);
    ASSERT_EQ(a.avoided_cost, b.avoided_cost);
    for (std::size_t k = 0; k < a.decisions.size(); ++k) {
      ASSERT_EQ(a.decisions[k].battery, b.decisions[k].battery);
    }
    EXPECT_TRUE(plan_violations(in, a).empty());
  }
}

TEST(Scheduler, MoreBudgetNeverCostsMore) {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    auto in = random_instance(rng);
    const double before = solve_knapsack_dp(in).grid_cost;
    for (auto& sp : in.infras) sp.battery_budget += rng.uniform(0.0, 10.0);
    EXPECT_LE(solve_knapsack_dp(in).grid_cost, before + 1e-12);
  }
}

TEST(Scheduler, DecisionsIgnorePriceScale) {
  Rng rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    auto in = random_instance(rng);
    const auto a = solve_knapsack_dp(in);
    in.price *= 3.7;
    const auto b = solve_knapsack_dp(in);
    for (std::size_t k = 0; k < a.decisions.size(); ++k) {
      ASSERT_EQ(a.decisions[k].battery, b.decisions[k].battery);
    }
  }
}

TEST(Scheduler, BuildInstanceBudgetsAndLocks) {
  NetworkTopology t({MnoId{1}}, {{SiteId{1}, MnoId{1}, InfraId{1}, 1.0}, {SiteId{2}, MnoId{1}, InfraId{2}, 1.0}},
                    {{InfraId{1}, true}, {InfraId{2}, true}});
  const std::map<SiteId, double> f{{SiteId{1}, 1.0}, {SiteId{2}, 1.0}};
  const std::map<InfraId, BatteryState> b{{InfraId{1}, {0.5, 1.0, 50.0}}, {InfraId{2}, {0.5, 0.7, 50.0}}};
  const auto in = build_instance(t, f, b, {}, 0.28, {0.1, 0.7, 0.0, 1.0});
  EXPECT_DOUBLE_EQ(in.infras[0].battery_budget, 20.0);
  EXPECT_TRUE(in.infras[0].soh_ok);
  EXPECT_FALSE(in.infras[1].soh_ok);
  EXPECT_THROW(build_instance(t, {{SiteId{1}, 1.0}}, b, {}, 0.28, {}), Error);
}

TEST(Scheduler, MarginShrinksBudget) {
  NetworkTopology t({MnoId{1}}, {{SiteId{1}, MnoId{1}, InfraId{1}, 1.0}}, {{InfraId{1}, true}});
  const auto in = build_instance(t, {{SiteId{1}, 1.0}}, {{InfraId{1}, {0.5, 1.0, 50.0}}}, {}, 0.28,
                                 {0.1, 0.7, 0.05, 1.0});
  EXPECT_DOUBLE_EQ(in.infras[0].battery_budget, 19.0);
}

TEST(Scheduler, NegativePriceRejected) {
  EXPECT_THROW(single_infra({1.0}, 1.0, -0.01).validate(), Error);
}

TEST(Charging, FullBatteryTakesNothing) {
  const std::vector<double> hist{0.1, 0.2, 0.3, 0.4};
  const auto c = plan_charging({{InfraId{1}, {1.0, 1.0, 50.0}}}, {{InfraId{1}, 5.0}}, 0.1, hist, {});
  EXPECT_EQ(mixed_charge(c.at(InfraId{1})), 0.0);
}

TEST(Charging, RenewableFirst) {
  const std::vector<double> hist{0.1, 0.2, 0.3, 0.4};
  const auto c = plan_charging({{InfraId{1}, {0.6, 1.0, 50.0}}}, {{InfraId{1}, 5.0}}, 0.4, hist, {});
  EXPECT_DOUBLE_EQ(c.at(InfraId{1}).ren_charge, 5.0);
  EXPECT_DOUBLE_EQ(c.at(InfraId{1}).grid_charge, 0.0);
  EXPECT_EQ(c.at(InfraId{1}).mix, 0.0);
}

TEST(Charging, CheapGridTopsUp) {
  const std::vector<double> hist{0.1, 0.2, 0.3, 0.4};
  const auto c = plan_charging({{InfraId{1}, {0.8, 1.0, 50.0}}}, {{InfraId{1}, 0.0}}, 0.1, hist, {});
  EXPECT_DOUBLE_EQ(c.at(InfraId{1}).grid_charge, 10.0);
  EXPECT_EQ(c.at(InfraId{1}).mix, 1.0);
}

TEST(Charging, FlatPricesNeverBuy) {
  const std::vector<double> hist(96, 0.28);
  const auto c = plan_charging({{InfraId{1}, {0.2, 1.0, 50.0}}}, {{InfraId{1}, 0.0}}, 0.28, hist, {});
  EXPECT_EQ(c.at(InfraId{1}).grid_charge, 0.0);
}

TEST(Hysteresis, ZeroDwellIsIdentity) {
  const auto in = single_infra({3.0, 4.0}, 5.0, 0.28);
  const auto plan = solve_knapsack_dp(in);
  SwitchHistory h;
  const auto out = apply_hysteresis(h, plan, in, 0);
  for (std::size_t k = 0; k < plan.decisions.size(); ++k) {
    EXPECT_EQ(out.decisions[k].battery, plan.decisions[k].battery);
  }
}

TEST(Hysteresis, RecentSwitchIsHeld) {
  SwitchHistory h;
  auto in = single_infra({3.0}, 5.0, 0.28);
  h.record(solve_knapsack_dp(single_infra({3.0}, 0.0, 0.28)));  // grid
  h.record(solve_knapsack_dp(in));                               // switched to battery
  in.infras[0].battery_budget = 0.0;
  auto plan = solve_knapsack_dp(in);  // wants grid: allowed, battery cannot be kept
  EXPECT_FALSE(apply_hysteresis(h, plan, in, 2).battery_selected(SiteId{1}));

  SwitchHistory g;
  g.record(solve_knapsack_dp(single_infra({3.0}, 5.0, 0.28)));
  g.record(solve_knapsack_dp(single_infra({3.0}, 0.0, 0.28)));  // switched to grid last step
  const auto in2 = single_infra({3.0}, 5.0, 0.28);
  EXPECT_FALSE(apply_hysteresis(g, solve_knapsack_dp(in2), in2, 2).battery_selected(SiteId{1}));
}

TEST(SchedulerIo, JsonRoundTrip) {
  Rng rng(3);
  const auto in = random_instance(rng);
  const auto back = instance_from_json(instance_to_json(in));
  EXPECT_EQ(instance_to_json(back), instance_to_json(in));
  const auto plan = solve_knapsack_dp(in);
  EXPECT_EQ(plan_to_json(plan_from_json(plan_to_json(plan))), plan_to_json(plan));
}
