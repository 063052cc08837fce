#pragma once

// Per-window energy-source selection. Each window is a binary program over
// d_u (0 = grid, 1 = battery) minimising grid cost subject to per-battery
// SoC floor, SoH floor and discharge capacity. The objective is additive over
// sites and the constraints couple sites only through their infrastructure,
// so the program splits into one 0/1 knapsack per infrastructure.

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "enshare/battery.hpp"
#include "enshare/domain.hpp"

namespace enshare {

struct SiteDemand {
  SiteId site{};
  double predicted_kwh = 0.0;
};

struct InfraSubproblem {
  InfraId infra{};
  double battery_budget = 0.0;  // kWh the battery may deliver this window
  bool soh_ok = false;          // false locks the battery out
  std::vector<SiteDemand> sites;  // ascending site id
};

struct SchedulingInstance {
  double price = 0.0;  // EUR/kWh, uniform across sites within the window
  std::vector<InfraSubproblem> infras;  // ascending infra id

  void validate() const;
};

struct SiteDecision {
  SiteId site{};
  InfraId infra{};
  bool battery = false;  // d_u
};

struct SourcePlan {
  std::vector<SiteDecision> decisions;  // ascending site id
  std::map<InfraId, ChargeInput> charge;
  double grid_cost = 0.0;     // EUR the grid would bill for predicted demand
  double avoided_cost = 0.0;  // EUR of predicted demand moved to batteries

  bool battery_selected(SiteId site) const;
  const SiteDecision& decision(SiteId site) const;
};

struct SchedulingThresholds {
  double soc_min = 0.1;
  double soh_min = 0.7;
  double margin = 0.0;      // budget fraction held back as safeguard
  double efficiency = 1.0;  // charging efficiency
};

// Budgets come from available_discharge_budget(..) shrunk by (1 - margin);
// infrastructures without a battery state get a zero budget and soh_ok = false.
SchedulingInstance build_instance(const NetworkTopology& topology,
                                  const std::map<SiteId, double>& forecasts,
                                  const std::map<InfraId, BatteryState>& batteries,
                                  const std::map<InfraId, ChargeInput>& charges, double price,
                                  const SchedulingThresholds& thresholds);

// Demand is quantised upward and budgets downward to `granularity_kwh`, so a
// plan feasible on the quantised problem is feasible on the exact one.
inline constexpr double kDefaultGranularityKwh = 0.001;

SourcePlan solve_knapsack_dp(const SchedulingInstance& instance,
                             double granularity_kwh = kDefaultGranularityKwh);

// Test oracle: enumerates every assignment per infrastructure.
inline constexpr std::size_t kMaxBruteforceSitesPerInfra = 20;
SourcePlan solve_bruteforce(const SchedulingInstance& instance,
                            double granularity_kwh = kDefaultGranularityKwh);

struct ChargingPolicy {
  double grid_percentile = 25.0;  // grid top-up only at or below this percentile
  bool mixed_lambda = false;      // literal convex mix instead of single source
  double max_charge_kwh = std::numeric_limits<double>::infinity();
  double efficiency = 1.0;
};

// Renewable first up to the headroom; grid top-up only when the current
// price sits at or below the trailing percentile and the trailing prices are
// not flat. In single-source mode renewable wins whenever it delivers energy.
std::map<InfraId, ChargeInput> plan_charging(const std::map<InfraId, BatteryState>& batteries,
                                             const std::map<InfraId, double>& renewable_kwh,
                                             double price, std::span<const double> price_history,
                                             const ChargingPolicy& policy);

// Linear-interpolated percentile, p in [0,100].
double percentile(std::span<const double> values, double p);

// Per-site switching memory for the ping-pong guard.
class SwitchHistory {
 public:
  struct Entry {
    bool battery = false;
    std::int64_t steps_since_switch = std::numeric_limits<std::int32_t>::max();
  };

  void record(const SourcePlan& applied);
  const Entry* find(SiteId site) const;

 private:
  std::map<SiteId, Entry> entries_;
};

// Keeps a site's previous source if it switched less than min_dwell steps
// ago, unless keeping battery would break the infrastructure's budget or
// SoH lock. min_dwell = 0 returns the plan unchanged.
SourcePlan apply_hysteresis(const SwitchHistory& history, const SourcePlan& plan,
                            const SchedulingInstance& instance, std::int64_t min_dwell);

// Checks budget and SoH constraints of a plan against its instance.
std::vector<std::string> plan_violations(const SchedulingInstance& instance,
                                         const SourcePlan& plan);

// JSON text formats for debugging and golden tests.
std::string instance_to_json(const SchedulingInstance& instance);
SchedulingInstance instance_from_json(const std::string& text);
std::string plan_to_json(const SourcePlan& plan);
SourcePlan plan_from_json(const std::string& text);

}  // namespace enshare
