#pragma once

// Closed control loop over a scenario horizon: collect KPIs, predict demand,
// plan charging and sources, switch, and monitor each sub-step.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "enshare/battery.hpp"
#include "enshare/cost.hpp"
#include "enshare/domain.hpp"
#include "enshare/forecast.hpp"
#include "enshare/ingest.hpp"
#include "enshare/lstm.hpp"
#include "enshare/scheduler.hpp"

namespace enshare {

enum class Tech { Grid, Battery };

std::string to_string(Tech t);
Tech parse_tech(const std::string& text);

// Which sites share an infrastructure and what each infrastructure holds.
//   exclusive-grid / exclusive-battery / shared-grid / shared-battery
//   mixed: a zeta fraction of sites shares with shared_tech, the rest are
//          exclusive with exclusive_tech
//   exclusive-benchmark: nobody shares, a zeta fraction of sites owns a battery
struct ScenarioSpec {
  enum class Kind { ExclusiveGrid, ExclusiveBattery, SharedGrid, SharedBattery, Mixed, ExclusiveBenchmark };

  Kind kind = Kind::SharedBattery;
  double zeta = 0.0;
  Tech shared_tech = Tech::Battery;
  Tech exclusive_tech = Tech::Grid;
  bool solar_with_battery = true;  // every battery site also gets a renewable installation
  double battery_capacity_kwh = 50.0;

  void validate() const;
  std::string name() const;
};

std::string to_string(ScenarioSpec::Kind kind);
ScenarioSpec::Kind parse_scenario_kind(const std::string& text);

// Rebuilds `base` (one exclusive infrastructure per site, co-location clusters
// in SiteSpec::location) for the scenario. Shared clusters are picked from a
// seeded permutation, so a larger zeta always extends a smaller one.
NetworkTopology make_scenario_topology(const NetworkTopology& base, const ScenarioSpec& spec,
                                       std::uint64_t seed);

// Global model or one model per operator, plus per-site standardisation.
struct DemandModel {
  std::map<MnoId, LstmParams> per_mno;  // empty means `global` serves all
  LstmParams global;
  std::map<SiteId, SiteScaling> scaling;
  std::size_t seq_len = kDefaultSequenceLength;

  const LstmParams& params_for(MnoId mno) const;
};

// Standardisation identical to the one used in training.
std::map<SiteId, SiteScaling> fit_site_scalings(const Corpus& corpus, std::size_t seq_len,
                                                double val_fraction = 0.2);

// Standardised per-site prediction of step t from KPIs up to t - 1.
double predict_z(const DemandModel& model, const Corpus& corpus, const SiteSpec& site, std::int64_t t);

struct ScenarioConfig {
  SchedulingThresholds thresholds{0.1, 0.7, 0.05, 1.0};
  ChargingPolicy charging;
  BatteryState battery_init;
  CostParams cost;
  std::int64_t control_window_steps = 1;
  std::int64_t min_dwell = 0;
  std::size_t price_history_steps = 96;
  std::int64_t geo_every_steps = 4;
  double granularity_kwh = kDefaultGranularityKwh;
  bool record_traces = true;  // false keeps only the ledger and overrides

  void validate() const;
};

struct DecisionRow {
  std::int64_t step;
  SiteId site;
  InfraId infra;
  bool battery;
  bool overridden;
};

struct SocRow {
  std::int64_t step;  // state at the end of this step
  InfraId infra;
  double soc, soh, capacity_kwh;
};

struct OverrideRow {
  std::int64_t step;  // first sub-step served by grid
  std::int64_t window_start;
  InfraId infra;
  std::size_t sites;
  double predicted_kwh, realized_kwh, budget_kwh;
};

struct PredictionRow {
  std::int64_t step;
  SiteId site;
  double predicted_kwh, actual_kwh;
  std::optional<double> predicted_z, actual_z;  // only for model forecasts
};

struct SocTraceRow {
  std::int64_t step;
  SiteId site;
  InfraId infra;
  double predicted_soc_raw;  // SoC if this site ran on battery with the chosen others
  double actual_soc;         // at window end
  bool battery;              // realised decision for the window
};

struct GeoRow {
  std::int64_t step;
  InfraId infra;
  GeoPoint where;
  double stored_kwh, required_kwh, previous_kwh;
};

struct RunResult {
  std::string scenario;
  NetworkTopology topology;
  TimeGrid grid;
  CostLedger ledger;
  std::vector<DecisionRow> decisions;
  std::vector<SocRow> soc;
  std::vector<OverrideRow> overrides;
  std::vector<PredictionRow> predictions;
  std::vector<SocTraceRow> trace;
  std::vector<GeoRow> geo;
  double threshold_soc = 0.1;
  bool oracle = true;
};

// Monitor verdict for one infrastructure at one sub-step.
struct MonitorVerdict {
  bool override = false;
  double realized_kwh = 0.0;  // battery-routed demand up to and including this sub-step
};

// Override when battery-routed realised demand so far exceeds the budget
// the plan was built against (already shrunk by the safety margin).
MonitorVerdict monitor_and_override(double realized_so_far_kwh, double substep_battery_kwh,
                                    double planned_budget_kwh);

// Realised flows of one sub-step; `battery_active[k]` is d_u after overrides.
EnergyFlows switch_source(const NetworkTopology& topology, const std::vector<bool>& battery_active,
                          const std::vector<double>& realized_kwh,
                          const std::map<InfraId, ChargeInput>& charge);

// `model` null runs with oracle (perfect) demand forecasts. Solar forecasts
// are always perfect.
RunResult run_scenario(const Corpus& corpus, const NetworkTopology& topology,
                       const ScenarioConfig& config, const DemandModel* model);

// decisions.csv, soc.csv, ledger.csv, overrides.csv, predictions.csv,
// soc_trace.csv, geo_snapshot.geojson, summary.json and, for model runs,
// forecast_metrics.csv (per-site error of the run's predictions).
void write_run_artifacts(const RunResult& result, const std::filesystem::path& dir);

}  // namespace enshare
