#pragma once

// Experiment configuration and the command implementations behind the
// `enshare` executable.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "enshare/forecast.hpp"
#include "enshare/ingest.hpp"
#include "enshare/orchestrator.hpp"

namespace enshare {

struct AppConfig {
  std::uint64_t seed = 7;
  int sites = 48;
  int mnos = 3;
  std::string topology_file;  // empty generates a layout
  int horizon_days = 7;
  double step_minutes = 15.0;
  std::string start = "2024-06-03T00:00:00Z";
  GeneratorConfig generator;
  std::string price_source;  // empty keeps the generator tariff

  ScenarioSpec scenario;
  std::string forecaster = "oracle";  // or "lstm"
  ScenarioConfig run;

  FedRoundConfig federated;
  double val_fraction = 0.2;
  bool per_mno = false;
  LstmShape shape;

  std::vector<double> sweep_zeta{0.0, 0.25, 0.5, 0.75, 1.0};
  int sweep_years = 15;
  double amortization_years = 15.0;

  TimeGrid grid() const;
};

// Nested JSON holding every key with its value; the defaults document the
// accepted schema.
std::string config_to_json(const AppConfig& config);

// Starts from the defaults, merges the optional file, then applies
// "section.key=value" overrides. Unknown keys are rejected.
AppConfig load_config(const std::optional<std::filesystem::path>& file,
                      const std::vector<std::string>& overrides = {});
AppConfig config_from_json(const std::string& text, const std::vector<std::string>& overrides = {});

struct Dataset {
  NetworkTopology base;  // one exclusive infrastructure per site
  Corpus corpus;
};

Dataset make_dataset(const AppConfig& config);
Dataset load_dataset(const std::filesystem::path& dir);
// Loads `dir` when given, otherwise generates from the config.
Dataset dataset_for(const AppConfig& config, const std::optional<std::filesystem::path>& dir);

void cmd_generate(const AppConfig& config, const std::filesystem::path& out);

struct TrainSummary {
  FederatedResult result;  // global model, or the first MNO's when per_mno
  std::map<MnoId, LstmParams> per_mno;
  std::vector<SiteMetrics> sites;
  ErrorMetrics round0;
  ErrorMetrics final_val;
  ErrorMetrics persistence;
};

TrainSummary train_model(const AppConfig& config, const Dataset& data);
TrainSummary cmd_train(const AppConfig& config, const std::optional<std::filesystem::path>& data,
                       const std::filesystem::path& out);

DemandModel load_demand_model(const AppConfig& config, const Corpus& corpus,
                              const std::filesystem::path& model_dir);

RunResult run_configured(const AppConfig& config, const Dataset& data, const DemandModel* model);
RunResult cmd_run(const AppConfig& config, const std::optional<std::filesystem::path>& data,
                  const std::optional<std::filesystem::path>& model_dir,
                  const std::filesystem::path& out);

// Annualised results of one scenario run over the simulated block.
struct ScenarioEconomics {
  std::string scenario;
  double zeta = 0.0;
  double capex_eur = 0.0;
  double annual_opex_eur = 0.0;
  std::size_t sites = 0;

  double annual_cost(double amortization_years) const {
    return annual_opex_eur + capex_eur / amortization_years;
  }
  double cumulative_per_site(double years) const {
    return (capex_eur + years * annual_opex_eur) / static_cast<double>(sites);
  }
};

ScenarioEconomics economics_of(const RunResult& run, double zeta);

struct ZetaRow {
  std::string scenario;
  double zeta;
  double annual_cost_eur;
  double annual_opex_eur;
  double capex_eur;
};

std::vector<ZetaRow> sweep_zeta(const AppConfig& config, const Dataset& data, const DemandModel* model);
std::vector<ZetaRow> cmd_sweep_zeta(const AppConfig& config,
                                    const std::optional<std::filesystem::path>& data,
                                    const std::optional<std::filesystem::path>& model_dir,
                                    const std::filesystem::path& out);

struct CostCurvePoint {
  std::string scenario;
  int year;
  double cumulative_per_site_eur;
};

struct Crossover {
  std::string first;   // cheaper at year 0
  std::string second;  // cheaper after the crossover
  double year;
};

struct CostCurves {
  std::vector<CostCurvePoint> curves;
  std::vector<Crossover> crossovers;
  std::vector<ScenarioEconomics> economics;
};

// Extrapolates the simulated block unless `exact_horizon`, which simulates
// every step of sweep_years years with oracle forecasts.
CostCurves cost_curves(const AppConfig& config, const Dataset& data, const DemandModel* model, bool exact_horizon);
CostCurves cmd_cost_curves(const AppConfig& config, const std::optional<std::filesystem::path>& data,
                    const std::optional<std::filesystem::path>& model_dir, bool exact_horizon,
                    const std::filesystem::path& out);

struct ForecastErrorRow {
  std::string params;
  double mse_min, mse_mean, mse_max, mae_min, mae_mean, mae_max;
};

struct ReportSummary {
  std::optional<ForecastErrorRow> forecast_errors;  // absent for oracle runs without a train directory
  SiteId trace_site{};
  std::size_t trace_rows = 0;
  std::size_t snapshots = 0;
};

// forecast_errors.csv, site_soc_trace.csv and snapshots/snapshot_<step>.geojson. `site` 0
// picks the first site that ever ran on battery.
ReportSummary cmd_report(const std::filesystem::path& run_dir,
                         const std::optional<std::filesystem::path>& train_dir, std::int32_t site,
                         const std::filesystem::path& out);

}  // namespace enshare
