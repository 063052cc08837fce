#pragma once

// Total cost of ownership: CAPEX attributed by share, OPEX accumulated from
// realised grid flows plus pro-rated rent.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "enshare/domain.hpp"

namespace enshare {

struct CostParams {
  double infra_capex = 0.0;        // EUR per infrastructure
  double battery_capex = 10000.0;  // EUR per battery
  double renew_capex = 3000.0;     // EUR per renewable installation
  double rent_per_year = 50000.0;  // EUR per infrastructure per year
  double default_price = 0.28;     // EUR/kWh

  void validate() const;
};

struct AssetConfig {
  bool has_battery = false;
  bool has_renewable = false;
};

double capex_of_site(const CostParams& params, double share, const AssetConfig& assets);

// Grid energy behind one site's bill for one step.
struct SiteGridDraw {
  double grid_to_load = 0.0;      // kWh for this site's own load
  double infra_grid_charge = 0.0; // kWh bought to charge the site's infrastructure battery
};

// price * (E_grid->load + share * E_grid->battery) + share * rent * dt / year.
double opex_step(const CostParams& params, const SiteGridDraw& draw, double share, double price,
                 double step_minutes);

class CostLedger {
 public:
  CostLedger() = default;
  CostLedger(std::vector<SiteId> sites, std::vector<double> capex, double step_minutes);

  // One OPEX entry per site, in the ledger's site order.
  void append_step(std::vector<double> opex_per_site);

  const std::vector<SiteId>& sites() const { return sites_; }
  const std::vector<double>& capex() const { return capex_; }
  std::int64_t steps() const { return static_cast<std::int64_t>(opex_.size()); }
  double step_minutes() const { return step_minutes_; }
  double opex(std::int64_t step, std::size_t site_index) const { return opex_[step][site_index]; }
  const std::vector<double>& opex_at(std::int64_t step) const { return opex_[step]; }

 private:
  std::vector<SiteId> sites_;
  std::vector<double> capex_;
  std::vector<std::vector<double>> opex_;  // [step][site]
  double step_minutes_ = 15.0;
};

struct CostTotals {
  std::vector<double> per_site;
  double network = 0.0;
};

// Totals over the first `up_to` steps (0 gives CAPEX only).
CostTotals total_cost(const CostLedger& ledger, std::int64_t up_to);

enum class SeriesGranularity { CumulativePerSite, AnnualNetwork };

struct SeriesRow {
  std::int64_t index = 0;  // step or year (1-based)
  std::string scope;
  double cost_eur = 0.0;
};

// CumulativePerSite: per step, rows "site_avg" and "network" holding running
// totals with CAPEX included from the start. AnnualNetwork: per calendar year
// of simulated time, the network's cost in that year, CAPEX booked in year 1.
std::vector<SeriesRow> report_series(const CostLedger& ledger, SeriesGranularity granularity);

void write_series_csv(std::ostream& out, const std::vector<SeriesRow>& rows,
                      SeriesGranularity granularity);

// Per-step ledger dump: CAPEX rows at step -1, then per-site OPEX per step.
void write_ledger_csv(std::ostream& out, const CostLedger& ledger);

}  // namespace enshare
