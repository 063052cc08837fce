#include "enshare/cost.hpp"

#include <cmath>
#include <ostream>

#include <fmt/core.h>
#include <fmt/ostream.h>

namespace enshare {

void CostParams::validate() const {
  for (double v : {infra_capex, battery_capex, renew_capex, rent_per_year, default_price}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error("cost parameters must be finite and >= 0");
  }
}

double capex_of_site(const CostParams& params, double share, const AssetConfig& assets) {
  if (!(share > 0.0 && share <= 1.0)) throw Error(fmt::format("share {} outside (0,1]", share));
  return share * (params.infra_capex + (assets.has_battery ? params.battery_capex : 0.0) +
                  (assets.has_renewable ? params.renew_capex : 0.0));
}

double opex_step(const CostParams& params, const SiteGridDraw& draw, double share, double price,
                 double step_minutes) {
  const double energy = price * (draw.grid_to_load + share * draw.infra_grid_charge);
  const double rent = share * params.rent_per_year * (step_minutes / TimeGrid::kMinutesPerYear);
  return energy + rent;
}

CostLedger::CostLedger(std::vector<SiteId> sites, std::vector<double> capex, double step_minutes)
    : sites_(std::move(sites)), capex_(std::move(capex)), step_minutes_(step_minutes) {
  if (sites_.size() != capex_.size()) throw Error("ledger: one CAPEX entry per site required");
  if (!(step_minutes_ > 0.0)) throw Error("ledger: step duration must be positive");
}

void CostLedger::append_step(std::vector<double> opex_per_site) {
  if (opex_per_site.size() != sites_.size()) throw Error("ledger: OPEX row size mismatch");
  for (double v : opex_per_site) {
    if (!(v >= 0.0)) throw Error(fmt::format("ledger: OPEX entry {} must be >= 0", v));
  }
  opex_.push_back(std::move(opex_per_site));
}

CostTotals total_cost(const CostLedger& ledger, std::int64_t up_to) {
  if (up_to < 0 || up_to > ledger.steps()) {
    throw Error(fmt::format("ledger covers {} steps, asked for {}", ledger.steps(), up_to));
  }
  CostTotals totals;
  totals.per_site = ledger.capex();
  for (std::int64_t t = 0; t < up_to; ++t) {
    const auto& row = ledger.opex_at(t);
    for (std::size_t k = 0; k < row.size(); ++k) totals.per_site[k] += row[k];
  }
  for (double v : totals.per_site) totals.network += v;
  return totals;
}

std::vector<SeriesRow> report_series(const CostLedger& ledger, SeriesGranularity granularity) {
  std::vector<SeriesRow> rows;
  const auto n_sites = static_cast<double>(ledger.sites().size());
  double capex_total = 0.0;
  for (double c : ledger.capex()) capex_total += c;
  if (granularity == SeriesGranularity::CumulativePerSite) {
    double running = capex_total;
    for (std::int64_t t = 0; t < ledger.steps(); ++t) {
      for (double v : ledger.opex_at(t)) running += v;
      rows.push_back({t, "site_avg", n_sites > 0 ? running / n_sites : 0.0});
      rows.push_back({t, "network", running});
    }
    return rows;
  }
  const double steps_per_year = TimeGrid::kMinutesPerYear / ledger.step_minutes();
  std::int64_t year = 1;
  double acc = capex_total;
  for (std::int64_t t = 0; t < ledger.steps(); ++t) {
    const auto y = 1 + static_cast<std::int64_t>(std::floor(static_cast<double>(t) / steps_per_year));
    if (y != year) {
      rows.push_back({year, "network", acc});
      year = y;
      acc = 0.0;
    }
    for (double v : ledger.opex_at(t)) acc += v;
  }
  if (ledger.steps() > 0 || capex_total > 0.0) rows.push_back({year, "network", acc});
  return rows;
}

void write_series_csv(std::ostream& out, const std::vector<SeriesRow>& rows,
                      SeriesGranularity granularity) {
  fmt::print(out, "{},scope,cost_eur\n",
             granularity == SeriesGranularity::CumulativePerSite ? "step" : "year");
  for (const auto& r : rows) fmt::print(out, "{},{},{}\n", r.index, r.scope, r.cost_eur);
}

void write_ledger_csv(std::ostream& out, const CostLedger& ledger) {
  fmt::print(out, "step,scope,cost_eur\n");
  for (std::size_t k = 0; k < ledger.sites().size(); ++k) {
    fmt::print(out, "-1,site:{},{}\n", raw(ledger.sites()[k]), ledger.capex()[k]);
  }
  for (std::int64_t t = 0; t < ledger.steps(); ++t) {
    const auto& row = ledger.opex_at(t);
    for (std::size_t k = 0; k < row.size(); ++k) {
      fmt::print(out, "{},site:{},{}\n", t, raw(ledger.sites()[k]), row[k]);
    }
  }
}

}  // namespace enshare
