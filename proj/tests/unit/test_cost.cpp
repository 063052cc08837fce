#include <gtest/gtest.h>

#include <sstream>

#include "enshare/cost.hpp"

using namespace enshare;

namespace {

CostParams no_rent() {
  CostParams p;
  p.rent_per_year = 0.0;
  return p;
}

}  // namespace

TEST(Cost, CapexByShare) {
  const CostParams p;
  EXPECT_DOUBLE_EQ(capex_of_site(p, 1.0, {true, true}), 13000.0);
  EXPECT_DOUBLE_EQ(capex_of_site(p, 0.5, {true, true}), 6500.0);
  EXPECT_DOUBLE_EQ(capex_of_site(p, 1.0, {false, false}), 0.0);
  EXPECT_THROW(capex_of_site(p, 0.0, {}), Error);
  EXPECT_THROW(capex_of_site(p, 1.5, {}), Error);
}

TEST(Cost, CapexSharesAddUp) {
  const CostParams p;
  double sum = 0.0;
  for (int k = 0; k < 4; ++k) sum += capex_of_site(p, 0.25, {true, true});
  EXPECT_DOUBLE_EQ(sum, 13000.0);
}

TEST(Cost, OpexStep) {
  const auto p = no_rent();
  EXPECT_NEAR(opex_step(p, {1.0, 0.0}, 1.0, 0.28, 15.0), 0.28, 1e-15);
  EXPECT_EQ(opex_step(p, {0.0, 0.0}, 1.0, 0.28, 15.0), 0.0);
  EXPECT_NEAR(opex_step(p, {0.0, 2.0}, 0.5, 0.28, 15.0), 0.28, 1e-15);
}

TEST(Cost, RentProratesOverAYear) {
  CostParams p;
  const double steps_per_year = 365.0 * 96.0;
  EXPECT_NEAR(opex_step(p, {}, 1.0, 0.28, 15.0) * steps_per_year, 50000.0, 1e-6);
  EXPECT_NEAR(opex_step(p, {}, 0.5, 0.28, 15.0) * steps_per_year, 25000.0, 1e-6);
}

TEST(Cost, TotalsOfGridOnlySite) {
  const auto p = no_rent();
  CostLedger ledger({SiteId{1}}, {0.0}, 15.0);
  for (int t = 0; t < 96; ++t) ledger.append_step({opex_step(p, {1.0, 0.0}, 1.0, 0.28, 15.0)});
  EXPECT_NEAR(total_cost(ledger, 96).network, 26.88, 1e-9);
  EXPECT_EQ(total_cost(ledger, 0).network, 0.0);
}

TEST(Cost, TotalsAreAdditive) {
  CostLedger ledger({SiteId{1}, SiteId{2}}, {500.0, 500.0}, 15.0);
  for (int t = 0; t < 10; ++t) ledger.append_step({0.3, 0.3});
  const auto tot = total_cost(ledger, 10);
  EXPECT_DOUBLE_EQ(tot.per_site[0], 503.0);
  EXPECT_DOUBLE_EQ(tot.network, 2.0 * tot.per_site[0]);
  EXPECT_DOUBLE_EQ(total_cost(ledger, 0).network, 1000.0);
  EXPECT_THROW(ledger.append_step({0.1}), Error);
  EXPECT_THROW(ledger.append_step({-0.1, 0.0}), Error);
}

TEST(Cost, CumulativeSeries) {
  CostLedger ledger({SiteId{1}, SiteId{2}}, {100.0, 0.0}, 15.0);
  for (int t = 0; t < 5; ++t) ledger.append_step({0.5, 0.25});
  const auto rows = report_series(ledger, SeriesGranularity::CumulativePerSite);
  ASSERT_EQ(rows.size(), 10u);
  double prev = 0.0;
  for (std::size_t k = 0; k < rows.size(); k += 2) {
    EXPECT_EQ(rows[k].scope, "site_avg");
    EXPECT_DOUBLE_EQ(rows[k].cost_eur * 2.0, rows[k + 1].cost_eur);
    EXPECT_GE(rows[k].cost_eur, prev);
    prev = rows[k].cost_eur;
  }
  EXPECT_DOUBLE_EQ(rows.back().cost_eur, 100.0 + 5 * 0.75);
}

TEST(Cost, AnnualSeriesBooksCapexInYearOne) {
  CostLedger ledger({SiteId{1}}, {1000.0}, 24.0 * 60.0);  // daily steps
  for (int d = 0; d < 400; ++d) ledger.append_step({1.0});
  const auto rows = report_series(ledger, SeriesGranularity::AnnualNetwork);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[0].cost_eur, 1000.0 + 365.0);
  EXPECT_DOUBLE_EQ(rows[1].cost_eur, 35.0);
  std::ostringstream out;
  write_series_csv(out, rows, SeriesGranularity::AnnualNetwork);
  EXPECT_EQ(out.str().substr(0, 19), "year,scope,cost_eur");
}
