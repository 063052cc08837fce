#pragma once

// Synthetic stand-in for operational data, CSV persistence of the corpus and
// electricity price feeds.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "enshare/domain.hpp"

namespace enshare {

struct KpiRecord {
  SiteId site{};
  std::int64_t step = 0;
  double throughput_mbps = 0.0;
  double success_ratio = 1.0;
  double actual_energy_kwh = 0.0;  // ground-truth demand of the step
};

struct CmRecord {
  SiteId site{};
  std::string hardware_model;         // categorical, see kHardwareModels
  std::vector<double> power_config;   // {max_tx_power_w, sleep_mode}
  std::string frequency_band;         // categorical, see kFrequencyBands
  int cell_count = 6;                 // 3..9
  std::string antenna_config = "64T64R";

  void validate() const;
  bool operator==(const CmRecord&) const = default;
};

inline constexpr std::array<const char*, 3> kHardwareModels{"HW-A", "HW-B", "HW-C"};
inline constexpr std::array<const char*, 3> kFrequencyBands{"B1", "B3", "N78"};
inline constexpr std::size_t kPowerConfigDim = 2;
inline constexpr std::size_t kStaticFeatureDim =
    kHardwareModels.size() + kPowerConfigDim + kFrequencyBands.size() + 1;

// One-hot hardware, normalised power config, one-hot band, normalised cells.
std::vector<double> encode_static_features(const CmRecord& cm);

struct SiteSeries {
  std::vector<double> throughput_mbps;
  std::vector<double> success_ratio;
  std::vector<double> energy_kwh;
  bool operator==(const SiteSeries&) const = default;
};

// Weather at one co-location cluster; only irradiance drives the harvest.
struct WeatherSeries {
  std::vector<double> harvest_kwh;  // per standard installation and step
  std::vector<double> irradiance_wm2;
  std::vector<double> temperature_c;
  std::vector<double> humidity;
  std::vector<double> cloud_cover;
  std::vector<double> precipitation_mm;
  bool operator==(const WeatherSeries&) const = default;
};

struct Corpus {
  TimeGrid grid;
  std::vector<SiteId> sites;           // ascending
  std::vector<SiteSeries> kpi;         // by site index
  std::vector<CmRecord> cm;            // by site index
  std::vector<double> price;           // EUR/kWh by step
  std::vector<std::int32_t> locations; // ascending
  std::vector<WeatherSeries> weather;  // by location index

  std::size_t site_index(SiteId id) const;
  const SiteSeries& series(SiteId id) const { return kpi[site_index(id)]; }
  const CmRecord& cm_of(SiteId id) const { return cm[site_index(id)]; }
  const WeatherSeries& weather_at(std::int32_t location) const;

  bool operator==(const Corpus& o) const;
};

enum class PriceMode { Flat, TwoBand };

struct GeneratorConfig {
  double base_kwh_per_cell = 0.45;  // per 15 minutes
  double static_fraction = 0.55;    // load share independent of traffic
  double demand_noise = 0.07;       // relative to the site's base load
  double traffic_ar = 0.8;
  double traffic_noise = 0.05;
  double weekend_factor = 0.85;
  double throughput_per_cell_mbps = 150.0;
  double solar_peak_kw = 10.0;      // standard installation
  PriceMode price_mode = PriceMode::Flat;
  double flat_price = 0.28;
  double day_price = 0.32;
  double night_price = 0.20;
  double day_start_hour = 7.0;
  double day_end_hour = 23.0;
};

// Base layout: n_sites spread over n_mnos operators in co-location clusters
// of one site per operator, each site on its own grid-only infrastructure.
NetworkTopology generate_layout(int n_sites, int n_mnos, std::uint64_t seed);

Corpus generate_synthetic_dataset(const NetworkTopology& topology, const TimeGrid& grid,
                                  std::uint64_t seed, const GeneratorConfig& config = {});

// Two-band tariff value for a given hour of day.
double tariff_price(const GeneratorConfig& config, double hour_of_day);

// Files kpi.csv, cm.csv, price.csv, solar.csv, each starting with a
// "#schema,<name>,<version>" row.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

// Abstract source of electricity prices aligned to a time grid.
class PriceFeed {
 public:
  virtual ~PriceFeed() = default;
  virtual std::vector<double> prices(const TimeGrid& grid) const = 0;
  virtual std::string name() const = 0;
};

// "stub:flat[:<price>]", "stub:two-band" or a CSV path with either
// step,timestamp,price_eur_per_kwh rows or hour,price_eur_per_kwh day profiles.
std::unique_ptr<PriceFeed> make_price_feed(const std::string& source,
                                           const GeneratorConfig& config = {});

std::vector<double> price_feed(const std::string& source, const TimeGrid& grid,
                               const GeneratorConfig& config = {});

}  // namespace enshare
