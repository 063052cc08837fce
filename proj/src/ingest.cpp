#include "enshare/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "enshare/csv.hpp"
#include "enshare/rng.hpp"

namespace enshare {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSiteStream = 1;
constexpr std::uint64_t kLocationStream = 2;
constexpr std::uint64_t kCmStream = 3;
constexpr std::uint64_t kLayoutStream = 4;

double diurnal_profile(double hour) {
  return 0.2 + 0.8 * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * (hour - 4.0) / 24.0));
}

double solar_bell(double hour) {
  if (hour <= 6.0 || hour >= 20.0) return 0.0;
  return std::pow(std::sin(std::numbers::pi * (hour - 6.0) / 14.0), 1.5);
}

bool is_weekend(std::chrono::sys_seconds t) {
  using namespace std::chrono;
  const weekday wd{floor<days>(t)};
  return wd == Saturday || wd == Sunday;
}

std::size_t index_of(std::span<const char* const> names, const std::string& value) {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (value == names[k]) return k;
  }
  throw Error(fmt::format("unknown categorical value '{}'", value));
}

}  // namespace

void CmRecord::validate() const {
  if (cell_count < 3 || cell_count > 9) {
    throw Error(fmt::format("site {}: cell_count {} outside [3,9]", raw(site), cell_count));
  }
  index_of(kHardwareModels, hardware_model);
  index_of(kFrequencyBands, frequency_band);
  if (power_config.size() != kPowerConfigDim) {
    throw Error(fmt::format("site {}: expected {} power-config values", raw(site), kPowerConfigDim));
  }
}

std::vector<double> encode_static_features(const CmRecord& cm) {
  cm.validate();
  std::vector<double> f(kStaticFeatureDim, 0.0);
  std::size_t k = 0;
  f[k + index_of(kHardwareModels, cm.hardware_model)] = 1.0;
  k += kHardwareModels.size();
  f[k++] = (cm.power_config[0] - 60.0) / 20.0;
  f[k++] = cm.power_config[1];
  f[k + index_of(kFrequencyBands, cm.frequency_band)] = 1.0;
  k += kFrequencyBands.size();
  f[k] = (cm.cell_count - 6.0) / 3.0;
  return f;
}

std::size_t Corpus::site_index(SiteId id) const {
  auto it = std::lower_bound(sites.begin(), sites.end(), id);
  if (it == sites.end() || *it != id) throw Error(fmt::format("corpus has no site {}", raw(id)));
  return static_cast<std::size_t>(it - sites.begin());
}

const WeatherSeries& Corpus::weather_at(std::int32_t location) const {
  auto it = std::lower_bound(locations.begin(), locations.end(), location);
  if (it == locations.end() || *it != location) {
    throw Error(fmt::format("corpus has no weather for location {}", location));
  }
  return weather[static_cast<std::size_t>(it - locations.begin())];
}

bool Corpus::operator==(const Corpus& o) const {
  return grid.horizon_steps == o.grid.horizon_steps && grid.step_minutes == o.grid.step_minutes &&
         grid.start == o.grid.start && sites == o.sites && kpi == o.kpi && cm == o.cm &&
         price == o.price && locations == o.locations && weather == o.weather;
}

NetworkTopology generate_layout(int n_sites, int n_mnos, std::uint64_t seed) {
  if (n_sites < 1 || n_mnos < 1) throw Error("layout needs at least one site and one MNO");
  Rng rng(derive_seed(seed, 0, kLayoutStream));
  std::vector<MnoId> mnos;
  for (int m = 1; m <= n_mnos; ++m) mnos.push_back(MnoId{m});
  std::vector<SiteSpec> sites;
  std::vector<InfraSpec> infras;
  std::map<std::int32_t, GeoPoint> location_geo;
  for (int k = 0; k < n_sites; ++k) {
    const std::int32_t location = k / n_mnos + 1;
    if (!location_geo.count(location)) {
      location_geo[location] = {59.33 + rng.uniform(-0.15, 0.15), 18.06 + rng.uniform(-0.3, 0.3)};
    }
    SiteSpec s;
    s.id = SiteId{k + 1};
    s.owner = MnoId{k % n_mnos + 1};
    s.infra = InfraId{k + 1};
    s.share = 1.0;
    s.location = location;
    s.geo = location_geo[location];
    sites.push_back(s);
    infras.push_back({InfraId{k + 1}, false, false, 50.0});
  }
  return NetworkTopology(std::move(mnos), std::move(sites), std::move(infras));
}

double tariff_price(const GeneratorConfig& config, double hour_of_day) {
  if (config.price_mode == PriceMode::Flat) return config.flat_price;
  const bool day = hour_of_day >= config.day_start_hour && hour_of_day < config.day_end_hour;
  return day ? config.day_price : config.night_price;
}

Corpus generate_synthetic_dataset(const NetworkTopology& topology, const TimeGrid& grid,
                                  std::uint64_t seed, const GeneratorConfig& config) {
  grid.validate();
  if (grid.horizon_steps * grid.step_minutes < 24.0 * 60.0) {
    throw Error("synthetic corpus needs a horizon of at least one day");
  }
  const auto T = static_cast<std::size_t>(grid.horizon_steps);
  const double step_scale = grid.step_minutes / 15.0;
  Corpus c;
  c.grid = grid;

  for (const auto& s : topology.sites()) {
    c.sites.push_back(s.id);

    Rng cm_rng(derive_seed(seed, static_cast<std::uint64_t>(raw(s.id)), kCmStream));
    CmRecord cm;
    cm.site = s.id;
    cm.cell_count = 3 + static_cast<int>(cm_rng.below(7));
    cm.hardware_model = kHardwareModels[cm_rng.below(kHardwareModels.size())];
    cm.frequency_band = kFrequencyBands[cm_rng.below(kFrequencyBands.size())];
    cm.power_config = {40.0 + 40.0 * cm_rng.uniform(), static_cast<double>(cm_rng.below(2))};
    c.cm.push_back(cm);

    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(raw(s.id)), kSiteStream));
    const double efficiency = rng.uniform(0.95, 1.05);
    const double traffic_scale = rng.uniform(0.9, 1.1);
    const double phase_hours = rng.uniform(-0.5, 0.5);
    const double base = config.base_kwh_per_cell * cm.cell_count * efficiency * step_scale;
    const double peak_mbps = config.throughput_per_cell_mbps * cm.cell_count;
    double ar = rng.normal() * config.traffic_noise /
                std::sqrt(std::max(1e-12, 1.0 - config.traffic_ar * config.traffic_ar));

    SiteSeries series;
    series.throughput_mbps.resize(T);
    series.success_ratio.resize(T);
    series.energy_kwh.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      const auto step = static_cast<std::int64_t>(t);
      const double hour = grid.hour_of_day(step) + phase_hours;
      const double weekly = is_weekend(grid.time_of(step)) ? config.weekend_factor : 1.0;
      ar = config.traffic_ar * ar + config.traffic_noise * rng.normal();
      const double traffic = std::max(0.0, diurnal_profile(hour) * weekly * traffic_scale * (1.0 + ar));
      const double demand =
          base * (config.static_fraction + (1.0 - config.static_fraction) * traffic) +
          config.demand_noise * base * rng.normal();
      series.energy_kwh[t] = std::max(0.0, demand);
      series.throughput_mbps[t] = std::max(0.0, peak_mbps * traffic * (1.0 + 0.02 * rng.normal()));
      series.success_ratio[t] =
          std::clamp(0.995 - 0.04 * traffic * traffic + 0.003 * rng.normal(), 0.0, 1.0);
    }
    c.kpi.push_back(std::move(series));
  }

  std::set<std::int32_t> locations;
  for (const auto& s : topology.sites()) locations.insert(s.location);
  for (std::int32_t loc : locations) {
    c.locations.push_back(loc);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(loc), kLocationStream));
    WeatherSeries w;
    std::int64_t current_day = -1;
    double clear_fraction = 1.0;
    for (std::size_t t = 0; t < T; ++t) {
      const auto step = static_cast<std::int64_t>(t);
      if (grid.day_index(step) != current_day) {
        current_day = grid.day_index(step);
        clear_fraction = rng.uniform(0.5, 1.0);
      }
      const double hour = grid.hour_of_day(step);
      const double bell = solar_bell(hour);
      const double irradiance =
          bell > 0.0 ? std::max(0.0, 1000.0 * bell * clear_fraction * (1.0 + 0.03 * rng.normal()))
                     : 0.0;
      const double cloud = 1.0 - clear_fraction;
      w.irradiance_wm2.push_back(irradiance);
      w.harvest_kwh.push_back(config.solar_peak_kw * (irradiance / 1000.0) * grid.step_hours());
      w.temperature_c.push_back(12.0 + 8.0 * bell + rng.normal());
      w.humidity.push_back(std::clamp(0.7 - 0.2 * bell + 0.05 * rng.normal(), 0.0, 1.0));
      w.cloud_cover.push_back(cloud);
      const double rain_draw = rng.uniform();
      w.precipitation_mm.push_back(cloud > 0.4 && rain_draw < 0.1 ? 2.0 * rain_draw * 10.0 : 0.0);
    }
    c.weather.push_back(std::move(w));
  }

  c.price.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    c.price[t] = tariff_price(config, grid.hour_of_day(static_cast<std::int64_t>(t)));
  }
  return c;
}

void write_corpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  const auto T = corpus.grid.horizon_steps;
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw Error(fmt::format("cannot write '{}'", (dir / name).string()));
    return out;
  };
  {
    auto out = open("kpi.csv");
    fmt::print(out, "#schema,kpi,1\nstep,timestamp,site,throughput_mbps,success_ratio,actual_energy_kwh\n");
    for (std::int64_t t = 0; t < T; ++t) {
      const auto ts = format_iso8601(corpus.grid.time_of(t));
      for (std::size_t k = 0; k < corpus.sites.size(); ++k) {
        const auto& s = corpus.kpi[k];
        const auto i = static_cast<std::size_t>(t);
        fmt::print(out, "{},{},{},{},{},{}\n", t, ts, raw(corpus.sites[k]), s.throughput_mbps[i],
                   s.success_ratio[i], s.energy_kwh[i]);
      }
    }
  }
  {
    auto out = open("cm.csv");
    fmt::print(out,
               "#schema,cm,1\nsite,hardware_model,max_tx_power_w,sleep_mode,frequency_band,"
               "cell_count,antenna_config\n");
    for (const auto& cm : corpus.cm) {
      fmt::print(out, "{},{},{},{},{},{},{}\n", raw(cm.site), cm.hardware_model, cm.power_config[0],
                 cm.power_config[1], cm.frequency_band, cm.cell_count, cm.antenna_config);
    }
  }
  {
    auto out = open("price.csv");
    fmt::print(out, "#schema,price,1\nstep,timestamp,price_eur_per_kwh\n");
    for (std::int64_t t = 0; t < T; ++t) {
      fmt::print(out, "{},{},{}\n", t, format_iso8601(corpus.grid.time_of(t)),
                 corpus.price[static_cast<std::size_t>(t)]);
    }
  }
  {
    auto out = open("solar.csv");
    fmt::print(out,
               "#schema,solar,1\nstep,timestamp,location,harvest_kwh,irradiance_wm2,temperature_c,"
               "humidity,cloud_cover,precipitation_mm\n");
    for (std::int64_t t = 0; t < T; ++t) {
      const auto ts = format_iso8601(corpus.grid.time_of(t));
      const auto i = static_cast<std::size_t>(t);
      for (std::size_t k = 0; k < corpus.locations.size(); ++k) {
        const auto& w = corpus.weather[k];
        fmt::print(out, "{},{},{},{},{},{},{},{},{}\n", t, ts, corpus.locations[k], w.harvest_kwh[i],
                   w.irradiance_wm2[i], w.temperature_c[i], w.humidity[i], w.cloud_cover[i],
                   w.precipitation_mm[i]);
      }
    }
  }
}

namespace {

void expect_schema(const csv::Table& t, const char* name) {
  if (!t.schema_name.empty() && (t.schema_name != name || t.schema_version != 1)) {
    throw Error(fmt::format("{}: expected schema {} v1, found {} v{}", t.source, name,
                            t.schema_name, t.schema_version));
  }
}

}  // namespace

Corpus load_corpus(const fs::path& dir) {
  Corpus c;

  const auto price_t = csv::read(dir / "price.csv");
  expect_schema(price_t, "price");
  if (price_t.rows.empty()) throw Error("price.csv: no rows");
  {
    const auto c_step = price_t.column("step");
    const auto c_ts = price_t.column("timestamp");
    const auto c_price = price_t.column("price_eur_per_kwh");
    c.grid.start = parse_iso8601(price_t.rows[0][c_ts]);
    c.grid.horizon_steps = static_cast<std::int64_t>(price_t.rows.size());
    c.grid.step_minutes =
        price_t.rows.size() > 1
            ? static_cast<double>((parse_iso8601(price_t.rows[1][c_ts]) - c.grid.start).count()) / 60.0
            : 15.0;
    c.grid.validate();
    for (std::size_t r = 0; r < price_t.rows.size(); ++r) {
      const auto& row = price_t.rows[r];
      if (csv::to_int(row[c_step], price_t, r) != static_cast<std::int64_t>(r) ||
          parse_iso8601(row[c_ts]) != c.grid.time_of(static_cast<std::int64_t>(r))) {
        throw Error(fmt::format("price.csv: row {}: timestamps must be monotone on a fixed grid", r + 1));
      }
      const double p = csv::to_double(row[c_price], price_t, r);
      if (!(p >= 0.0)) throw Error(fmt::format("price.csv: row {}: negative price {} rejected", r + 1, p));
      c.price.push_back(p);
    }
  }
  const auto T = static_cast<std::size_t>(c.grid.horizon_steps);

  const auto cm_t = csv::read(dir / "cm.csv");
  expect_schema(cm_t, "cm");
  for (std::size_t r = 0; r < cm_t.rows.size(); ++r) {
    const auto& row = cm_t.rows[r];
    CmRecord cm;
    cm.site = SiteId{static_cast<std::int32_t>(csv::to_int(row[cm_t.column("site")], cm_t, r))};
    cm.hardware_model = row[cm_t.column("hardware_model")];
    cm.power_config = {csv::to_double(row[cm_t.column("max_tx_power_w")], cm_t, r),
                       csv::to_double(row[cm_t.column("sleep_mode")], cm_t, r)};
    cm.frequency_band = row[cm_t.column("frequency_band")];
    cm.cell_count = static_cast<int>(csv::to_int(row[cm_t.column("cell_count")], cm_t, r));
    cm.antenna_config = row[cm_t.column("antenna_config")];
    cm.validate();
    c.cm.push_back(cm);
  }
  std::sort(c.cm.begin(), c.cm.end(), [](const CmRecord& a, const CmRecord& b) { return a.site < b.site; });
  for (const auto& cm : c.cm) {
    if (!c.sites.empty() && c.sites.back() == cm.site) {
      throw Error(fmt::format("cm.csv: duplicate site {}", raw(cm.site)));
    }
    c.sites.push_back(cm.site);
  }

  const auto kpi_t = csv::read(dir / "kpi.csv");
  expect_schema(kpi_t, "kpi");
  c.kpi.assign(c.sites.size(), SiteSeries{});
  std::vector<std::vector<bool>> seen(c.sites.size(), std::vector<bool>(T, false));
  for (auto& s : c.kpi) {
    s.throughput_mbps.assign(T, 0.0);
    s.success_ratio.assign(T, 0.0);
    s.energy_kwh.assign(T, 0.0);
  }
  {
    const auto c_step = kpi_t.column("step");
    const auto c_ts = kpi_t.column("timestamp");
    const auto c_site = kpi_t.column("site");
    const auto c_thr = kpi_t.column("throughput_mbps");
    const auto c_succ = kpi_t.column("success_ratio");
    const auto c_e = kpi_t.column("actual_energy_kwh");
    for (std::size_t r = 0; r < kpi_t.rows.size(); ++r) {
      const auto& row = kpi_t.rows[r];
      const auto step = csv::to_int(row[c_step], kpi_t, r);
      if (step < 0 || step >= c.grid.horizon_steps) {
        throw Error(fmt::format("kpi.csv: row {}: step {} outside the price grid", r + 1, step));
      }
      if (parse_iso8601(row[c_ts]) != c.grid.time_of(step)) {
        throw Error(fmt::format("kpi.csv: row {}: timestamp not aligned to step {}", r + 1, step));
      }
      const SiteId site{static_cast<std::int32_t>(csv::to_int(row[c_site], kpi_t, r))};
      const auto k = c.site_index(site);
      const auto i = static_cast<std::size_t>(step);
      if (seen[k][i]) throw Error(fmt::format("kpi.csv: duplicate record site {}, step {}", raw(site), step));
      seen[k][i] = true;
      const double thr = csv::to_double(row[c_thr], kpi_t, r);
      const double succ = csv::to_double(row[c_succ], kpi_t, r);
      const double e = csv::to_double(row[c_e], kpi_t, r);
      if (!(thr >= 0.0) || !(succ >= 0.0 && succ <= 1.0) || !(e >= 0.0)) {
        throw Error(fmt::format("kpi.csv: row {}: value out of range", r + 1));
      }
      c.kpi[k].throughput_mbps[i] = thr;
      c.kpi[k].success_ratio[i] = succ;
      c.kpi[k].energy_kwh[i] = e;
    }
  }
  for (std::size_t k = 0; k < c.sites.size(); ++k) {
    for (std::size_t t = 0; t < T; ++t) {
      if (!seen[k][t]) throw Error(fmt::format("kpi.csv: gap at site {}, step {}", raw(c.sites[k]), t));
    }
  }

  const auto sol_t = csv::read(dir / "solar.csv");
  expect_schema(sol_t, "solar");
  {
    const auto c_step = sol_t.column("step");
    const auto c_loc = sol_t.column("location");
    std::map<std::int32_t, WeatherSeries> by_loc;
    std::map<std::int32_t, std::vector<bool>> loc_seen;
    const std::array<const char*, 6> cols{"harvest_kwh", "irradiance_wm2", "temperature_c",
                                          "humidity", "cloud_cover", "precipitation_mm"};
    std::array<std::size_t, 6> idx{};
    for (std::size_t k = 0; k < cols.size(); ++k) idx[k] = sol_t.column(cols[k]);
    for (std::size_t r = 0; r < sol_t.rows.size(); ++r) {
      const auto& row = sol_t.rows[r];
      const auto step = csv::to_int(row[c_step], sol_t, r);
      if (step < 0 || step >= c.grid.horizon_steps) {
        throw Error(fmt::format("solar.csv: row {}: step {} outside the price grid", r + 1, step));
      }
      const auto loc = static_cast<std::int32_t>(csv::to_int(row[c_loc], sol_t, r));
      auto& w = by_loc[loc];
      auto& s = loc_seen[loc];
      if (s.empty()) {
        s.assign(T, false);
        for (auto* v : {&w.harvest_kwh, &w.irradiance_wm2, &w.temperature_c, &w.humidity,
                        &w.cloud_cover, &w.precipitation_mm}) {
          v->assign(T, 0.0);
        }
      }
      const auto i = static_cast<std::size_t>(step);
      if (s[i]) throw Error(fmt::format("solar.csv: duplicate record location {}, step {}", loc, step));
      s[i] = true;
      std::array<std::vector<double>*, 6> dst{&w.harvest_kwh, &w.irradiance_wm2, &w.temperature_c,
                                              &w.humidity, &w.cloud_cover, &w.precipitation_mm};
      for (std::size_t k = 0; k < cols.size(); ++k) {
        (*dst[k])[i] = csv::to_double(row[idx[k]], sol_t, r);
      }
      if (!(w.harvest_kwh[i] >= 0.0)) {
        throw Error(fmt::format("solar.csv: row {}: negative harvest", r + 1));
      }
    }
    for (auto& [loc, w] : by_loc) {
      const auto& s = loc_seen[loc];
      for (std::size_t t = 0; t < T; ++t) {
        if (!s[t]) throw Error(fmt::format("solar.csv: gap at location {}, step {}", loc, t));
      }
      c.locations.push_back(loc);
      c.weather.push_back(std::move(w));
    }
  }
  return c;
}

namespace {

class StubMarketClient final : public PriceFeed {
 public:
  StubMarketClient(PriceMode mode, GeneratorConfig config, std::string name)
      : config_(std::move(config)), name_(std::move(name)) {
    config_.price_mode = mode;
  }
  std::vector<double> prices(const TimeGrid& grid) const override {
    std::vector<double> out;
    for (std::int64_t t = 0; t < grid.horizon_steps; ++t) {
      out.push_back(tariff_price(config_, grid.hour_of_day(t)));
    }
    return out;
  }
  std::string name() const override { return name_; }

 private:
  GeneratorConfig config_;
  std::string name_;
};

class FilePriceFeed final : public PriceFeed {
 public:
  explicit FilePriceFeed(fs::path path) : path_(std::move(path)) {
    if (!fs::exists(path_)) throw Error(fmt::format("price feed file '{}' not found", path_.string()));
  }
  std::vector<double> prices(const TimeGrid& grid) const override {
    const auto t = csv::read(path_);
    const auto c_price = t.column("price_eur_per_kwh");
    std::vector<double> values;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const double p = csv::to_double(t.rows[r][c_price], t, r);
      if (!(p >= 0.0)) throw Error(fmt::format("{}: row {}: negative price {} rejected", t.source, r + 1, p));
      values.push_back(p);
    }
    if (values.empty()) throw Error(fmt::format("{}: no prices", t.source));
    std::vector<double> out;
    const bool profile = std::find(t.header.begin(), t.header.end(), "hour") != t.header.end();
    if (profile) {
      // Piecewise-constant day profile: each row holds from its hour onward.
      std::vector<std::pair<double, double>> bands;
      const auto c_hour = t.column("hour");
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        bands.emplace_back(csv::to_double(t.rows[r][c_hour], t, r), values[r]);
      }
      std::sort(bands.begin(), bands.end());
      for (std::int64_t s = 0; s < grid.horizon_steps; ++s) {
        const double h = grid.hour_of_day(s);
        double p = bands.back().second;  // wraps from the previous day
        for (const auto& [start, price] : bands) {
          if (start <= h) p = price;
        }
        out.push_back(p);
      }
      return out;
    }
    if (values.size() < static_cast<std::size_t>(grid.horizon_steps)) {
      throw Error(fmt::format("{}: {} prices cover fewer than {} steps", t.source, values.size(),
                              grid.horizon_steps));
    }
    out.assign(values.begin(), values.begin() + grid.horizon_steps);
    return out;
  }
  std::string name() const override { return path_.string(); }

 private:
  fs::path path_;
};

}  // namespace

std::unique_ptr<PriceFeed> make_price_feed(const std::string& source, const GeneratorConfig& config) {
  if (source.rfind("stub:", 0) == 0) {
    const auto parts = csv::split(source, ':');
    if (parts.size() >= 2 && parts[1] == "flat") {
      GeneratorConfig c = config;
      if (parts.size() == 3) c.flat_price = std::stod(parts[2]);
      if (!(c.flat_price >= 0.0)) throw Error("negative price rejected");
      return std::make_unique<StubMarketClient>(PriceMode::Flat, c, source);
    }
    if (parts.size() == 2 && parts[1] == "two-band") {
      return std::make_unique<StubMarketClient>(PriceMode::TwoBand, config, source);
    }
    throw Error(fmt::format("unknown stub price client '{}'", source));
  }
  return std::make_unique<FilePriceFeed>(source);
}

std::vector<double> price_feed(const std::string& source, const TimeGrid& grid,
                               const GeneratorConfig& config) {
  return make_price_feed(source, config)->prices(grid);
}

}  // namespace enshare
