#include "enshare/domain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "json.hpp"

namespace enshare {

std::string to_string(Source s) {
  switch (s) {
    case Source::Grid:
      return "grid";
    case Source::Battery:
      return "battery";
    case Source::Renewable:
      return "renewable";
  }
  return "unknown";
}

NetworkTopology::NetworkTopology(std::vector<MnoId> mnos, std::vector<SiteSpec> sites,
                                 std::vector<InfraSpec> infrastructures)
    : mnos_(std::move(mnos)), sites_(std::move(sites)), infras_(std::move(infrastructures)) {
  std::sort(mnos_.begin(), mnos_.end());
  if (std::adjacent_find(mnos_.begin(), mnos_.end()) != mnos_.end()) {
    throw Error("duplicate MNO id in topology");
  }
  std::sort(sites_.begin(), sites_.end(),
            [](const SiteSpec& a, const SiteSpec& b) { return a.id < b.id; });
  std::sort(infras_.begin(), infras_.end(),
            [](const InfraSpec& a, const InfraSpec& b) { return a.id < b.id; });
  for (std::size_t k = 0; k < sites_.size(); ++k) {
    if (!site_pos_.emplace(sites_[k].id, k).second) {
      throw Error(fmt::format("duplicate site id {}", raw(sites_[k].id)));
    }
  }
  for (std::size_t k = 0; k < infras_.size(); ++k) {
    if (!infra_pos_.emplace(infras_[k].id, k).second) {
      throw Error(fmt::format("duplicate infrastructure id {}", raw(infras_[k].id)));
    }
  }
}

std::size_t NetworkTopology::site_index(SiteId id) const {
  auto it = site_pos_.find(id);
  if (it == site_pos_.end()) throw Error(fmt::format("unknown site {}", raw(id)));
  return it->second;
}

std::size_t NetworkTopology::infra_index(InfraId id) const {
  auto it = infra_pos_.find(id);
  if (it == infra_pos_.end()) throw Error(fmt::format("unknown infrastructure {}", raw(id)));
  return it->second;
}

const SiteSpec& NetworkTopology::site(SiteId id) const { return sites_[site_index(id)]; }
const InfraSpec& NetworkTopology::infra(InfraId id) const { return infras_[infra_index(id)]; }

ValidationReport validate_topology(const NetworkTopology& topology) {
  ValidationReport report;
  const std::set<MnoId> mnos(topology.mnos().begin(), topology.mnos().end());
  std::map<InfraId, double> share_sum;
  for (const auto& s : topology.sites()) {
    if (mnos.count(s.owner) == 0) {
      report.violations.push_back(
          fmt::format("site {}: owner MNO {} is not declared", raw(s.id), raw(s.owner)));
    }
    if (!topology.has_infra(s.infra)) {
      report.violations.push_back(
          fmt::format("site {}: orphan, infrastructure {} is not declared", raw(s.id),
                      raw(s.infra)));
      continue;
    }
    if (!(s.share > 0.0 && s.share <= 1.0)) {
      report.violations.push_back(
          fmt::format("site {}: share {} outside (0,1]", raw(s.id), s.share));
    }
    share_sum[s.infra] += s.share;
  }
  for (const auto& [infra, sum] : share_sum) {
    if (std::abs(sum - 1.0) > 1e-9) {
      report.violations.push_back(
          fmt::format("infrastructure {}: shares sum {} ≠ 1", raw(infra), sum));
    }
  }
  for (const auto& inf : topology.infrastructures()) {
    if (inf.has_battery && !(inf.battery_capacity_kwh > 0.0)) {
      report.violations.push_back(
          fmt::format("infrastructure {}: battery capacity must be positive", raw(inf.id)));
    }
  }
  return report;
}

double sharing_ratio(const NetworkTopology& topology) {
  if (topology.site_count() == 0) throw Error("sharing ratio of an empty topology");
  const auto shared = std::count_if(topology.sites().begin(), topology.sites().end(),
                                    [](const SiteSpec& s) { return s.share < 1.0; });
  return static_cast<double>(shared) / static_cast<double>(topology.site_count());
}

double exclusive_ratio(const NetworkTopology& topology) {
  if (topology.site_count() == 0) throw Error("exclusive ratio of an empty topology");
  const auto exclusive = std::count_if(topology.sites().begin(), topology.sites().end(),
                                       [](const SiteSpec& s) { return s.share == 1.0; });
  return static_cast<double>(exclusive) / static_cast<double>(topology.site_count());
}

std::vector<SiteId> sites_of_infrastructure(const NetworkTopology& topology, InfraId infra) {
  if (!topology.has_infra(infra)) {
    throw Error(fmt::format("unknown infrastructure {}", raw(infra)));
  }
  std::vector<SiteId> out;
  for (const auto& s : topology.sites()) {
    if (s.infra == infra) out.push_back(s.id);
  }
  return out;
}

void TimeGrid::validate() const {
  if (horizon_steps < 1) throw Error("time grid needs at least one step");
  if (!(step_minutes > 0.0)) throw Error("step duration must be positive");
}

std::chrono::sys_seconds TimeGrid::time_of(std::int64_t step) const {
  const auto offset = static_cast<std::int64_t>(std::llround(step * step_minutes * 60.0));
  return start + std::chrono::seconds(offset);
}

double TimeGrid::hour_of_day(std::int64_t step) const {
  using namespace std::chrono;
  const auto t = time_of(step);
  const auto since_midnight = t - floor<days>(t);
  return static_cast<double>(since_midnight.count()) / 3600.0;
}

std::int64_t TimeGrid::day_index(std::int64_t step) const {
  using namespace std::chrono;
  return (floor<days>(time_of(step)) - floor<days>(start)).count();
}

std::string format_iso8601(std::chrono::sys_seconds t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                     hms.hours().count(), hms.minutes().count(), hms.seconds().count());
}

std::chrono::sys_seconds parse_iso8601(const std::string& text) {
  using namespace std::chrono;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &s, &tail) != 7 ||
      tail != 'Z') {
    throw Error(fmt::format("bad ISO-8601 timestamp '{}', expected YYYY-MM-DDTHH:MM:SSZ", text));
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) {
    throw Error(fmt::format("invalid calendar time '{}'", text));
  }
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

EnergyFlows EnergyFlows::zeros(const NetworkTopology& topology) {
  EnergyFlows f;
  f.grid_to_battery.assign(topology.infra_count(), 0.0);
  f.ren_to_battery.assign(topology.infra_count(), 0.0);
  f.grid_to_load.assign(topology.site_count(), 0.0);
  f.battery_to_load.assign(topology.site_count(), 0.0);
  return f;
}

std::string topology_to_json(const NetworkTopology& topology) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["mnos"] = nlohmann::ordered_json::array();
  for (auto m : topology.mnos()) j["mnos"].push_back(raw(m));
  j["infrastructures"] = nlohmann::ordered_json::array();
  for (const auto& inf : topology.infrastructures()) {
    j["infrastructures"].push_back({{"id", raw(inf.id)},
                                    {"has_battery", inf.has_battery},
                                    {"has_renewable", inf.has_renewable},
                                    {"battery_capacity_kwh", inf.battery_capacity_kwh}});
  }
  j["sites"] = nlohmann::ordered_json::array();
  for (const auto& s : topology.sites()) {
    nlohmann::ordered_json js{{"id", raw(s.id)},
                              {"mno", raw(s.owner)},
                              {"infra", raw(s.infra)},
                              {"share", s.share},
                              {"location", s.location}};
    if (s.geo) {
      js["lat"] = s.geo->lat;
      js["lon"] = s.geo->lon;
    }
    j["sites"].push_back(std::move(js));
  }
  return j.dump(2) + "\n";
}

NetworkTopology topology_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(fmt::format("topology: invalid JSON: {}", e.what()));
  }
  try {
    if (j.value("schema_version", 1) != 1) throw Error("topology: unsupported schema_version");
    std::vector<MnoId> mnos;
    for (const auto& m : j.at("mnos")) mnos.push_back(MnoId{m.get<std::int32_t>()});
    std::vector<InfraSpec> infras;
    for (const auto& ji : j.at("infrastructures")) {
      InfraSpec inf;
      inf.id = InfraId{ji.at("id").get<std::int32_t>()};
      inf.has_battery = ji.value("has_battery", false);
      inf.has_renewable = ji.value("has_renewable", false);
      inf.battery_capacity_kwh = ji.value("battery_capacity_kwh", 50.0);
      infras.push_back(inf);
    }
    std::vector<SiteSpec> sites;
    for (const auto& js : j.at("sites")) {
      SiteSpec s;
      s.id = SiteId{js.at("id").get<std::int32_t>()};
      s.owner = MnoId{js.at("mno").get<std::int32_t>()};
      s.infra = InfraId{js.at("infra").get<std::int32_t>()};
      s.share = js.value("share", 1.0);
      s.location = js.value("location", raw(s.id));
      if (js.contains("lat") && js.contains("lon")) {
        s.geo = GeoPoint{js.at("lat").get<double>(), js.at("lon").get<double>()};
      }
      sites.push_back(s);
    }
    return NetworkTopology(std::move(mnos), std::move(sites), std::move(infras));
  } catch (const nlohmann::json::exception& e) {
    throw Error(fmt::format("topology: schema violation: {}", e.what()));
  }
}

NetworkTopology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open topology file '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return topology_from_json(ss.str());
}

void save_topology(const NetworkTopology& topology, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write topology file '{}'", path));
  out << topology_to_json(topology);
}

}  // namespace enshare
