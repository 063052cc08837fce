#pragma once

// Static system topology: operators, radio sites, energy infrastructures and
// the cost-share bookkeeping every other module reads.

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace enshare {

enum class MnoId : std::int32_t {};
enum class SiteId : std::int32_t {};
enum class InfraId : std::int32_t {};

constexpr std::int32_t raw(MnoId id) { return static_cast<std::int32_t>(id); }
constexpr std::int32_t raw(SiteId id) { return static_cast<std::int32_t>(id); }
constexpr std::int32_t raw(InfraId id) { return static_cast<std::int32_t>(id); }

// Thrown for malformed inputs and violated preconditions across the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Source { Grid, Battery, Renewable };
std::string to_string(Source s);

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

struct SiteSpec {
  SiteId id{};
  MnoId owner{};
  InfraId infra{};
  double share = 1.0;  // alpha: fraction of the infrastructure attributed to this site
  std::int32_t location = 0;  // co-location cluster; sites of one cluster share weather
  std::optional<GeoPoint> geo;
};

// Assets installed at one infrastructure.
struct InfraSpec {
  InfraId id{};
  bool has_battery = false;
  bool has_renewable = false;
  double battery_capacity_kwh = 50.0;
};

// Immutable once built. Sites and infrastructures are kept sorted by id.
class NetworkTopology {
 public:
  NetworkTopology() = default;
  NetworkTopology(std::vector<MnoId> mnos, std::vector<SiteSpec> sites,
                  std::vector<InfraSpec> infrastructures);

  const std::vector<MnoId>& mnos() const { return mnos_; }
  const std::vector<SiteSpec>& sites() const { return sites_; }
  const std::vector<InfraSpec>& infrastructures() const { return infras_; }

  std::size_t site_count() const { return sites_.size(); }
  std::size_t infra_count() const { return infras_.size(); }

  const SiteSpec& site(SiteId id) const;
  const InfraSpec& infra(InfraId id) const;
  std::size_t site_index(SiteId id) const;
  std::size_t infra_index(InfraId id) const;
  bool has_site(SiteId id) const { return site_pos_.count(id) != 0; }
  bool has_infra(InfraId id) const { return infra_pos_.count(id) != 0; }

  MnoId owner_of(SiteId id) const { return site(id).owner; }
  InfraId infra_of(SiteId id) const { return site(id).infra; }
  double share_of(SiteId id) const { return site(id).share; }

 private:
  std::vector<MnoId> mnos_;
  std::vector<SiteSpec> sites_;
  std::vector<InfraSpec> infras_;
  std::map<SiteId, std::size_t> site_pos_;
  std::map<InfraId, std::size_t> infra_pos_;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_topology(const NetworkTopology& topology);

// Fraction of sites whose share is below one, i.e. that take part in sharing.
double sharing_ratio(const NetworkTopology& topology);
// Fraction of sites holding their infrastructure alone (share exactly one).
double exclusive_ratio(const NetworkTopology& topology);

// Sites fed by one infrastructure, ascending by id.
std::vector<SiteId> sites_of_infrastructure(const NetworkTopology& topology, InfraId infra);

struct TimeGrid {
  std::int64_t horizon_steps = 672;
  double step_minutes = 15.0;
  std::chrono::sys_seconds start{};

  static constexpr double kMinutesPerYear = 365.0 * 24.0 * 60.0;

  void validate() const;
  double step_hours() const { return step_minutes / 60.0; }
  double steps_per_day() const { return 24.0 * 60.0 / step_minutes; }
  std::chrono::sys_seconds time_of(std::int64_t step) const;
  // Hour of day in [0, 24) at the start of the step.
  double hour_of_day(std::int64_t step) const;
  std::int64_t day_index(std::int64_t step) const;
};

std::string format_iso8601(std::chrono::sys_seconds t);
std::chrono::sys_seconds parse_iso8601(const std::string& text);

// Source-to-sink energy flows for one step, all in kWh and nonnegative.
struct EnergyFlows {
  std::vector<double> grid_to_battery;  // per infrastructure index
  std::vector<double> ren_to_battery;   // per infrastructure index
  std::vector<double> grid_to_load;     // per site index
  std::vector<double> battery_to_load;  // per site index

  static EnergyFlows zeros(const NetworkTopology& topology);
};

// Topology file: JSON with "mnos", "infrastructures" and "sites" arrays.
NetworkTopology load_topology(const std::string& path);
void save_topology(const NetworkTopology& topology, const std::string& path);
std::string topology_to_json(const NetworkTopology& topology);
NetworkTopology topology_from_json(const std::string& text);

}  // namespace enshare
