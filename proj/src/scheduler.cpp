#include "enshare/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/core.h>

#include "enshare/knapsack.hpp"
#include "json.hpp"

namespace enshare {

namespace {

std::int64_t to_units(double kwh, double granularity, bool round_up) {
  const double r = kwh / granularity;
  const double nearest = std::nearbyint(r);
  if (std::abs(r - nearest) <= 1e-9 * std::max(1.0, std::abs(r))) {
    return static_cast<std::int64_t>(nearest);
  }
  return static_cast<std::int64_t>(round_up ? std::ceil(r) : std::floor(r));
}

using SubproblemSolver = KnapsackSolution (*)(const KnapsackProblem&);

SourcePlan solve_with(const SchedulingInstance& instance, double granularity,
                      SubproblemSolver solver) {
  instance.validate();
  if (!(granularity > 0.0)) throw Error("quantisation granularity must be positive");
  SourcePlan plan;
  double grid_kwh = 0.0;
  double battery_kwh = 0.0;
  for (const auto& sub : instance.infras) {
    std::vector<bool> chosen(sub.sites.size(), false);
    const std::int64_t capacity = to_units(sub.battery_budget, granularity, false);
    if (sub.soh_ok && capacity > 0 && !sub.sites.empty()) {
      KnapsackProblem kp;
      kp.capacity = capacity;
      for (const auto& sd : sub.sites) {
        const std::int64_t w = to_units(sd.predicted_kwh, granularity, true);
        kp.weights.push_back(w);
        // Grid cost avoided is price * demand with one price per window, so
        // the quantised demand itself ranks subsets whenever price > 0.
        kp.values.push_back(instance.price > 0.0 ? w : 0);
      }
      for (auto idx : solver(kp).chosen) chosen[idx] = true;
    }
    for (std::size_t k = 0; k < sub.sites.size(); ++k) {
      plan.decisions.push_back({sub.sites[k].site, sub.infra, static_cast<bool>(chosen[k])});
    }
  }
  std::sort(plan.decisions.begin(), plan.decisions.end(),
            [](const SiteDecision& a, const SiteDecision& b) { return a.site < b.site; });
  // Sum in site order so every solver reports bit-identical objectives.
  std::map<SiteId, double> demand;
  for (const auto& sub : instance.infras) {
    for (const auto& sd : sub.sites) demand[sd.site] = sd.predicted_kwh;
  }
  for (const auto& d : plan.decisions) {
    (d.battery ? battery_kwh : grid_kwh) += demand[d.site];
  }
  plan.grid_cost = instance.price * grid_kwh;
  plan.avoided_cost = instance.price * battery_kwh;
  return plan;
}

}  // namespace

void SchedulingInstance::validate() const {
  if (!std::isfinite(price) || price < 0.0) {
    throw Error(fmt::format("electricity price {} rejected: must be finite and >= 0", price));
  }
  std::set<SiteId> seen;
  for (std::size_t k = 0; k < infras.size(); ++k) {
    const auto& sub = infras[k];
    if (k > 0 && !(infras[k - 1].infra < sub.infra)) {
      throw Error("instance infrastructures must be strictly ascending");
    }
    if (!std::isfinite(sub.battery_budget) || sub.battery_budget < 0.0) {
      throw Error(fmt::format("infrastructure {}: invalid budget {}", raw(sub.infra),
                              sub.battery_budget));
    }
    for (std::size_t s = 0; s < sub.sites.size(); ++s) {
      const auto& sd = sub.sites[s];
      if (!std::isfinite(sd.predicted_kwh) || sd.predicted_kwh < 0.0) {
        throw Error(fmt::format("site {}: invalid demand {}", raw(sd.site), sd.predicted_kwh));
      }
      if (s > 0 && !(sub.sites[s - 1].site < sd.site)) {
        throw Error("instance sites must be strictly ascending per infrastructure");
      }
      if (!seen.insert(sd.site).second) {
        throw Error(fmt::format("site {} appears twice in instance", raw(sd.site)));
      }
    }
  }
}

bool SourcePlan::battery_selected(SiteId site) const { return decision(site).battery; }

const SiteDecision& SourcePlan::decision(SiteId site) const {
  auto it = std::lower_bound(decisions.begin(), decisions.end(), site,
                             [](const SiteDecision& d, SiteId id) { return d.site < id; });
  if (it == decisions.end() || it->site != site) {
    throw Error(fmt::format("plan has no decision for site {}", raw(site)));
  }
  return *it;
}

SchedulingInstance build_instance(const NetworkTopology& topology,
                                  const std::map<SiteId, double>& forecasts,
                                  const std::map<InfraId, BatteryState>& batteries,
                                  const std::map<InfraId, ChargeInput>& charges, double price,
                                  const SchedulingThresholds& thresholds) {
  if (!(thresholds.margin >= 0.0 && thresholds.margin < 1.0)) {
    throw Error("safety margin must lie in [0,1)");
  }
  SchedulingInstance inst;
  inst.price = price;
  for (const auto& inf : topology.infrastructures()) {
    InfraSubproblem sub;
    sub.infra = inf.id;
    auto bat = batteries.find(inf.id);
    if (bat != batteries.end()) {
      ChargeInput charge;
      if (auto c = charges.find(inf.id); c != charges.end()) charge = c->second;
      sub.battery_budget = (1.0 - thresholds.margin) *
                           available_discharge_budget(bat->second, charge, thresholds.soc_min,
                                                      thresholds.efficiency);
      // Worst case: a full swing this window must leave SoH at or above the floor.
      const double projected = bat->second.soh - bat->second.kappa * 1.0;
      sub.soh_ok = projected >= thresholds.soh_min;
    }
    for (SiteId site : sites_of_infrastructure(topology, inf.id)) {
      auto f = forecasts.find(site);
      if (f == forecasts.end()) throw Error(fmt::format("missing forecast for site {}", raw(site)));
      sub.sites.push_back({site, f->second});
    }
    inst.infras.push_back(std::move(sub));
  }
  inst.validate();
  return inst;
}

SourcePlan solve_knapsack_dp(const SchedulingInstance& instance, double granularity_kwh) {
  return solve_with(instance, granularity_kwh, &enshare::solve_knapsack_dp);
}

SourcePlan solve_bruteforce(const SchedulingInstance& instance, double granularity_kwh) {
  for (const auto& sub : instance.infras) {
    if (sub.sites.size() > kMaxBruteforceSitesPerInfra) {
      throw Error(fmt::format("infrastructure {} has {} sites; brute force allows {}",
                              raw(sub.infra), sub.sites.size(), kMaxBruteforceSitesPerInfra));
    }
  }
  return solve_with(instance, granularity_kwh, &enshare::solve_knapsack_bruteforce);
}

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw Error("percentile of an empty series");
  if (!(p >= 0.0 && p <= 100.0)) throw Error("percentile must lie in [0,100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::map<InfraId, ChargeInput> plan_charging(const std::map<InfraId, BatteryState>& batteries,
                                             const std::map<InfraId, double>& renewable_kwh,
                                             double price, std::span<const double> price_history,
                                             const ChargingPolicy& policy) {
  bool cheap = false;
  if (!price_history.empty()) {
    const double threshold = percentile(price_history, policy.grid_percentile);
    const double highest = *std::max_element(price_history.begin(), price_history.end());
    cheap = price <= threshold && price < highest;
  }
  std::map<InfraId, ChargeInput> out;
  for (const auto& [infra, state] : batteries) {
    // Energy drawn from a source that fills the remaining headroom.
    const double room = std::max(0.0, (1.0 - state.soc) * effective_capacity(state)) /
                        policy.efficiency;
    const double limit = std::min(room, policy.max_charge_kwh);
    double ren = 0.0;
    if (auto r = renewable_kwh.find(infra); r != renewable_kwh.end()) {
      if (r->second < 0.0) throw Error("renewable forecast must be nonnegative");
      ren = r->second;
    }
    ChargeInput in;
    in.ren_charge = std::min(ren, limit);
    if (policy.mixed_lambda) {
      in.grid_charge = cheap ? std::max(0.0, limit - in.ren_charge) : 0.0;
      const double total = in.grid_charge + in.ren_charge;
      in.mix = total > 0.0 ? in.grid_charge / total : 0.0;
    } else if (in.ren_charge > 0.0) {
      in.mix = 0.0;
    } else if (cheap && limit > 0.0) {
      in.grid_charge = limit;
      in.mix = 1.0;
    }
    out.emplace(infra, in);
  }
  return out;
}

void SwitchHistory::record(const SourcePlan& applied) {
  for (const auto& d : applied.decisions) {
    auto [it, inserted] = entries_.try_emplace(d.site, Entry{d.battery});
    if (inserted) continue;
    if (it->second.battery != d.battery) {
      it->second.battery = d.battery;
      it->second.steps_since_switch = 1;
    } else if (it->second.steps_since_switch < std::numeric_limits<std::int32_t>::max()) {
      ++it->second.steps_since_switch;
    }
  }
}

const SwitchHistory::Entry* SwitchHistory::find(SiteId site) const {
  auto it = entries_.find(site);
  return it == entries_.end() ? nullptr : &it->second;
}

SourcePlan apply_hysteresis(const SwitchHistory& history, const SourcePlan& plan,
                            const SchedulingInstance& instance, std::int64_t min_dwell) {
  if (min_dwell < 0) throw Error("min_dwell must be nonnegative");
  if (min_dwell == 0) return plan;
  SourcePlan out = plan;
  for (const auto& sub : instance.infras) {
    double used = 0.0;
    for (const auto& sd : sub.sites) {
      if (out.battery_selected(sd.site)) used += sd.predicted_kwh;
    }
    auto wants_retention = [&](const SiteDemand& sd, bool retain_battery) {
      const auto* e = history.find(sd.site);
      return e != nullptr && e->steps_since_switch < min_dwell && e->battery == retain_battery &&
             out.battery_selected(sd.site) != retain_battery;
    };
    auto set = [&](SiteId site, bool battery) {
      for (auto& d : out.decisions) {
        if (d.site == site) d.battery = battery;
      }
    };
    // Falling back to grid always frees budget, so those go first.
    for (const auto& sd : sub.sites) {
      if (wants_retention(sd, false)) {
        set(sd.site, false);
        used -= sd.predicted_kwh;
      }
    }
    for (const auto& sd : sub.sites) {
      if (wants_retention(sd, true) && sub.soh_ok &&
          used + sd.predicted_kwh <= sub.battery_budget) {
        set(sd.site, true);
        used += sd.predicted_kwh;
      }
    }
  }
  double grid_kwh = 0.0;
  double battery_kwh = 0.0;
  std::map<SiteId, double> demand;
  for (const auto& sub : instance.infras) {
    for (const auto& sd : sub.sites) demand[sd.site] = sd.predicted_kwh;
  }
  for (const auto& d : out.decisions) (d.battery ? battery_kwh : grid_kwh) += demand[d.site];
  out.grid_cost = instance.price * grid_kwh;
  out.avoided_cost = instance.price * battery_kwh;
  return out;
}

std::vector<std::string> plan_violations(const SchedulingInstance& instance,
                                         const SourcePlan& plan) {
  std::vector<std::string> out;
  for (const auto& sub : instance.infras) {
    double used = 0.0;
    for (const auto& sd : sub.sites) {
      const SiteDecision* d = nullptr;
      try {
        d = &plan.decision(sd.site);
      } catch (const Error& e) {
        out.emplace_back(e.what());
        continue;
      }
      if (!d->battery) continue;
      used += sd.predicted_kwh;
      if (!sub.soh_ok) {
        out.push_back(fmt::format("site {}: battery selected on SoH-locked infrastructure {}",
                                  raw(sd.site), raw(sub.infra)));
      }
    }
    if (used > sub.battery_budget + 1e-9) {
      out.push_back(fmt::format("infrastructure {}: battery load {} exceeds budget {}",
                                raw(sub.infra), used, sub.battery_budget));
    }
  }
  return out;
}

std::string instance_to_json(const SchedulingInstance& instance) {
  nlohmann::ordered_json j;
  j["price"] = instance.price;
  j["infras"] = nlohmann::ordered_json::array();
  for (const auto& sub : instance.infras) {
    nlohmann::ordered_json ji{{"infra", raw(sub.infra)},
                              {"battery_budget", sub.battery_budget},
                              {"soh_ok", sub.soh_ok},
                              {"sites", nlohmann::ordered_json::array()}};
    for (const auto& sd : sub.sites) {
      ji["sites"].push_back({{"site", raw(sd.site)}, {"predicted_kwh", sd.predicted_kwh}});
    }
    j["infras"].push_back(std::move(ji));
  }
  return j.dump(2) + "\n";
}

SchedulingInstance instance_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SchedulingInstance inst;
    inst.price = j.at("price").get<double>();
    for (const auto& ji : j.at("infras")) {
      InfraSubproblem sub;
      sub.infra = InfraId{ji.at("infra").get<std::int32_t>()};
      sub.battery_budget = ji.at("battery_budget").get<double>();
      sub.soh_ok = ji.at("soh_ok").get<bool>();
      for (const auto& js : ji.at("sites")) {
        sub.sites.push_back(
            {SiteId{js.at("site").get<std::int32_t>()}, js.at("predicted_kwh").get<double>()});
      }
      inst.infras.push_back(std::move(sub));
    }
    inst.validate();
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw Error(fmt::format("instance: {}", e.what()));
  }
}

std::string plan_to_json(const SourcePlan& plan) {
  nlohmann::ordered_json j;
  j["decisions"] = nlohmann::ordered_json::array();
  for (const auto& d : plan.decisions) {
    j["decisions"].push_back({{"site", raw(d.site)}, {"infra", raw(d.infra)}, {"d", d.battery ? 1 : 0}});
  }
  j["charge"] = nlohmann::ordered_json::array();
  for (const auto& [infra, c] : plan.charge) {
    j["charge"].push_back({{"infra", raw(infra)},
                           {"grid_charge", c.grid_charge},
                           {"ren_charge", c.ren_charge},
                           {"mix", c.mix}});
  }
  j["grid_cost"] = plan.grid_cost;
  j["avoided_cost"] = plan.avoided_cost;
  return j.dump(2) + "\n";
}

SourcePlan plan_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SourcePlan plan;
    for (const auto& jd : j.at("decisions")) {
      const int d = jd.at("d").get<int>();
      if (d != 0 && d != 1) throw Error("plan: decision must be 0 or 1");
      plan.decisions.push_back({SiteId{jd.at("site").get<std::int32_t>()},
                                InfraId{jd.at("infra").get<std::int32_t>()}, d == 1});
    }
    for (const auto& jc : j.at("charge")) {
      ChargeInput c{jc.at("grid_charge").get<double>(), jc.at("ren_charge").get<double>(),
                    jc.at("mix").get<double>()};
      c.validate();
      plan.charge.emplace(InfraId{jc.at("infra").get<std::int32_t>()}, c);
    }
    plan.grid_cost = j.at("grid_cost").get<double>();
    plan.avoided_cost = j.at("avoided_cost").get<double>();
    std::sort(plan.decisions.begin(), plan.decisions.end(),
              [](const SiteDecision& a, const SiteDecision& b) { return a.site < b.site; });
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw Error(fmt::format("plan: {}", e.what()));
  }
}

}  // namespace enshare
