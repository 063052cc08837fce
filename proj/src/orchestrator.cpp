#include "enshare/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "enshare/rng.hpp"
#include "json.hpp"

namespace enshare {

namespace {

constexpr std::uint64_t kScenarioStream = 0x5CE7;
constexpr double kMonitorTolerance = 1e-9;

}  // namespace

std::string to_string(Tech t) { return t == Tech::Battery ? "battery" : "grid"; }

Tech parse_tech(const std::string& text) {
  if (text == "battery") return Tech::Battery;
  if (text == "grid") return Tech::Grid;
  throw Error(fmt::format("unknown technology '{}', expected grid or battery", text));
}

std::string to_string(ScenarioSpec::Kind kind) {
  using K = ScenarioSpec::Kind;
  switch (kind) {
    case K::ExclusiveGrid:
      return "exclusive-grid";
    case K::ExclusiveBattery:
      return "exclusive-battery";
    case K::SharedGrid:
      return "shared-grid";
    case K::SharedBattery:
      return "shared-battery";
    case K::Mixed:
      return "mixed";
    case K::ExclusiveBenchmark:
      return "exclusive-benchmark";
  }
  return "unknown";
}

ScenarioSpec::Kind parse_scenario_kind(const std::string& text) {
  using K = ScenarioSpec::Kind;
  for (K k : {K::ExclusiveGrid, K::ExclusiveBattery, K::SharedGrid, K::SharedBattery, K::Mixed,
              K::ExclusiveBenchmark}) {
    if (to_string(k) == text) return k;
  }
  throw Error(fmt::format("unknown scenario kind '{}'", text));
}

void ScenarioSpec::validate() const {
  if (!(zeta >= 0.0 && zeta <= 1.0)) throw Error(fmt::format("zeta {} outside [0,1]", zeta));
  if (!(battery_capacity_kwh > 0.0)) throw Error("battery capacity must be positive");
}

std::string ScenarioSpec::name() const {
  if (kind == Kind::Mixed) {
    return fmt::format("S:{}|E:{}", to_string(shared_tech), to_string(exclusive_tech));
  }
  return to_string(kind);
}

NetworkTopology make_scenario_topology(const NetworkTopology& base, const ScenarioSpec& spec,
                                       std::uint64_t seed) {
  spec.validate();
  using K = ScenarioSpec::Kind;
  double zeta = spec.zeta;
  Tech shared = spec.shared_tech, exclusive = spec.exclusive_tech;
  switch (spec.kind) {
    case K::ExclusiveGrid:
      zeta = 0.0, exclusive = Tech::Grid;
      break;
    case K::ExclusiveBattery:
      zeta = 0.0, exclusive = Tech::Battery;
      break;
    case K::SharedGrid:
      zeta = 1.0, shared = Tech::Grid;
      break;
    case K::SharedBattery:
      zeta = 1.0, shared = Tech::Battery;
      break;
    case K::Mixed:
    case K::ExclusiveBenchmark:
      break;
  }

  std::map<std::int32_t, std::vector<SiteSpec>> clusters;
  for (const auto& s : base.sites()) clusters[s.location].push_back(s);
  const auto n_sites = static_cast<double>(base.site_count());
  const auto target = static_cast<std::size_t>(std::llround(zeta * n_sites));
  Rng rng(derive_seed(seed, 0, kScenarioStream));

  std::vector<SiteSpec> sites;
  std::vector<InfraSpec> infras;
  auto add_infra = [&](InfraId id, Tech tech) {
    InfraSpec inf;
    inf.id = id;
    inf.has_battery = tech == Tech::Battery;
    inf.has_renewable = inf.has_battery && spec.solar_with_battery;
    inf.battery_capacity_kwh = spec.battery_capacity_kwh;
    infras.push_back(inf);
  };

  if (spec.kind == K::ExclusiveBenchmark) {
    std::vector<SiteSpec> order(base.sites());
    rng.shuffle(order.begin(), order.end());
    for (std::size_t k = 0; k < order.size(); ++k) {
      SiteSpec s = order[k];
      s.infra = InfraId{raw(s.id)};
      s.share = 1.0;
      add_infra(s.infra, k < target ? Tech::Battery : Tech::Grid);
      sites.push_back(s);
    }
    return NetworkTopology(base.mnos(), std::move(sites), std::move(infras));
  }

  std::vector<std::int32_t> order;
  for (const auto& [loc, members] : clusters) order.push_back(loc);
  rng.shuffle(order.begin(), order.end());
  std::size_t shared_sites = 0;
  for (std::int32_t loc : order) {
    const auto& members = clusters[loc];
    if (shared_sites < target && members.size() > 1) {
      shared_sites += members.size();
      const InfraId id{raw(members.front().id)};
      add_infra(id, shared);
      for (SiteSpec s : members) {
        s.infra = id;
        s.share = 1.0 / static_cast<double>(members.size());
        sites.push_back(s);
      }
    } else {
      for (SiteSpec s : members) {
        s.infra = InfraId{raw(s.id)};
        s.share = 1.0;
        add_infra(s.infra, exclusive);
        sites.push_back(s);
      }
    }
  }
  return NetworkTopology(base.mnos(), std::move(sites), std::move(infras));
}

const LstmParams& DemandModel::params_for(MnoId mno) const {
  if (per_mno.empty()) return global;
  auto it = per_mno.find(mno);
  if (it == per_mno.end()) throw Error(fmt::format("no forecaster for MNO {}", raw(mno)));
  return it->second;
}

std::map<SiteId, SiteScaling> fit_site_scalings(const Corpus& corpus, std::size_t seq_len,
                                                double val_fraction) {
  const std::size_t span = training_span(corpus.grid.horizon_steps, seq_len, val_fraction);
  std::map<SiteId, SiteScaling> out;
  for (std::size_t k = 0; k < corpus.sites.size(); ++k) {
    out.emplace(corpus.sites[k], fit_scaling(corpus.kpi[k], 0, span));
  }
  return out;
}

double predict_z(const DemandModel& model, const Corpus& corpus, const SiteSpec& site, std::int64_t t) {
  auto sc = model.scaling.find(site.id);
  if (sc == model.scaling.end()) throw Error(fmt::format("no scaling for site {}", raw(site.id)));
  const auto window = build_feature_window(corpus.series(site.id), corpus.cm_of(site.id), sc->second,
                                           t - 1, model.seq_len);
  return lstm_forward(model.params_for(site.owner), window);
}

void ScenarioConfig::validate() const {
  const auto& th = thresholds;
  if (!(th.soc_min >= 0.0 && th.soc_min < 1.0) || !(th.soh_min >= 0.0 && th.soh_min < 1.0)) {
    throw Error("SoC and SoH thresholds must lie in [0,1)");
  }
  if (!(th.margin >= 0.0 && th.margin < 1.0)) throw Error("safety margin must lie in [0,1)");
  if (!(th.efficiency > 0.0 && th.efficiency <= 1.0)) throw Error("efficiency must lie in (0,1]");
  if (control_window_steps < 1) throw Error("control window must span at least one step");
  if (min_dwell < 0) throw Error("min_dwell must be nonnegative");
  if (geo_every_steps < 1) throw Error("geo snapshot interval must be at least one step");
  if (!(granularity_kwh > 0.0)) throw Error("granularity must be positive");
  battery_init.validate();
  cost.validate();
}

MonitorVerdict monitor_and_override(double realized_so_far_kwh, double substep_battery_kwh,
                                    double planned_budget_kwh) {
  MonitorVerdict v;
  v.realized_kwh = realized_so_far_kwh + substep_battery_kwh;
  v.override = v.realized_kwh > planned_budget_kwh + kMonitorTolerance;
  return v;
}

EnergyFlows switch_source(const NetworkTopology& topology, const std::vector<bool>& battery_active,
                          const std::vector<double>& realized_kwh,
                          const std::map<InfraId, ChargeInput>& charge) {
  if (battery_active.size() != topology.site_count() || realized_kwh.size() != topology.site_count()) {
    throw Error("switch_source: one decision and one demand per site required");
  }
  auto f = EnergyFlows::zeros(topology);
  for (std::size_t k = 0; k < topology.site_count(); ++k) {
    if (battery_active[k]) {
      f.battery_to_load[k] = realized_kwh[k];
    } else {
      f.grid_to_load[k] = realized_kwh[k];
    }
  }
  for (const auto& [infra, in] : charge) {
    const auto i = topology.infra_index(infra);
    f.grid_to_battery[i] = in.mix * in.grid_charge;
    f.ren_to_battery[i] = (1.0 - in.mix) * in.ren_charge;
  }
  return f;
}

RunResult run_scenario(const Corpus& corpus, const NetworkTopology& topology,
                       const ScenarioConfig& config, const DemandModel* model) {
  config.validate();
  if (const auto report = validate_topology(topology); !report.ok()) {
    throw Error(fmt::format("invalid scenario topology: {}", report.violations.front()));
  }
  if (corpus.price.size() != static_cast<std::size_t>(corpus.grid.horizon_steps)) {
    throw Error("corpus price series does not cover the horizon");
  }

  RunResult res;
  res.topology = topology;
  res.grid = corpus.grid;
  res.threshold_soc = config.thresholds.soc_min;
  res.oracle = model == nullptr;

  const auto& sites = topology.sites();
  const std::size_t U = sites.size();
  const std::int64_t T = corpus.grid.horizon_steps;
  const std::int64_t W = config.control_window_steps;

  std::vector<const SiteSeries*> series(U);
  std::vector<std::size_t> site_infra(U);
  for (std::size_t k = 0; k < U; ++k) {
    series[k] = &corpus.series(sites[k].id);
    site_infra[k] = topology.infra_index(sites[k].infra);
  }
  // Location of each infrastructure: that of its lowest-id site.
  std::map<InfraId, const SiteSpec*> infra_site;
  for (const auto& s : sites) infra_site.emplace(s.infra, &s);

  std::map<InfraId, BatteryState> batteries;
  for (const auto& inf : topology.infrastructures()) {
    if (!inf.has_battery) continue;
    BatteryState b = config.battery_init;
    b.omega_init = inf.battery_capacity_kwh;
    batteries.emplace(inf.id, b);
  }

  std::vector<double> capex(U);
  std::vector<SiteId> ids(U);
  for (std::size_t k = 0; k < U; ++k) {
    const auto& inf = topology.infra(sites[k].infra);
    ids[k] = sites[k].id;
    capex[k] = capex_of_site(config.cost, sites[k].share, {inf.has_battery, inf.has_renewable});
  }
  res.ledger = CostLedger(ids, capex, corpus.grid.step_minutes);

  SwitchHistory history;
  std::map<InfraId, double> previous_stored;
  for (const auto& [id, b] : batteries) previous_stored[id] = b.soc * effective_capacity(b);

  for (std::int64_t w0 = 0; w0 < T; w0 += W) {
    const std::int64_t wl = std::min(W, T - w0);
    const bool cold = model != nullptr && w0 < static_cast<std::int64_t>(model->seq_len);

    // Collect and predict.
    std::map<SiteId, double> forecasts;
    for (std::size_t k = 0; k < U; ++k) {
      double actual = 0.0;
      for (std::int64_t s = 0; s < wl; ++s) actual += series[k]->energy_kwh[static_cast<std::size_t>(w0 + s)];
      if (model == nullptr) {
        forecasts[ids[k]] = actual;
        if (config.record_traces) {
          res.predictions.push_back({w0, ids[k], actual, actual, std::nullopt, std::nullopt});
        }
      } else if (cold) {
        forecasts[ids[k]] = 0.0;
      } else {
        const auto& sc = model->scaling.at(ids[k]);
        const double z = predict_z(*model, corpus, sites[k], w0);
        const double per_step = sc.to_kwh(z);
        forecasts[ids[k]] = per_step * static_cast<double>(wl);
        const double d0 = series[k]->energy_kwh[static_cast<std::size_t>(w0)];
        if (config.record_traces) {
          res.predictions.push_back({w0, ids[k], forecasts[ids[k]], actual, z, sc.to_z(d0)});
        }
      }
    }

    // Decide: charging plan, then source selection.
    std::map<InfraId, double> renewable;
    for (const auto& [id, b] : batteries) {
      if (!topology.infra(id).has_renewable) continue;
      const auto& weather = corpus.weather_at(infra_site.at(id)->location);
      double h = 0.0;
      for (std::int64_t s = 0; s < wl; ++s) h += weather.harvest_kwh[static_cast<std::size_t>(w0 + s)];
      renewable[id] = h;
    }
    const double price = corpus.price[static_cast<std::size_t>(w0)];
    const auto hist_from = static_cast<std::size_t>(
        std::max<std::int64_t>(0, w0 - static_cast<std::int64_t>(config.price_history_steps)));
    const std::span<const double> price_history(corpus.price.data() + hist_from,
                                                static_cast<std::size_t>(w0) - hist_from);
    const auto charges = plan_charging(batteries, renewable, price, price_history, config.charging);
    const auto instance = build_instance(topology, forecasts, batteries, charges, price, config.thresholds);
    SourcePlan plan = solve_knapsack_dp(instance, config.granularity_kwh);
    if (cold) {
      for (auto& d : plan.decisions) d.battery = false;
    } else {
      plan = apply_hysteresis(history, plan, instance, config.min_dwell);
    }

    std::vector<bool> active(U);
    for (std::size_t k = 0; k < U; ++k) active[k] = plan.decisions[k].battery;

    // Predicted SoC per site, as if it ran on battery next to the sites chosen.
    std::map<InfraId, double> chosen_kwh;
    for (std::size_t k = 0; k < U; ++k) {
      if (active[k]) chosen_kwh[sites[k].infra] += forecasts[ids[k]];
    }
    const std::size_t trace_begin = res.trace.size();
    for (std::size_t k = 0; k < U && config.record_traces; ++k) {
      auto b = batteries.find(sites[k].infra);
      if (b == batteries.end()) continue;
      const double others = chosen_kwh[sites[k].infra] - (active[k] ? forecasts[ids[k]] : 0.0);
      const double gain = config.thresholds.efficiency * mixed_charge(charges.at(b->first));
      const double predicted =
          b->second.soc + (gain - others - forecasts[ids[k]]) / effective_capacity(b->second);
      res.trace.push_back({w0, ids[k], sites[k].infra, predicted, 0.0, active[k]});
    }

    // Switch and monitor each sub-step.
    std::map<InfraId, double> budget, routed;
    for (const auto& sub : instance.infras) budget[sub.infra] = sub.battery_budget;
    std::map<InfraId, ChargeInput> step_charge;
    for (const auto& [id, c] : charges) {
      ChargeInput part = c;
      part.grid_charge /= static_cast<double>(wl);
      part.ren_charge /= static_cast<double>(wl);
      step_charge[id] = part;
    }
    std::vector<bool> overridden(U, false);
    for (std::int64_t s = 0; s < wl; ++s) {
      const std::int64_t step = w0 + s;
      const auto ti = static_cast<std::size_t>(step);
      std::vector<double> demand(U);
      std::map<InfraId, double> battery_kwh;
      for (std::size_t k = 0; k < U; ++k) {
        demand[k] = series[k]->energy_kwh[ti];
        if (active[k]) battery_kwh[sites[k].infra] += demand[k];
      }
      for (const auto& [id, kwh] : battery_kwh) {
        const auto verdict = monitor_and_override(routed[id], kwh, budget[id]);
        if (!verdict.override) {
          routed[id] = verdict.realized_kwh;
          continue;
        }
        std::size_t n = 0;
        double predicted = 0.0;
        for (std::size_t k = 0; k < U; ++k) {
          if (sites[k].infra == id && active[k]) {
            active[k] = false;
            overridden[k] = true;
            predicted += forecasts[ids[k]];
            ++n;
          }
        }
        res.overrides.push_back({step, w0, id, n, predicted, verdict.realized_kwh, budget[id]});
      }

      const auto flows = switch_source(topology, active, demand, step_charge);
      for (auto& [id, state] : batteries) {
        const auto i = topology.infra_index(id);
        double discharge = 0.0;
        for (std::size_t k = 0; k < U; ++k) {
          if (site_infra[k] == i) discharge += flows.battery_to_load[k];
        }
        state = step_battery(state, step_charge.at(id), discharge, config.thresholds.efficiency);
        if (config.record_traces) res.soc.push_back({step, id, state.soc, state.soh, effective_capacity(state)});
      }

      const double p = corpus.price[ti];
      std::vector<double> opex(U);
      for (std::size_t k = 0; k < U; ++k) {
        SiteGridDraw draw{flows.grid_to_load[k], flows.grid_to_battery[site_infra[k]]};
        opex[k] = opex_step(config.cost, draw, sites[k].share, p, corpus.grid.step_minutes);
        if (config.record_traces) res.decisions.push_back({step, ids[k], sites[k].infra, active[k], overridden[k]});
      }
      res.ledger.append_step(std::move(opex));

      if (config.record_traces && step % config.geo_every_steps == 0) {
        for (const auto& inf : topology.infrastructures()) {
          double stored = 0.0;
          if (auto b = batteries.find(inf.id); b != batteries.end()) {
            stored = b->second.soc * effective_capacity(b->second);
          }
          double required = 0.0;
          for (std::size_t k = 0; k < U; ++k) {
            if (sites[k].infra == inf.id) required += forecasts[ids[k]] / static_cast<double>(wl);
          }
          const auto* s0 = infra_site.at(inf.id);
          res.geo.push_back({step, inf.id, s0->geo.value_or(GeoPoint{}), stored, required,
                             previous_stored[inf.id]});
          previous_stored[inf.id] = stored;
        }
      }
    }

    SourcePlan applied = plan;
    for (std::size_t k = 0; k < U; ++k) applied.decisions[k].battery = active[k];
    history.record(applied);
    for (std::size_t r = trace_begin; r < res.trace.size(); ++r) {
      auto& row = res.trace[r];
      row.actual_soc = batteries.at(row.infra).soc;
      row.battery = applied.decision(row.site).battery;
    }
  }
  return res;
}

void write_run_artifacts(const RunResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw Error(fmt::format("cannot write '{}'", (dir / name).string()));
    return out;
  };
  {
    auto out = open("decisions.csv");
    fmt::print(out, "step,site,d,source,overridden\n");
    for (const auto& d : r.decisions) {
      fmt::print(out, "{},{},{},{},{}\n", d.step, raw(d.site), d.battery ? 1 : 0,
                 to_string(d.battery ? Source::Battery : Source::Grid), d.overridden ? 1 : 0);
    }
  }
  {
    auto out = open("soc.csv");
    fmt::print(out, "step,infra,soc,soh,capacity_kwh\n");
    for (const auto& s : r.soc) {
      fmt::print(out, "{},{},{},{},{}\n", s.step, raw(s.infra), s.soc, s.soh, s.capacity_kwh);
    }
  }
  {
    auto out = open("ledger.csv");
    write_ledger_csv(out, r.ledger);
  }
  {
    auto out = open("overrides.csv");
    fmt::print(out, "step,window_start,infra,sites,predicted_kwh,realized_kwh,budget_kwh\n");
    for (const auto& o : r.overrides) {
      fmt::print(out, "{},{},{},{},{},{},{}\n", o.step, o.window_start, raw(o.infra), o.sites,
                 o.predicted_kwh, o.realized_kwh, o.budget_kwh);
    }
  }
  {
    auto out = open("predictions.csv");
    fmt::print(out, "step,site,predicted_kwh,actual_kwh,predicted_z,actual_z\n");
    for (const auto& p : r.predictions) {
      fmt::print(out, "{},{},{},{},{},{}\n", p.step, raw(p.site), p.predicted_kwh, p.actual_kwh,
                 p.predicted_z ? fmt::format("{}", *p.predicted_z) : std::string(),
                 p.actual_z ? fmt::format("{}", *p.actual_z) : std::string());
    }
  }
  {
    auto out = open("soc_trace.csv");
    fmt::print(out, "step,site,infra,predicted_soc,predicted_soc_raw,actual_soc,threshold,d\n");
    for (const auto& t : r.trace) {
      fmt::print(out, "{},{},{},{},{},{},{},{}\n", t.step, raw(t.site), raw(t.infra),
                 std::clamp(t.predicted_soc_raw, 0.0, 1.0), t.predicted_soc_raw, t.actual_soc,
                 r.threshold_soc, t.battery ? 1 : 0);
    }
  }
  {
    nlohmann::ordered_json fc;
    fc["type"] = "FeatureCollection";
    fc["features"] = nlohmann::ordered_json::array();
    for (const auto& g : r.geo) {
      nlohmann::ordered_json f;
      f["type"] = "Feature";
      f["geometry"] = {{"type", "Point"}, {"coordinates", {g.where.lon, g.where.lat}}};
      f["properties"] = {{"step", g.step},
                         {"timestamp", format_iso8601(r.grid.time_of(g.step))},
                         {"infra", raw(g.infra)},
                         {"stored_kwh", g.stored_kwh},
                         {"required_kwh", g.required_kwh},
                         {"previous_kwh", g.previous_kwh}};
      fc["features"].push_back(std::move(f));
    }
    auto out = open("geo_snapshot.geojson");
    out << fc.dump(1) << "\n";
  }
  if (!r.oracle) {
    std::map<SiteId, std::pair<std::vector<double>, std::vector<double>>> per_site;
    for (const auto& p : r.predictions) {
      if (!p.predicted_z) continue;
      per_site[p.site].first.push_back(*p.predicted_z);
      per_site[p.site].second.push_back(*p.actual_z);
    }
    auto out = open("forecast_metrics.csv");
    fmt::print(out, "site,mse,mae,samples\n");
    for (const auto& [site, v] : per_site) {
      const auto m = eval_metrics(v.first, v.second);
      fmt::print(out, "{},{},{},{}\n", raw(site), m.mse, m.mae, v.first.size());
    }
  }
  {
    const auto totals = total_cost(r.ledger, r.ledger.steps());
    const double capex = std::accumulate(r.ledger.capex().begin(), r.ledger.capex().end(), 0.0);
    std::size_t battery_steps = 0;
    for (const auto& d : r.decisions) battery_steps += d.battery ? 1 : 0;
    nlohmann::ordered_json j;
    j["scenario"] = r.scenario;
    j["forecaster"] = r.oracle ? "oracle" : "lstm";
    j["start"] = format_iso8601(r.grid.start);
    j["steps"] = r.grid.horizon_steps;
    j["step_minutes"] = r.grid.step_minutes;
    j["sites"] = r.topology.site_count();
    j["infrastructures"] = r.topology.infra_count();
    j["sharing_ratio"] = sharing_ratio(r.topology);
    j["capex_eur"] = capex;
    j["opex_eur"] = totals.network - capex;
    j["total_eur"] = totals.network;
    j["battery_site_steps"] = battery_steps;
    j["overrides"] = r.overrides.size();
    auto out = open("summary.json");
    out << j.dump(2) << "\n";
  }
}

}  // namespace enshare
