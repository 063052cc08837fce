#include "enshare/app.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "enshare/csv.hpp"
#include "json.hpp"

namespace enshare {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string price_mode_name(PriceMode m) { return m == PriceMode::Flat ? "flat" : "two-band"; }

PriceMode parse_price_mode(const std::string& s) {
  if (s == "flat") return PriceMode::Flat;
  if (s == "two-band") return PriceMode::TwoBand;
  throw Error(fmt::format("unknown price mode '{}', expected flat or two-band", s));
}

json to_json(const AppConfig& c) {
  const auto& g = c.generator;
  const auto& r = c.run;
  const auto& f = c.federated;
  json j;
  j["seed"] = c.seed;
  j["topology"] = {{"sites", c.sites}, {"mnos", c.mnos}, {"file", c.topology_file}};
  j["horizon_days"] = c.horizon_days;
  j["step_minutes"] = c.step_minutes;
  j["start"] = c.start;
  j["generator"] = {{"base_kwh_per_cell", g.base_kwh_per_cell},
                    {"static_fraction", g.static_fraction},
                    {"demand_noise", g.demand_noise},
                    {"traffic_ar", g.traffic_ar},
                    {"traffic_noise", g.traffic_noise},
                    {"weekend_factor", g.weekend_factor},
                    {"throughput_per_cell_mbps", g.throughput_per_cell_mbps},
                    {"solar_peak_kw", g.solar_peak_kw}};
  j["price"] = {{"mode", price_mode_name(g.price_mode)}, {"flat", g.flat_price},
                {"day", g.day_price},                    {"night", g.night_price},
                {"day_start_hour", g.day_start_hour},    {"day_end_hour", g.day_end_hour},
                {"source", c.price_source}};
  j["scenario"] = {{"kind", to_string(c.scenario.kind)},
                   {"zeta", c.scenario.zeta},
                   {"shared_tech", to_string(c.scenario.shared_tech)},
                   {"exclusive_tech", to_string(c.scenario.exclusive_tech)},
                   {"solar_with_battery", c.scenario.solar_with_battery},
                   {"forecaster", c.forecaster},
                   {"control_window_steps", r.control_window_steps},
                   {"min_dwell", r.min_dwell},
                   {"price_history_steps", r.price_history_steps},
                   {"geo_every_steps", r.geo_every_steps}};
  j["battery"] = {{"capacity_kwh", c.scenario.battery_capacity_kwh},
                  {"initial_soc", r.battery_init.soc},
                  {"initial_soh", r.battery_init.soh},
                  {"kappa", r.battery_init.kappa},
                  {"soc_min", r.thresholds.soc_min},
                  {"soh_min", r.thresholds.soh_min},
                  {"margin", r.thresholds.margin},
                  {"efficiency", r.thresholds.efficiency}};
  j["charging"] = {{"grid_percentile", r.charging.grid_percentile},
                   {"mixed_lambda", r.charging.mixed_lambda},
                   {"max_charge_kwh", std::isfinite(r.charging.max_charge_kwh)
                                          ? json(r.charging.max_charge_kwh)
                                          : json(nullptr)}};
  j["cost"] = {{"infra_capex", r.cost.infra_capex},
               {"battery_capex", r.cost.battery_capex},
               {"renew_capex", r.cost.renew_capex},
               {"rent_per_year", r.cost.rent_per_year}};
  j["federated"] = {{"rounds", f.rounds},
                    {"local_epochs", f.local_epochs},
                    {"sequence_length", f.sequence_length},
                    {"clients_per_round", f.clients_per_round},
                    {"client_fraction", f.client_fraction},
                    {"availability", f.availability},
                    {"early_stop_patience", f.early_stop_patience},
                    {"batch_size", f.train.batch_size},
                    {"learning_rate", f.train.learning_rate},
                    {"clip_norm", f.train.clip_norm},
                    {"val_fraction", c.val_fraction},
                    {"per_mno", c.per_mno},
                    {"hidden", c.shape.hidden},
                    {"head", c.shape.head}};
  j["sweep"] = {{"zeta", c.sweep_zeta}, {"years", c.sweep_years}, {"amortization_years", c.amortization_years}};
  j["solver"] = {{"granularity_kwh", r.granularity_kwh}};
  return j;
}

AppConfig from_json(const json& j) {
  AppConfig c;
  auto& g = c.generator;
  auto& r = c.run;
  auto& f = c.federated;
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto& t = j.at("topology");
  c.sites = t.at("sites").get<int>();
  c.mnos = t.at("mnos").get<int>();
  c.topology_file = t.at("file").get<std::string>();
  c.horizon_days = j.at("horizon_days").get<int>();
  c.step_minutes = j.at("step_minutes").get<double>();
  c.start = j.at("start").get<std::string>();
  const auto& gj = j.at("generator");
  g.base_kwh_per_cell = gj.at("base_kwh_per_cell").get<double>();
  g.static_fraction = gj.at("static_fraction").get<double>();
  g.demand_noise = gj.at("demand_noise").get<double>();
  g.traffic_ar = gj.at("traffic_ar").get<double>();
  g.traffic_noise = gj.at("traffic_noise").get<double>();
  g.weekend_factor = gj.at("weekend_factor").get<double>();
  g.throughput_per_cell_mbps = gj.at("throughput_per_cell_mbps").get<double>();
  g.solar_peak_kw = gj.at("solar_peak_kw").get<double>();
  const auto& pj = j.at("price");
  g.price_mode = parse_price_mode(pj.at("mode").get<std::string>());
  g.flat_price = pj.at("flat").get<double>();
  g.day_price = pj.at("day").get<double>();
  g.night_price = pj.at("night").get<double>();
  g.day_start_hour = pj.at("day_start_hour").get<double>();
  g.day_end_hour = pj.at("day_end_hour").get<double>();
  c.price_source = pj.at("source").get<std::string>();
  const auto& sj = j.at("scenario");
  c.scenario.kind = parse_scenario_kind(sj.at("kind").get<std::string>());
  c.scenario.zeta = sj.at("zeta").get<double>();
  c.scenario.shared_tech = parse_tech(sj.at("shared_tech").get<std::string>());
  c.scenario.exclusive_tech = parse_tech(sj.at("exclusive_tech").get<std::string>());
  c.scenario.solar_with_battery = sj.at("solar_with_battery").get<bool>();
  c.forecaster = sj.at("forecaster").get<std::string>();
  r.control_window_steps = sj.at("control_window_steps").get<std::int64_t>();
  r.min_dwell = sj.at("min_dwell").get<std::int64_t>();
  r.price_history_steps = sj.at("price_history_steps").get<std::size_t>();
  r.geo_every_steps = sj.at("geo_every_steps").get<std::int64_t>();
  const auto& bj = j.at("battery");
  c.scenario.battery_capacity_kwh = bj.at("capacity_kwh").get<double>();
  r.battery_init.omega_init = c.scenario.battery_capacity_kwh;
  r.battery_init.soc = bj.at("initial_soc").get<double>();
  r.battery_init.soh = bj.at("initial_soh").get<double>();
  r.battery_init.kappa = bj.at("kappa").get<double>();
  r.thresholds.soc_min = bj.at("soc_min").get<double>();
  r.thresholds.soh_min = bj.at("soh_min").get<double>();
  r.thresholds.margin = bj.at("margin").get<double>();
  r.thresholds.efficiency = bj.at("efficiency").get<double>();
  const auto& cj = j.at("charging");
  r.charging.grid_percentile = cj.at("grid_percentile").get<double>();
  r.charging.mixed_lambda = cj.at("mixed_lambda").get<bool>();
  r.charging.max_charge_kwh = cj.at("max_charge_kwh").is_null()
                                  ? std::numeric_limits<double>::infinity()
                                  : cj.at("max_charge_kwh").get<double>();
  r.charging.efficiency = r.thresholds.efficiency;
  const auto& kj = j.at("cost");
  r.cost.infra_capex = kj.at("infra_capex").get<double>();
  r.cost.battery_capex = kj.at("battery_capex").get<double>();
  r.cost.renew_capex = kj.at("renew_capex").get<double>();
  r.cost.rent_per_year = kj.at("rent_per_year").get<double>();
  r.cost.default_price = g.flat_price;
  const auto& fj = j.at("federated");
  f.rounds = fj.at("rounds").get<int>();
  f.local_epochs = fj.at("local_epochs").get<int>();
  f.sequence_length = fj.at("sequence_length").get<std::size_t>();
  f.clients_per_round = fj.at("clients_per_round").get<int>();
  f.client_fraction = fj.at("client_fraction").get<double>();
  f.availability = fj.at("availability").get<double>();
  f.early_stop_patience = fj.at("early_stop_patience").get<int>();
  f.train.batch_size = fj.at("batch_size").get<std::size_t>();
  f.train.learning_rate = fj.at("learning_rate").get<double>();
  f.train.clip_norm = fj.at("clip_norm").get<double>();
  f.seed = c.seed;
  c.val_fraction = fj.at("val_fraction").get<double>();
  c.per_mno = fj.at("per_mno").get<bool>();
  c.shape.hidden = fj.at("hidden").get<std::size_t>();
  c.shape.head = fj.at("head").get<std::size_t>();
  const auto& wj = j.at("sweep");
  c.sweep_zeta = wj.at("zeta").get<std::vector<double>>();
  c.sweep_years = wj.at("years").get<int>();
  c.amortization_years = wj.at("amortization_years").get<double>();
  r.granularity_kwh = j.at("solver").at("granularity_kwh").get<double>();

  if (c.sites < 1 || c.mnos < 1 || c.horizon_days < 1) {
    throw Error("config: sites, mnos and horizon_days must be positive");
  }
  if (c.forecaster != "oracle" && c.forecaster != "lstm") {
    throw Error(fmt::format("config: scenario.forecaster '{}' must be oracle or lstm", c.forecaster));
  }
  if (c.sweep_years < 1 || !(c.amortization_years > 0.0)) {
    throw Error("config: sweep.years and sweep.amortization_years must be positive");
  }
  for (double z : c.sweep_zeta) {
    if (!(z >= 0.0 && z <= 1.0)) throw Error(fmt::format("config: sweep zeta {} outside [0,1]", z));
  }
  c.grid().validate();
  parse_iso8601(c.start);
  c.scenario.validate();
  r.validate();
  f.validate();
  return c;
}

// Copies `src` onto `dst`, refusing keys that the defaults do not declare.
void merge_known(json& dst, const json& src, const std::string& path) {
  if (!src.is_object()) throw Error(fmt::format("config: '{}' must be an object", path.empty() ? "root" : path));
  for (const auto& [key, value] : src.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!dst.contains(key)) throw Error(fmt::format("config: unknown key '{}'", here));
    if (dst[key].is_object()) {
      merge_known(dst[key], value, here);
    } else {
      dst[key] = value;
    }
  }
}

void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(fmt::format("override '{}' is not of the form key=value", assignment));
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;  // bare strings need no quotes
  json* node = &cfg;
  std::string path;
  for (const auto& part : csv::split(key, '.')) {
    path = path.empty() ? part : path + "." + part;
    if (!node->is_object() || !node->contains(part)) {
      throw Error(fmt::format("config: unknown key '{}'", path));
    }
    node = &(*node)[part];
  }
  if (node->is_object()) throw Error(fmt::format("config: '{}' is a section, not a value", key));
  *node = value;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(fmt::format("cannot open '{}'", p.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Error(fmt::format("cannot write '{}'", p.string()));
  return out;
}

std::string params_label(const AppConfig& c) {
  return fmt::format("[{}, {}, {}]", c.federated.sequence_length, c.federated.rounds, c.federated.local_epochs);
}

}  // namespace

TimeGrid AppConfig::grid() const {
  TimeGrid g;
  g.step_minutes = step_minutes;
  g.horizon_steps = static_cast<std::int64_t>(std::llround(horizon_days * 24.0 * 60.0 / step_minutes));
  g.start = parse_iso8601(start);
  return g;
}

std::string config_to_json(const AppConfig& config) { return to_json(config).dump(2) + "\n"; }

AppConfig config_from_json(const std::string& text, const std::vector<std::string>& overrides) {
  json cfg = to_json(AppConfig{});
  if (!text.empty()) {
    json user = json::parse(text, nullptr, false);
    if (user.is_discarded()) throw Error("config: invalid JSON");
    merge_known(cfg, user, "");
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  try {
    return from_json(cfg);
  } catch (const nlohmann::json::exception& e) {
    throw Error(fmt::format("config: {}", e.what()));
  }
}

AppConfig load_config(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
  return config_from_json(file ? read_text(*file) : std::string(), overrides);
}

Dataset make_dataset(const AppConfig& config) {
  Dataset d;
  d.base = config.topology_file.empty() ? generate_layout(config.sites, config.mnos, config.seed)
                                        : load_topology(config.topology_file);
  const auto grid = config.grid();
  d.corpus = generate_synthetic_dataset(d.base, grid, config.seed, config.generator);
  if (!config.price_source.empty()) d.corpus.price = price_feed(config.price_source, grid, config.generator);
  return d;
}

Dataset load_dataset(const fs::path& dir) {
  Dataset d;
  d.base = load_topology((dir / "topology.json").string());
  d.corpus = load_corpus(dir);
  for (const auto& s : d.base.sites()) d.corpus.site_index(s.id);
  return d;
}

Dataset dataset_for(const AppConfig& config, const std::optional<fs::path>& dir) {
  return dir ? load_dataset(*dir) : make_dataset(config);
}

void cmd_generate(const AppConfig& config, const fs::path& out) {
  const auto d = make_dataset(config);
  write_corpus(d.corpus, out);
  save_topology(d.base, (out / "topology.json").string());
  open_out(out / "config.json") << config_to_json(config);
}

TrainSummary train_model(const AppConfig& config, const Dataset& data) {
  const auto datasets = build_site_datasets(data.corpus, data.base, config.federated.sequence_length,
                                            config.val_fraction);
  TrainSummary s;
  std::vector<std::pair<MnoId, std::vector<SiteDataset>>> groups;
  if (config.per_mno) {
    for (MnoId m : data.base.mnos()) {
      std::vector<SiteDataset> part;
      for (const auto& d : datasets) {
        if (d.owner == m) part.push_back(d);
      }
      if (!part.empty()) groups.emplace_back(m, std::move(part));
    }
  } else {
    groups.emplace_back(MnoId{0}, datasets);
  }

  std::vector<double> pred, actual;
  double r0_mse = 0.0, r0_mae = 0.0;
  std::size_t n_val = 0;
  for (auto& [mno, part] : groups) {
    auto res = run_federated_training(part, config.federated, config.shape);
    std::size_t n = 0;
    for (const auto& d : part) {
      n += d.val.size();
      for (const auto& smp : d.val) {
        pred.push_back(lstm_forward(res.params, smp.window));
        actual.push_back(smp.target);
      }
    }
    r0_mse += res.rounds.front().val_mse * static_cast<double>(n);
    r0_mae += res.rounds.front().val_mae * static_cast<double>(n);
    n_val += n;
    auto sites = per_site_metrics(res.params, part);
    s.sites.insert(s.sites.end(), sites.begin(), sites.end());
    if (config.per_mno) s.per_mno.emplace(mno, res.params);
    if (s.result.rounds.empty()) s.result = std::move(res);
  }
  std::sort(s.sites.begin(), s.sites.end(), [](const SiteMetrics& a, const SiteMetrics& b) { return a.site < b.site; });
  if (n_val > 0) {
    s.round0 = {r0_mse / static_cast<double>(n_val), r0_mae / static_cast<double>(n_val)};
    s.final_val = eval_metrics(pred, actual);
  }
  s.persistence = evaluate_persistence(datasets, true);
  return s;
}

TrainSummary cmd_train(const AppConfig& config, const std::optional<fs::path>& data, const fs::path& out) {
  const auto d = dataset_for(config, data);
  auto s = train_model(config, d);
  fs::create_directories(out);
  if (config.per_mno) {
    for (const auto& [mno, p] : s.per_mno) save_checkpoint(p, out / fmt::format("model_mno{}.txt", raw(mno)));
  } else {
    save_checkpoint(s.result.params, out / "model.txt");
    auto rounds = open_out(out / "rounds.csv");
    write_round_metrics_csv(rounds, s.result.rounds);
  }
  {
    auto sites = open_out(out / "site_metrics.csv");
    write_site_metrics_csv(sites, s.sites);
  }
  json j;
  j["params"] = params_label(config);
  j["per_mno"] = config.per_mno;
  j["round0_val_mse"] = s.round0.mse;
  j["round0_val_mae"] = s.round0.mae;
  j["final_val_mse"] = s.final_val.mse;
  j["final_val_mae"] = s.final_val.mae;
  j["persistence_val_mse"] = s.persistence.mse;
  j["persistence_val_mae"] = s.persistence.mae;
  j["warnings"] = s.result.warnings;
  open_out(out / "train_summary.json") << j.dump(2) << "\n";
  open_out(out / "config.json") << config_to_json(config);
  return s;
}

DemandModel load_demand_model(const AppConfig& config, const Corpus& corpus, const fs::path& model_dir) {
  DemandModel m;
  m.seq_len = config.federated.sequence_length;
  m.scaling = fit_site_scalings(corpus, m.seq_len, config.val_fraction);
  if (fs::exists(model_dir / "model.txt")) {
    m.global = load_checkpoint(model_dir / "model.txt");
    return m;
  }
  std::vector<fs::path> files;
  if (fs::is_directory(model_dir)) {
    for (const auto& e : fs::directory_iterator(model_dir)) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    int mno = 0;
    if (std::sscanf(p.filename().string().c_str(), "model_mno%d.txt", &mno) == 1) {
      m.per_mno.emplace(MnoId{mno}, load_checkpoint(p));
    }
  }
  if (m.per_mno.empty()) throw Error(fmt::format("no model checkpoint in '{}'", model_dir.string()));
  return m;
}

RunResult run_configured(const AppConfig& config, const Dataset& data, const DemandModel* model) {
  const auto topo = make_scenario_topology(data.base, config.scenario, config.seed);
  auto r = run_scenario(data.corpus, topo, config.run, model);
  r.scenario = config.scenario.name();
  return r;
}

namespace {

std::optional<DemandModel> model_for(const AppConfig& config, const Corpus& corpus,
                                     const std::optional<fs::path>& model_dir) {
  if (config.forecaster == "oracle") return std::nullopt;
  if (!model_dir) throw Error("scenario.forecaster is lstm but no model directory was given");
  return load_demand_model(config, corpus, *model_dir);
}

}  // namespace

RunResult cmd_run(const AppConfig& config, const std::optional<fs::path>& data,
                  const std::optional<fs::path>& model_dir, const fs::path& out) {
  const auto d = dataset_for(config, data);
  const auto model = model_for(config, d.corpus, model_dir);
  auto r = run_configured(config, d, model ? &*model : nullptr);
  write_run_artifacts(r, out);
  save_topology(r.topology, (out / "topology.json").string());
  open_out(out / "config.json") << config_to_json(config);
  return r;
}

ScenarioEconomics economics_of(const RunResult& run, double zeta) {
  ScenarioEconomics e;
  e.scenario = run.scenario;
  e.zeta = zeta;
  e.sites = run.topology.site_count();
  e.capex_eur = std::accumulate(run.ledger.capex().begin(), run.ledger.capex().end(), 0.0);
  const double total = total_cost(run.ledger, run.ledger.steps()).network;
  const double minutes = static_cast<double>(run.ledger.steps()) * run.ledger.step_minutes();
  e.annual_opex_eur = (total - e.capex_eur) * (TimeGrid::kMinutesPerYear / minutes);
  return e;
}

std::vector<ZetaRow> sweep_zeta(const AppConfig& config, const Dataset& data, const DemandModel* model) {
  struct Family {
    ScenarioSpec::Kind kind;
    Tech shared, exclusive;
  };
  using K = ScenarioSpec::Kind;
  const std::vector<Family> families{{K::Mixed, Tech::Battery, Tech::Grid},
                                     {K::Mixed, Tech::Battery, Tech::Battery},
                                     {K::Mixed, Tech::Grid, Tech::Grid},
                                     {K::Mixed, Tech::Grid, Tech::Battery},
                                     {K::ExclusiveBenchmark, Tech::Grid, Tech::Grid}};
  std::vector<ZetaRow> rows;
  for (const auto& fam : families) {
    for (double z : config.sweep_zeta) {
      AppConfig c = config;
      c.scenario.kind = fam.kind;
      c.scenario.shared_tech = fam.shared;
      c.scenario.exclusive_tech = fam.exclusive;
      c.scenario.zeta = z;
      c.run.record_traces = false;
      try {
        const auto e = economics_of(run_configured(c, data, model), z);
        rows.push_back({c.scenario.name(), z, e.annual_cost(config.amortization_years), e.annual_opex_eur,
                        e.capex_eur});
      } catch (const Error& err) {
        throw Error(fmt::format("sweep {} at zeta {}: {}", c.scenario.name(), z, err.what()));
      }
    }
  }
  return rows;
}

std::vector<ZetaRow> cmd_sweep_zeta(const AppConfig& config, const std::optional<fs::path>& data,
                                    const std::optional<fs::path>& model_dir, const fs::path& out) {
  const auto d = dataset_for(config, data);
  const auto model = model_for(config, d.corpus, model_dir);
  auto rows = sweep_zeta(config, d, model ? &*model : nullptr);
  fs::create_directories(out);
  auto f = open_out(out / "zeta_sweep.csv");
  fmt::print(f, "scenario,zeta,annual_cost_eur,annual_opex_eur,capex_eur\n");
  for (const auto& r : rows) {
    fmt::print(f, "{},{},{},{},{}\n", r.scenario, r.zeta, r.annual_cost_eur, r.annual_opex_eur, r.capex_eur);
  }
  open_out(out / "config.json") << config_to_json(config);
  return rows;
}

CostCurves cost_curves(const AppConfig& config, const Dataset& data, const DemandModel* model, bool exact_horizon) {
  using K = ScenarioSpec::Kind;
  CostCurves res;
  std::optional<Dataset> long_data;
  if (exact_horizon) {
    AppConfig c = config;
    c.horizon_days = 365 * config.sweep_years;
    long_data = make_dataset(c);
    long_data->base = data.base;
    model = nullptr;
  }
  const Dataset& d = long_data ? *long_data : data;
  std::map<std::string, std::vector<double>> exact_curves;
  for (K kind : {K::ExclusiveGrid, K::ExclusiveBattery, K::SharedGrid, K::SharedBattery}) {
    AppConfig c = config;
    c.scenario.kind = kind;
    c.run.record_traces = false;
    const auto run = run_configured(c, d, model);
    auto e = economics_of(run, kind == K::SharedGrid || kind == K::SharedBattery ? 1.0 : 0.0);
    if (exact_horizon) {
      const auto steps_per_year = static_cast<std::int64_t>(
          std::llround(TimeGrid::kMinutesPerYear / run.ledger.step_minutes()));
      std::vector<double> curve{e.capex_eur};
      double acc = e.capex_eur;
      for (std::int64_t t = 0; t < run.ledger.steps(); ++t) {
        for (double v : run.ledger.opex_at(t)) acc += v;
        if ((t + 1) % steps_per_year == 0) curve.push_back(acc);
      }
      exact_curves[e.scenario] = std::move(curve);
    }
    res.economics.push_back(e);
  }
  for (const auto& e : res.economics) {
    for (int y = 0; y <= config.sweep_years; ++y) {
      const double v = exact_horizon ? exact_curves[e.scenario].at(static_cast<std::size_t>(y)) /
                                           static_cast<double>(e.sites)
                                     : e.cumulative_per_site(y);
      res.curves.push_back({e.scenario, y, v});
    }
  }
  for (std::size_t a = 0; a < res.economics.size(); ++a) {
    for (std::size_t b = 0; b < res.economics.size(); ++b) {
      const auto& ea = res.economics[a];
      const auto& eb = res.economics[b];
      if (ea.capex_eur < eb.capex_eur && eb.annual_opex_eur < ea.annual_opex_eur) {
        const double year = (eb.capex_eur - ea.capex_eur) / (ea.annual_opex_eur - eb.annual_opex_eur);
        if (year <= config.sweep_years) res.crossovers.push_back({ea.scenario, eb.scenario, year});
      }
    }
  }
  return res;
}

CostCurves cmd_cost_curves(const AppConfig& config, const std::optional<fs::path>& data,
                    const std::optional<fs::path>& model_dir, bool exact_horizon, const fs::path& out) {
  const auto d = dataset_for(config, data);
  const auto model = model_for(config, d.corpus, model_dir);
  auto res = cost_curves(config, d, model ? &*model : nullptr, exact_horizon);
  fs::create_directories(out);
  {
    auto f = open_out(out / "cumulative_cost.csv");
    fmt::print(f, "scenario,year,cumulative_cost_per_site_eur\n");
    for (const auto& p : res.curves) fmt::print(f, "{},{},{}\n", p.scenario, p.year, p.cumulative_per_site_eur);
  }
  {
    auto f = open_out(out / "crossovers.csv");
    fmt::print(f, "cheaper_first,cheaper_after,crossover_year\n");
    for (const auto& c : res.crossovers) fmt::print(f, "{},{},{}\n", c.first, c.second, c.year);
  }
  open_out(out / "config.json") << config_to_json(config);
  return res;
}

ReportSummary cmd_report(const fs::path& run_dir, const std::optional<fs::path>& train_dir,
                         std::int32_t site, const fs::path& out) {
  std::vector<std::string> missing;
  for (const char* name : {"decisions.csv", "soc.csv", "soc_trace.csv", "ledger.csv", "overrides.csv",
                           "geo_snapshot.geojson", "summary.json"}) {
    if (!fs::exists(run_dir / name)) missing.push_back(name);
  }
  if (train_dir && !fs::exists(*train_dir / "site_metrics.csv")) {
    missing.push_back((*train_dir / "site_metrics.csv").string());
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw Error(fmt::format("report: missing artifacts in '{}': {}", run_dir.string(), list));
  }
  fs::create_directories(out);
  ReportSummary summary;

  // Forecaster error across sites.
  std::optional<csv::Table> metrics;
  std::string label = "run";
  if (train_dir) {
    metrics = csv::read(*train_dir / "site_metrics.csv");
    if (fs::exists(*train_dir / "train_summary.json")) {
      label = json::parse(read_text(*train_dir / "train_summary.json")).value("params", label);
    }
  } else if (fs::exists(run_dir / "forecast_metrics.csv")) {
    metrics = csv::read(run_dir / "forecast_metrics.csv");
  }
  if (metrics && !metrics->rows.empty()) {
    const auto c_mse = metrics->column("mse");
    const auto c_mae = metrics->column("mae");
    std::vector<double> mse, mae;
    for (std::size_t r = 0; r < metrics->rows.size(); ++r) {
      mse.push_back(csv::to_double(metrics->rows[r][c_mse], *metrics, r));
      mae.push_back(csv::to_double(metrics->rows[r][c_mae], *metrics, r));
    }
    auto mean = [](const std::vector<double>& v) {
      return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    ForecastErrorRow row{label,
                  *std::min_element(mse.begin(), mse.end()),
                  mean(mse),
                  *std::max_element(mse.begin(), mse.end()),
                  *std::min_element(mae.begin(), mae.end()),
                  mean(mae),
                  *std::max_element(mae.begin(), mae.end())};
    auto f = open_out(out / "forecast_errors.csv");
    fmt::print(f, "params,mse_min,mse_mean,mse_max,mae_min,mae_mean,mae_max\n");
    fmt::print(f, "\"{}\",{},{},{},{},{},{}\n", row.params, row.mse_min, row.mse_mean, row.mse_max,
               row.mae_min, row.mae_mean, row.mae_max);
    summary.forecast_errors = row;
  }

  // SoC trace of one site.
  const auto trace = csv::read(run_dir / "soc_trace.csv");
  const auto c_step = trace.column("step");
  const auto c_site = trace.column("site");
  const auto c_pred = trace.column("predicted_soc");
  const auto c_act = trace.column("actual_soc");
  const auto c_thr = trace.column("threshold");
  const auto c_d = trace.column("d");
  std::int32_t chosen = site;
  if (chosen == 0) {
    for (const auto& row : trace.rows) {
      if (row[c_d] == "1") {
        chosen = static_cast<std::int32_t>(std::stol(row[c_site]));
        break;
      }
    }
    if (chosen == 0 && !trace.rows.empty()) chosen = static_cast<std::int32_t>(std::stol(trace.rows[0][c_site]));
  }
  summary.trace_site = SiteId{chosen};
  {
    auto f = open_out(out / "site_soc_trace.csv");
    fmt::print(f, "step,predicted_soc,actual_soc,threshold,d\n");
    for (const auto& row : trace.rows) {
      if (row[c_site] != std::to_string(chosen)) continue;
      fmt::print(f, "{},{},{},{},{}\n", row[c_step], row[c_pred], row[c_act], row[c_thr], row[c_d]);
      ++summary.trace_rows;
    }
  }
  if (site != 0 && summary.trace_rows == 0) {
    throw Error(fmt::format("report: site {} has no battery SoC trace", site));
  }

  // GeoJSON series, one FeatureCollection per snapshot step.
  const auto geo = json::parse(read_text(run_dir / "geo_snapshot.geojson"));
  if (geo.value("type", "") != "FeatureCollection" || !geo.contains("features")) {
    throw Error("report: geo_snapshot.geojson is not a FeatureCollection");
  }
  std::map<std::int64_t, json> by_step;
  for (const auto& f : geo.at("features")) {
    const auto step = f.at("properties").at("step").get<std::int64_t>();
    auto& fc = by_step[step];
    if (fc.is_null()) fc = {{"type", "FeatureCollection"}, {"features", json::array()}};
    fc["features"].push_back(f);
  }
  fs::create_directories(out / "snapshots");
  for (const auto& [step, fc] : by_step) {
    open_out(out / "snapshots" / fmt::format("snapshot_{:05d}.geojson", step)) << fc.dump(1) << "\n";
  }
  summary.snapshots = by_step.size();
  return summary;
}

}  // namespace enshare
