// enshare: generate data, train the federated forecaster, run scenarios and
// sweeps, and extract report tables.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "CLI11.hpp"
#include "enshare/app.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  enshare::AppConfig load() const {
    auto o = overrides;
    if (seed) o.push_back(fmt::format("seed={}", *seed));
    return enshare::load_config(config.empty() ? std::nullopt : std::optional<fs::path>(config), o);
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "JSON config file (defaults apply for absent keys)");
  cmd->add_option("--set", c.overrides, "Override a config value, e.g. --set battery.margin=0.1")
      ->take_all();
  cmd->add_option("--seed", c.seed, "Shortcut for --set seed=N");
}

std::optional<fs::path> opt_path(const std::string& s) {
  return s.empty() ? std::nullopt : std::optional<fs::path>(s);
}

int fail(const std::string& kind, const std::string& message) {
  nlohmann::json j{{"error", kind}, {"message", message}};
  fmt::print(stderr, "{}\n", j.dump());
  return kind == "usage" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-operator energy infrastructure sharing simulator"};
  app.require_subcommand(1);

  Common gen_c, train_c, run_c, sweep_c;
  std::string gen_out = "data";
  auto* gen = app.add_subcommand("generate", "Write a synthetic corpus (kpi, cm, price, solar CSVs and topology)");
  add_common(gen, gen_c);
  gen->add_option("-o,--out", gen_out, "Output directory")->capture_default_str();
  auto* show = app.add_subcommand("config", "Print the resolved configuration as JSON");
  Common show_c;
  add_common(show, show_c);

  std::string train_data, train_out = "model";
  auto* train = app.add_subcommand("train", "Federated training of the demand forecaster");
  add_common(train, train_c);
  train->add_option("-d,--data", train_data, "Corpus directory (generated from the config when absent)");
  train->add_option("-o,--out", train_out, "Output directory")->capture_default_str();

  std::string run_data, run_model, run_out = "run";
  auto* run = app.add_subcommand("run", "Run one scenario over the horizon");
  add_common(run, run_c);
  run->add_option("-d,--data", run_data, "Corpus directory (generated from the config when absent)");
  run->add_option("-m,--model", run_model, "Model directory from `train` (needed for scenario.forecaster=lstm)");
  run->add_option("-o,--out", run_out, "Output directory")->capture_default_str();

  std::string sweep_data, sweep_model, sweep_out = "sweep", sweep_kind = "zeta";
  bool exact = false;
  auto* sweep = app.add_subcommand("sweep", "Annual cost over zeta, or cumulative cost curves");
  add_common(sweep, sweep_c);
  sweep->add_option("-k,--kind", sweep_kind, "zeta or cumulative")
      ->check(CLI::IsMember({"zeta", "cumulative"}))
      ->capture_default_str();
  sweep->add_option("-d,--data", sweep_data, "Corpus directory (generated from the config when absent)");
  sweep->add_option("-m,--model", sweep_model, "Model directory for scenario.forecaster=lstm");
  sweep->add_option("-o,--out", sweep_out, "Output directory")->capture_default_str();
  sweep->add_flag("--exact-horizon", exact, "cumulative: simulate every step of sweep.years instead of extrapolating");

  std::string rep_run, rep_train, rep_out;
  std::int32_t rep_site = 0;
  auto* report = app.add_subcommand("report", "Forecast error table, SoC trace and GeoJSON snapshots of a run");
  report->add_option("run_dir", rep_run, "Directory written by `run`")->required();
  report->add_option("-t,--train", rep_train, "Directory written by `train` for validation metrics");
  report->add_option("-s,--site", rep_site, "Site for the SoC trace (0 picks one)");
  report->add_option("-o,--out", rep_out, "Output directory (default <run_dir>/report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (*show) {
      fmt::print("{}", enshare::config_to_json(show_c.load()));
    } else if (*gen) {
      enshare::cmd_generate(gen_c.load(), gen_out);
      fmt::print("corpus written to {}\n", gen_out);
    } else if (*train) {
      const auto s = enshare::cmd_train(train_c.load(), opt_path(train_data), train_out);
      for (const auto& w : s.result.warnings) fmt::print(stderr, "warning: {}\n", w);
      fmt::print("validation MSE {:.4f} (untrained {:.4f}, persistence {:.4f}); model in {}\n",
                 s.final_val.mse, s.round0.mse, s.persistence.mse, train_out);
    } else if (*run) {
      const auto r = enshare::cmd_run(run_c.load(), opt_path(run_data), opt_path(run_model), run_out);
      fmt::print("{}: {} steps, {} overrides; artifacts in {}\n", r.scenario, r.grid.horizon_steps,
                 r.overrides.size(), run_out);
    } else if (*sweep) {
      const auto cfg = sweep_c.load();
      if (sweep_kind == "zeta") {
        if (exact) return fail("usage", "--exact-horizon applies to --kind cumulative only");
        const auto rows = enshare::cmd_sweep_zeta(cfg, opt_path(sweep_data), opt_path(sweep_model), sweep_out);
        fmt::print("{} rows written to {}/zeta_sweep.csv\n", rows.size(), sweep_out);
      } else {
        const auto res = enshare::cmd_cost_curves(cfg, opt_path(sweep_data), opt_path(sweep_model), exact, sweep_out);
        for (const auto& c : res.crossovers) {
          fmt::print("crossover: {} overtakes {} after {:.2f} years\n", c.second, c.first, c.year);
        }
        fmt::print("curves written to {}/cumulative_cost.csv\n", sweep_out);
      }
    } else if (*report) {
      const fs::path out = rep_out.empty() ? fs::path(rep_run) / "report" : fs::path(rep_out);
      const auto s = enshare::cmd_report(rep_run, opt_path(rep_train), rep_site, out);
      if (s.forecast_errors) {
        fmt::print("MSE min/mean/max {:.3f}/{:.3f}/{:.3f}  MAE {:.3f}/{:.3f}/{:.3f}\n", s.forecast_errors->mse_min,
                   s.forecast_errors->mse_mean, s.forecast_errors->mse_max, s.forecast_errors->mae_min, s.forecast_errors->mae_mean,
                   s.forecast_errors->mae_max);
      } else {
        fmt::print("no forecaster metrics (oracle run without --train)\n");
      }
      fmt::print("SoC trace of site {} ({} rows), {} GeoJSON snapshots in {}\n", enshare::raw(s.trace_site),
                 s.trace_rows, s.snapshots, out.string());
    }
  } catch (const enshare::Error& e) {
    return fail("enshare", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
