#pragma once

// Per-infrastructure battery: state of charge, state of health, capacity
// derating and the charging-mix arithmetic. Stepping is a pure function.

#include <cstdint>
#include <functional>

#include "enshare/domain.hpp"

namespace enshare {

struct BatteryState {
  double soc = 0.5;          // x in [0,1]
  double soh = 1.0;          // y in (0,1]
  double omega_init = 50.0;  // kWh at t = 0
  double kappa = 8.85e-6;    // SoH loss per unit |delta SoC|

  void validate() const;
};

// lambda = 1 selects grid-only charging, lambda = 0 renewable-only.
struct ChargeInput {
  double grid_charge = 0.0;  // kWh
  double ren_charge = 0.0;   // kWh
  double mix = 0.0;          // lambda in [0,1]

  void validate() const;
};

class DepletionError : public Error {
 public:
  using Error::Error;
};

class OverchargeError : public Error {
 public:
  using Error::Error;
};

double effective_capacity(const BatteryState& state);

// lambda * E_grid + (1 - lambda) * E_ren, as a weighted (not summed) input.
double mixed_charge(const ChargeInput& input);

// SoC after one step. The capacity used is the derated one at step start.
// `efficiency` scales the charge reaching the cells.
double step_soc(const BatteryState& state, const ChargeInput& input, double discharge_total,
                double efficiency = 1.0);

// SoH after the SoC moved from old_soc to new_soc.
double step_soh(const BatteryState& state, double old_soc, double new_soc);

// Largest total discharge that keeps SoC >= soc_min after this step's
// charge, capped at the effective capacity.
double available_discharge_budget(const BatteryState& state, const ChargeInput& input,
                                  double soc_min, double efficiency = 1.0);

// step_soc followed by step_soh.
BatteryState step_battery(const BatteryState& state, const ChargeInput& input,
                          double discharge_total, double efficiency = 1.0);

// Optional time-varying degradation constant; empty means use state.kappa.
using KappaSchedule = std::function<double(std::int64_t step)>;

}  // namespace enshare
