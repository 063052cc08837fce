#include "enshare/battery.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

namespace enshare {

namespace {
// Round-off tolerance when a SoC lands a hair outside [0,1].
constexpr double kSocSlack = 1e-12;
}  // namespace

void BatteryState::validate() const {
  if (!(soc >= 0.0 && soc <= 1.0)) throw Error(fmt::format("battery SoC {} outside [0,1]", soc));
  if (!(soh > 0.0 && soh <= 1.0)) throw Error(fmt::format("battery SoH {} outside (0,1]", soh));
  if (!(omega_init > 0.0)) throw Error("battery initial capacity must be positive");
  if (!(kappa >= 0.0)) throw Error("degradation constant must be nonnegative");
}

void ChargeInput::validate() const {
  if (!(grid_charge >= 0.0) || !(ren_charge >= 0.0)) throw Error("charge energy must be nonnegative");
  if (!(mix >= 0.0 && mix <= 1.0)) throw Error(fmt::format("charging mix {} outside [0,1]", mix));
}

double effective_capacity(const BatteryState& state) { return state.omega_init * state.soh; }

double mixed_charge(const ChargeInput& input) {
  return input.mix * input.grid_charge + (1.0 - input.mix) * input.ren_charge;
}

double step_soc(const BatteryState& state, const ChargeInput& input, double discharge_total,
                double efficiency) {
  if (!(discharge_total >= 0.0)) throw Error("discharge must be nonnegative");
  const double capacity = effective_capacity(state);
  if (!(capacity > 0.0)) throw Error("effective capacity must be positive");
  const double next = state.soc + (efficiency * mixed_charge(input) - discharge_total) / capacity;
  if (next < -kSocSlack) {
    throw DepletionError(fmt::format("battery depleted: SoC would reach {}", next));
  }
  if (next > 1.0 + kSocSlack) {
    throw OverchargeError(fmt::format("battery overcharged: SoC would reach {}", next));
  }
  return std::clamp(next, 0.0, 1.0);
}

double step_soh(const BatteryState& state, double old_soc, double new_soc) {
  if (!(old_soc >= 0.0 && old_soc <= 1.0 && new_soc >= 0.0 && new_soc <= 1.0)) {
    throw Error("SoC values must lie in [0,1]");
  }
  const double next = state.soh - state.kappa * std::abs(new_soc - old_soc);
  if (!(next > 0.0)) throw Error(fmt::format("battery SoH would reach {}", next));
  return next;
}

double available_discharge_budget(const BatteryState& state, const ChargeInput& input,
                                  double soc_min, double efficiency) {
  const double capacity = effective_capacity(state);
  const double budget = (state.soc - soc_min) * capacity + efficiency * mixed_charge(input);
  return std::clamp(budget, 0.0, capacity);
}

BatteryState step_battery(const BatteryState& state, const ChargeInput& input,
                          double discharge_total, double efficiency) {
  BatteryState next = state;
  next.soc = step_soc(state, input, discharge_total, efficiency);
  next.soh = step_soh(state, state.soc, next.soc);
  return next;
}

}  // namespace enshare
