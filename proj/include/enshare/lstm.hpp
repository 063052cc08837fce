#pragma once

// Single-layer LSTM regressor with static features joined after the last
// hidden state, a tanh head and a shifted softplus output. Everything lives
// in one flat parameter vector so federated averaging is coordinatewise.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "enshare/domain.hpp"

namespace enshare {

struct LstmShape {
  std::size_t input = 2;
  std::size_t hidden = 32;
  std::size_t static_dim = 9;
  std::size_t head = 16;

  std::size_t size() const;
  bool operator==(const LstmShape&) const = default;
};

// Flat layout, row-major blocks in this order:
//   Wx [4H x I], Wh [4H x H], b [4H]   gates stacked as i, f, g, o
//   W1 [P x (H+S)], b1 [P], w2 [P], b2 [1]
struct LstmParams {
  LstmShape shape;
  std::vector<double> w;

  void validate() const;  // size matches shape, all finite
};

struct FeatureWindow {
  std::vector<std::array<double, 2>> kpi;  // standardised (throughput, success ratio), oldest first
  std::vector<double> static_features;
  // Standardised value of zero demand, negated: the output is
  // softplus(y + shift) - shift so the de-standardised prediction is >= 0.
  double shift = 0.0;
};

LstmParams zero_params(const LstmShape& shape);
LstmParams init_params(const LstmShape& shape, std::uint64_t seed);

// Standardised prediction.
double lstm_forward(const LstmParams& params, const FeatureWindow& window);

// Gradient of weight * (forward - target)^2 with respect to params.w.
std::vector<double> lstm_gradients(const LstmParams& params, const FeatureWindow& window,
                                   double target, double weight = 1.0);

// Adds the gradient into `grad` and returns the loss.
double accumulate_gradients(const LstmParams& params, const FeatureWindow& window, double target,
                            double weight, std::span<double> grad);

// Text checkpoint: "enshare-lstm 1", a shape line, the count, then one
// %.17g value per line.
void save_checkpoint(const LstmParams& params, const std::filesystem::path& path);
LstmParams load_checkpoint(const std::filesystem::path& path);

}  // namespace enshare
