#pragma once

// Per-site demand forecasting with simulated federated training: feature
// windows, local mini-batch descent, FedAvg and the round loop.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "enshare/domain.hpp"
#include "enshare/ingest.hpp"
#include "enshare/lstm.hpp"

namespace enshare {

inline constexpr std::size_t kDefaultSequenceLength = 16;

// z-score statistics of one site, taken over its training split.
struct SiteScaling {
  double throughput_mean = 0.0, throughput_std = 1.0;
  double success_mean = 0.0, success_std = 1.0;
  double energy_mean = 0.0, energy_std = 1.0;

  double to_z(double kwh) const { return (kwh - energy_mean) / energy_std; }
  double to_kwh(double z) const;  // clamped at zero
  double shift() const { return energy_mean / energy_std; }
};

SiteScaling fit_scaling(const SiteSeries& series, std::size_t first, std::size_t last);

// Number of leading steps that training windows and their targets cover.
std::size_t training_span(std::int64_t horizon_steps, std::size_t seq_len, double val_fraction);

// Window of `seq_len` samples ending at step t inclusive.
FeatureWindow build_feature_window(const SiteSeries& series, const CmRecord& cm,
                                   const SiteScaling& scaling, std::int64_t t,
                                   std::size_t seq_len = kDefaultSequenceLength);

struct Sample {
  FeatureWindow window;
  double target = 0.0;  // standardised demand of step t + 1
  double last = 0.0;    // standardised demand of step t, for the persistence baseline
};

struct SiteDataset {
  SiteId site{};
  MnoId owner{};
  SiteScaling scaling;
  std::vector<Sample> train;
  std::vector<Sample> val;
};

// Chronological split of each site's windows; scaling uses only the steps
// covered by training windows and targets.
std::vector<SiteDataset> build_site_datasets(const Corpus& corpus, const NetworkTopology& topology,
                                             std::size_t seq_len = kDefaultSequenceLength,
                                             double val_fraction = 0.2);

struct TrainOptions {
  std::size_t batch_size = 16;
  double learning_rate = 0.01;
  double clip_norm = 0.0;  // 0 disables gradient clipping
};

struct LocalUpdate {
  LstmParams params;
  std::size_t n = 0;
};

LocalUpdate local_train(const LstmParams& global, std::span<const Sample> dataset, int epochs,
                        const TrainOptions& options, std::uint64_t seed);

LstmParams fedavg_aggregate(std::span<const LocalUpdate> updates);

struct ErrorMetrics {
  double mse = 0.0;
  double mae = 0.0;
};

ErrorMetrics eval_metrics(std::span<const double> predictions, std::span<const double> actuals);

struct FedRoundConfig {
  int rounds = 10;
  int local_epochs = 3;
  std::size_t sequence_length = kDefaultSequenceLength;
  int clients_per_round = 0;     // 0 selects by fraction
  double client_fraction = 1.0;  // of the available sites
  double availability = 1.0;     // chance a site is reachable in a round
  int early_stop_patience = 0;   // 0 runs the full round budget
  TrainOptions train;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RoundMetrics {
  int round = 0;  // 0 is the untrained model
  double train_mse = 0.0;
  double val_mse = 0.0;
  double val_mae = 0.0;
  std::size_t clients = 0;
};

struct FederatedResult {
  LstmParams params;
  std::vector<RoundMetrics> rounds;
  std::vector<std::string> warnings;
};

FederatedResult run_federated_training(std::span<const SiteDataset> datasets,
                                       const FedRoundConfig& config,
                                       const LstmShape& shape = {});

// Pooled metrics over every sample of the selected split.
ErrorMetrics evaluate(const LstmParams& params, std::span<const SiteDataset> datasets, bool validation);
ErrorMetrics evaluate_persistence(std::span<const SiteDataset> datasets, bool validation);

struct SiteMetrics {
  SiteId site{};
  ErrorMetrics model;
  ErrorMetrics persistence;
};

std::vector<SiteMetrics> per_site_metrics(const LstmParams& params,
                                          std::span<const SiteDataset> datasets);

void write_round_metrics_csv(std::ostream& out, std::span<const RoundMetrics> rounds);
void write_site_metrics_csv(std::ostream& out, std::span<const SiteMetrics> sites);

}  // namespace enshare
