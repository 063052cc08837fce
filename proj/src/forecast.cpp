#include "enshare/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "enshare/rng.hpp"

namespace enshare {

namespace {

constexpr std::uint64_t kInitStream = 0x1517;
constexpr std::uint64_t kSelectStream = 0x5e1ec7;

std::pair<double, double> mean_std(const std::vector<double>& v, std::size_t first, std::size_t last) {
  const double n = static_cast<double>(last - first);
  double mean = 0.0;
  for (std::size_t t = first; t < last; ++t) mean += v[t];
  mean /= n;
  double var = 0.0;
  for (std::size_t t = first; t < last; ++t) var += (v[t] - mean) * (v[t] - mean);
  const double sd = std::sqrt(var / n);
  return {mean, sd > 1e-9 ? sd : 1.0};
}

}  // namespace

double SiteScaling::to_kwh(double z) const { return std::max(0.0, energy_mean + energy_std * z); }

SiteScaling fit_scaling(const SiteSeries& series, std::size_t first, std::size_t last) {
  if (last <= first || last > series.energy_kwh.size()) throw Error("scaling range is empty or out of bounds");
  SiteScaling s;
  std::tie(s.throughput_mean, s.throughput_std) = mean_std(series.throughput_mbps, first, last);
  std::tie(s.success_mean, s.success_std) = mean_std(series.success_ratio, first, last);
  std::tie(s.energy_mean, s.energy_std) = mean_std(series.energy_kwh, first, last);
  return s;
}

FeatureWindow build_feature_window(const SiteSeries& series, const CmRecord& cm,
                                   const SiteScaling& scaling, std::int64_t t, std::size_t seq_len) {
  if (seq_len == 0) throw Error("sequence length must be positive");
  if (t < 0 || t + 1 < static_cast<std::int64_t>(seq_len) ||
      t >= static_cast<std::int64_t>(series.throughput_mbps.size())) {
    throw Error(fmt::format("insufficient history: window of {} ending at step {}", seq_len, t));
  }
  FeatureWindow w;
  w.kpi.reserve(seq_len);
  const auto first = static_cast<std::size_t>(t + 1) - seq_len;
  for (std::size_t k = first; k <= static_cast<std::size_t>(t); ++k) {
    const double thr = series.throughput_mbps[k];
    const double succ = series.success_ratio[k];
    if (!(thr >= 0.0) || !(succ >= 0.0 && succ <= 1.0)) {
      throw Error(fmt::format("KPI out of range at step {}", k));
    }
    w.kpi.push_back({(thr - scaling.throughput_mean) / scaling.throughput_std,
                     (succ - scaling.success_mean) / scaling.success_std});
  }
  w.static_features = encode_static_features(cm);
  w.shift = scaling.shift();
  return w;
}

std::size_t training_span(std::int64_t horizon_steps, std::size_t seq_len, double val_fraction) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw Error("validation fraction must be in [0,1)");
  const auto T = static_cast<std::size_t>(std::max<std::int64_t>(horizon_steps, 0));
  if (T < seq_len + 2) throw Error("horizon too short for a single training window");
  const std::size_t windows = T - seq_len;
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(windows)));
  if (n_val >= windows) throw Error("no training windows left after the validation split");
  return seq_len + windows - n_val;
}

std::vector<SiteDataset> build_site_datasets(const Corpus& corpus, const NetworkTopology& topology,
                                             std::size_t seq_len, double val_fraction) {
  const std::size_t span = training_span(corpus.grid.horizon_steps, seq_len, val_fraction);
  const std::size_t windows = static_cast<std::size_t>(corpus.grid.horizon_steps) - seq_len;
  const std::size_t n_train = span - seq_len;

  std::vector<SiteDataset> out;
  for (const auto& spec : topology.sites()) {
    const auto& series = corpus.series(spec.id);
    const auto& cm = corpus.cm_of(spec.id);
    SiteDataset d;
    d.site = spec.id;
    d.owner = spec.owner;
    d.scaling = fit_scaling(series, 0, span);
    for (std::size_t k = 0; k < windows; ++k) {
      const auto t = static_cast<std::int64_t>(seq_len - 1 + k);
      Sample s;
      s.window = build_feature_window(series, cm, d.scaling, t, seq_len);
      s.target = d.scaling.to_z(series.energy_kwh[static_cast<std::size_t>(t) + 1]);
      s.last = d.scaling.to_z(series.energy_kwh[static_cast<std::size_t>(t)]);
      (k < n_train ? d.train : d.val).push_back(std::move(s));
    }
    out.push_back(std::move(d));
  }
  return out;
}

LocalUpdate local_train(const LstmParams& global, std::span<const Sample> dataset, int epochs,
                        const TrainOptions& options, std::uint64_t seed) {
  if (dataset.empty()) throw Error("local training needs at least one sample");
  if (epochs < 0) throw Error("epochs must be nonnegative");
  if (options.batch_size == 0 || !(options.learning_rate > 0.0)) {
    throw Error("batch size and learning rate must be positive");
  }
  LocalUpdate u{global, dataset.size()};
  if (epochs == 0) return u;
  Rng rng(seed);
  std::vector<std::size_t> order(dataset.size());
  std::vector<double> grad(global.w.size());
  for (int e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + options.batch_size);
      const double weight = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) {
        const auto& s = dataset[order[k]];
        accumulate_gradients(u.params, s.window, s.target, weight, grad);
      }
      double scale = options.learning_rate;
      if (options.clip_norm > 0.0) {
        double norm = 0.0;
        for (double g : grad) norm += g * g;
        norm = std::sqrt(norm);
        if (norm > options.clip_norm) scale *= options.clip_norm / norm;
      }
      for (std::size_t i = 0; i < grad.size(); ++i) u.params.w[i] -= scale * grad[i];
    }
  }
  u.params.validate();
  return u;
}

LstmParams fedavg_aggregate(std::span<const LocalUpdate> updates) {
  if (updates.empty()) throw Error("FedAvg needs at least one update");
  const auto& shape = updates.front().params.shape;
  const std::size_t dim = updates.front().params.w.size();
  double total = 0.0;
  for (const auto& u : updates) {
    if (!(u.params.shape == shape) || u.params.w.size() != dim) {
      throw Error("FedAvg: client parameter shapes differ");
    }
    total += static_cast<double>(u.n);
  }
  if (total == 0.0) throw Error("FedAvg: total sample count is zero");
  LstmParams out{shape, std::vector<double>(dim, 0.0)};
  // Summing in a canonical order keeps the result independent of the order
  // the updates arrive in.
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (updates[a].n != updates[b].n) return updates[a].n < updates[b].n;
    return updates[a].params.w < updates[b].params.w;
  });
  for (std::size_t i = 0; i < dim; ++i) {
    double acc = 0.0;
    double lo = updates[order[0]].params.w[i], hi = lo;
    for (std::size_t k : order) {
      const double v = updates[k].params.w[i];
      acc += (static_cast<double>(updates[k].n) / total) * v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out.w[i] = std::clamp(acc, lo, hi);
  }
  return out;
}

ErrorMetrics eval_metrics(std::span<const double> predictions, std::span<const double> actuals) {
  if (predictions.empty() || predictions.size() != actuals.size()) {
    throw Error("metrics need equal, nonzero numbers of predictions and actuals");
  }
  ErrorMetrics m;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const double e = predictions[k] - actuals[k];
    m.mse += e * e;
    m.mae += std::abs(e);
  }
  m.mse /= static_cast<double>(predictions.size());
  m.mae /= static_cast<double>(predictions.size());
  return m;
}

void FedRoundConfig::validate() const {
  if (rounds < 0 || local_epochs < 1 || sequence_length < 1) {
    throw Error("federated config: rounds >= 0, local_epochs >= 1 and sequence_length >= 1 required");
  }
  if (clients_per_round < 0 || !(client_fraction > 0.0 && client_fraction <= 1.0)) {
    throw Error("federated config: client selection out of range");
  }
  if (!(availability > 0.0 && availability <= 1.0)) throw Error("federated config: availability must be in (0,1]");
  if (early_stop_patience < 0) throw Error("federated config: early_stop_patience must be >= 0");
  if (!(train.learning_rate > 0.0) || train.batch_size == 0) {
    throw Error("federated config: learning_rate > 0 and batch_size >= 1 required");
  }
}

namespace {

ErrorMetrics evaluate_impl(std::span<const SiteDataset> datasets, bool validation,
                           const LstmParams* params) {
  std::vector<double> pred, actual;
  for (const auto& d : datasets) {
    for (const auto& s : validation ? d.val : d.train) {
      pred.push_back(params ? lstm_forward(*params, s.window) : s.last);
      actual.push_back(s.target);
    }
  }
  if (pred.empty()) return {};
  return eval_metrics(pred, actual);
}

}  // namespace

ErrorMetrics evaluate(const LstmParams& params, std::span<const SiteDataset> datasets, bool validation) {
  return evaluate_impl(datasets, validation, &params);
}

ErrorMetrics evaluate_persistence(std::span<const SiteDataset> datasets, bool validation) {
  return evaluate_impl(datasets, validation, nullptr);
}

FederatedResult run_federated_training(std::span<const SiteDataset> datasets,
                                       const FedRoundConfig& config, const LstmShape& shape) {
  config.validate();
  FederatedResult res;
  res.params = init_params(shape, derive_seed(config.seed, 0, kInitStream));

  auto record = [&](int round, std::size_t clients) {
    RoundMetrics m;
    m.round = round;
    m.clients = clients;
    m.train_mse = evaluate(res.params, datasets, false).mse;
    const auto v = evaluate(res.params, datasets, true);
    m.val_mse = v.mse;
    m.val_mae = v.mae;
    res.rounds.push_back(m);
  };
  record(0, 0);

  int executed = 0;
  double best_val = res.rounds.back().val_mse;
  int stale = 0;
  for (int r = 1; r <= config.rounds; ++r) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(r), kSelectStream));
    std::vector<std::size_t> available;
    for (std::size_t k = 0; k < datasets.size(); ++k) {
      const bool up = config.availability >= 1.0 || rng.uniform() < config.availability;
      if (up && !datasets[k].train.empty()) available.push_back(k);
    }
    if (available.empty()) {
      res.warnings.push_back(fmt::format("round {}: no available sites, skipped", r));
      continue;
    }
    std::size_t take = config.clients_per_round > 0
                           ? static_cast<std::size_t>(config.clients_per_round)
                           : static_cast<std::size_t>(std::llround(config.client_fraction *
                                                                   static_cast<double>(available.size())));
    take = std::clamp<std::size_t>(take, 1, available.size());
    rng.shuffle(available.begin(), available.end());
    available.resize(take);
    std::sort(available.begin(), available.end());

    std::vector<LocalUpdate> updates;
    updates.reserve(take);
    for (std::size_t k : available) {
      const auto& d = datasets[k];
      updates.push_back(local_train(res.params, d.train, config.local_epochs, config.train,
                                    derive_seed(config.seed, static_cast<std::uint64_t>(raw(d.site)),
                                                static_cast<std::uint64_t>(r))));
    }
    res.params = fedavg_aggregate(updates);
    ++executed;
    record(r, take);

    if (config.early_stop_patience > 0) {
      if (res.rounds.back().val_mse < best_val) {
        best_val = res.rounds.back().val_mse;
        stale = 0;
      } else if (++stale >= config.early_stop_patience) {
        res.warnings.push_back(fmt::format("round {}: early stop, no validation gain for {} rounds", r, stale));
        break;
      }
    }
  }
  if (config.rounds > 0 && executed == 0) throw Error("federated training: every round was skipped");
  return res;
}

std::vector<SiteMetrics> per_site_metrics(const LstmParams& params, std::span<const SiteDataset> datasets) {
  std::vector<SiteMetrics> out;
  for (std::size_t k = 0; k < datasets.size(); ++k) {
    if (datasets[k].val.empty()) continue;
    const std::span<const SiteDataset> one(&datasets[k], 1);
    out.push_back({datasets[k].site, evaluate(params, one, true), evaluate_persistence(one, true)});
  }
  return out;
}

void write_round_metrics_csv(std::ostream& out, std::span<const RoundMetrics> rounds) {
  fmt::print(out, "round,train_mse,val_mse,val_mae,clients\n");
  for (const auto& r : rounds) {
    fmt::print(out, "{},{},{},{},{}\n", r.round, r.train_mse, r.val_mse, r.val_mae, r.clients);
  }
}

void write_site_metrics_csv(std::ostream& out, std::span<const SiteMetrics> sites) {
  fmt::print(out, "site,mse,mae,persistence_mse,persistence_mae\n");
  for (const auto& s : sites) {
    fmt::print(out, "{},{},{},{},{}\n", raw(s.site), s.model.mse, s.model.mae, s.persistence.mse,
               s.persistence.mae);
  }
}

}  // namespace enshare
