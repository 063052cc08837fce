#include <gtest/gtest.h>

#include <sstream>

#include "enshare/forecast.hpp"
#include "enshare/rng.hpp"

using namespace enshare;

namespace {

SiteSeries ramp(std::size_t n) {
  SiteSeries s;
  for (std::size_t k = 0; k < n; ++k) {
    s.throughput_mbps.push_back(static_cast<double>(k + 1));
    s.success_ratio.push_back(0.9);
    s.energy_kwh.push_back(2.0);
  }
  return s;
}

CmRecord cm() {
  return {SiteId{1}, "HW-A", {60.0, 0.0}, "B1", 6, "64T64R"};
}

LstmParams scalar(double v) { return {LstmShape{1, 0, 0, 0}, {v}}; }

struct SmallCorpus {
  NetworkTopology topo;
  Corpus corpus;
};

SmallCorpus small_corpus() {
  TimeGrid g;
  g.horizon_steps = 2 * 96;
  g.start = parse_iso8601("2024-06-03T00:00:00Z");
  auto topo = generate_layout(3, 3, 1);
  auto corpus = generate_synthetic_dataset(topo, g, 1);
  return {std::move(topo), std::move(corpus)};
}

}  // namespace

TEST(FeatureWindow, FullHistoryBoundary) {
  const auto s = ramp(16);
  const auto w = build_feature_window(s, cm(), {}, 15);
  ASSERT_EQ(w.kpi.size(), 16u);
  EXPECT_EQ(w.kpi.front()[0], 1.0);
  EXPECT_EQ(w.kpi.back()[0], 16.0);
}

TEST(FeatureWindow, LastSixteenOfTwenty) {
  const auto s = ramp(20);
  const auto w = build_feature_window(s, cm(), {}, 19);
  EXPECT_EQ(w.kpi.front()[0], 5.0);
  EXPECT_EQ(w.kpi.back()[0], 20.0);
  EXPECT_EQ(w.static_features.size(), kStaticFeatureDim);
}

TEST(FeatureWindow, ShortHistoryFails) {
  const auto s = ramp(15);
  try {
    build_feature_window(s, cm(), {}, 14);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient history"), std::string::npos);
  }
}

TEST(FeatureWindow, Standardised) {
  SiteScaling sc;
  sc.throughput_mean = 10.0;
  sc.throughput_std = 2.0;
  sc.energy_mean = 3.0;
  sc.energy_std = 1.5;
  const auto w = build_feature_window(ramp(16), cm(), sc, 15);
  EXPECT_DOUBLE_EQ(w.kpi.front()[0], -4.5);
  EXPECT_DOUBLE_EQ(w.shift, 2.0);
  EXPECT_DOUBLE_EQ(sc.to_kwh(sc.to_z(1.25)), 1.25);
  EXPECT_EQ(sc.to_kwh(-5.0), 0.0);
}

TEST(FedAvg, SingleClientIdentity) {
  const auto p = init_params({}, 1);
  const std::vector<LocalUpdate> u{{p, 7}};
  EXPECT_EQ(fedavg_aggregate(u).w, p.w);
}

TEST(FedAvg, WeightedMeans) {
  std::vector<LocalUpdate> u{{scalar(1.0), 5}, {scalar(2.0), 5}};
  EXPECT_DOUBLE_EQ(fedavg_aggregate(u).w[0], 1.5);
  u = {{scalar(1.0), 1}, {scalar(2.0), 3}};
  EXPECT_DOUBLE_EQ(fedavg_aggregate(u).w[0], 1.75);
}

TEST(FedAvg, Errors) {
  EXPECT_THROW(fedavg_aggregate({}), Error);
  const std::vector<LocalUpdate> zero{{scalar(1.0), 0}};
  EXPECT_THROW(fedavg_aggregate(zero), Error);
  const std::vector<LocalUpdate> mixed{{scalar(1.0), 1}, {init_params({}, 0), 1}};
  EXPECT_THROW(fedavg_aggregate(mixed), Error);
}

TEST(FedAvg, OrderAndScaleInvariant) {
  Rng rng(8);
  std::vector<LocalUpdate> u;
  for (int k = 0; k < 5; ++k) {
    LstmParams p{LstmShape{1, 0, 0, 0}, {}};
    for (int i = 0; i < 20; ++i) p.w.push_back(rng.normal());
    u.push_back({p, 1 + rng.below(50)});
  }
  const auto base = fedavg_aggregate(u).w;
  auto shuffled = u;
  rng.shuffle(shuffled.begin(), shuffled.end());
  EXPECT_EQ(fedavg_aggregate(shuffled).w, base);
  auto scaled = u;
  for (auto& x : scaled) x.n *= 4;
  const auto s = fedavg_aggregate(scaled).w;
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(s[i], base[i], 1e-12);
}

TEST(Metrics, Examples) {
  const std::vector<double> p{1.0, 2.0}, a{0.0, 0.0};
  const auto m = eval_metrics(p, a);
  EXPECT_DOUBLE_EQ(m.mse, 2.5);
  EXPECT_DOUBLE_EQ(m.mae, 1.5);
  const auto z = eval_metrics(p, p);
  EXPECT_EQ(z.mse, 0.0);
  EXPECT_EQ(z.mae, 0.0);
  const std::vector<double> off{1.5, 2.5};
  EXPECT_DOUBLE_EQ(eval_metrics(off, p).mse, 0.25);
  EXPECT_DOUBLE_EQ(eval_metrics(off, p).mae, 0.5);
  EXPECT_THROW(eval_metrics({}, {}), Error);
}

TEST(LocalTrain, ZeroEpochsIsIdentity) {
  const auto sc = small_corpus();
  const auto ds = build_site_datasets(sc.corpus, sc.topo);
  const auto p = init_params({}, 5);
  const auto u = local_train(p, ds[0].train, 0, {}, 1);
  EXPECT_EQ(u.params.w, p.w);
  EXPECT_EQ(u.n, ds[0].train.size());
  EXPECT_THROW(local_train(p, {}, 1, {}, 1), Error);
}

TEST(LocalTrain, DeterministicAndDescending) {
  const auto sc = small_corpus();
  const auto ds = build_site_datasets(sc.corpus, sc.topo);
  const auto p = init_params({}, 5);
  const std::span<const Sample> one(ds[0].train.data(), 1);
  TrainOptions opt;
  opt.learning_rate = 0.005;
  double prev = 1e300;
  LstmParams cur = p;
  for (int e = 0; e < 5; ++e) {
    const double err = lstm_forward(cur, one[0].window) - one[0].target;
    EXPECT_LE(err * err, prev);
    prev = err * err;
    cur = local_train(cur, one, 1, opt, 3).params;
  }
  const auto a = local_train(p, ds[1].train, 2, {}, 99);
  const auto b = local_train(p, ds[1].train, 2, {}, 99);
  EXPECT_EQ(a.params.w, b.params.w);
}

TEST(Datasets, ChronologicalSplit) {
  const auto sc = small_corpus();
  const auto ds = build_site_datasets(sc.corpus, sc.topo, 16, 0.2);
  ASSERT_EQ(ds.size(), 3u);
  const std::size_t windows = 192 - 16;  // last window needs a next-step target
  for (const auto& d : ds) {
    EXPECT_EQ(d.train.size() + d.val.size(), windows);
    EXPECT_EQ(d.val.size(), static_cast<std::size_t>(std::llround(0.2 * windows)));
  }
  EXPECT_EQ(training_span(192, 16, 0.2), 16 + windows - ds[0].val.size());
}

TEST(Federated, ZeroRoundsReturnsInit) {
  const auto sc = small_corpus();
  const auto ds = build_site_datasets(sc.corpus, sc.topo);
  FedRoundConfig cfg;
  cfg.rounds = 0;
  cfg.seed = 4;
  const auto r = run_federated_training(ds, cfg);
  EXPECT_EQ(r.rounds.size(), 1u);
  cfg.rounds = 1;
  EXPECT_NE(run_federated_training(ds, cfg).params.w, r.params.w);
}

TEST(Federated, SingleSiteIsLocalTraining) {
  const auto sc = small_corpus();
  auto ds = build_site_datasets(sc.corpus, sc.topo);
  ds.resize(1);
  FedRoundConfig cfg;
  cfg.rounds = 2;
  cfg.local_epochs = 1;
  cfg.clients_per_round = 1;
  cfg.seed = 6;
  const auto fed = run_federated_training(ds, cfg);
  cfg.rounds = 0;
  auto p = run_federated_training(ds, cfg).params;
  for (std::uint64_t r = 1; r <= 2; ++r) {
    p = local_train(p, ds[0].train, 1, cfg.train, derive_seed(6, static_cast<std::uint64_t>(raw(ds[0].site)), r)).params;
  }
  EXPECT_EQ(fed.params.w, p.w);
}

TEST(Federated, InvalidConfigRejected) {
  FedRoundConfig cfg;
  cfg.train.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.local_epochs = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Federated, MetricsCsv) {
  std::vector<RoundMetrics> rounds{{0, 1.0, 2.0, 1.5, 0}};
  std::ostringstream out;
  write_round_metrics_csv(out, rounds);
  EXPECT_EQ(out.str().substr(0, 36), "round,train_mse,val_mse,val_mae,clie");
}
