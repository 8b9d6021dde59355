#include <gtest/gtest.h>

#include <filesystem>
#include <limits>
#include <set>

#include "veracity/run_io.hpp"
#include "veracity/synthetic.hpp"
#include "veracity/training.hpp"

using namespace veracity;

namespace {

// Class 0 and class 1 draw from disjoint word pools.
DatasetBundle separable_bundle(int per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> pools[2] = {{"alpha", "beta", "gamma", "delta"}, {"omega", "psi", "chi", "phi"}};
  DatasetBundle b;
  b.regime = Regime::binary();
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < per_class; ++i) {
      std::string text;
      for (int w = 0; w < 5; ++w) text += pools[c][rng() % 4] + " ";
      Example x{"c" + std::to_string(c) + "_" + std::to_string(i), text, c};
      (i % 5 == 0 ? b.test : b.train).push_back(std::move(x));
    }
  }
  return b;
}

Hyperparams quick_hp() {
  Hyperparams hp;
  hp.batch_size = 16;
  hp.learning_rate = 1e-3;
  hp.epochs = 4;
  hp.max_len = 16;
  return hp;
}

EncoderFactory toy_factory() {
  return [](std::uint64_t seed) { return TransformerEncoder(toy_config(16, 1, seed)); };
}

}  // namespace

TEST(Schedule, WarmupThenLinearDecay) {
  EXPECT_DOUBLE_EQ(scheduled_lr(1.0, 0, 100, 0.1), 0.1);
  EXPECT_DOUBLE_EQ(scheduled_lr(1.0, 9, 100, 0.1), 1.0);
  EXPECT_DOUBLE_EQ(scheduled_lr(1.0, 10, 100, 0.1), 1.0);
  EXPECT_NEAR(scheduled_lr(1.0, 55, 100, 0.1), 0.5, 1e-12);
  EXPECT_GT(scheduled_lr(1.0, 99, 100, 0.1), 0.0);
  EXPECT_DOUBLE_EQ(scheduled_lr(2.0, 0, 10, 0.0), 2.0);
}

TEST(Clip, RescalesToMaxNorm) {
  ag::Parameter a("a", ag::Matrix::Zero(1, 2));
  a.grad << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(clip_grad_norm({&a}, 1.0), 5.0);
  EXPECT_NEAR(a.grad.norm(), 1.0, 1e-6);
  a.grad << 0.3, 0.4;
  clip_grad_norm({&a}, 1.0);
  EXPECT_DOUBLE_EQ(a.grad(0, 1), 0.4);
}

TEST(Hyperparams, Validation) {
  Hyperparams hp;
  EXPECT_NO_THROW(hp.validate());
  hp.epochs = 0;
  EXPECT_THROW(hp.validate(), TrainingError);
  hp = {};
  hp.learning_rate = 0.0;
  EXPECT_THROW(hp.validate(), TrainingError);
  hp = {};
  hp.batch_size = 0;
  EXPECT_THROW(hp.validate(), TrainingError);
  const auto bundle = separable_bundle(10, 0);
  Hyperparams zero_epochs = quick_hp();
  zero_epochs.epochs = 0;
  EXPECT_THROW(train(bundle, toy_factory()(0), HeadConfig::defaults(HeadKind::cls), zero_epochs, 0), TrainingError);
}

TEST(Train, FitsSeparableToyAndLossDrops) {
  const auto bundle = separable_bundle(100, 1);
  const auto trained = train(bundle, toy_factory()(0), HeadConfig::defaults(HeadKind::cls), quick_hp(), 0);
  const auto on_train = predict_examples(trained.model, bundle.train, 16);
  const double acc = accuracy(prediction_set(on_train, 2));
  EXPECT_GE(acc, 0.95);
  ASSERT_EQ(trained.result.history.size(), 4u);
  EXPECT_LT(trained.result.history.back(), trained.result.history.front());
  EXPECT_EQ(trained.result.predictions.size(), bundle.test.size());
  for (const auto& p : trained.result.predictions) {
    double s = 0.0;
    for (double q : p.probabilities) s += q;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Train, SameSeedIsDeterministic) {
  const auto bundle = separable_bundle(20, 2);
  auto hp = quick_hp();
  hp.epochs = 1;
  HeadConfig rnn = HeadConfig::defaults(HeadKind::recurrent);
  rnn.hidden = 4;
  const auto a = train(bundle, toy_factory()(3), rnn, hp, 3);
  const auto b = train(bundle, toy_factory()(3), rnn, hp, 3);
  EXPECT_EQ(a.result.metrics, b.result.metrics);
  EXPECT_EQ(a.result.predictions, b.result.predictions);
  EXPECT_EQ(a.result.history, b.result.history);
}

TEST(Train, NonFiniteLossAbortsWithDiagnostics) {
  const auto bundle = separable_bundle(10, 0);
  auto encoder = toy_factory()(0);
  encoder.parameters()[0]->value.setConstant(std::numeric_limits<double>::quiet_NaN());
  try {
    train(bundle, std::move(encoder), HeadConfig::defaults(HeadKind::cls), quick_hp(), 0);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch 0"), std::string::npos) << msg;
  }
}

TEST(Train, CheckpointRoundTripReproducesMetrics) {
  const auto bundle = separable_bundle(20, 4);
  auto hp = quick_hp();
  hp.epochs = 1;
  HeadConfig cnn = HeadConfig::defaults(HeadKind::conv);
  cnn.region_sizes = {2, 3};
  cnn.feature_maps = 6;
  auto trained = train(bundle, toy_factory()(5), cnn, hp, 5);
  const auto dir = std::filesystem::temp_directory_path() / "veracity_ckpt_rt";
  std::filesystem::remove_all(dir);
  write_run(dir, trained, cnn, RunContext{hp, "x", "toy"});
  const Classifier loaded = load_classifier(dir);
  const auto again = evaluate_on_test(loaded, bundle, hp.max_len);
  EXPECT_EQ(again.metrics, trained.result.metrics);
  EXPECT_EQ(again.predictions, trained.result.predictions);
  const auto stored = read_run(dir);
  EXPECT_EQ(stored.record().metrics, trained.result.metrics);
  EXPECT_EQ(stored.predictions, trained.result.predictions);
  std::filesystem::remove_all(dir);
}

TEST(MultiSeed, OneResultPerSeedSortedAndIndependent) {
  const auto bundle = separable_bundle(10, 6);
  auto hp = quick_hp();
  hp.epochs = 1;
  MultiSeedOptions opt;
  opt.jobs = 3;
  int callbacks = 0;
  opt.on_complete = [&](TrainedModel&) { ++callbacks; };
  const auto results = multi_seed(bundle, toy_factory(), HeadConfig::defaults(HeadKind::cls), hp, {4, 2, 0, 3, 1}, opt);
  ASSERT_EQ(results.size(), 5u);
  EXPECT_EQ(callbacks, 5);
  std::set<std::uint64_t> checksums;
  for (std::size_t i = 0; i < results.size(); ++i) {
    EXPECT_EQ(results[i].seed, i);
    checksums.insert(results[i].initial_checksum);
  }
  EXPECT_EQ(checksums.size(), 5u);
}

TEST(MultiSeed, RepeatedSeedGivesIdenticalResults) {
  const auto bundle = separable_bundle(10, 7);
  auto hp = quick_hp();
  hp.epochs = 1;
  const auto r = multi_seed(bundle, toy_factory(), HeadConfig::defaults(HeadKind::cls), hp, {0, 0}, {2, {}});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].metrics, r[1].metrics);
  EXPECT_EQ(r[0].predictions, r[1].predictions);
  EXPECT_THROW(multi_seed(bundle, toy_factory(), HeadConfig::defaults(HeadKind::cls), hp, {}), TrainingError);
}

TEST(Search, GridRulesAndRegime) {
  SyntheticConfig cfg;
  cfg.per_label = 20;
  const auto statements = synthetic_corpus(cfg);
  const auto dev = build_regime_dataset(statements, Regime::search_binary(), 0, 0.2);
  auto hp = quick_hp();
  hp.epochs = 1;
  const auto one = hyperparameter_search({hp}, dev, toy_factory(), HeadConfig::defaults(HeadKind::cls));
  EXPECT_EQ(one.best_index, 0u);
  EXPECT_EQ(one.best, hp);
  // Identical configurations score identically; the first one wins.
  auto twin = hp;
  const auto tie = hyperparameter_search({hp, twin}, dev, toy_factory(), HeadConfig::defaults(HeadKind::cls));
  EXPECT_EQ(tie.scores[0], tie.scores[1]);
  EXPECT_EQ(tie.best_index, 0u);
  EXPECT_THROW(hyperparameter_search({}, dev, toy_factory(), HeadConfig::defaults(HeadKind::cls)), TrainingError);
  const auto fine = build_regime_dataset(statements, Regime::fine(), 0, 0.2);
  EXPECT_THROW(hyperparameter_search({hp}, fine, toy_factory(), HeadConfig::defaults(HeadKind::cls)), TrainingError);
}
