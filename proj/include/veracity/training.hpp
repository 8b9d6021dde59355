#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "veracity/checkpoint.hpp"
#include "veracity/corpus.hpp"
#include "veracity/metrics.hpp"
#include "veracity/model.hpp"
#include "veracity/optim.hpp"

namespace veracity {

// Defaults are the fine-tuning protocol: batch 32, Adam at 5e-5, 4 epochs,
// encoder dropout 0.1.
struct Hyperparams {
  int batch_size = 32;
  double learning_rate = 5e-5;
  int epochs = 4;
  double encoder_dropout = 0.1;
  double head_dropout = -1.0;  // negative: take it from the HeadConfig
  double warmup_fraction = 0.1;
  int max_len = kDefaultMaxLen;
  double clip_norm = 1.0;

  void validate() const {
    if (batch_size < 1) throw TrainingError("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw TrainingError("learning_rate must be positive");
    if (epochs < 1) throw TrainingError("epochs must be at least 1");
    if (encoder_dropout < 0.0 || encoder_dropout >= 1.0) throw TrainingError("encoder_dropout must lie in [0, 1)");
    if (head_dropout >= 1.0) throw TrainingError("head_dropout must be below 1");
    if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) throw TrainingError("warmup_fraction must lie in [0, 1)");
    if (max_len < 2) throw TrainingError("max_len must be at least 2");
    if (clip_norm < 0.0) throw TrainingError("clip_norm must be non-negative");
  }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

inline void to_json(nlohmann::json& j, const Hyperparams& h) {
  j = nlohmann::json{{"batch_size", h.batch_size},       {"learning_rate", h.learning_rate},
                     {"epochs", h.epochs},               {"encoder_dropout", h.encoder_dropout},
                     {"head_dropout", h.head_dropout},   {"warmup_fraction", h.warmup_fraction},
                     {"max_len", h.max_len},             {"clip_norm", h.clip_norm}};
}

inline void from_json(const nlohmann::json& j, Hyperparams& h) {
  h.batch_size = j.at("batch_size").get<int>();
  h.learning_rate = j.at("learning_rate").get<double>();
  h.epochs = j.at("epochs").get<int>();
  h.encoder_dropout = j.at("encoder_dropout").get<double>();
  h.head_dropout = j.at("head_dropout").get<double>();
  h.warmup_fraction = j.at("warmup_fraction").get<double>();
  h.max_len = j.at("max_len").get<int>();
  h.clip_norm = j.at("clip_norm").get<double>();
}

struct Prediction {
  int gold = 0;
  int predicted = 0;
  std::vector<double> probabilities;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct RunResult {
  std::uint64_t seed = 0;
  Regime regime;
  HeadKind head = HeadKind::cls;
  std::vector<Prediction> predictions;  // one per test example, bundle order
  Metrics metrics;
  std::vector<double> history;  // mean training loss per epoch
  std::uint64_t initial_checksum = 0;

  RunRecord record() const { return {std::string(regime.id()), std::string(head_id(head)), static_cast<std::int64_t>(seed), metrics}; }
};

inline PredictionSet prediction_set(const std::vector<Prediction>& preds, int num_classes) {
  PredictionSet ps;
  ps.num_classes = num_classes;
  for (const auto& p : preds) {
    ps.golds.push_back(p.gold);
    ps.preds.push_back(p.predicted);
  }
  return ps;
}

struct TrainedModel {
  Classifier model;
  RunResult result;
};

using EncoderFactory = std::function<TransformerEncoder(std::uint64_t seed)>;

inline std::vector<Prediction> predict_examples(const Classifier& model, const std::vector<Example>& examples,
                                                int max_len) {
  std::vector<Prediction> out;
  out.reserve(examples.size());
  for (const auto& x : examples) {
    const Eigen::RowVectorXd p = model.probabilities(model.encoder().tokenize(x.text, max_len));
    out.push_back({x.class_index, predict(p), std::vector<double>(p.data(), p.data() + p.size())});
  }
  return out;
}

inline RunResult evaluate_on_test(const Classifier& model, const DatasetBundle& bundle, int max_len) {
  RunResult r;
  r.regime = bundle.regime;
  r.head = model.head().config().kind;
  r.predictions = predict_examples(model, bundle.test, max_len);
  r.metrics = evaluate(prediction_set(r.predictions, bundle.regime.num_classes()));
  return r;
}

namespace detail {
enum TrainStream : std::uint64_t { kShuffle = 21, kDropout = 22 };
}

// Fine-tunes encoder, head and output layer jointly with cross-entropy, then
// evaluates once on the test split. Deterministic in (bundle, encoder, seed, hp).
inline TrainedModel train(const DatasetBundle& bundle, TransformerEncoder encoder, const HeadConfig& head_config,
                          const Hyperparams& hp, std::uint64_t seed) {
  hp.validate();
  Classifier model(std::move(encoder), head_config, bundle.regime.num_classes(), seed);
  auto params = model.parameters();
  const std::uint64_t initial_checksum = parameter_checksum(params);

  std::vector<TokenizedInput> inputs;
  inputs.reserve(bundle.train.size());
  for (const auto& x : bundle.train) inputs.push_back(model.encoder().tokenize(x.text, hp.max_len));

  const std::size_t n = bundle.train.size();
  if (n == 0) throw TrainingError("training split is empty");
  const std::size_t batches_per_epoch = (n + static_cast<std::size_t>(hp.batch_size) - 1) / static_cast<std::size_t>(hp.batch_size);
  const std::size_t total_steps = batches_per_epoch * static_cast<std::size_t>(hp.epochs);

  auto shuffle_rng = detail::make_rng(seed, detail::kShuffle);
  auto dropout_rng = detail::make_rng(seed, detail::kDropout);
  ForwardMode mode{&dropout_rng, hp.encoder_dropout, hp.head_dropout >= 0.0 ? hp.head_dropout : head_config.dropout};

  Adam optimizer(params);
  optimizer.zero_grad();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> history;
  std::size_t step = 0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const std::size_t begin = b * static_cast<std::size_t>(hp.batch_size);
      const std::size_t end = std::min(n, begin + static_cast<std::size_t>(hp.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t idx = order[i];
        ag::Graph g;
        const ag::Var loss = ag::cross_entropy(model.logits(g, inputs[idx], mode), bundle.train[idx].class_index);
        const double value = loss.value()(0, 0);
        if (!std::isfinite(value)) {
          std::ostringstream msg;
          msg << "non-finite loss at epoch " << epoch << ", batch " << b << ": " << value;
          throw TrainingError(msg.str());
        }
        epoch_loss += value;
        g.backward(loss, inv_batch);
      }
      clip_grad_norm(params, hp.clip_norm);
      optimizer.step(scheduled_lr(hp.learning_rate, step, total_steps, hp.warmup_fraction));
      optimizer.zero_grad();
      ++step;
    }
    history.push_back(epoch_loss / static_cast<double>(n));
  }

  RunResult result = evaluate_on_test(model, bundle, hp.max_len);
  result.seed = seed;
  result.history = std::move(history);
  result.initial_checksum = initial_checksum;
  return TrainedModel{std::move(model), std::move(result)};
}

struct MultiSeedOptions {
  int jobs = 1;
  // Called once per finished seed (serialised), e.g. to persist the run.
  std::function<void(TrainedModel&)> on_complete;
};

// One independent run per seed, each with a fresh encoder from the factory.
// Results come back sorted by seed. The first failure stops scheduling of
// further seeds and is rethrown once in-flight seeds finish.
inline std::vector<RunResult> multi_seed(const DatasetBundle& bundle, const EncoderFactory& factory,
                                         const HeadConfig& head_config, const Hyperparams& hp,
                                         const std::vector<std::uint64_t>& seeds, const MultiSeedOptions& options = {}) {
  if (seeds.empty()) throw TrainingError("multi_seed needs at least one seed");
  hp.validate();
  std::vector<RunResult> results(seeds.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex mu;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= seeds.size() || failed.load()) return;
      try {
        auto trained = train(bundle, factory(seeds[i]), head_config, hp, seeds[i]);
        std::lock_guard lock(mu);
        if (options.on_complete) options.on_complete(trained);
        results[i] = std::move(trained.result);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        if (!failed.exchange(true)) {
          error = std::make_exception_ptr(TrainingError("seed " + std::to_string(seeds[i]) + ": " + e.what()));
        }
      }
    }
  };

  const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(seeds.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  std::stable_sort(results.begin(), results.end(), [](const RunResult& a, const RunResult& b) { return a.seed < b.seed; });
  return results;
}

struct SearchResult {
  std::size_t best_index = 0;
  Hyperparams best;
  std::vector<double> scores;  // weighted F1 per grid entry
};

// Exhaustive grid search scored by weighted F1 on the dev bundle's test split.
// The dev bundle must use the search-only top-three/bottom-three regime. Ties
// go to the earlier grid entry.
inline SearchResult hyperparameter_search(const std::vector<Hyperparams>& grid, const DatasetBundle& dev_bundle,
                                          const EncoderFactory& factory, const HeadConfig& head_config,
                                          std::uint64_t seed = 0) {
  if (grid.empty()) throw TrainingError("hyperparameter grid is empty");
  if (dev_bundle.regime.kind() != RegimeKind::search_binary) {
    throw TrainingError("hyperparameter search runs on a search_binary bundle");
  }
  SearchResult out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto trained = train(dev_bundle, factory(seed), head_config, grid[i], seed);
    out.scores.push_back(trained.result.metrics.weighted_f1);
    if (i == 0 || out.scores[i] > out.scores[out.best_index]) out.best_index = i;
  }
  out.best = grid[out.best_index];
  return out;
}

}  // namespace veracity
