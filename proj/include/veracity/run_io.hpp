#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "veracity/checkpoint.hpp"
#include "veracity/training.hpp"

namespace veracity {

namespace fs = std::filesystem;

// runs/<regime>/<head>/<seed>/
inline fs::path run_directory(const fs::path& root, Regime regime, HeadKind head, std::uint64_t seed) {
  return root / std::string(regime.id()) / std::string(head_id(head)) / std::to_string(seed);
}

struct RunContext {
  Hyperparams hp;
  std::string bundle_checksum;
  std::string encoder_kind = "toy";
};

namespace detail {

inline void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed for " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string exact(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

}  // namespace detail

inline void write_predictions_csv(std::ostream& os, const std::vector<Prediction>& preds, int num_classes) {
  os << "gold,predicted";
  for (int k = 0; k < num_classes; ++k) os << ",p_" << k;
  os << '\n';
  for (const auto& p : preds) {
    os << p.gold << ',' << p.predicted;
    for (double q : p.probabilities) os << ',' << detail::exact(q);
    os << '\n';
  }
}

inline std::vector<Prediction> read_predictions_csv(std::istream& in, int num_classes) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("gold,predicted", 0) != 0) {
    throw LoadError("predictions CSV has an unexpected header");
  }
  std::vector<Prediction> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (static_cast<int>(f.size()) != 2 + num_classes) throw LoadError("predictions CSV row has the wrong width");
    Prediction p;
    p.gold = static_cast<int>(detail::parse_double(f[0]));
    p.predicted = static_cast<int>(detail::parse_double(f[1]));
    double sum = 0.0;
    for (int k = 0; k < num_classes; ++k) {
      p.probabilities.push_back(detail::parse_double(f[static_cast<std::size_t>(2 + k)]));
      sum += p.probabilities.back();
    }
    if (p.gold < 0 || p.gold >= num_classes || p.predicted < 0 || p.predicted >= num_classes) {
      throw LoadError("predictions CSV class index out of range");
    }
    if (std::abs(sum - 1.0) > 1e-6) throw LoadError("predictions CSV probabilities do not sum to 1");
    out.push_back(std::move(p));
  }
  return out;
}

// Encoder manifest {d, num_layers, vocab_size, max_positions, seed, ...} plus
// an enc.* parameter blob. This is also how a converted pretrained encoder is
// supplied.
inline void save_encoder(TransformerEncoder& encoder, const fs::path& dir) {
  fs::create_directories(dir);
  detail::write_text(dir / "encoder.json", nlohmann::json(encoder.config()).dump(2) + "\n");
  save_parameters(encoder.parameters(), dir / "encoder.bin");
}

inline TransformerEncoder load_encoder(const fs::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(detail::read_text(dir / "encoder.json"));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("bad encoder manifest: ") + e.what());
  }
  TransformerEncoder encoder(manifest.get<EncoderConfig>());
  load_parameters(encoder.parameters(), dir / "encoder.bin");
  return encoder;
}

inline void write_run(const fs::path& dir, TrainedModel& trained, const HeadConfig& head_config, const RunContext& ctx) {
  fs::create_directories(dir);
  const auto& r = trained.result;
  const int k = r.regime.num_classes();

  nlohmann::ordered_json manifest;
  manifest["regime"] = r.regime.id();
  manifest["head"] = head_id(r.head);
  manifest["seed"] = r.seed;
  manifest["class_names"] = r.regime.class_names();
  manifest["encoder_kind"] = ctx.encoder_kind;
  manifest["encoder"] = nlohmann::json(trained.model.encoder().config());
  manifest["head_config"] = nlohmann::json(head_config);
  manifest["hyperparams"] = nlohmann::json(ctx.hp);
  manifest["bundle_checksum"] = ctx.bundle_checksum;
  manifest["initial_parameter_checksum"] = std::to_string(r.initial_checksum);
  manifest["test_examples"] = r.predictions.size();
  detail::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  detail::write_text(dir / "encoder.json", nlohmann::json(trained.model.encoder().config()).dump(2) + "\n");
  detail::write_text(dir / "head.json", nlohmann::json(head_config).dump(2) + "\n");
  save_parameters(trained.model.parameters(), dir / "checkpoint.bin");

  std::ostringstream preds;
  write_predictions_csv(preds, r.predictions, k);
  detail::write_text(dir / "predictions.csv", preds.str());

  std::ostringstream hist;
  hist << "epoch,loss\n";
  for (std::size_t e = 0; e < r.history.size(); ++e) hist << e + 1 << ',' << detail::exact(r.history[e]) << '\n';
  detail::write_text(dir / "history.csv", hist.str());
}

struct StoredRun {
  fs::path dir;
  Regime regime;
  HeadKind head = HeadKind::cls;
  std::uint64_t seed = 0;
  std::vector<Prediction> predictions;

  PredictionSet prediction_set() const { return veracity::prediction_set(predictions, regime.num_classes()); }
  RunRecord record() const {
    return {std::string(regime.id()), std::string(head_id(head)), static_cast<std::int64_t>(seed),
            evaluate(prediction_set())};
  }
};

inline StoredRun read_run(const fs::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(detail::read_text(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(dir.string() + ": bad manifest: " + e.what());
  }
  StoredRun run;
  run.dir = dir;
  run.regime = parse_regime(manifest.at("regime").get<std::string>());
  run.head = parse_head(manifest.at("head").get<std::string>());
  run.seed = manifest.at("seed").get<std::uint64_t>();
  std::istringstream preds(detail::read_text(dir / "predictions.csv"));
  run.predictions = read_predictions_csv(preds, run.regime.num_classes());
  if (run.predictions.empty()) throw LoadError(dir.string() + ": no predictions");
  return run;
}

// Rebuilds the trained classifier stored in a run directory.
inline Classifier load_classifier(const fs::path& dir) {
  const auto manifest = nlohmann::json::parse(detail::read_text(dir / "manifest.json"));
  const auto enc_config = nlohmann::json::parse(detail::read_text(dir / "encoder.json")).get<EncoderConfig>();
  const auto head_config = nlohmann::json::parse(detail::read_text(dir / "head.json")).get<HeadConfig>();
  const auto regime = parse_regime(manifest.at("regime").get<std::string>());
  Classifier model(TransformerEncoder(enc_config), head_config, regime.num_classes(),
                   manifest.at("seed").get<std::uint64_t>());
  load_parameters(model.parameters(), dir / "checkpoint.bin");
  return model;
}

// Every directory below `root` (inclusive) holding a manifest.json, sorted.
inline std::vector<fs::path> find_runs(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::exists(root)) return out;
  if (fs::exists(root / "manifest.json")) out.push_back(root);
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace veracity
