#pragma once

// Command surface: build-data, train, report, analyze.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "veracity/bundle_io.hpp"
#include "veracity/metrics.hpp"
#include "veracity/run_io.hpp"
#include "veracity/training.hpp"

namespace veracity::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct BuildDataOptions {
  std::string input;
  std::string format;  // empty: from the file extension
  std::string regime = "fine";
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  std::string out;
};

struct TrainOptions {
  std::string bundle;
  std::string head = "cls";
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::string encoder = "toy";
  std::string encoder_dir;
  std::string runs = "runs";
  bool force = false;
  int jobs = 1;
  Hyperparams hp;
  int toy_d = 32;
  int toy_layers = 2;
  int hidden = 0;
  std::vector<int> regions = {7, 7, 7, 7};
  int feature_maps = 768;
};

struct ReportOptions {
  std::vector<std::string> runs;
  std::string out = ".";
};

struct AnalyzeOptions {
  std::string runs;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::string regime;
  std::string head;
  std::string out = ".";
};

namespace detail {

inline int regime_order(const std::string& r) {
  static const std::vector<std::string> order = {"fine", "coarse", "binary", "search_binary"};
  return static_cast<int>(std::find(order.begin(), order.end(), r) - order.begin());
}

inline int head_order(const std::string& h) {
  static const std::vector<std::string> order = {"cls", "rnn", "cnn"};
  return static_cast<int>(std::find(order.begin(), order.end(), h) - order.begin());
}

inline std::string stats_block(const DatasetBundle& b) {
  const auto names = b.regime.class_names();
  const auto train = class_counts(b.train, b.regime.num_classes());
  const auto test = class_counts(b.test, b.regime.num_classes());
  std::ostringstream os;
  os << "regime: " << b.regime.id() << " (" << b.regime.num_classes() << " classes)\n"
     << "input statements: " << b.provenance.input_total << "\n"
     << "neutral-band dropped: " << b.provenance.filtered_out << "\n"
     << std::left << std::setw(14) << "class" << std::right << std::setw(10) << "before" << std::setw(10) << "after"
     << std::setw(10) << "train" << std::setw(10) << "test" << "\n";
  for (std::size_t c = 0; c < names.size(); ++c) {
    os << std::left << std::setw(14) << names[c] << std::right << std::setw(10) << b.provenance.before[c]
       << std::setw(10) << b.provenance.after[c] << std::setw(10) << train[c] << std::setw(10) << test[c] << "\n";
  }
  os << "total: train " << b.train.size() << ", test " << b.test.size() << "\n";
  return os.str();
}

inline std::string pct(const MeanStd& m) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << 100.0 * m.mean << " (" << 100.0 * m.std << ")";
  return os.str();
}

inline std::string plain(const MeanStd& m) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << m.mean << " (" << m.std << ")";
  return os.str();
}

}  // namespace detail

inline int build_data(const BuildDataOptions& o, std::ostream& out, std::ostream& err) {
  std::string format = o.format;
  if (format.empty()) format = fs::path(o.input).extension() == ".csv" ? "csv" : "jsonl";
  if (format != "jsonl" && format != "csv") {
    err << "error: unknown dump format '" << format << "'\n";
    return kExitUsage;
  }
  std::ifstream in(o.input, std::ios::binary);
  if (!in) {
    err << "error: cannot open " << o.input << "\n";
    return kExitFailure;
  }
  const auto parsed = parse_dump(in, format == "csv" ? DumpFormat::csv : DumpFormat::jsonl);
  for (const auto& e : parsed.unknown_ratings) err << "skipped line " << e.line << ": " << e.message << "\n";
  for (const auto& e : parsed.duplicates) err << "warning line " << e.line << ": " << e.message << "\n";
  for (const auto& e : parsed.errors) err << "error line " << e.line << ": " << e.message << "\n";
  if (!parsed.errors.empty()) {
    err << "error: " << parsed.errors.size() << " malformed record(s) in " << o.input << "\n";
    return kExitFailure;
  }
  const auto bundle = build_regime_dataset(parsed.statements, parse_regime(o.regime), o.seed, o.test_fraction);
  fs::create_directories(o.out);
  save_bundle(bundle, fs::path(o.out) / "bundle.jsonl");
  std::ostringstream stats;
  stats << "parsed: " << parsed.statements.size() << " statements, " << parsed.unknown_ratings.size()
        << " unknown ratings skipped, " << parsed.duplicates.size() << " duplicate ids rejected\n"
        << detail::stats_block(bundle);
  veracity::detail::write_text(fs::path(o.out) / "stats.txt", stats.str());
  out << stats.str();
  return kExitOk;
}

inline int train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  const auto bundle = load_bundle(o.bundle);
  HeadConfig head = HeadConfig::defaults(parse_head(o.head));
  head.hidden = o.hidden;
  head.region_sizes = o.regions;
  head.feature_maps = o.feature_maps;
  head.validate();

  for (auto seed : o.seeds) {
    const auto dir = run_directory(o.runs, bundle.regime, head.kind, seed);
    if (fs::exists(dir) && !o.force) {
      err << "error: run directory " << dir.string() << " exists; pass --force to overwrite\n";
      return kExitFailure;
    }
  }

  EncoderFactory factory;
  if (o.encoder == "toy") {
    factory = [d = o.toy_d, layers = o.toy_layers](std::uint64_t seed) {
      return TransformerEncoder(toy_config(d, layers, seed));
    };
  } else if (o.encoder == "reference") {
    if (o.encoder_dir.empty()) {
      err << "error: --encoder reference needs --encoder-dir with encoder.json and encoder.bin\n";
      return kExitUsage;
    }
    const TransformerEncoder pretrained = load_encoder(o.encoder_dir);
    factory = [pretrained](std::uint64_t) { return pretrained; };
  } else {
    err << "error: unknown encoder '" << o.encoder << "'\n";
    return kExitUsage;
  }

  RunContext ctx{o.hp, bundle_checksum(bundle), o.encoder};
  MultiSeedOptions ms;
  ms.jobs = o.jobs;
  ms.on_complete = [&](TrainedModel& trained) {
    const auto dir = run_directory(o.runs, bundle.regime, head.kind, trained.result.seed);
    if (fs::exists(dir)) fs::remove_all(dir);
    write_run(dir, trained, head, ctx);
    out << "seed " << trained.result.seed << ": weighted F1 " << std::fixed << std::setprecision(4)
        << trained.result.metrics.weighted_f1 << ", accuracy " << trained.result.metrics.accuracy << ", MAE "
        << trained.result.metrics.mae << " -> " << dir.string() << "\n";
  };
  multi_seed(bundle, factory, head, o.hp, o.seeds, ms);
  return kExitOk;
}

inline int report(const ReportOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<RunRecord> records;
  for (const auto& root : o.runs) {
    for (const auto& dir : find_runs(root)) records.push_back(read_run(dir).record());
  }
  if (records.empty()) {
    err << "error: no runs found under the given directories\n";
    return kExitFailure;
  }
  std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tuple(detail::regime_order(a.regime), detail::head_order(a.head), a.seed) <
           std::tuple(detail::regime_order(b.regime), detail::head_order(b.head), b.seed);
  });
  std::vector<AggregateReport> reports;
  for (std::size_t i = 0; i < records.size();) {
    std::size_t j = i;
    while (j < records.size() && records[j].regime == records[i].regime && records[j].head == records[i].head) ++j;
    reports.push_back(aggregate({records.begin() + static_cast<std::ptrdiff_t>(i),
                                 records.begin() + static_cast<std::ptrdiff_t>(j)}));
    i = j;
  }

  fs::create_directories(o.out);
  std::ostringstream metrics_csv, aggregate_csv;
  write_metrics_csv(metrics_csv, records);
  write_aggregate_csv(aggregate_csv, reports);
  veracity::detail::write_text(fs::path(o.out) / "metrics.csv", metrics_csv.str());
  veracity::detail::write_text(fs::path(o.out) / "aggregate.csv", aggregate_csv.str());

  out << std::left << std::setw(15) << "regime" << std::setw(6) << "head" << std::setw(7) << "seeds" << std::setw(16)
      << "weighted F1" << std::setw(16) << "accuracy" << "MAE\n";
  for (const auto& r : reports) {
    out << std::left << std::setw(15) << r.regime << std::setw(6) << r.head << std::setw(7) << r.seeds
        << std::setw(16) << detail::pct(r.weighted_f1) << std::setw(16) << detail::pct(r.accuracy)
        << detail::plain(r.mae) << "\n";
  }
  return kExitOk;
}

inline int analyze(const AnalyzeOptions& o, std::ostream& out, std::ostream& err) {
  std::map<std::pair<std::string, std::string>, std::map<std::uint64_t, StoredRun>> groups;
  for (const auto& dir : find_runs(o.runs)) {
    auto run = read_run(dir);
    if (!o.regime.empty() && run.regime.id() != o.regime) continue;
    if (!o.head.empty() && head_id(run.head) != o.head) continue;
    auto& g = groups[{std::string(run.regime.id()), std::string(head_id(run.head))}];
    if (g.count(run.seed)) {
      err << "error: seed " << run.seed << " appears twice for " << run.regime.id() << "/" << head_id(run.head) << "\n";
      return kExitFailure;
    }
    g.emplace(run.seed, std::move(run));
  }
  if (groups.empty()) {
    err << "error: no runs found under " << o.runs << "\n";
    return kExitFailure;
  }
  const std::set<std::uint64_t> wanted(o.seeds.begin(), o.seeds.end());
  fs::create_directories(o.out);
  for (const auto& [key, runs] : groups) {
    std::set<std::uint64_t> have;
    for (const auto& [seed, _] : runs) have.insert(seed);
    std::vector<std::uint64_t> missing;
    std::set_difference(wanted.begin(), wanted.end(), have.begin(), have.end(), std::back_inserter(missing));
    if (!missing.empty()) {
      err << "error: " << key.first << "/" << key.second << " has no run for seed " << missing.front() << "\n";
      return kExitFailure;
    }
    std::vector<DistributionMatrix> per_seed;
    for (auto seed : wanted) per_seed.push_back(distribution_matrix(runs.at(seed).prediction_set()));
    const auto avg = average_distribution(per_seed);
    const auto stem = "distribution_" + key.first + "_" + key.second;
    std::ostringstream csv, svg;
    write_distribution_csv(csv, avg);
    const auto labels = parse_regime(key.first).class_names();
    write_heatmap_svg(svg, avg, labels,
                      "Normalized distribution of predictions (" + key.first + ", " + key.second + ", " +
                          std::to_string(wanted.size()) + " seeds)");
    veracity::detail::write_text(fs::path(o.out) / (stem + ".csv"), csv.str());
    veracity::detail::write_text(fs::path(o.out) / (stem + ".svg"), svg.str());
    out << key.first << "/" << key.second << ": averaged " << wanted.size() << " seeds -> " << stem << ".csv\n";
    if (avg.rows() >= 3) {
      print_decay_report(out, distance_decay_check(avg));
    } else {
      out << "distance-decay check skipped (needs at least 3 classes)\n";
    }
  }
  return kExitOk;
}

// Entry point shared by the executable and the tests.
inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Ordinal truthfulness classification pipeline", "veracity"};
  app.set_config("--config", "", "TOML/INI file with flag values; command-line flags take precedence");
  app.require_subcommand(1);

  BuildDataOptions bd;
  auto* build_cmd = app.add_subcommand("build-data", "Build a balanced, split regime dataset from a dump");
  build_cmd->add_option("--input", bd.input, "Rated-statement dump (.jsonl or .csv)")->required();
  build_cmd->add_option("--format", bd.format, "jsonl or csv (default: from extension)");
  build_cmd->add_option("--regime", bd.regime, "fine, coarse, binary or search_binary")
      ->check(CLI::IsMember({"fine", "coarse", "binary", "search_binary"}));
  build_cmd->add_option("--seed", bd.seed, "Seed for balancing and splitting");
  build_cmd->add_option("--test-fraction", bd.test_fraction, "Per-class test fraction")->check(CLI::Range(0.0, 1.0));
  build_cmd->add_option("--out", bd.out, "Output directory")->required();

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Fine-tune encoder + head for one or more seeds");
  train_cmd->add_option("--bundle", tr.bundle, "Bundle file from build-data")->required();
  train_cmd->add_option("--head", tr.head, "cls, rnn or cnn")->check(CLI::IsMember({"cls", "rnn", "cnn"}));
  train_cmd->add_option("--seeds", tr.seeds, "Comma-separated seeds")->delimiter(',');
  train_cmd->add_option("--encoder", tr.encoder, "toy or reference")->check(CLI::IsMember({"toy", "reference"}));
  train_cmd->add_option("--encoder-dir", tr.encoder_dir, "Directory with encoder.json + encoder.bin (reference)");
  train_cmd->add_option("--runs", tr.runs, "Run root directory")->envname("VERACITY_RUNS_DIR");
  train_cmd->add_flag("--force", tr.force, "Overwrite existing run directories");
  train_cmd->add_option("--jobs", tr.jobs, "Seeds trained in parallel")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch-size", tr.hp.batch_size);
  train_cmd->add_option("--lr", tr.hp.learning_rate);
  train_cmd->add_option("--epochs", tr.hp.epochs);
  train_cmd->add_option("--max-len", tr.hp.max_len);
  train_cmd->add_option("--warmup", tr.hp.warmup_fraction);
  train_cmd->add_option("--encoder-dropout", tr.hp.encoder_dropout);
  train_cmd->add_option("--head-dropout", tr.hp.head_dropout, "Default: 0.1 for cls, 0.5 for rnn/cnn");
  train_cmd->add_option("--clip-norm", tr.hp.clip_norm);
  train_cmd->add_option("--toy-d", tr.toy_d, "Toy encoder width");
  train_cmd->add_option("--toy-layers", tr.toy_layers, "Toy encoder depth");
  train_cmd->add_option("--hidden", tr.hidden, "Recurrent hidden size (default: encoder width)");
  train_cmd->add_option("--regions", tr.regions, "Conv region sizes")->delimiter(',');
  train_cmd->add_option("--feature-maps", tr.feature_maps, "Conv feature maps per region size");

  ReportOptions rp;
  auto* report_cmd = app.add_subcommand("report", "Aggregate per-seed metrics into CSV and a text table");
  report_cmd->add_option("--runs", rp.runs, "Run directories to scan")->required()->expected(1, -1);
  report_cmd->add_option("--out", rp.out, "Output directory for metrics.csv and aggregate.csv");

  AnalyzeOptions an;
  auto* analyze_cmd = app.add_subcommand("analyze", "Seed-averaged prediction distributions and decay check");
  analyze_cmd->add_option("--runs", an.runs, "Run directory to scan")->required();
  analyze_cmd->add_option("--seeds", an.seeds, "Seeds to average")->delimiter(',');
  analyze_cmd->add_option("--regime", an.regime, "Only this regime");
  analyze_cmd->add_option("--head", an.head, "Only this head");
  analyze_cmd->add_option("--out", an.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << (e.get_name() == "RequiredError" || e.get_name() == "ValidationError" ? "usage error: " : "error: ")
        << e.what() << "\n";
    auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed() && tr.seeds.empty()) {
      err << "usage error: --seeds must not be empty\n";
      return kExitUsage;
    }
    if (build_cmd->parsed()) return build_data(bd, out, err);
    if (train_cmd->parsed()) return train(tr, out, err);
    if (report_cmd->parsed()) return report(rp, out, err);
    if (analyze_cmd->parsed()) return analyze(an, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace veracity::cli
