#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "veracity/error.hpp"

namespace veracity {

struct PredictionSet {
  std::vector<int> golds;
  std::vector<int> preds;
  int num_classes = 0;

  void validate() const {
    if (num_classes < 1) throw MetricError("prediction set needs at least one class");
    if (golds.empty()) throw MetricError("prediction set is empty");
    if (golds.size() != preds.size()) throw MetricError("golds and preds differ in length");
    for (std::size_t i = 0; i < golds.size(); ++i) {
      if (golds[i] < 0 || golds[i] >= num_classes || preds[i] < 0 || preds[i] >= num_classes) {
        throw MetricError("class index out of range at position " + std::to_string(i));
      }
    }
  }
};

// Per-class F1 weighted by gold support. A zero denominator in precision or
// recall makes that term 0.
inline double weighted_f1(const PredictionSet& ps) {
  ps.validate();
  const auto k = static_cast<std::size_t>(ps.num_classes);
  std::vector<double> tp(k, 0.0), predicted(k, 0.0), support(k, 0.0);
  for (std::size_t i = 0; i < ps.golds.size(); ++i) {
    const auto g = static_cast<std::size_t>(ps.golds[i]);
    const auto p = static_cast<std::size_t>(ps.preds[i]);
    support[g] += 1.0;
    predicted[p] += 1.0;
    if (g == p) tp[g] += 1.0;
  }
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double precision = predicted[c] > 0.0 ? tp[c] / predicted[c] : 0.0;
    const double recall = support[c] > 0.0 ? tp[c] / support[c] : 0.0;
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    total += f1 * support[c];
  }
  return total / static_cast<double>(ps.golds.size());
}

inline double accuracy(const PredictionSet& ps) {
  ps.validate();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ps.golds.size(); ++i) hits += ps.golds[i] == ps.preds[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ps.golds.size());
}

// Mean |pred - gold| with class indices read as ordinal ranks.
inline double mae(const PredictionSet& ps) {
  ps.validate();
  double sum = 0.0;
  for (std::size_t i = 0; i < ps.golds.size(); ++i) sum += std::abs(ps.preds[i] - ps.golds[i]);
  return sum / static_cast<double>(ps.golds.size());
}

struct Metrics {
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  double mae = 0.0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

inline Metrics evaluate(const PredictionSet& ps) { return {weighted_f1(ps), accuracy(ps), mae(ps)}; }

// Row-normalised confusion matrix: (g, p) is the share of gold-g examples
// predicted as p.
using DistributionMatrix = Eigen::MatrixXd;

inline DistributionMatrix distribution_matrix(const PredictionSet& ps) {
  ps.validate();
  const Eigen::Index k = ps.num_classes;
  DistributionMatrix m = DistributionMatrix::Zero(k, k);
  for (std::size_t i = 0; i < ps.golds.size(); ++i) m(ps.golds[i], ps.preds[i]) += 1.0;
  for (Eigen::Index g = 0; g < k; ++g) {
    const double n = m.row(g).sum();
    if (n == 0.0) throw MetricError("gold class " + std::to_string(g) + " has no examples");
    m.row(g) /= n;
  }
  return m;
}

// Elementwise mean of per-seed matrices.
inline DistributionMatrix average_distribution(const std::vector<DistributionMatrix>& ms) {
  if (ms.empty()) throw MetricError("no matrices to average");
  DistributionMatrix acc = DistributionMatrix::Zero(ms.front().rows(), ms.front().cols());
  for (const auto& m : ms) {
    if (m.rows() != acc.rows() || m.cols() != acc.cols()) throw MetricError("matrix shapes differ");
    acc += m;
  }
  return acc / static_cast<double>(ms.size());
}

struct DecayReport {
  std::vector<int> row_violations;  // per gold row
  int total_violations = 0;
  std::vector<double> diagonal;
  bool extremes_above_interior = false;  // classes 0 and K-1 beat every class in between
  bool extremes_above_center = false;    // ... beat the middle class(es)
};

// Checks that each row decays with distance from its gold class on both
// sides. A violation is any step away from the diagonal where the share grows.
inline DecayReport distance_decay_check(const DistributionMatrix& m) {
  const Eigen::Index k = m.rows();
  if (k < 3 || m.cols() != k) throw MetricError("distance decay check needs a square matrix with K >= 3");
  DecayReport r;
  r.row_violations.assign(static_cast<std::size_t>(k), 0);
  for (Eigen::Index g = 0; g < k; ++g) {
    int v = 0;
    for (Eigen::Index p = g; p + 1 < k; ++p) v += m(g, p + 1) > m(g, p) ? 1 : 0;
    for (Eigen::Index p = g; p - 1 >= 0; --p) v += m(g, p - 1) > m(g, p) ? 1 : 0;
    r.row_violations[static_cast<std::size_t>(g)] = v;
    r.total_violations += v;
    r.diagonal.push_back(m(g, g));
  }
  const double weakest_extreme = std::min(m(0, 0), m(k - 1, k - 1));
  double interior = 0.0;
  for (Eigen::Index g = 1; g + 1 < k; ++g) interior = std::max(interior, m(g, g));
  r.extremes_above_interior = weakest_extreme > interior;
  const double center = k % 2 == 0 ? std::max(m(k / 2 - 1, k / 2 - 1), m(k / 2, k / 2)) : m(k / 2, k / 2);
  r.extremes_above_center = weakest_extreme > center;
  return r;
}

inline void print_decay_report(std::ostream& os, const DecayReport& r) {
  os << "distance-decay check\n";
  for (std::size_t g = 0; g < r.row_violations.size(); ++g) {
    os << "  gold " << g << ": diagonal " << std::fixed << std::setprecision(4) << r.diagonal[g] << ", "
       << r.row_violations[g] << (r.row_violations[g] == 1 ? " violation\n" : " violations\n");
  }
  os << "  total violations: " << r.total_violations << "\n"
     << "  extremes above interior: " << (r.extremes_above_interior ? "yes" : "no") << "\n"
     << "  extremes above center: " << (r.extremes_above_center ? "yes" : "no") << "\n";
}

// --- multi-seed aggregation --------------------------------------------------

struct RunRecord {
  std::string regime;
  std::string head;
  std::int64_t seed = 0;
  Metrics metrics;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct AggregateReport {
  std::string regime;
  std::string head;
  std::size_t seeds = 0;
  MeanStd weighted_f1, accuracy, mae;
};

// Mean and population standard deviation (divide by n).
inline MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) throw MetricError("mean of an empty list");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

inline AggregateReport aggregate(const std::vector<RunRecord>& runs) {
  if (runs.empty()) throw MetricError("nothing to aggregate");
  AggregateReport out;
  out.regime = runs.front().regime;
  out.head = runs.front().head;
  out.seeds = runs.size();
  std::vector<double> f1, acc, err;
  for (const auto& r : runs) {
    if (r.regime != out.regime) throw MetricError("cannot aggregate runs from regimes " + out.regime + " and " + r.regime);
    if (r.head != out.head) throw MetricError("cannot aggregate runs from heads " + out.head + " and " + r.head);
    f1.push_back(r.metrics.weighted_f1);
    acc.push_back(r.metrics.accuracy);
    err.push_back(r.metrics.mae);
  }
  out.weighted_f1 = mean_std(f1);
  out.accuracy = mean_std(acc);
  out.mae = mean_std(err);
  return out;
}

// --- CSV -------------------------------------------------------------------

namespace detail {

inline std::string fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw MetricError("not a number: '" + s + "'");
  return v;
}

}  // namespace detail

inline void write_metrics_csv(std::ostream& os, const std::vector<RunRecord>& runs) {
  os << "regime,head,seed,weighted_f1,accuracy,mae\n";
  for (const auto& r : runs) {
    os << r.regime << ',' << r.head << ',' << r.seed << ',' << detail::fixed(r.metrics.weighted_f1, 6) << ','
       << detail::fixed(r.metrics.accuracy, 6) << ',' << detail::fixed(r.metrics.mae, 6) << '\n';
  }
}

inline void write_aggregate_csv(std::ostream& os, const std::vector<AggregateReport>& reports) {
  os << "regime,head,seeds,weighted_f1_mean,weighted_f1_std,accuracy_mean,accuracy_std,mae_mean,mae_std\n";
  for (const auto& r : reports) {
    os << r.regime << ',' << r.head << ',' << r.seeds << ',' << detail::fixed(r.weighted_f1.mean, 6) << ','
       << detail::fixed(r.weighted_f1.std, 6) << ',' << detail::fixed(r.accuracy.mean, 6) << ','
       << detail::fixed(r.accuracy.std, 6) << ',' << detail::fixed(r.mae.mean, 6) << ','
       << detail::fixed(r.mae.std, 6) << '\n';
  }
}

inline std::vector<RunRecord> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "regime,head,seed,weighted_f1,accuracy,mae") {
    throw MetricError("metrics CSV has an unexpected header");
  }
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 6) throw MetricError("metrics CSV row has " + std::to_string(f.size()) + " fields");
    RunRecord r{f[0], f[1], static_cast<std::int64_t>(detail::parse_double(f[2])),
                {detail::parse_double(f[3]), detail::parse_double(f[4]), detail::parse_double(f[5])}};
    if (r.metrics.weighted_f1 < 0.0 || r.metrics.weighted_f1 > 1.0 || r.metrics.accuracy < 0.0 ||
        r.metrics.accuracy > 1.0 || r.metrics.mae < 0.0) {
      throw MetricError("metrics CSV row out of range");
    }
    out.push_back(std::move(r));
  }
  return out;
}

// K rows of K comma-separated values, 6-decimal fixed point.
inline void write_distribution_csv(std::ostream& os, const DistributionMatrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? "," : "") << detail::fixed(m(r, c), 6);
    os << '\n';
  }
}

// Re-reads a distribution CSV and checks that it is row-stochastic up to the
// 6-decimal rounding of the file.
inline DistributionMatrix read_distribution_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& f : detail::split_csv_line(line)) row.push_back(detail::parse_double(f));
    rows.push_back(std::move(row));
  }
  const auto k = static_cast<Eigen::Index>(rows.size());
  if (k == 0) throw MetricError("distribution CSV is empty");
  DistributionMatrix m(k, k);
  for (Eigen::Index r = 0; r < k; ++r) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != k) {
      throw MetricError("distribution CSV is not square");
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      const double v = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      if (v < 0.0 || v > 1.0) throw MetricError("distribution entry outside [0, 1]");
      m(r, c) = v;
    }
    if (std::abs(m.row(r).sum() - 1.0) > 5e-6 * static_cast<double>(k)) {
      throw MetricError("distribution row " + std::to_string(r) + " does not sum to 1");
    }
  }
  return m;
}

// Heatmap as a standalone SVG: one shaded cell per (gold, predicted) pair with
// its value printed inside.
inline void write_heatmap_svg(std::ostream& os, const DistributionMatrix& m, const std::vector<std::string>& labels,
                              const std::string& title) {
  const int k = static_cast<int>(m.rows());
  const int cell = 64;
  const int left = 110;
  const int top = 60;
  const int width = left + k * cell + 20;
  const int height = top + k * cell + 70;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  for (int g = 0; g < k; ++g) {
    for (int p = 0; p < k; ++p) {
      const double v = std::clamp(m(g, p), 0.0, 1.0);
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
      os << "<rect x=\"" << left + p * cell << "\" y=\"" << top + g * cell << "\" width=\"" << cell
         << "\" height=\"" << cell << "\" fill=\"rgb(" << shade << ',' << shade << ",255)\" stroke=\"#888\"/>\n";
      os << "<text x=\"" << left + p * cell + cell / 2 << "\" y=\"" << top + g * cell + cell / 2 + 4
         << "\" text-anchor=\"middle\" fill=\"" << (v > 0.5 ? "white" : "black") << "\">" << detail::fixed(v, 2)
         << "</text>\n";
    }
    const std::string label = g < static_cast<int>(labels.size()) ? labels[static_cast<std::size_t>(g)] : std::to_string(g);
    os << "<text x=\"" << left - 6 << "\" y=\"" << top + g * cell + cell / 2 + 4 << "\" text-anchor=\"end\">" << label
       << "</text>\n";
    os << "<text x=\"" << left + g * cell + cell / 2 << "\" y=\"" << top + k * cell + 18
       << "\" text-anchor=\"middle\">" << label << "</text>\n";
  }
  os << "<text x=\"" << left + k * cell / 2 << "\" y=\"" << top + k * cell + 44
     << "\" text-anchor=\"middle\">predicted</text>\n";
  os << "<text x=\"16\" y=\"" << top + k * cell / 2 << "\" transform=\"rotate(-90 16 " << top + k * cell / 2
     << ")\" text-anchor=\"middle\">gold</text>\n";
  os << "</svg>\n";
}

}  // namespace veracity
