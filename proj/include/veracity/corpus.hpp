#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "veracity/error.hpp"
#include "veracity/label.hpp"
#include "veracity/text.hpp"

namespace veracity {

struct Statement {
  std::string id;
  std::string text;
  TruthLabel label = TruthLabel::half_true;
  std::map<std::string, std::string> source_meta;  // speaker, date, url

  friend bool operator==(const Statement&, const Statement&) = default;
};

enum class DumpFormat { jsonl, csv };

struct RecordIssue {
  std::size_t line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<Statement> statements;
  std::vector<RecordIssue> errors;           // malformed records
  std::vector<RecordIssue> unknown_ratings;  // skipped, rating not on the meter
  std::vector<RecordIssue> duplicates;       // later record with a seen id, rejected
};

namespace detail {

// One record of an RFC 4180 CSV stream. Quoted fields may span lines.
struct CsvRecord {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

inline bool read_csv_record(std::istream& in, std::size_t& line_no, CsvRecord& rec) {
  rec.fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  rec.line = line_no + 1;
  int ch;
  while ((ch = in.get()) != EOF) {
    any = true;
    const char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line_no;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      rec.fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\r') {
      // tolerated before \n
    } else if (c == '\n') {
      ++line_no;
      rec.fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) throw CorpusError("unterminated quoted CSV field starting at line " + std::to_string(rec.line));
  if (!any) return false;
  ++line_no;
  rec.fields.push_back(std::move(field));
  return true;
}

inline void accept_record(ParseResult& out, std::unordered_set<std::string>& seen, std::size_t line,
                          const std::string& id, const std::string& text, const std::string& rating,
                          std::map<std::string, std::string> meta) {
  if (id.empty()) {
    out.errors.push_back({line, "missing id"});
    return;
  }
  if (!is_valid_utf8(id) || !is_valid_utf8(text) || !is_valid_utf8(rating)) {
    out.errors.push_back({line, "record is not valid UTF-8"});
    return;
  }
  const auto label = parse_rating(rating);
  if (!label) {
    out.unknown_ratings.push_back({line, "unknown rating '" + rating + "'"});
    return;
  }
  std::string normalized = normalize_text(text);
  if (normalized.empty()) {
    out.errors.push_back({line, "empty statement text"});
    return;
  }
  if (!seen.insert(id).second) {
    out.duplicates.push_back({line, "duplicate id '" + id + "' rejected"});
    return;
  }
  out.statements.push_back(Statement{id, std::move(normalized), *label, std::move(meta)});
}

}  // namespace detail

// Reads a rated-statement dump. Required keys: id, statement, rating.
// Optional: speaker, date, url. Problems are reported per record in the
// result; nothing is dropped silently.
inline ParseResult parse_dump(std::istream& in, DumpFormat format) {
  ParseResult out;
  std::unordered_set<std::string> seen;
  static const std::vector<std::string> kMetaKeys = {"speaker", "date", "url"};

  if (format == DumpFormat::jsonl) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        out.errors.push_back({line_no, std::string("malformed JSON: ") + e.what()});
        continue;
      }
      if (!rec.is_object()) {
        out.errors.push_back({line_no, "record is not a JSON object"});
        continue;
      }
      std::string missing;
      for (const char* key : {"id", "statement", "rating"}) {
        if (!rec.contains(key) || !(rec[key].is_string() || (std::string_view(key) == "id" && rec[key].is_number_integer()))) {
          missing = key;
          break;
        }
      }
      if (!missing.empty()) {
        out.errors.push_back({line_no, "missing or non-string field '" + missing + "'"});
        continue;
      }
      const std::string id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
      std::map<std::string, std::string> meta;
      for (const auto& k : kMetaKeys) {
        if (rec.contains(k) && rec[k].is_string()) meta[k] = rec[k].get<std::string>();
      }
      detail::accept_record(out, seen, line_no, id, rec["statement"].get<std::string>(),
                            rec["rating"].get<std::string>(), std::move(meta));
    }
    return out;
  }

  std::size_t line_no = 0;
  detail::CsvRecord rec;
  if (!detail::read_csv_record(in, line_no, rec)) return out;
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < rec.fields.size(); ++i) column[rec.fields[i]] = i;
  for (const char* key : {"id", "statement", "rating"}) {
    if (!column.count(key)) throw CorpusError(std::string("CSV header lacks column '") + key + "'");
  }
  while (detail::read_csv_record(in, line_no, rec)) {
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;
    if (rec.fields.size() != column.size()) {
      out.errors.push_back({rec.line, "expected " + std::to_string(column.size()) + " fields, got " +
                                          std::to_string(rec.fields.size())});
      continue;
    }
    std::map<std::string, std::string> meta;
    for (const auto& k : kMetaKeys) {
      if (auto it = column.find(k); it != column.end() && !rec.fields[it->second].empty()) {
        meta[k] = rec.fields[it->second];
      }
    }
    detail::accept_record(out, seen, rec.line, rec.fields[column["id"]], rec.fields[column["statement"]],
                          rec.fields[column["rating"]], std::move(meta));
  }
  return out;
}

inline ParseResult parse_dump(const std::string& content, DumpFormat format) {
  std::istringstream in(content);
  return parse_dump(in, format);
}

// ---------------------------------------------------------------------------

struct Example {
  std::string id;
  std::string text;
  int class_index = 0;

  friend bool operator==(const Example&, const Example&) = default;
};

struct Provenance {
  std::size_t input_total = 0;
  std::size_t filtered_out = 0;  // neutral-band labels dropped by the binary regime
  std::vector<std::size_t> before;  // per class, entering balancing
  std::vector<std::size_t> after;   // per class, after balancing

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct DatasetBundle {
  Regime regime;
  std::vector<Example> train;
  std::vector<Example> test;
  std::uint64_t build_seed = 0;
  double test_fraction = 0.2;
  Provenance provenance;

  friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

inline std::vector<std::size_t> class_counts(const std::vector<Example>& xs, int num_classes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (const auto& x : xs) counts.at(static_cast<std::size_t>(x.class_index))++;
  return counts;
}

// Throws LoadError describing the first violated bundle invariant.
inline void validate_bundle(const DatasetBundle& b) {
  const int k = b.regime.num_classes();
  if (b.train.empty()) throw LoadError("bundle has an empty train split");
  if (b.test.empty()) throw LoadError("bundle has an empty test split");
  for (const auto* part : {&b.train, &b.test}) {
    for (const auto& x : *part) {
      if (x.class_index < 0 || x.class_index >= k) {
        throw LoadError("class index " + std::to_string(x.class_index) + " outside [0, " + std::to_string(k) + ")");
      }
      if (x.text.empty()) throw LoadError("example '" + x.id + "' has empty text");
    }
    const auto counts = class_counts(*part, k);
    if (std::adjacent_find(counts.begin(), counts.end(), std::not_equal_to<>()) != counts.end()) {
      throw LoadError(std::string(part == &b.train ? "train" : "test") + " split is not class-balanced");
    }
  }
  std::unordered_set<std::string> ids;
  for (const auto& x : b.train) {
    if (!ids.insert(x.id).second) throw LoadError("duplicate id '" + x.id + "' in train split");
  }
  for (const auto& x : b.test) {
    if (ids.count(x.id)) throw LoadError("id '" + x.id + "' appears in both splits");
  }
}

namespace detail {

// Independent streams per purpose so that changing one stage never shifts
// the random draws of another.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

enum Stream : std::uint64_t { kBalance = 11, kSplit = 12 };

}  // namespace detail

// Keeps every statement of the rarest class and draws that many, uniformly
// without replacement, from each other class. Output order is a seeded
// shuffle.
inline std::vector<Statement> balance(const std::vector<Statement>& statements, Regime regime,
                                      std::uint64_t seed) {
  const auto k = static_cast<std::size_t>(regime.num_classes());
  std::vector<std::vector<const Statement*>> by_class(k);
  for (const auto& s : statements) by_class[static_cast<std::size_t>(map_label(s.label, regime))].push_back(&s);
  const auto names = regime.class_names();
  for (std::size_t c = 0; c < k; ++c) {
    if (by_class[c].empty()) throw CorpusError("class '" + names[c] + "' has no statements");
  }
  std::size_t target = by_class[0].size();
  for (const auto& v : by_class) target = std::min(target, v.size());

  auto rng = detail::make_rng(seed, detail::kBalance);
  std::vector<Statement> out;
  out.reserve(target * k);
  for (auto& members : by_class) {
    if (members.size() > target) {
      // Partial Fisher-Yates: the first `target` slots become a uniform sample.
      for (std::size_t i = 0; i < target; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, members.size() - 1);
        std::swap(members[i], members[pick(rng)]);
      }
      members.resize(target);
    }
    for (const auto* s : members) out.push_back(*s);
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

struct Split {
  std::vector<Example> train;
  std::vector<Example> test;
};

// Stratified split: each class contributes round(count * test_fraction)
// examples to test.
inline Split split(const std::vector<Example>& examples, double test_fraction, std::uint64_t seed,
                   int num_classes) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw CorpusError("test fraction must lie strictly between 0 and 1");
  }
  std::vector<std::vector<const Example*>> by_class(static_cast<std::size_t>(num_classes));
  for (const auto& x : examples) {
    if (x.class_index < 0 || x.class_index >= num_classes) {
      throw CorpusError("class index " + std::to_string(x.class_index) + " out of range");
    }
    by_class[static_cast<std::size_t>(x.class_index)].push_back(&x);
  }
  auto rng = detail::make_rng(seed, detail::kSplit);
  Split out;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.size() < 2) {
      throw CorpusError("class " + std::to_string(c) + " has fewer than 2 members; cannot split");
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(members.size()) * test_fraction));
    for (std::size_t i = 0; i < members.size(); ++i) {
      (i < n_test ? out.test : out.train).push_back(*members[i]);
    }
  }
  std::shuffle(out.train.begin(), out.train.end(), rng);
  std::shuffle(out.test.begin(), out.test.end(), rng);
  return out;
}

// filter (binary regime only) -> balance -> split.
inline DatasetBundle build_regime_dataset(const std::vector<Statement>& statements, Regime regime,
                                          std::uint64_t seed, double test_fraction = 0.2) {
  DatasetBundle bundle;
  bundle.regime = regime;
  bundle.build_seed = seed;
  bundle.test_fraction = test_fraction;
  bundle.provenance.input_total = statements.size();

  std::vector<Statement> kept;
  kept.reserve(statements.size());
  for (const auto& s : statements) {
    if (regime.admits(s.label)) kept.push_back(s);
  }
  bundle.provenance.filtered_out = statements.size() - kept.size();

  const int k = regime.num_classes();
  bundle.provenance.before.assign(static_cast<std::size_t>(k), 0);
  for (const auto& s : kept) bundle.provenance.before[static_cast<std::size_t>(map_label(s.label, regime))]++;

  const auto balanced = balance(kept, regime, seed);
  std::vector<Example> examples;
  examples.reserve(balanced.size());
  for (const auto& s : balanced) examples.push_back({s.id, s.text, map_label(s.label, regime)});
  bundle.provenance.after = class_counts(examples, k);

  auto parts = split(examples, test_fraction, seed, k);
  bundle.train = std::move(parts.train);
  bundle.test = std::move(parts.test);
  if (bundle.train.empty() || bundle.test.empty()) {
    throw CorpusError("corpus too small: split produced an empty train or test set");
  }
  return bundle;
}

}  // namespace veracity
