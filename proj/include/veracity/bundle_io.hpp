#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "veracity/corpus.hpp"

namespace veracity {

inline constexpr int kBundleSchemaVersion = 1;

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

namespace detail {

inline std::string bundle_records(const DatasetBundle& b) {
  std::string body;
  auto emit = [&](std::string_view split, const Example& x) {
    nlohmann::ordered_json rec;
    rec["split"] = split;
    rec["id"] = x.id;
    rec["text"] = x.text;
    rec["class_index"] = x.class_index;
    body += rec.dump();
    body += '\n';
  };
  for (const auto& x : b.train) emit("train", x);
  for (const auto& x : b.test) emit("test", x);
  return body;
}

}  // namespace detail

// Checksum over the record lines; also recorded in run manifests so a run
// can be tied to the exact data it saw.
inline std::string bundle_checksum(const DatasetBundle& b) { return sha256_hex(detail::bundle_records(b)); }

// JSONL: a header object, then one record per example, train before test.
inline std::string serialize_bundle(const DatasetBundle& b) {
  const std::string body = detail::bundle_records(b);
  nlohmann::ordered_json header;
  header["schema_version"] = kBundleSchemaVersion;
  header["regime"] = b.regime.id();
  header["seed"] = b.build_seed;
  header["test_fraction"] = b.test_fraction;
  header["class_names"] = b.regime.class_names();
  header["provenance"] = {{"input_total", b.provenance.input_total},
                          {"filtered_out", b.provenance.filtered_out},
                          {"before", b.provenance.before},
                          {"after", b.provenance.after}};
  header["checksum"] = sha256_hex(body);
  return header.dump() + "\n" + body;
}

inline DatasetBundle deserialize_bundle(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) throw LoadError("bundle file is empty");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("bundle header is not JSON: ") + e.what());
  }
  DatasetBundle b;
  try {
    if (header.at("schema_version").get<int>() != kBundleSchemaVersion) {
      throw LoadError("unsupported bundle schema_version " + header.at("schema_version").dump());
    }
    b.regime = parse_regime(header.at("regime").get<std::string>());
    b.build_seed = header.at("seed").get<std::uint64_t>();
    b.test_fraction = header.at("test_fraction").get<double>();
    if (header.at("class_names").get<std::vector<std::string>>() != b.regime.class_names()) {
      throw LoadError("class_names do not match regime " + std::string(b.regime.id()));
    }
    const auto& prov = header.at("provenance");
    b.provenance.input_total = prov.at("input_total").get<std::size_t>();
    b.provenance.filtered_out = prov.at("filtered_out").get<std::size_t>();
    b.provenance.before = prov.at("before").get<std::vector<std::size_t>>();
    b.provenance.after = prov.at("after").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("bad bundle header: ") + e.what());
  } catch (const DomainError& e) {
    throw LoadError(e.what());
  }

  const std::string body = content.substr(std::min(content.size(), line.size() + 1));
  if (sha256_hex(body) != header.value("checksum", std::string())) {
    throw LoadError("bundle checksum mismatch");
  }

  std::istringstream records(body);
  std::size_t line_no = 1;
  while (std::getline(records, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      Example x{rec.at("id").get<std::string>(), rec.at("text").get<std::string>(),
                rec.at("class_index").get<int>()};
      const auto split_name = rec.at("split").get<std::string>();
      if (split_name == "train") {
        b.train.push_back(std::move(x));
      } else if (split_name == "test") {
        b.test.push_back(std::move(x));
      } else {
        throw LoadError("line " + std::to_string(line_no) + ": unknown split '" + split_name + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw LoadError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate_bundle(b);
  return b;
}

inline void save_bundle(const DatasetBundle& b, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << serialize_bundle(b);
  if (!out) throw Error("write failed for " + path.string());
}

inline DatasetBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_bundle(ss.str());
}

}  // namespace veracity
