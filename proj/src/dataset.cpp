/*
 * Copyright 2026 The gazevit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "gazevit/dataset.hpp"

#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "gazevit/csv.hpp"
#include "gazevit/random.hpp"

namespace gazevit {
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& field) {
  fs::path p(csv::trim(field));
  if (p.empty() || p.is_absolute()) return p;
  return (base / p).lexically_normal();
}

}  // namespace

Dataset load_dataset(const fs::path& manifest, const LoadOptions& options) {
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot open manifest " + manifest.string());
  const fs::path base = fs::absolute(manifest).parent_path();

  Dataset ds;
  LoadReport& rep = ds.report;
  std::string line;
  if (!std::getline(in, line) || csv::trim(line).empty()) {
    rep.warnings.push_back(manifest.string() + ": empty manifest");
    return ds;
  }
  {
    std::vector<std::string> header;
    for (const auto& h : csv::split(line)) header.push_back(csv::trim(h));
    if (header != csv::split(kManifestHeader))
      throw std::runtime_error(manifest.string() + ": header must be " + std::string(kManifestHeader));
  }

  std::unordered_set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    ++rep.rows;
    const auto f = csv::split(line);
    std::string pair_id = f.empty() ? std::string() : csv::trim(f[0]);
    auto reject = [&](std::string why) {
      ++rep.malformed;
      rep.issues.push_back({line_no, pair_id, std::move(why)});
    };
    if (f.size() != 8) {
      reject("expected 8 fields, found " + std::to_string(f.size()));
      continue;
    }
    if (pair_id.empty()) {
      reject("empty pair_id");
      continue;
    }
    const auto label = csv::parse_int(f[3]);
    if (!label || (*label != -1 && *label != 0 && *label != 1)) {
      reject("label must be -1, 0 or 1, got '" + csv::trim(f[3]) + "'");
      continue;
    }
    if (*label == 0) {
      ++rep.ties;
      rep.issues.push_back({line_no, pair_id, "tie (label 0) excluded"});
      continue;
    }
    const auto has_gaze = csv::parse_bool(f[5]);
    if (!has_gaze) {
      reject("has_gaze must be 0/1/true/false, got '" + csv::trim(f[5]) + "'");
      continue;
    }
    if (seen.contains(pair_id)) {
      reject("duplicate pair_id");
      continue;
    }

    ComparisonRecord r;
    r.pair_id = pair_id;
    r.left_image = resolve(base, f[1]);
    r.right_image = resolve(base, f[2]);
    r.y = label_from_int(static_cast<int>(*label));
    r.respondent_id = csv::trim(f[4]);
    r.has_gaze = *has_gaze;
    if (r.has_gaze) {
      r.left_gaze = resolve(base, f[6]);
      r.right_gaze = resolve(base, f[7]);
    }

    if (r.left_image.empty() || r.right_image.empty()) {
      reject("missing image path");
      continue;
    }
    if (options.check_files) {
      std::string missing;
      for (const auto* p : {&r.left_image, &r.right_image})
        if (!fs::is_regular_file(*p)) missing += (missing.empty() ? "" : ", ") + p->string();
      if (r.has_gaze)
        for (const auto* p : {&r.left_gaze, &r.right_gaze}) {
          if (p->empty() || !fs::is_regular_file(*p))
            missing += (missing.empty() ? "" : ", ") + (p->empty() ? std::string("<gaze file>") : p->string());
          else if (!fs::is_regular_file(p->parent_path() / "layout.json"))
            missing += (missing.empty() ? "" : ", ") + (p->parent_path() / "layout.json").string();
        }
      if (!missing.empty()) {
        reject("missing file(s): " + missing);
        continue;
      }
    } else if (r.has_gaze && (r.left_gaze.empty() || r.right_gaze.empty())) {
      reject("has_gaze set but gaze file missing");
      continue;
    }
    seen.insert(pair_id);
    rep.with_gaze += r.has_gaze ? 1 : 0;
    ds.records.push_back(std::move(r));
  }
  rep.accepted = ds.records.size();
  if (rep.rows == 0) rep.warnings.push_back(manifest.string() + ": empty manifest");
  if (rep.rows > 0 &&
      static_cast<double>(rep.malformed) > options.max_malformed_fraction * static_cast<double>(rep.rows)) {
    std::string what = manifest.string() + ": " + std::to_string(rep.malformed) + " of " + std::to_string(rep.rows) +
                       " rows malformed (limit " + csv::format_double(100.0 * options.max_malformed_fraction) + "%)";
    throw DatasetError(what, std::move(rep));
  }
  return ds;
}

std::string manifest_row(const ComparisonRecord& r) {
  std::string out = csv::escape(r.pair_id);
  out += ',' + csv::escape(r.left_image.string());
  out += ',' + csv::escape(r.right_image.string());
  out += ',' + std::to_string(to_int(r.y));
  out += ',' + csv::escape(r.respondent_id);
  out += r.has_gaze ? ",1" : ",0";
  out += ',' + csv::escape(r.has_gaze ? r.left_gaze.string() : "");
  out += ',' + csv::escape(r.has_gaze ? r.right_gaze.string() : "");
  return out;
}

void write_manifest(const std::vector<ComparisonRecord>& records, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& r : records) out << manifest_row(r) << '\n';
}

SplitSizes split_sizes(std::size_t n) {
  const std::size_t train = n * 7 / 10, val = n / 10;
  return {train, val, n - train - val};
}

DatasetSplit split_dataset(const std::vector<ComparisonRecord>& records, std::uint64_t seed) {
  if (records.size() < 10)
    throw InvalidInput("split needs at least 10 records, got " + std::to_string(records.size()));
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.pair_id);
  Rng rng(seed);
  rng.shuffle(ids);
  const SplitSizes s = split_sizes(ids.size());
  DatasetSplit out;
  out.seed = seed;
  out.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(s.train));
  out.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(s.train),
                 ids.begin() + static_cast<std::ptrdiff_t>(s.train + s.val));
  out.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(s.train + s.val), ids.end());
  return out;
}

void write_split(const DatasetSplit& split, const fs::path& path) {
  nlohmann::ordered_json j;
  j["seed"] = split.seed;
  j["train"] = split.train;
  j["val"] = split.val;
  j["test"] = split.test;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

DatasetSplit read_split(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open split file " + path.string());
  const auto j = nlohmann::json::parse(in);
  DatasetSplit s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.train = j.at("train").get<std::vector<std::string>>();
  s.val = j.at("val").get<std::vector<std::string>>();
  s.test = j.at("test").get<std::vector<std::string>>();
  return s;
}

std::vector<ComparisonRecord> select(const std::vector<ComparisonRecord>& records, const std::vector<std::string>& ids) {
  std::unordered_map<std::string, const ComparisonRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.pair_id, &r);
  std::vector<ComparisonRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw InvalidInput("split references unknown pair_id '" + id + "'");
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace gazevit
