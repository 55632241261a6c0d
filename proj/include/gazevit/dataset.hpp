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
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gazevit/heads.hpp"

namespace gazevit {

inline constexpr const char* kManifestHeader =
    "pair_id,left_image,right_image,label,respondent_id,has_gaze,left_gaze_file,right_gaze_file";

/// One pairwise trial. Paths are absolute after loading.
struct ComparisonRecord {
  std::string pair_id;
  std::filesystem::path left_image;
  std::filesystem::path right_image;
  Label y = Label::kLeftSafer;
  std::string respondent_id;
  bool has_gaze = false;
  std::filesystem::path left_gaze;
  std::filesystem::path right_gaze;

  std::string left_image_id() const { return left_image.stem().string(); }
  std::string right_image_id() const { return right_image.stem().string(); }
};

struct LoadIssue {
  std::size_t line = 0;  // 1-based line in the manifest
  std::string pair_id;
  std::string reason;
};

struct LoadReport {
  std::size_t rows = 0;       // data rows seen (header excluded)
  std::size_t accepted = 0;
  std::size_t ties = 0;       // label 0, excluded by design
  std::size_t malformed = 0;  // unusable rows other than ties
  std::vector<LoadIssue> issues;
  std::vector<std::string> warnings;

  std::size_t with_gaze = 0;
};

struct LoadOptions {
  bool check_files = true;
  double max_malformed_fraction = 0.01;
};

struct Dataset {
  std::vector<ComparisonRecord> records;
  LoadReport report;
};

/// Too many malformed rows; carries the full report.
class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& what, LoadReport report) : std::runtime_error(what), report_(std::move(report)) {}
  const LoadReport& report() const { return report_; }

 private:
  LoadReport report_;
};

/// Reads a manifest CSV. Relative paths resolve against the manifest's
/// directory. Ties and malformed rows are dropped and itemized; more than
/// `max_malformed_fraction` malformed rows aborts with DatasetError.
Dataset load_dataset(const std::filesystem::path& manifest, const LoadOptions& options = {});

/// Writes records in manifest format (paths as stored in the records).
void write_manifest(const std::vector<ComparisonRecord>& records, const std::filesystem::path& path);
std::string manifest_row(const ComparisonRecord& record);

struct DatasetSplit {
  std::uint64_t seed = 0;
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

/// Bucket sizes for n records: train = ⌊0.7n⌋, val = ⌊0.1n⌋, test = the rest.
struct SplitSizes {
  std::size_t train, val, test;
};
SplitSizes split_sizes(std::size_t n);

/// Seeded shuffle of pair ids, then a proportional cut. Needs ≥ 10 records.
DatasetSplit split_dataset(const std::vector<ComparisonRecord>& records, std::uint64_t seed);

void write_split(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit read_split(const std::filesystem::path& path);

/// Records whose pair_id is in `ids`, in `ids` order. Throws on unknown ids.
std::vector<ComparisonRecord> select(const std::vector<ComparisonRecord>& records, const std::vector<std::string>& ids);

}  // namespace gazevit
