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
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace gazevit {

/// A candidate pair in canonical image order.
struct PoolPair {
  std::string pair_id;
  std::filesystem::path left_image;
  std::filesystem::path right_image;
};

/// Pool CSV: `pair_id,left_image,right_image`; paths relative to the file.
/// Image ids (file stems) must be unique across the pool.
std::vector<PoolPair> load_pool(const std::filesystem::path& path);

struct Trial {
  std::string pair_id;
  bool swapped = false;  // canonical right image displayed on the left
};

struct Session {
  std::string session_id;
  std::string respondent_id;
  std::uint64_t seed = 0;
  std::vector<Trial> plan;
  std::size_t cursor = 0;
  std::string created_at;  // ISO-8601 UTC

  bool done() const { return cursor >= plan.size(); }
};

struct ChoiceSubmission {
  std::string pair_id;
  std::string choice;  // "left" | "right" as displayed
  double response_time_ms = 0.0;
  std::string client_timestamp;
};

/// Request errors mapped to HTTP status codes by the server.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, const std::string& what, nlohmann::json extra = nlohmann::json::object())
      : std::runtime_error(what), status_(status), extra_(std::move(extra)) {}
  int status() const { return status_; }
  const nlohmann::json& extra() const { return extra_; }

 private:
  int status_;
  nlohmann::json extra_;
};

/// Session bookkeeping over an append-only JSON-lines choice log
/// (`choices.jsonl`) plus a session snapshot (`sessions.json`), both in
/// `data_dir`. A choice is logged before the cursor snapshot is rewritten;
/// on restart cursors are rebuilt from the log, so an acknowledged choice is
/// never lost or replayed. All operations are serialized.
class AnnotationService {
 public:
  AnnotationService(std::vector<PoolPair> pool, std::filesystem::path data_dir, std::uint64_t seed);

  /// Seeded plan of distinct pairs the respondent has not answered yet, each
  /// with a random side assignment. `seed` defaults to one derived from the
  /// service seed and the session counter.
  Session create_session(const std::string& respondent_id, std::size_t plan_size,
                         std::optional<std::uint64_t> seed = std::nullopt);
  nlohmann::json next(const std::string& session_id) const;
  nlohmann::json submit(const std::string& session_id, const ChoiceSubmission& submission);
  /// Manifest CSV of every logged choice, in log order; has_gaze = 0.
  std::string export_csv() const;
  std::optional<std::filesystem::path> image_path(const std::string& image_id) const;
  Session session(const std::string& session_id) const;

  static nlohmann::json summary(const Session& s);

 private:
  void write_snapshot() const;
  void replay();
  const PoolPair& pool_pair(const std::string& pair_id) const;
  Session& find(const std::string& session_id);
  const Session& find(const std::string& session_id) const;

  std::vector<PoolPair> pool_;
  std::map<std::string, std::size_t> pool_index_;
  std::map<std::string, std::filesystem::path> images_;
  std::filesystem::path data_dir_;
  std::uint64_t seed_;
  std::map<std::string, Session> sessions_;
  std::vector<nlohmann::json> log_;  // in append order
  std::size_t counter_ = 0;
  mutable std::mutex mu_;
};

/// Mounts the JSON API under /api and `static_dir` (if it exists) at `/`.
void register_routes(httplib::Server& server, AnnotationService& service,
                     const std::filesystem::path& static_dir);

}  // namespace gazevit
