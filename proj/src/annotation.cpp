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
#include "gazevit/annotation.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>

#include "gazevit/csv.hpp"
#include "gazevit/dataset.hpp"
#include "gazevit/random.hpp"

namespace gazevit {
namespace fs = std::filesystem;
using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string image_id(const fs::path& p) { return p.stem().string(); }

}  // namespace

std::vector<PoolPair> load_pool(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pair pool " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  std::string line;
  if (!std::getline(in, line) || csv::trim(line) != "pair_id,left_image,right_image")
    throw InvalidInput(path.string() + ": header must be pair_id,left_image,right_image");
  std::vector<PoolPair> out;
  std::set<std::string> ids;
  std::map<std::string, fs::path> stems;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (f.size() != 3) throw InvalidInput(where + "expected 3 fields");
    PoolPair p{csv::trim(f[0]), fs::path(csv::trim(f[1])), fs::path(csv::trim(f[2]))};
    if (p.pair_id.empty() || !ids.insert(p.pair_id).second) throw InvalidInput(where + "empty or duplicate pair_id");
    for (fs::path* img : {&p.left_image, &p.right_image}) {
      if (img->is_relative()) *img = (base / *img).lexically_normal();
      auto [it, fresh] = stems.emplace(image_id(*img), *img);
      if (!fresh && it->second != *img) throw InvalidInput(where + "image id '" + it->first + "' is not unique");
    }
    out.push_back(std::move(p));
  }
  return out;
}

AnnotationService::AnnotationService(std::vector<PoolPair> pool, fs::path data_dir, std::uint64_t seed)
    : pool_(std::move(pool)), data_dir_(std::move(data_dir)), seed_(seed) {
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    pool_index_.emplace(pool_[i].pair_id, i);
    images_.emplace(image_id(pool_[i].left_image), pool_[i].left_image);
    images_.emplace(image_id(pool_[i].right_image), pool_[i].right_image);
  }
  fs::create_directories(data_dir_);
  replay();
}

void AnnotationService::replay() {
  if (fs::exists(data_dir_ / "sessions.json")) {
    std::ifstream in(data_dir_ / "sessions.json");
    const json j = json::parse(in);
    counter_ = j.value("counter", std::size_t{0});
    for (const auto& s : j.at("sessions")) {
      Session x;
      x.session_id = s.at("session_id");
      x.respondent_id = s.at("respondent_id");
      x.seed = s.at("seed");
      x.cursor = s.at("cursor");
      x.created_at = s.at("created_at");
      for (const auto& t : s.at("plan")) x.plan.push_back({t.at("pair_id"), t.at("swapped")});
      sessions_.emplace(x.session_id, std::move(x));
    }
  }
  std::map<std::string, std::size_t> answered;
  std::ifstream in(data_dir_ / "choices.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json e = json::parse(line, nullptr, false);
    if (e.is_discarded()) continue;  // torn final line from an interrupted write
    ++answered[e.at("session_id").get<std::string>()];
    log_.push_back(std::move(e));
  }
  // The log is authoritative: it is written before the snapshot.
  for (auto& [id, s] : sessions_) s.cursor = std::max(s.cursor, answered[id]);
}

void AnnotationService::write_snapshot() const {
  ojson j;
  j["counter"] = counter_;
  j["sessions"] = ojson::array();
  for (const auto& [id, s] : sessions_) {
    ojson x;
    x["session_id"] = s.session_id;
    x["respondent_id"] = s.respondent_id;
    x["seed"] = s.seed;
    x["cursor"] = s.cursor;
    x["created_at"] = s.created_at;
    x["plan"] = ojson::array();
    for (const auto& t : s.plan) x["plan"].push_back({{"pair_id", t.pair_id}, {"swapped", t.swapped}});
    j["sessions"].push_back(std::move(x));
  }
  const fs::path tmp = data_dir_ / "sessions.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump() << '\n';
    if (!out.flush()) throw std::runtime_error("cannot write session snapshot");
  }
  fs::rename(tmp, data_dir_ / "sessions.json");
}

const PoolPair& AnnotationService::pool_pair(const std::string& pair_id) const {
  return pool_.at(pool_index_.at(pair_id));
}

Session& AnnotationService::find(const std::string& session_id) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw ApiError(404, "unknown session '" + session_id + "'");
  return it->second;
}

const Session& AnnotationService::find(const std::string& session_id) const {
  return const_cast<AnnotationService*>(this)->find(session_id);
}

json AnnotationService::summary(const Session& s) {
  return {{"session_id", s.session_id}, {"respondent_id", s.respondent_id}, {"plan_size", s.plan.size()},
          {"cursor", s.cursor},         {"created_at", s.created_at},       {"done", s.done()}};
}

Session AnnotationService::create_session(const std::string& respondent_id, std::size_t plan_size,
                                          std::optional<std::uint64_t> seed) {
  if (respondent_id.empty()) throw ApiError(400, "respondent_id must not be empty");
  std::lock_guard lock(mu_);
  // Pairs already answered or still pending in another session of this respondent.
  std::set<std::string> taken;
  for (const auto& e : log_)
    if (e.at("respondent_id") == respondent_id) taken.insert(e.at("pair_id").get<std::string>());
  for (const auto& [id, s] : sessions_)
    if (s.respondent_id == respondent_id)
      for (std::size_t i = s.cursor; i < s.plan.size(); ++i) taken.insert(s.plan[i].pair_id);
  std::vector<std::string> available;
  for (const auto& p : pool_)
    if (!taken.contains(p.pair_id)) available.push_back(p.pair_id);
  if (available.size() < plan_size)
    throw ApiError(409, "not enough unanswered pairs", {{"remaining", available.size()}});

  Session s;
  char id[32];
  std::snprintf(id, sizeof id, "s%06zu", ++counter_);
  s.session_id = id;
  s.respondent_id = respondent_id;
  s.seed = seed.value_or(splitmix(seed_ ^ splitmix(counter_)));
  s.created_at = utc_now();
  Rng rng(s.seed);
  rng.shuffle(available);
  for (std::size_t i = 0; i < plan_size; ++i) s.plan.push_back({available[i], rng.uniform() < 0.5});
  sessions_.emplace(s.session_id, s);
  write_snapshot();
  return s;
}

Session AnnotationService::session(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  return find(session_id);
}

json AnnotationService::next(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  const Session& s = find(session_id);
  if (s.done()) return {{"done", true}, {"total", s.plan.size()}};
  const Trial& t = s.plan[s.cursor];
  const PoolPair& p = pool_pair(t.pair_id);
  const fs::path& shown_left = t.swapped ? p.right_image : p.left_image;
  const fs::path& shown_right = t.swapped ? p.left_image : p.right_image;
  return {{"pair_id", t.pair_id},
          {"left_url", "/api/image/" + image_id(shown_left)},
          {"right_url", "/api/image/" + image_id(shown_right)},
          {"index", s.cursor},
          {"total", s.plan.size()}};
}

json AnnotationService::submit(const std::string& session_id, const ChoiceSubmission& sub) {
  if (sub.choice != "left" && sub.choice != "right") throw ApiError(400, "choice must be left or right");
  std::lock_guard lock(mu_);
  Session& s = find(session_id);
  if (s.done()) throw ApiError(409, "session is complete");
  const Trial& t = s.plan[s.cursor];
  if (sub.pair_id != t.pair_id)
    throw ApiError(409, "pair '" + sub.pair_id + "' is not the pair being served", {{"expected", t.pair_id}});
  const PoolPair& p = pool_pair(t.pair_id);
  // Displayed left is canonical left unless the trial was swapped.
  const bool canonical_left = (sub.choice == "left") != t.swapped;
  ojson e;
  e["seq"] = log_.size() + 1;
  e["session_id"] = s.session_id;
  e["respondent_id"] = s.respondent_id;
  e["pair_id"] = t.pair_id;
  e["left_image_id"] = image_id(p.left_image);
  e["right_image_id"] = image_id(p.right_image);
  e["swapped"] = t.swapped;
  e["choice"] = sub.choice;
  e["y"] = canonical_left ? -1 : 1;
  e["response_time_ms"] = sub.response_time_ms;
  e["client_timestamp"] = sub.client_timestamp;
  e["server_timestamp"] = utc_now();
  {
    std::ofstream out(data_dir_ / "choices.jsonl", std::ios::app);
    out << e.dump() << '\n';
    if (!out.flush()) throw std::runtime_error("cannot append to choice log");
  }
  log_.push_back(json(e));
  ++s.cursor;
  write_snapshot();
  return {{"ok", true}, {"remaining", s.plan.size() - s.cursor}};
}

std::string AnnotationService::export_csv() const {
  std::lock_guard lock(mu_);
  std::string out = std::string(kManifestHeader) + "\n";
  for (const auto& e : log_) {
    const PoolPair& p = pool_pair(e.at("pair_id"));
    ComparisonRecord r;
    r.pair_id = e.at("pair_id").get<std::string>() + "_" + e.at("session_id").get<std::string>();
    r.left_image = p.left_image;
    r.right_image = p.right_image;
    r.y = label_from_int(e.at("y").get<int>());
    r.respondent_id = e.at("respondent_id");
    out += manifest_row(r) + "\n";
  }
  return out;
}

std::optional<fs::path> AnnotationService::image_path(const std::string& id) const {
  auto it = images_.find(id);
  if (it == images_.end()) return std::nullopt;
  return it->second;
}

namespace {

void send_json(httplib::Response& res, const json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ApiError& e) {
      json body = e.extra();
      body["error"] = e.what();
      send_json(res, body, e.status());
    } catch (const json::exception& e) {
      send_json(res, {{"error", std::string("bad request: ") + e.what()}}, 400);
    } catch (const std::exception& e) {
      send_json(res, {{"error", e.what()}}, 500);
    }
  };
}

std::string content_type(const fs::path& p) {
  std::string ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  return "application/octet-stream";
}

}  // namespace

void register_routes(httplib::Server& server, AnnotationService& service, const fs::path& static_dir) {
  server.Post("/api/session", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const json body = json::parse(req.body);
                const auto respondent = body.at("respondent_id").get<std::string>();
                const auto n = body.at("plan_size").get<long long>();
                if (n < 0) throw ApiError(400, "plan_size must be non-negative");
                std::optional<std::uint64_t> seed;
                if (body.contains("seed")) seed = body.at("seed").get<std::uint64_t>();
                send_json(res, AnnotationService::summary(
                                   service.create_session(respondent, static_cast<std::size_t>(n), seed)),
                          201);
              }));
  server.Get("/api/session/:id", guarded([&service](const httplib::Request& req, httplib::Response& res) {
               send_json(res, AnnotationService::summary(service.session(req.path_params.at("id"))));
             }));
  server.Get("/api/session/:id/next", guarded([&service](const httplib::Request& req, httplib::Response& res) {
               send_json(res, service.next(req.path_params.at("id")));
             }));
  server.Post("/api/session/:id/choice", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const json body = json::parse(req.body);
                ChoiceSubmission sub;
                sub.pair_id = body.at("pair_id").get<std::string>();
                sub.choice = body.at("choice").get<std::string>();
                sub.response_time_ms = body.value("response_time_ms", 0.0);
                sub.client_timestamp = body.value("client_timestamp", std::string());
                send_json(res, service.submit(req.path_params.at("id"), sub));
              }));
  server.Get("/api/image/:image_id", guarded([&service](const httplib::Request& req, httplib::Response& res) {
               const auto path = service.image_path(req.path_params.at("image_id"));
               if (!path) throw ApiError(404, "unknown image");
               std::ifstream in(*path, std::ios::binary);
               if (!in) throw ApiError(404, "image file missing");
               std::ostringstream ss;
               ss << in.rdbuf();
               res.set_content(ss.str(), content_type(*path));
             }));
  server.Get("/api/export.csv", guarded([&service](const httplib::Request&, httplib::Response& res) {
               res.set_content(service.export_csv(), "text/csv");
             }));
  if (!static_dir.empty() && fs::is_directory(static_dir)) server.set_mount_point("/", static_dir.string());
}

}  // namespace gazevit
