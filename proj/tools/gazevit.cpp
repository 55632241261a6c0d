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
// gazevit command-line interface.
#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>

#include "gazevit/annotation.hpp"
#include "gazevit/bench.hpp"
#include "gazevit/config.hpp"
#include "gazevit/csv.hpp"
#include "gazevit/synth.hpp"

using namespace gazevit;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--set", c.overrides, "Override a config value, e.g. --set train.batch_size=32");
  app->add_option("--seed", c.seed, "Random seed (overrides train.seed)");
}

// Loads the config file (if any), then applies --set and --seed on top.
ExperimentConfig resolve(const Common& c) {
  Json j = c.config.empty() ? to_json(ExperimentConfig{}) : read_json_file(c.config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidInput("--set expects key=value, got '" + kv + "'");
    std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    Json* node = &j;
    for (std::size_t dot; (dot = key.find('.')) != std::string::npos; key.erase(0, dot + 1))
      node = &(*node)[key.substr(0, dot)];
    Json parsed = Json::parse(value, nullptr, false);
    (*node)[key] = parsed.is_discarded() ? Json(value) : parsed;
  }
  ExperimentConfig cfg;
  from_json(j, cfg);
  if (c.seed) cfg.train.seed = *c.seed;
  return cfg;
}

Dataset load_checked(const fs::path& manifest) {
  Dataset ds = load_dataset(manifest);
  for (const auto& w : ds.report.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& i : ds.report.issues)
    std::cerr << "rejected line " << i.line << " (" << i.pair_id << "): " << i.reason << '\n';
  std::cerr << ds.report.accepted << " records (" << ds.report.with_gaze << " with gaze), " << ds.report.ties
            << " ties, " << ds.report.malformed << " malformed\n";
  return ds;
}

std::vector<ComparisonRecord> part(const Dataset& ds, const std::string& split_path, const std::string& name) {
  if (split_path.empty()) return ds.records;
  const DatasetSplit s = read_split(split_path);
  if (name == "train") return select(ds.records, s.train);
  if (name == "val") return select(ds.records, s.val);
  if (name == "test") return select(ds.records, s.test);
  if (name == "all") return ds.records;
  throw InvalidInput("split part must be train, val, test or all");
}

std::vector<PreparedPair> prepare(const std::vector<ComparisonRecord>& records, const ExperimentConfig& cfg) {
  PrepareReport rep;
  auto pairs = prepare_pairs(records, cfg.model, cfg.gaze, &rep);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  return pairs;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

httplib::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gazevit: gaze-supervised Siamese ViT for pairwise perception"};
  app.require_subcommand(1);

  // gaze process
  Common gaze_c;
  std::string gaze_manifest, gaze_out;
  auto* gaze = app.add_subcommand("gaze", "Gaze pipeline");
  gaze->require_subcommand(1);
  auto* gaze_process = gaze->add_subcommand("process", "Turn raw gaze streams into saliency artifacts");
  add_common(gaze_process, gaze_c);
  gaze_process->add_option("--manifest", gaze_manifest)->required();
  gaze_process->add_option("--out", gaze_out)->required();

  // dataset split
  Common split_c;
  std::string split_manifest, split_out;
  auto* dataset = app.add_subcommand("dataset", "Dataset tools");
  dataset->require_subcommand(1);
  auto* split = dataset->add_subcommand("split", "Seeded 70/10/20 split at pair level");
  add_common(split, split_c);
  split->add_option("--manifest", split_manifest)->required();
  split->add_option("--out", split_out)->required();

  // train
  Common train_c;
  std::string train_manifest, train_split, train_out;
  auto* train = app.add_subcommand("train", "Train a model");
  add_common(train, train_c);
  train->add_option("--manifest", train_manifest)->required();
  train->add_option("--split", train_split, "Split file; without it all records train and none validate");
  train->add_option("--out", train_out)->required();

  // eval
  Common eval_c;
  std::string eval_ckpt, eval_manifest, eval_split, eval_part = "test", eval_out;
  auto* eval = app.add_subcommand("eval", "Classification and ranking accuracy");
  add_common(eval, eval_c);
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--manifest", eval_manifest)->required();
  eval->add_option("--split", eval_split);
  eval->add_option("--part", eval_part, "train|val|test|all");
  eval->add_option("--out", eval_out)->required();

  // attn bench / export
  Common bench_c, export_c;
  std::string bench_ckpt, bench_manifest, bench_split, bench_part = "test", bench_out, bench_source = "both";
  bool bench_pixel = false;
  std::string export_ckpt, export_manifest, export_out, export_source = "raw";
  std::vector<std::string> export_pairs;
  double export_alpha = 0.5;
  auto* attn = app.add_subcommand("attn", "Attention analysis");
  attn->require_subcommand(1);
  auto* bench = attn->add_subcommand("bench", "Attention-gaze agreement metrics");
  add_common(bench, bench_c);
  bench->add_option("--checkpoint", bench_ckpt)->required();
  bench->add_option("--manifest", bench_manifest)->required();
  bench->add_option("--split", bench_split);
  bench->add_option("--part", bench_part);
  bench->add_option("--source", bench_source, "raw|rollout|both");
  bench->add_flag("--pixel", bench_pixel, "Evaluate at image resolution");
  bench->add_option("--out", bench_out)->required();
  auto* exp = attn->add_subcommand("export", "Write gaze and attention overlays");
  add_common(exp, export_c);
  exp->add_option("--checkpoint", export_ckpt)->required();
  exp->add_option("--manifest", export_manifest)->required();
  exp->add_option("--pairs", export_pairs, "Pair ids (default: all)")->delimiter(',');
  exp->add_option("--source", export_source, "raw|rollout");
  exp->add_option("--alpha", export_alpha);
  exp->add_option("--out", export_out)->required();

  // serve
  Common serve_c;
  std::string serve_pool, serve_data = "annotation_data", serve_static = "web", serve_host = "127.0.0.1";
  int serve_port = 8080;
  auto* serve = app.add_subcommand("serve", "Annotation HTTP service");
  add_common(serve, serve_c);
  serve->add_option("--pool", serve_pool, "Candidate pair CSV")->required();
  serve->add_option("--data", serve_data, "Choice log and session directory");
  serve->add_option("--static", serve_static, "UI files served at /");
  serve->add_option("--host", serve_host);
  serve->add_option("--port", serve_port);

  // synth
  Common synth_c;
  SynthConfig synth_cfg;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate the planted-target synthetic dataset");
  add_common(synth, synth_c);
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--pairs", synth_cfg.pairs);
  synth->add_option("--image-size", synth_cfg.image_size);
  synth->add_option("--patch-size", synth_cfg.patch_size);
  synth->add_option("--gaze-fraction", synth_cfg.gaze_fraction);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gaze_process->parsed()) {
      const ExperimentConfig cfg = resolve(gaze_c);
      const Dataset ds = load_checked(gaze_manifest);
      fs::create_directories(gaze_out);
      std::ofstream fix(fs::path(gaze_out) / "fixations.csv");
      fix << "pair_id,side,x_px,y_px,duration_ms,onset_ms\n";
      std::size_t n = 0;
      for (const auto& r : ds.records) {
        if (!r.has_gaze) continue;
        for (const Side side : {Side::kLeft, Side::kRight}) {
          const GazeArtifacts a = process_record_side(r, side, cfg.model, cfg.gaze);
          const std::string stem = r.pair_id + "_" + to_string(side);
          write_sgrd(a.saliency, fs::path(gaze_out) / (stem + "_saliency.sgrd"));
          write_sgrd(a.patch_distribution, fs::path(gaze_out) / (stem + "_patches.sgrd"));
          save_png(saliency_to_image(a.saliency), fs::path(gaze_out) / (stem + "_saliency.png"));
          for (const auto& f : a.fixations)
            fix << csv::escape(r.pair_id) << ',' << to_string(side) << ',' << csv::format_double(f.x) << ','
                << csv::format_double(f.y) << ',' << csv::format_double(f.duration_ms) << ','
                << csv::format_double(f.onset_ms) << '\n';
          ++n;
        }
      }
      std::cout << "processed " << n << " gaze sides into " << gaze_out << '\n';
    } else if (split->parsed()) {
      const ExperimentConfig cfg = resolve(split_c);
      const Dataset ds = load_checked(split_manifest);
      const DatasetSplit s = split_dataset(ds.records, cfg.train.seed);
      write_split(s, split_out);
      std::cout << "train " << s.train.size() << " / val " << s.val.size() << " / test " << s.test.size() << '\n';
    } else if (train->parsed()) {
      const ExperimentConfig cfg = resolve(train_c);
      const Dataset ds = load_checked(train_manifest);
      const fs::path out(train_out);
      fs::create_directories(out);
      write_json_file(to_json(cfg), out / "config.json");
      const auto train_pairs = prepare(part(ds, train_split, "train"), cfg);
      const auto val_pairs = train_split.empty() ? std::vector<PreparedPair>{} : prepare(part(ds, train_split, "val"), cfg);
      SiameseModel model(cfg.model, cfg.train.seed);
      std::ofstream log(out / "train_log.jsonl", std::ios::trunc);
      TrainResult result;
      try {
        result = train_model(model, train_pairs, val_pairs, cfg.train, [&](const EpochRecord& e) {
          log << e.to_json().dump() << '\n' << std::flush;
          std::cerr << "epoch " << e.epoch << " loss " << e.train_loss
                    << (e.val_loss ? " val " + csv::format_double(*e.val_loss) : std::string()) << '\n';
        });
      } catch (const TrainingDiverged& e) {
        Json state = e.state();
        state["error"] = e.what();
        write_json_file(state, out / "diverged.json");
        save_checkpoint(model, out / "diverged_checkpoint");
        std::cerr << "error: " << e.what() << "; state written to " << (out / "diverged.json").string() << '\n';
        return 2;
      }
      save_checkpoint(model, out / "checkpoint");
      std::cout << "best epoch " << result.best_epoch << " of " << result.log.size()
                << (result.early_stopped ? " (early stop)" : "") << "; checkpoint in " << (out / "checkpoint").string()
                << '\n';
    } else if (eval->parsed()) {
      const SiameseModel model = load_checkpoint(eval_ckpt);
      ExperimentConfig cfg = resolve(eval_c);
      cfg.model = model.config();
      const Dataset ds = load_checked(eval_manifest);
      const EvalResult r = evaluate(model, prepare(part(ds, eval_split, eval_part), cfg));
      fs::create_directories(eval_out);
      write_predictions_csv(r, fs::path(eval_out) / "predictions.csv");
      Json s;
      s["pairs"] = r.predictions.size();
      s["class_accuracy"] = r.class_accuracy;
      s["rank_accuracy"] = r.rank_accuracy;
      write_json_file(s, fs::path(eval_out) / "eval.json");
      std::cout << "class accuracy " << r.class_accuracy << ", rank accuracy " << r.rank_accuracy << '\n';
    } else if (bench->parsed()) {
      const SiameseModel model = load_checkpoint(bench_ckpt);
      ExperimentConfig cfg = resolve(bench_c);
      cfg.model = model.config();
      const Dataset ds = load_checked(bench_manifest);
      BenchOptions o;
      o.source = bench_source_from_string(bench_source);
      o.metrics = cfg.metrics;
      o.pixel_mode = bench_pixel;
      o.gaze = cfg.gaze;
      const MetricReport r = benchmark_attention(model, prepare(part(ds, bench_split, bench_part), cfg), o);
      fs::create_directories(bench_out);
      write_metric_csv(r, fs::path(bench_out) / "metrics.csv");
      write_metric_summary(r, fs::path(bench_out) / "metrics_summary.json");
      for (const auto& s : r.skipped) std::cerr << "skipped " << s << '\n';
      for (std::size_t k = 0; k < kAllMetrics.size(); ++k)
        std::cout << metric_name(kAllMetrics[k]) << ' ' << csv::format_double(r.mean.get(kAllMetrics[k])) << " ("
                  << r.chosen_source[k] << ")\n";
    } else if (exp->parsed()) {
      const SiameseModel model = load_checkpoint(export_ckpt);
      const ExperimentConfig cfg = resolve(export_c);
      const Dataset ds = load_checked(export_manifest);
      if (export_pairs.empty())
        for (const auto& r : ds.records) export_pairs.push_back(r.pair_id);
      OverlayOptions o;
      o.source = attention_source_from_string(export_source);
      o.alpha = export_alpha;
      o.gaze = cfg.gaze;
      const OverlayResult r = export_overlays(model, ds.records, export_pairs, export_out, o);
      for (const auto& s : r.skipped) std::cerr << "skipped " << s << '\n';
      std::cout << "wrote " << r.written.size() << " images to " << export_out << '\n';
    } else if (serve->parsed()) {
      const ExperimentConfig cfg = resolve(serve_c);
      AnnotationService service(load_pool(serve_pool), serve_data, cfg.train.seed);
      httplib::Server server;
      register_routes(server, service, serve_static);
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      std::cerr << "listening on http://" << serve_host << ':' << serve_port << '\n';
      if (!server.listen(serve_host, serve_port)) {
        std::cerr << "error: cannot listen on " << serve_host << ':' << serve_port << '\n';
        return 1;
      }
    } else if (synth->parsed()) {
      synth_cfg.seed = resolve(synth_c).train.seed;
      const SynthDataset d = generate_planted_target(synth_out, synth_cfg);
      std::cout << "wrote " << d.records.size() << " pairs; manifest " << d.manifest.string() << '\n';
    }
  } catch (const DatasetError& e) {
    for (const auto& i : e.report().issues)
      std::cerr << "rejected line " << i.line << " (" << i.pair_id << "): " << i.reason << '\n';
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
