/* Copyright 2026 The Reachgrid Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// reachgrid: command-line driver for ingest, stage-1 summaries, stage-2
// training/embedding, raster export, projection, and scaling benchmarks.
//
// Exit codes: 0 success, 1 internal error, 2 usage or parameter error,
// 3 incompatible or malformed artifact.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "reachgrid/cae.h"
#include "reachgrid/errors.h"
#include "reachgrid/esg.h"
#include "reachgrid/io.h"
#include "reachgrid/pipeline.h"
#include "reachgrid/store.h"
#include "reachgrid/summary_archive.h"
#include "reachgrid/synth.h"
#include "reachgrid/trajectory.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace reachgrid {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int default_workers() {
  if (const char* env = std::getenv("REACHGRID_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

// Hash over sorted (file name, contents) of a directory's regular files.
std::string directory_hash(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Sha256 h;
  for (const fs::path& f : files) {
    const std::string name = f.filename().string();
    const std::string digest = sha256_file(f);
    h.update(name.data(), name.size());
    h.update("\0", 1);
    h.update(digest.data(), digest.size());
  }
  return h.hex();
}

// Provenance record written next to every primary output as <out>.run.json.
class RunManifest {
 public:
  explicit RunManifest(std::string command) {
    doc_["tool"] = "reachgrid";
    doc_["version"] = REACHGRID_VERSION;
    doc_["command"] = std::move(command);
    doc_["parameters"] = json::object();
    doc_["inputs"] = json::array();
    doc_["outputs"] = json::array();
    doc_["timings_s"] = json::object();
    doc_["counters"] = json::object();
  }
  json& parameters() { return doc_["parameters"]; }
  json& counters() { return doc_["counters"]; }
  void timing(const std::string& stage, double s) { doc_["timings_s"][stage] = s; }
  void input(const fs::path& p) {
    doc_["inputs"].push_back(
        {{"path", p.string()},
         {"sha256", fs::is_directory(p) ? directory_hash(p) : sha256_file(p)}});
  }
  void output(const fs::path& p) {
    doc_["outputs"].push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  }
  void write(const fs::path& primary_output) const {
    fs::path path = primary_output;
    path += ".run.json";
    atomic_write(path, [&](std::ostream& out) { out << doc_.dump(2) << '\n'; },
                 false);
  }

 private:
  json doc_;
};

// Converts a flag value into the parameters block (CLI11 already validated).
json option_value(const CLI::Option* opt) {
  const auto results = opt->results();
  if (results.empty()) {
    return opt->get_default_str().empty() ? json(nullptr)
                                          : json(opt->get_default_str());
  }
  if (results.size() == 1) return results.front();
  return results;
}

void echo_parameters(const CLI::App& cmd, RunManifest& manifest) {
  for (const CLI::Option* opt : cmd.get_options()) {
    if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
    std::string name = opt->get_name();
    while (!name.empty() && name.front() == '-') name.erase(name.begin());
    manifest.parameters()[name] = option_value(opt);
  }
}

std::optional<ObservationWindow> window_from(const std::optional<std::int64_t>& t0,
                                             const std::optional<std::int64_t>& dt) {
  if (!t0 && !dt) return std::nullopt;
  if (!t0 || !dt) throw ParameterError("--t0 and --delta-t must be given together");
  if (*dt <= 0) throw ParameterError("--delta-t must be > 0");
  return ObservationWindow{*t0, *dt};
}

void write_text(const fs::path& path, const std::function<void(std::ostream&)>& fill) {
  atomic_write(path, fill, false);
}

}  // namespace
}  // namespace reachgrid

int main(int argc, char** argv) {
  using namespace reachgrid;
  CLI::App app{"reachgrid: reachability summaries and embeddings from GPS trajectories"};
  app.require_subcommand(1);
  app.set_version_flag("--version", REACHGRID_VERSION);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse T-Drive logs into a tile-path dump");
  fs::path ingest_input, ingest_out;
  std::int64_t gap_s = 300;
  std::uint32_t jump_tiles = 2000;
  std::optional<std::int64_t> ingest_t0, ingest_dt;
  int ingest_workers = default_workers();
  ingest->add_option("--input", ingest_input, "Directory of T-Drive .txt files")->required();
  ingest->add_option("--out", ingest_out, "Trajectory dump to write")->required();
  ingest->add_option("--gap-s", gap_s, "Split when consecutive records are further apart (s)")
      ->capture_default_str()->check(CLI::PositiveNumber);
  ingest->add_option("--jump-tiles", jump_tiles, "Split on larger Chebyshev tile jumps")
      ->capture_default_str()->check(CLI::PositiveNumber);
  ingest->add_option("--t0", ingest_t0, "Window start (UTC seconds)");
  ingest->add_option("--delta-t", ingest_dt, "Window length (s)");
  ingest->add_option("--workers", ingest_workers, "Parser threads")
      ->capture_default_str()->check(CLI::PositiveNumber);

  // summarize
  auto* summarize = app.add_subcommand("summarize", "Stage 1: reachability summary archive");
  fs::path traj, summary_out;
  SummaryParams params;
  int workers = default_workers();
  std::string normalization = "log1p-max";
  std::optional<std::int64_t> sum_t0, sum_dt;
  std::optional<fs::path> graph_out, lar_out;
  bool resume = false;
  summarize->add_option("--traj", traj, "Trajectory dump from ingest")->required()->check(CLI::ExistingFile);
  summarize->add_option("--out", summary_out, "RSUM1 archive to write")->required();
  summarize->add_option("--r", params.r, "Neighborhood radius in tiles")
      ->capture_default_str()->check(CLI::Range(1, kMaxRadius));
  summarize->add_option("--tau-s", params.tau_s, "Max elapsed time of a transition (s)")
      ->capture_default_str()->check(CLI::PositiveNumber);
  summarize->add_option("--h-max", params.h_max, "Max visit hops per transition")
      ->capture_default_str()->check(CLI::PositiveNumber);
  summarize->add_option("--workers", workers, "Worker threads")
      ->capture_default_str()->check(CLI::PositiveNumber);
  summarize->add_option("--normalization", normalization, "log1p-max or linear-max")
      ->capture_default_str();
  summarize->add_option("--t0", sum_t0, "Window start (UTC seconds)");
  summarize->add_option("--delta-t", sum_dt, "Window length (s)");
  summarize->add_option("--graph-out", graph_out, "Also write the ESG edge dump");
  summarize->add_option("--lar-out", lar_out, "Also write the LAR baseline CSV");
  summarize->add_flag("--resume", resume, "Reuse a matching existing archive");

  // train
  auto* train_cmd = app.add_subcommand("train", "Stage 2: train the contractive autoencoder");
  fs::path train_archive, model_out;
  std::optional<fs::path> log_out;
  CaeConfig cae;
  std::vector<int> conv_channels = cae.conv_channels;
  std::size_t max_summaries = 0;
  train_cmd->add_option("--archive", train_archive, "RSUM1 archive")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", model_out, "CAE1 model to write")->required();
  train_cmd->add_option("--log", log_out, "Training log CSV (default <out>.log.csv)");
  train_cmd->add_option("--d-r", cae.d_r, "Embedding dimension")
      ->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--lambda-c", cae.lambda_c, "Contractive weight")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--lr", cae.learning_rate, "Learning rate")
      ->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--momentum", cae.momentum, "SGD momentum")->capture_default_str();
  train_cmd->add_option("--batch", cae.batch_size, "Batch size")
      ->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", cae.epochs, "Epochs")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--seed", cae.seed, "Seed for init, batch order, and probes")
      ->capture_default_str();
  train_cmd->add_option("--conv-channels", conv_channels, "Encoder conv channels")
      ->capture_default_str()->delimiter(',');
  train_cmd->add_option("--max-summaries", max_summaries,
                        "Train on at most this many summaries (0 = all)")
      ->capture_default_str();

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "Encode every summary into an embedding");
  fs::path embed_model, embed_archive, embed_out;
  std::optional<int> expect_d_r;
  embed_cmd->add_option("--model", embed_model, "CAE1 model")->required()->check(CLI::ExistingFile);
  embed_cmd->add_option("--archive", embed_archive, "RSUM1 archive")->required()->check(CLI::ExistingFile);
  embed_cmd->add_option("--out", embed_out, "Embeddings CSV to write")->required();
  embed_cmd->add_option("--d-r", expect_d_r, "Fail unless the model has this d_R");

  // export
  auto* export_cmd = app.add_subcommand("export", "Rasterize embeddings into an ERAS1 file");
  fs::path export_in, export_out;
  std::vector<std::uint32_t> bbox;
  std::optional<fs::path> export_archive, export_model;
  export_cmd->add_option("--embeddings", export_in, "Embeddings CSV")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--out", export_out, "ERAS1 raster to write")->required();
  export_cmd->add_option("--bbox", bbox, "min_x,min_y,width,height (default: data extent)")
      ->delimiter(',')->expected(4);
  export_cmd->add_option("--archive", export_archive, "Archive for provenance fields")
      ->check(CLI::ExistingFile);
  export_cmd->add_option("--model", export_model, "Model for provenance fields")
      ->check(CLI::ExistingFile);

  // project
  auto* project_cmd = app.add_subcommand("project", "2-D PCA projection of embeddings");
  fs::path project_in, project_out;
  project_cmd->add_option("--embeddings", project_in, "Embeddings CSV")->required()->check(CLI::ExistingFile);
  project_cmd->add_option("--out", project_out, "Projection CSV to write")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "Strong-scaling benchmark of stage 1");
  fs::path bench_traj, bench_out;
  std::vector<int> bench_workers{1, 2, 4};
  int repeats = 1;
  SummaryParams bench_params;
  bench->add_option("--traj", bench_traj, "Trajectory dump from ingest")->required()->check(CLI::ExistingFile);
  bench->add_option("--out", bench_out, "Scaling report CSV")->required();
  bench->add_option("--workers", bench_workers, "Worker counts, must include 1")
      ->delimiter(',')->capture_default_str();
  bench->add_option("--repeats", repeats, "Runs per worker count (best kept)")
      ->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--r", bench_params.r, "Neighborhood radius in tiles")
      ->capture_default_str()->check(CLI::Range(1, kMaxRadius));
  bench->add_option("--tau-s", bench_params.tau_s, "Max elapsed time (s)")
      ->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--h-max", bench_params.h_max, "Max visit hops")
      ->capture_default_str()->check(CLI::PositiveNumber);

  // synth
  auto* synth = app.add_subcommand("synth", "Write seeded synthetic taxi logs in T-Drive format");
  fs::path synth_out;
  SynthConfig synth_cfg;
  synth->add_option("--out", synth_out, "Directory to create")->required();
  synth->add_option("--records", synth_cfg.records, "Total records")->capture_default_str();
  synth->add_option("--taxis", synth_cfg.taxis, "Number of taxis")
      ->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_cfg.seed, "Seed")->capture_default_str();
  synth->add_option("--extent-m", synth_cfg.extent_m, "Street grid side (m)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ingest) {
      RunManifest manifest("ingest");
      echo_parameters(*ingest, manifest);
      if (!fs::is_directory(ingest_input)) {
        std::cerr << "error: input directory does not exist: " << ingest_input << '\n';
        return 2;
      }
      const auto start = Clock::now();
      const IngestResult result =
          ingest_tdrive_dir(ingest_input, {gap_s, jump_tiles},
                            window_from(ingest_t0, ingest_dt), ingest_workers);
      manifest.timing("ingest", seconds_since(start));
      write_text(ingest_out, [&](std::ostream& out) {
        write_trajectory_dump(out, result.paths);
      });
      std::size_t visits = 0;
      for (const TilePath& p : result.paths) visits += p.visits.size();
      auto& c = manifest.counters();
      c["files"] = result.files;
      c["lines"] = result.lines;
      c["parsed"] = result.parsed;
      c["skipped"] = result.skipped;
      c["outside_window"] = result.outside_window;
      c["segments"] = result.segments;
      c["visits"] = visits;
      manifest.input(ingest_input);
      manifest.output(ingest_out);
      manifest.write(ingest_out);
      std::cout << "files=" << result.files << " lines=" << result.lines
                << " parsed=" << result.parsed << " skipped=" << result.skipped
                << " outside_window=" << result.outside_window
                << " segments=" << result.segments << " visits=" << visits << '\n';
      if (result.paths.empty()) {
        std::cerr << "warning: no trajectories survived parsing, windowing, "
                     "and segmentation; the dump is empty\n";
      }
      return 0;
    }

    if (*summarize) {
      RunManifest manifest("summarize");
      echo_parameters(*summarize, manifest);
      JobConfig cfg;
      cfg.trajectory_dump = traj;
      cfg.window = window_from(sum_t0, sum_dt);
      cfg.params = params;
      cfg.workers = workers;
      cfg.output = summary_out;
      cfg.graph_output = graph_out;
      cfg.lar_output = lar_out;
      cfg.scheme = parse_normalization_scheme(normalization);
      cfg.resume = resume;
      const Stage1Report report = run_stage1(cfg);
      manifest.timing("read", report.read_s);
      manifest.timing("compute", report.compute_s);
      manifest.timing("write", report.write_s);
      auto& c = manifest.counters();
      c["trajectories"] = report.header.trajectory_count;
      c["events"] = report.header.event_count;
      c["tiles"] = report.header.tile_count;
      c["worker_events"] = report.worker_events;
      c["resumed"] = report.resumed;
      manifest.input(traj);
      manifest.output(summary_out);
      if (graph_out) manifest.output(*graph_out);
      if (lar_out) manifest.output(*lar_out);
      manifest.write(summary_out);
      std::cout << "events=" << report.header.event_count
                << " tiles=" << report.header.tile_count
                << " sha256=" << report.archive_sha256
                << (report.resumed ? " (resumed)" : "") << '\n';
      return 0;
    }

    if (*train_cmd) {
      RunManifest manifest("train");
      echo_parameters(*train_cmd, manifest);
      auto start = Clock::now();
      SummaryArchive archive = read_summary_archive(train_archive);
      if (max_summaries > 0 && archive.tiles.size() > max_summaries) {
        archive.tiles.resize(max_summaries);
        archive.tensors.conservativeResize(static_cast<Eigen::Index>(max_summaries),
                                           Eigen::NoChange);
      }
      manifest.timing("read", seconds_since(start));
      cae.conv_channels = conv_channels;
      const CaeConfig cfg = config_for_radius(archive.header.params.r, cae);
      start = Clock::now();
      const CaeModel model = train(archive, cfg, [](const TrainingLogRow& row) {
        std::cout << "epoch " << row.epoch << " recon_mse=" << row.recon_mse
                  << " contractive=" << row.contractive << " total=" << row.total
                  << '\n';
      });
      manifest.timing("train", seconds_since(start));
      save_model(model_out, model);
      fs::path log_path = log_out.value_or(fs::path(model_out.string() + ".log.csv"));
      write_text(log_path, [&](std::ostream& out) { write_training_log(out, model.log); });
      manifest.counters()["summaries"] = archive.tiles.size();
      manifest.counters()["parameters"] = model.network.param_count();
      manifest.input(train_archive);
      manifest.output(model_out);
      manifest.output(log_path);
      manifest.write(model_out);
      return 0;
    }

    if (*embed_cmd) {
      RunManifest manifest("embed");
      echo_parameters(*embed_cmd, manifest);
      const CaeModel model = load_model(embed_model);
      if (expect_d_r && *expect_d_r != model.config().d_r) {
        throw IncompatibleArtifact("d_r", "model has d_r=" +
                                              std::to_string(model.config().d_r) +
                                              ", expected " + std::to_string(*expect_d_r));
      }
      const auto start = Clock::now();
      const SummaryArchive archive = read_summary_archive(embed_archive);
      const std::vector<EmbeddingVector> embeddings = embed(model, archive);
      manifest.timing("embed", seconds_since(start));
      write_text(embed_out,
                 [&](std::ostream& out) { write_embeddings_csv(out, embeddings); });
      manifest.counters()["embeddings"] = embeddings.size();
      manifest.counters()["d_r"] = model.config().d_r;
      manifest.input(embed_model);
      manifest.input(embed_archive);
      manifest.output(embed_out);
      manifest.write(embed_out);
      std::cout << "embeddings=" << embeddings.size() << " d_r=" << model.config().d_r
                << '\n';
      return 0;
    }

    if (*export_cmd) {
      RunManifest manifest("export");
      echo_parameters(*export_cmd, manifest);
      const auto start = Clock::now();
      std::ifstream in(export_in);
      if (!in) throw std::runtime_error("cannot open " + export_in.string());
      const std::vector<EmbeddingVector> embeddings = read_embeddings_csv(in);
      TileRect rect = bbox.empty() ? bounding_rect(embeddings)
                                   : TileRect{bbox[0], bbox[1], bbox[2], bbox[3]};
      RasterizeResult result = rasterize(embeddings, rect);
      KeyValueManifest& m = result.raster.manifest;
      if (export_archive) {
        std::ifstream ain(*export_archive, std::ios::binary);
        if (!ain) throw std::runtime_error("cannot open " + export_archive->string());
        SummaryArchiveReader reader(ain);
        const SummaryArchiveHeader& h = reader.header();
        m.set("r", std::int64_t{h.params.r});
        m.set("window_t0", h.window.t0);
        m.set("window_delta_t", h.window.delta_t);
        m.set("normalization", std::string(to_string(h.scheme)));
        for (int c = 0; c < kSummaryChannels; ++c) {
          m.set("max_" + std::string(kChannelNames[c]), h.maxima.value[c]);
        }
        m.set("archive_sha256", sha256_file(*export_archive));
        manifest.input(*export_archive);
      }
      if (export_model) {
        const CaeModel model = load_model(*export_model);
        if (model.config().d_r != result.raster.d_r) {
          throw IncompatibleArtifact("d_r", "model d_r does not match the embeddings");
        }
        m.set("model_sha256", sha256_file(*export_model));
        manifest.input(*export_model);
      }
      export_raster(export_out, result.raster);
      manifest.timing("export", seconds_since(start));
      manifest.counters()["embeddings"] = embeddings.size();
      manifest.counters()["outside_bbox"] = result.outside;
      manifest.input(export_in);
      manifest.output(export_out);
      manifest.write(export_out);
      std::cout << "raster " << rect.width << "x" << rect.height << "x"
                << result.raster.d_r << " outside_bbox=" << result.outside << '\n';
      return 0;
    }

    if (*project_cmd) {
      RunManifest manifest("project");
      echo_parameters(*project_cmd, manifest);
      const auto start = Clock::now();
      std::ifstream in(project_in);
      if (!in) throw std::runtime_error("cannot open " + project_in.string());
      const std::vector<EmbeddingVector> embeddings = read_embeddings_csv(in);
      const Projection p = project_2d(embeddings);
      if (p.degenerate) {
        std::cerr << "warning: all embeddings are identical; projection is zero\n";
      }
      write_text(project_out, [&](std::ostream& out) { write_projection_csv(out, p); });
      manifest.timing("project", seconds_since(start));
      manifest.counters()["points"] = p.tiles.size();
      manifest.counters()["degenerate"] = p.degenerate;
      manifest.counters()["explained_variance"] =
          p.total_variance > 0 ? (p.eigenvalues[0] + p.eigenvalues[1]) / p.total_variance
                               : 0.0;
      manifest.input(project_in);
      manifest.output(project_out);
      manifest.write(project_out);
      return 0;
    }

    if (*bench) {
      RunManifest manifest("bench");
      echo_parameters(*bench, manifest);
      std::vector<TilePath> paths = read_trajectory_dump_file(bench_traj);
      const ObservationWindow window = data_extent(paths);
      const ScalingReport report =
          bench_strong_scaling(paths, bench_params, NormalizationScheme::kLog1pMax,
                               window, bench_workers, repeats);
      write_text(bench_out, [&](std::ostream& out) { write_scaling_csv(out, report); });
      write_scaling_csv(std::cout, report);
      manifest.counters()["events"] = report.event_count;
      manifest.counters()["visits"] = report.visit_count;
      manifest.counters()["archive_sha256"] = report.archive_sha256;
      manifest.input(bench_traj);
      manifest.output(bench_out);
      manifest.write(bench_out);
      return 0;
    }

    if (*synth) {
      const std::int64_t n = write_synthetic_tdrive(synth_out, synth_cfg);
      std::cout << "records=" << n << " taxis=" << synth_cfg.taxis << '\n';
      return 0;
    }
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const IncompatibleArtifact& e) {
    std::cerr << "error: incompatible artifact field '" << e.field() << "': " << e.what()
              << '\n';
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const DeterminismError& e) {
    std::cerr << "error: determinism violation: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
