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

// Acceptance suite. Each criterion prints one line:
//   C<n> PASS|FAIL <name>: <measurements> [<seconds>s]
// Usage: acceptance [C1 ... C10]   (no arguments runs every criterion)

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "corpus.h"
#include "json.hpp"
#include "reachgrid/cae.h"
#include "reachgrid/errors.h"
#include "reachgrid/esg.h"
#include "reachgrid/io.h"
#include "reachgrid/pipeline.h"
#include "reachgrid/store.h"
#include "reachgrid/summary.h"
#include "reachgrid/synth.h"
#include "testing.h"

namespace reachgrid::acceptance {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

// Tolerances and sizes.
constexpr double kC1MaxSeconds = 120.0;
constexpr std::int64_t kC1Records = 100000;
constexpr int kC2Cases = 200;
constexpr double kC2MeanTolerance = 1e-9;
constexpr int kC4Graphs = 100;
constexpr double kC4ChapmanTolerance = 1e-10;
constexpr double kC4EnumerationTolerance = 1e-12;
constexpr int kC5Tiles = 100000;
constexpr double kC6FullTolerance = 1e-4;
constexpr double kC6LinearTolerance = 1e-7;
constexpr std::size_t kC7Summaries = 500;
constexpr int kC7Epochs = 50;
constexpr double kC7MaxSeconds = 600.0;
constexpr std::int64_t kC8Records = 1000000;
constexpr double kC8MinEfficiency = 0.5;
constexpr std::int64_t kC10Records = 1000;
constexpr int kC10Epochs = 5;
constexpr double kC10MaxSeconds = 300.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(REACHGRID_CLI) + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Synthetic logs in T-Drive format stand in for the one-week subset.
fs::path make_tdrive(const TempDir& dir, std::int64_t records, int taxis,
                     const std::string& name = "raw") {
  SynthConfig cfg;
  cfg.records = records;
  cfg.taxis = taxis;
  write_synthetic_tdrive(dir / name, cfg);
  return dir / name;
}

// ---------------------------------------------------------------------------

Outcome c1_determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  TempDir dir;
  make_tdrive(dir, kC1Records, 10);
  const fs::path log = dir / "log";
  if (run_cli("ingest --input " + (dir / "raw").string() + " --out " +
                  (dir / "traj.tsv").string(),
              log) != 0) {
    return {false, "ingest failed: " + read_file(log)};
  }
  std::set<std::string> hashes;
  std::string first;
  std::uint64_t events = 0, tiles = 0;
  for (int workers : {1, 2, 4, 8}) {
    const fs::path out = dir / ("w" + std::to_string(workers) + ".rsum");
    if (run_cli("summarize --traj " + (dir / "traj.tsv").string() + " --out " +
                    out.string() + " --workers " + std::to_string(workers),
                log) != 0) {
      return {false, "summarize failed: " + read_file(log)};
    }
    hashes.insert(sha256_file(out));
    if (first.empty()) {
      first = sha256_file(out);
      std::ifstream in(out, std::ios::binary);
      SummaryArchiveReader reader(in);
      events = reader.header().event_count;
      tiles = reader.header().tile_count;
    }
    fs::remove(out);
  }
  // The bench path verifies the same property and fails hard on mismatch.
  const auto paths = read_trajectory_dump_file(dir / "traj.tsv");
  const std::vector<int> counts{1, 2, 4, 8};
  bool bench_ok = true;
  try {
    bench_strong_scaling(paths, {}, NormalizationScheme::kLog1pMax,
                         data_extent(paths), counts);
  } catch (const DeterminismError&) {
    bench_ok = false;
  }
  const double wall = since(t0);
  return {hashes.size() == 1 && bench_ok && wall < kC1MaxSeconds,
          fmt("%lld records, %llu events, %llu tiles; %zu distinct archive hash(es) "
              "over workers {1,2,4,8}; bench determinism %s; %.1fs (limit %.0fs); sha256 %s",
              static_cast<long long>(kC1Records), static_cast<unsigned long long>(events),
              static_cast<unsigned long long>(tiles), hashes.size(),
              bench_ok ? "ok" : "VIOLATED", wall, kC1MaxSeconds, first.substr(0, 16).c_str())};
}

// ---------------------------------------------------------------------------

bool cells_match(const std::map<TileId, ReachabilitySummary>& got,
                 const testing::OracleResult& want, double& worst_mean) {
  if (got.size() != want.summaries.size()) return false;
  for (const auto& [yx, cells] : want.summaries) {
    const auto it = got.find({yx.second, yx.first});
    if (it == got.end()) return false;
    std::size_t nonzero = 0;
    for (const auto& c : it->second.emission) nonzero += c.count > 0;
    for (const auto& c : it->second.absorption) nonzero += c.count > 0;
    if (nonzero != cells.size()) return false;
    for (const auto& [key, oc] : cells) {
      const auto [dir, dy, dx] = key;
      const CellAccumulator& c = it->second.cell(
          dir == 0 ? Direction::kEmission : Direction::kAbsorption, {dx, dy});
      if (static_cast<std::int64_t>(c.count) != oc.count || c.sum_mm != oc.sum_mm ||
          c.sum_s != oc.sum_s) {
        return false;
      }
      worst_mean = std::max(
          {worst_mean,
           std::abs(c.mean_m() - static_cast<double>(oc.sum_mm) / 1000.0 / oc.count),
           std::abs(c.mean_s() - static_cast<double>(oc.sum_s) / oc.count)});
    }
  }
  return true;
}

// Re-densifies the merged cells held by a stage-1 result.
std::map<TileId, ReachabilitySummary> stage1_summaries(const Stage1Result& r, int radius) {
  SparseAccumulator acc;
  for (const auto& block : r.blocks) {
    for (const auto& [key, cell] : block.cells) acc.add_cell(key, cell);
  }
  return to_summaries(acc, radius);
}

Outcome c2_oracle() {
  std::mt19937_64 rng(2002);
  int failures = 0, archive_failures = 0;
  double worst_mean = 0.0;
  std::int64_t events = 0;
  for (int c = 0; c < kC2Cases; ++c) {
    const auto paths = testing::random_paths(rng);
    const SummaryParams params{1 + static_cast<int>(rng() % 4),
                               5 + static_cast<std::int64_t>(rng() % 300),
                               1 + static_cast<int>(rng() % 3)};
    const auto oracle =
        testing::brute_force_summaries(paths, params.r, params.tau_s, params.h_max);
    events += oracle.events;
    std::vector<TransitionEvent> ev;
    for (std::size_t i = 0; i < paths.size(); ++i) {
      const auto e = extract_events(paths[i], params, static_cast<std::uint32_t>(i));
      ev.insert(ev.end(), e.begin(), e.end());
    }
    const int workers = 1 + static_cast<int>(rng() % 8);
    const Stage1Result r = compute_stage1(paths, params, NormalizationScheme::kLog1pMax,
                                          data_extent(paths), workers);
    if (!cells_match(accumulate(ev, params.r), oracle, worst_mean) ||
        !cells_match(stage1_summaries(r, params.r), oracle, worst_mean) ||
        r.header.event_count != static_cast<std::uint64_t>(oracle.events)) {
      ++failures;
    }
    std::ostringstream bytes;
    Stage1Result named = r;
    named.header.input_sha256 = "oracle";
    named.write(bytes, workers);
    if (bytes.str() != testing::oracle_archive(paths, params.r, params.tau_s,
                                               params.h_max, "oracle")) {
      ++archive_failures;
    }
  }
  return {failures == 0 && archive_failures == 0 && worst_mean <= kC2MeanTolerance,
          fmt("%d random cases (<=10 trajectories, 20x20 grid, r<=4, h_max<=3, %lld events): "
              "%d accumulator mismatches, %d archive byte mismatches, worst mean error %.3g "
              "(limit %.0e)",
              kC2Cases, static_cast<long long>(events), failures, archive_failures, worst_mean,
              kC2MeanTolerance)};
}

// ---------------------------------------------------------------------------

struct Totals {
  std::uint64_t emission = 0, absorption = 0, events = 0;
  bool ok() const { return emission == events && absorption == events; }
};

Totals conservation(const std::vector<TilePath>& paths, const SummaryParams& params,
                    int workers) {
  const Stage1Result r = compute_stage1(paths, params, NormalizationScheme::kLog1pMax,
                                        data_extent(paths), workers);
  Totals t;
  for (const auto& block : r.blocks) {
    for (const auto& [key, cell] : block.cells) {
      (CellKey::unpack(key).direction == Direction::kEmission ? t.emission : t.absorption) +=
          cell.count;
    }
  }
  // Materialized events, counted without the accumulation code.
  for (const auto& p : paths) {
    for_each_event(p, params, 0, [&](const TransitionEvent&) { ++t.events; });
  }
  std::uint64_t worker_sum = 0;
  for (auto e : r.worker_events) worker_sum += e;
  if (worker_sum != t.events || r.header.event_count != t.events) t.events = ~0ull;
  return t;
}

Outcome c3_conservation() {
  std::mt19937_64 rng(3003);
  int fixtures_ok = 0;
  const int fixtures = 100;
  for (int c = 0; c < fixtures; ++c) {
    const auto paths = testing::random_paths(rng);
    const SummaryParams params{1 + static_cast<int>(rng() % 4), 300, 1 + static_cast<int>(rng() % 3)};
    fixtures_ok += conservation(paths, params, 1 + static_cast<int>(rng() % 4)).ok();
  }
  std::ifstream golden(fs::path(REACHGRID_TEST_DATA) / "tiny.traj.tsv");
  const auto tiny = read_trajectory_dump(golden);
  const bool tiny_ok = conservation(tiny, {3, 120, 3}, 2).ok();

  TempDir dir;
  make_tdrive(dir, kC1Records, 10);
  const IngestResult ingest = ingest_tdrive_dir(dir / "raw", {}, std::nullopt, 1);
  const Totals big = conservation(ingest.paths, {}, 4);
  return {fixtures_ok == fixtures && tiny_ok && big.ok(),
          fmt("%d/%d random fixtures, golden fixture %s; T-Drive-format subset "
              "(%zu records): emission %llu = absorption %llu = events %llu",
              fixtures_ok, fixtures, tiny_ok ? "ok" : "FAIL", ingest.parsed,
              static_cast<unsigned long long>(big.emission),
              static_cast<unsigned long long>(big.absorption),
              static_cast<unsigned long long>(big.events))};
}

// ---------------------------------------------------------------------------

Outcome c4_cke() {
  std::mt19937_64 rng(4004);
  double worst_cke = 0.0, worst_enum = 0.0;
  for (int g = 0; g < kC4Graphs; ++g) {
    const int n = 1 + static_cast<int>(rng() % 20);
    Esg esg;
    const int edges = static_cast<int>(rng() % (3 * n + 1));
    for (int e = 0; e < edges; ++e) {
      esg.add_edge({static_cast<std::uint32_t>(rng() % n), 7},
                   {static_cast<std::uint32_t>(rng() % n), 7}, 1 + rng() % 9);
    }
    if (esg.empty()) esg.add_edge({0, 7}, {1 % static_cast<std::uint32_t>(n), 7}, 1);
    const TransitionMatrixView v = transition_matrix(esg);
    const Eigen::Index m = static_cast<Eigen::Index>(v.nodes.size());

    // Oracle: dense row-stochastic matrix straight from the edge counts.
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(m, m);
    std::map<TileId, double> out;
    for (const auto& [edge, count] : esg.edges()) out[edge.first] += static_cast<double>(count);
    for (const auto& [edge, count] : esg.edges()) {
      dense(v.index.at(edge.first), v.index.at(edge.second)) +=
          static_cast<double>(count) / out[edge.first];
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!out.count(v.nodes[static_cast<std::size_t>(i)])) dense(i, i) = 1.0;
    }
    const Eigen::MatrixXd p2 = Eigen::MatrixXd(n_step(v, 2));
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b < m; ++b) {
        double paths = 0.0;
        for (Eigen::Index k = 0; k < m; ++k) paths += dense(a, k) * dense(k, b);
        worst_enum = std::max(worst_enum, std::abs(p2(a, b) - paths));
      }
    }
    std::vector<Eigen::MatrixXd> pow(9);
    for (int k = 1; k <= 8; ++k) pow[static_cast<std::size_t>(k)] = Eigen::MatrixXd(n_step(v, k));
    for (int a = 1; a <= 4; ++a) {
      for (int b = 1; b <= 4; ++b) {
        const Eigen::MatrixXd diff = pow[static_cast<std::size_t>(a + b)] -
                                     pow[static_cast<std::size_t>(a)] * pow[static_cast<std::size_t>(b)];
        // Induced infinity norm: max absolute row sum.
        worst_cke = std::max(worst_cke, diff.cwiseAbs().rowwise().sum().maxCoeff());
      }
    }
  }
  return {worst_cke <= kC4ChapmanTolerance && worst_enum <= kC4EnumerationTolerance,
          fmt("%d random graphs (<=20 nodes): max ||P^(m+n) - P^m P^n||_inf = %.3g "
              "(limit %.0e), max |P^2 - 2-path enumeration| = %.3g (limit %.0e)",
              kC4Graphs, worst_cke, kC4ChapmanTolerance, worst_enum, kC4EnumerationTolerance)};
}

// ---------------------------------------------------------------------------

Outcome c5_tiles() {
  std::mt19937_64 rng(5005);
  std::uniform_int_distribution<std::uint32_t> coord(0, kGridSize - 1);
  int latlon_bad = 0, quadkey_bad = 0;
  std::set<std::string> keys;
  std::set<TileId> tiles;
  for (int i = 0; i < kC5Tiles; ++i) {
    const TileId t{coord(rng), coord(rng)};
    const LatLon c = tile_center(t);
    const auto back = latlon_to_tile(c.lat, c.lon);
    if (!back || *back != t) ++latlon_bad;
    const std::string q = tile_to_quadkey(t);
    if (q != testing::oracle_quadkey(t.x, t.y) || quadkey_to_tile(q) != t) ++quadkey_bad;
    keys.insert(q);
    tiles.insert(t);
  }
  const bool injective = keys.size() == tiles.size();
  return {latlon_bad == 0 && quadkey_bad == 0 && injective,
          fmt("%d random zoom-24 tiles: %d lat/lon roundtrip failures, %d quadkey failures, "
              "%zu distinct tiles -> %zu distinct quadkeys",
              kC5Tiles, latlon_bad, quadkey_bad, tiles.size(), keys.size())};
}

// ---------------------------------------------------------------------------

CaeConfig toy(bool linear) {
  CaeConfig cfg;
  cfg.in_channels = 2;
  cfg.side = 5;
  cfg.conv_channels = {3, 4};
  cfg.d_r = 3;
  cfg.lambda_c = 0.1;
  if (linear) {
    cfg.activation = Activation::kIdentity;
    cfg.output_sigmoid = false;
  }
  return cfg;
}

// Independent central-difference oracle against evaluate() with random
// parameters, inputs, and probes.
double fd_error(const CaeConfig& cfg, std::uint64_t seed) {
  CaeNetwork<double> net(cfg);
  CaeNetwork<long double> wide(cfg);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5), pix(0.0, 1.0);
  for (Eigen::Index i = 0; i < net.param_count(); ++i) net.params()[i] = u(rng);
  wide.params() = net.params().cast<long double>();
  std::vector<CaeNetwork<double>::Matrix> xs, vs;
  std::vector<CaeNetwork<long double>::Matrix> wxs, wvs;
  for (int n = 0; n < 3; ++n) {
    CaeNetwork<double>::Matrix x(cfg.in_channels, cfg.side * cfg.side), v(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x.data()[i] = pix(rng);
      v.data()[i] = u(rng);
    }
    v /= v.norm();
    xs.push_back(x);
    vs.push_back(v);
    wxs.push_back(x.cast<long double>());
    wvs.push_back(v.cast<long double>());
  }
  CaeNetwork<double>::Vector grad;
  net.evaluate(xs, vs, &grad);
  const long double h = 1e-5L;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < net.param_count(); ++i) {
    const long double saved = wide.params()[i];
    wide.params()[i] = saved + h;
    const long double plus = wide.evaluate(wxs, wvs, nullptr).total;
    wide.params()[i] = saved - h;
    const long double minus = wide.evaluate(wxs, wvs, nullptr).total;
    wide.params()[i] = saved;
    const double fd = static_cast<double>((plus - minus) / (2 * h));
    worst = std::max(worst, std::abs(fd - grad[i]) /
                                std::max({std::abs(fd), std::abs(grad[i]), 1e-8}));
  }
  return worst;
}

Outcome c6_gradients() {
  double full = 0.0, linear = 0.0;
  Eigen::Index params = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (double lambda : {0.0, 0.1}) {
      CaeConfig f = toy(false), l = toy(true);
      f.lambda_c = l.lambda_c = lambda;
      const auto rf = gradient_check(f, 3, seed);
      params = rf.parameters;
      full = std::max({full, rf.max_relative_error, fd_error(f, seed + 100)});
      linear = std::max({linear, gradient_check(l, 3, seed).max_relative_error,
                         fd_error(l, seed + 200)});
    }
  }
  return {full < kC6FullTolerance && linear < kC6LinearTolerance,
          fmt("toy net 5x5x2 -> d_R=3 (%lld parameters, double, h=1e-5, 10 seeds x "
              "lambda_c {0, 0.1}): full max rel. error %.3g (limit %.0e), linear %.3g "
              "(limit %.0e)",
              static_cast<long long>(params), full, kC6FullTolerance, linear,
              kC6LinearTolerance)};
}

// ---------------------------------------------------------------------------

// Encoder Jacobian norm estimate from central differences of the encoder in
// double precision, independent of the forward-mode tangent.
double fd_jacobian_norm(const CaeModel& model, const SummaryRows& rows,
                        const std::vector<Eigen::Index>& held_out, int probes,
                        std::uint64_t seed) {
  const CaeConfig& cfg = model.config();
  CaeNetwork<double> net(cfg);
  net.params() = model.network.params().cast<double>();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const double dim = cfg.input_size();
  const double h = 1e-4;
  double total = 0.0;
  for (Eigen::Index r : held_out) {
    CaeNetwork<double>::Matrix x(cfg.in_channels, cfg.side * cfg.side);
    for (Eigen::Index p = 0; p < x.cols(); ++p) {
      for (Eigen::Index c = 0; c < x.rows(); ++c) {
        x(c, p) = static_cast<double>(rows(r, p * cfg.in_channels + c));
      }
    }
    double sq = 0.0;
    for (int k = 0; k < probes; ++k) {
      CaeNetwork<double>::Matrix v(x.rows(), x.cols());
      for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = g(rng);
      v /= v.norm();
      sq += ((net.encode(x + h * v) - net.encode(x - h * v)) / (2 * h)).squaredNorm();
    }
    total += std::sqrt(dim * sq / probes);
  }
  return total / static_cast<double>(held_out.size());
}

Outcome c7_contractive() {
  const auto t0 = std::chrono::steady_clock::now();
  const SummaryArchive corpus = testing::summary_corpus(kC7Summaries, 12, 100000);
  std::vector<Eigen::Index> held_out;
  for (std::size_t i = 0; i < corpus.tiles.size(); ++i) {
    if (is_validation_tile(corpus.tiles[i])) held_out.push_back(static_cast<Eigen::Index>(i));
  }
  CaeConfig cfg = config_for_radius(12);
  cfg.epochs = kC7Epochs;
  cfg.lambda_c = 0.1;
  const CaeModel contractive = train(corpus, cfg);
  cfg.lambda_c = 0.0;
  const CaeModel plain = train(corpus, cfg);
  const int probes = 16;
  const double jc = mean_jacobian_norm(contractive, corpus.tensors, held_out, probes, 77);
  const double jp = mean_jacobian_norm(plain, corpus.tensors, held_out, probes, 77);
  const double fc = fd_jacobian_norm(contractive, corpus.tensors, held_out, probes, 78);
  const double fp = fd_jacobian_norm(plain, corpus.tensors, held_out, probes, 78);
  const double sc = perturbation_sensitivity(contractive, corpus.tensors, held_out, 1e-2, 79);
  const double sp = perturbation_sensitivity(plain, corpus.tensors, held_out, 1e-2, 79);
  const double wall = since(t0);
  return {corpus.tiles.size() == kC7Summaries && !held_out.empty() && jc < jp && fc < fp &&
              wall < kC7MaxSeconds,
          fmt("%zu summaries (r=12, %zu held out), %d epochs, seed %llu: held-out Jacobian "
              "norm lambda_c=0.1 %.4g vs lambda_c=0 %.4g (finite-difference check %.4g vs "
              "%.4g); perturbation sensitivity %.4g vs %.4g; final recon %.4g vs %.4g; "
              "%.0fs (limit %.0fs)",
              corpus.tiles.size(), held_out.size(), kC7Epochs,
              static_cast<unsigned long long>(cfg.seed), jc, jp, fc, fp, sc, sp,
              contractive.log.back().recon_mse, plain.log.back().recon_mse, wall,
              kC7MaxSeconds)};
}

// ---------------------------------------------------------------------------

Outcome c8_scaling() {
  TempDir dir;
  make_tdrive(dir, kC8Records, 100);
  const IngestResult ingest = ingest_tdrive_dir(dir / "raw", {}, std::nullopt, 1);
  const std::vector<int> counts{1, 2, 4};
  ScalingReport report;
  try {
    report = bench_strong_scaling(ingest.paths, {}, NormalizationScheme::kLog1pMax,
                                  data_extent(ingest.paths), counts, 2);
  } catch (const DeterminismError& e) {
    return {false, std::string("determinism violation: ") + e.what()};
  }
  const fs::path csv = fs::path(REACHGRID_ACCEPTANCE_OUT) / "scaling.csv";
  fs::create_directories(csv.parent_path());
  atomic_write(csv, [&](std::ostream& out) { write_scaling_csv(out, report); }, false);
  const ScalingRow& four = report.rows.back();
  std::string rows;
  for (const ScalingRow& r : report.rows) {
    rows += fmt(" w=%d %.2fs speedup %.2f eff %.2f;", r.workers, r.wall_s, r.speedup,
                r.efficiency);
  }
  return {four.workers == 4 && four.efficiency >= kC8MinEfficiency,
          fmt("%zu records, %llu events, hardware threads %u, identical archives at every "
              "worker count;%s efficiency at 4 workers %.2f (limit %.2f); CSV %s",
              ingest.parsed, static_cast<unsigned long long>(report.event_count),
              std::thread::hardware_concurrency(), rows.c_str(), four.efficiency,
              kC8MinEfficiency, csv.string().c_str())};
}

// ---------------------------------------------------------------------------

Outcome c9_embeddings() {
  SummaryArchive corpus = testing::summary_corpus(120, 12, 20000);
  // Append a copy of row 0 under a far-away tile.
  const Eigen::Index n = corpus.tensors.rows();
  corpus.tensors.conservativeResize(n + 1, Eigen::NoChange);
  corpus.tensors.row(n) = corpus.tensors.row(0);
  corpus.tiles.push_back({kGridSize - 1, kGridSize - 1});
  corpus.header.tile_count = corpus.tiles.size();

  bool lengths = true, identical = true, roundtrip = true;
  std::string detail;
  for (int d : {8, 16}) {
    CaeConfig cfg = config_for_radius(12);
    cfg.d_r = d;
    cfg.epochs = 3;
    const CaeModel model = train(corpus, cfg);
    const auto e = embed(model, corpus);
    std::map<TileId, Eigen::VectorXf> by_tile;
    for (const auto& v : e) {
      lengths = lengths && v.values.size() == d;
      by_tile[v.tile] = v.values;
    }
    lengths = lengths && e.size() == corpus.tiles.size();
    identical = identical && by_tile.at(corpus.tiles[0]) == by_tile.at(corpus.tiles[n]);
    const auto again = embed(model, corpus);
    for (std::size_t i = 0; i < e.size(); ++i) identical = identical && again[i].values == e[i].values;

    // Drop the far-away tile so the raster stays small.
    std::vector<EmbeddingVector> local(e.begin(), e.end());
    std::erase_if(local, [](const EmbeddingVector& v) { return v.tile.y == kGridSize - 1; });
    const auto raster = rasterize(local, bounding_rect(local)).raster;
    std::stringstream bytes;
    export_raster(bytes, raster);
    const EmbeddingRaster back = import_raster(bytes);
    bool pixels_ok = back == raster;
    for (const auto& v : local) {
      const auto row = back.pixel(v.tile.y - back.origin.y, v.tile.x - back.origin.x);
      pixels_ok = pixels_ok && std::memcmp(row.data(), v.values.data(),
                                           sizeof(float) * static_cast<std::size_t>(d)) == 0;
    }
    roundtrip = roundtrip && pixels_ok;
    detail += fmt(" d_R=%d: %zu embeddings, raster %ux%u;", d, e.size(), raster.width,
                  raster.height);
  }
  return {lengths && identical && roundtrip,
          fmt("lengths %s, identical summaries -> identical embeddings %s, ERAS1 "
              "export/import bit-exact %s;%s",
              lengths ? "ok" : "FAIL", identical ? "ok" : "FAIL", roundtrip ? "ok" : "FAIL",
              detail.c_str())};
}

// ---------------------------------------------------------------------------

Outcome c10_smoke() {
  const auto t0 = std::chrono::steady_clock::now();
  TempDir dir;
  make_tdrive(dir, kC10Records, 4);
  const fs::path log = dir / "log";
  auto d = [&](const char* n) { return (dir / n).string(); };
  const std::vector<std::pair<std::string, std::string>> steps = {
      {"ingest", "ingest --input " + d("raw") + " --out " + d("traj.tsv")},
      {"summarize", "summarize --traj " + d("traj.tsv") + " --out " + d("sum.rsum")},
      {"train", "train --archive " + d("sum.rsum") + " --out " + d("model.cae") +
                    " --epochs " + std::to_string(kC10Epochs)},
      {"embed", "embed --model " + d("model.cae") + " --archive " + d("sum.rsum") +
                    " --out " + d("emb.csv")},
      {"export", "export --embeddings " + d("emb.csv") + " --out " + d("emb.eras") +
                     " --archive " + d("sum.rsum") + " --model " + d("model.cae")},
      {"project", "project --embeddings " + d("emb.csv") + " --out " + d("proj.csv")},
  };
  const std::vector<std::string> outputs = {"traj.tsv", "sum.rsum", "model.cae",
                                            "emb.csv",  "emb.eras", "proj.csv"};
  for (const auto& [name, args] : steps) {
    if (run_cli(args, log) != 0) return {false, name + " failed: " + read_file(log)};
  }
  const double wall = since(t0);
  int manifests = 0, hashed = 0, listed = 0;
  for (const std::string& o : outputs) {
    const fs::path m = dir / (o + ".run.json");
    if (!fs::exists(m)) continue;
    ++manifests;
    std::ifstream in(m);
    const auto j = nlohmann::json::parse(in);
    bool all_hashed = !j["inputs"].empty() && !j["parameters"].empty() &&
                      !j["timings_s"].empty() && j.contains("version");
    for (const auto& entry : j["inputs"]) {
      all_hashed = all_hashed && entry["sha256"].get<std::string>().size() == 64;
    }
    for (const auto& entry : j["outputs"]) {
      const fs::path p = entry["path"].get<std::string>();
      all_hashed = all_hashed && fs::exists(p) &&
                   entry["sha256"].get<std::string>() == sha256_file(p);
      listed += p.filename() == o;
    }
    hashed += all_hashed;
  }
  const int n = static_cast<int>(outputs.size());
  return {manifests == n && hashed == n && listed == n && wall < kC10MaxSeconds,
          fmt("ingest -> summarize -> train (%d epochs) -> embed -> export -> project on "
              "%lld records: %.1fs (limit %.0fs); %d/%d run manifests, %d/%d with every "
              "input/output hash verified",
              kC10Epochs, static_cast<long long>(kC10Records), wall, kC10MaxSeconds,
              manifests, n, hashed, n)};
}

}  // namespace
}  // namespace reachgrid::acceptance

int main(int argc, char** argv) {
  using namespace reachgrid::acceptance;
  const std::vector<std::tuple<std::string, std::string, std::function<Outcome()>>> all = {
      {"C1", "determinism", c1_determinism},
      {"C2", "oracle equivalence", c2_oracle},
      {"C3", "conservation", c3_conservation},
      {"C4", "Chapman-Kolmogorov", c4_cke},
      {"C5", "tile math", c5_tiles},
      {"C6", "autoencoder gradients", c6_gradients},
      {"C7", "contractive effect", c7_contractive},
      {"C8", "strong scaling", c8_scaling},
      {"C9", "embedding contract", c9_embeddings},
      {"C10", "end-to-end smoke", c10_smoke},
  };
  std::set<std::string> wanted(argv + 1, argv + argc);
  int failed = 0, ran = 0;
  for (const auto& [id, name, fn] : all) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s %s: %s [%.1fs]\n", id.c_str(), o.pass ? "PASS" : "FAIL", name.c_str(),
                o.detail.c_str(), since(t0));
    std::fflush(stdout);
    failed += !o.pass;
  }
  if (ran == 0) {
    std::fprintf(stderr, "unknown criterion\n");
    return 2;
  }
  return failed == 0 ? 0 : 1;
}
