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

#include "reachgrid/pipeline.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "reachgrid/errors.h"
#include "reachgrid/esg.h"
#include "reachgrid/io.h"
#include "reachgrid/parallel.h"

namespace reachgrid {

namespace {

constexpr std::size_t kMergeBuckets = 64;
// Upper bound on dense tiles materialized at once while writing.
constexpr std::size_t kWriteWaveTiles = 16384;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

struct BlockKeyer {
  std::uint32_t block;

  TileId block_of(TileId t) const { return {t.x / block, t.y / block}; }
  std::size_t bucket(TileId t) const {
    const TileId b = block_of(t);
    return mix64((std::uint64_t{b.y} << 32) | b.x) % kMergeBuckets;
  }
};

void build_tensor(std::span<const std::pair<std::uint64_t, CellAccumulator>> cells,
                  const SummaryArchiveHeader& header, std::span<float> out) {
  std::fill(out.begin(), out.end(), 0.0f);
  const int r = header.params.r;
  const int side = header.params.side();
  for (const auto& [key, cell] : cells) {
    const CellKey k = CellKey::unpack(key);
    const std::size_t p =
        static_cast<std::size_t>((k.offset.dy + r) * side + (k.offset.dx + r));
    const int base = k.direction == Direction::kEmission ? 0 : 3;
    const double raw[3] = {static_cast<double>(cell.count), cell.mean_m(),
                           cell.mean_s()};
    for (int c = 0; c < 3; ++c) {
      out[p * kSummaryChannels + base + c] =
          normalize_value(raw[c], base + c, header.maxima, header.scheme);
    }
  }
}

}  // namespace

void JobConfig::validate() const {
  params.validate();
  if (workers < 1) throw ParameterError("workers must be >= 1");
  if (shard_block == 0 || (shard_block & (shard_block - 1)) != 0) {
    throw ParameterError("shard_block must be a power of two");
  }
  if (window && window->delta_t <= 0) {
    throw ParameterError("window delta_t must be > 0");
  }
}

std::vector<std::pair<std::size_t, std::size_t>> partition_paths(
    std::span<const TilePath> paths, int workers) {
  std::uint64_t total = 0;
  for (const TilePath& p : paths) total += p.visits.size();
  std::vector<std::pair<std::size_t, std::size_t>> parts;
  std::size_t begin = 0;
  std::uint64_t seen = 0;
  for (int w = 0; w < workers; ++w) {
    const std::uint64_t target = total * static_cast<std::uint64_t>(w + 1) /
                                 static_cast<std::uint64_t>(workers);
    std::size_t end = begin;
    while (end < paths.size() && (seen < target || w + 1 == workers)) {
      seen += paths[end++].visits.size();
    }
    parts.emplace_back(begin, end);
    begin = end;
  }
  return parts;
}

std::vector<TilePath> apply_window(std::vector<TilePath> paths,
                                   const ObservationWindow& window) {
  for (TilePath& p : paths) {
    std::erase_if(p.visits,
                  [&](const TileVisit& v) { return !window.contains(v.timestamp); });
  }
  std::erase_if(paths, [](const TilePath& p) { return p.visits.empty(); });
  return paths;
}

ObservationWindow data_extent(std::span<const TilePath> paths) {
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  std::int64_t hi = std::numeric_limits<std::int64_t>::min();
  for (const TilePath& p : paths) {
    for (const TileVisit& v : p.visits) {
      lo = std::min(lo, v.timestamp);
      hi = std::max(hi, v.timestamp);
    }
  }
  if (lo > hi) return {0, 1};
  return {lo, std::max<std::int64_t>(1, hi - lo)};
}

Stage1Result compute_stage1(std::span<const TilePath> paths,
                            const SummaryParams& params,
                            NormalizationScheme scheme,
                            const ObservationWindow& window, int workers,
                            std::uint32_t shard_block) {
  params.validate();
  if (workers < 1) throw ParameterError("workers must be >= 1");
  if (shard_block == 0 || (shard_block & (shard_block - 1)) != 0) {
    throw ParameterError("shard_block must be a power of two");
  }
  const BlockKeyer keyer{shard_block};
  const auto parts = partition_paths(paths, workers);
  const auto nworkers = static_cast<std::size_t>(workers);

  // Map: each worker owns one accumulator per merge bucket.
  std::vector<std::vector<SparseAccumulator>> partial(
      nworkers, std::vector<SparseAccumulator>(kMergeBuckets));
  std::vector<std::uint64_t> worker_events(nworkers, 0);
  parallel_for(nworkers, workers, [&](std::size_t w) {
    auto& buckets = partial[w];
    std::uint64_t events = 0;
    for (std::size_t i = parts[w].first; i < parts[w].second; ++i) {
      for_each_event(paths[i], params, static_cast<std::uint32_t>(i),
                     [&](const TransitionEvent& e) {
                       ++events;
                       buckets[keyer.bucket(e.dst)]
                           .cells()[CellKey{e.dst, Direction::kEmission,
                                            offset_between(e.dst, e.src)}
                                        .pack()]
                           .add(e.path_mm, e.elapsed_s);
                       buckets[keyer.bucket(e.src)]
                           .cells()[CellKey{e.src, Direction::kAbsorption,
                                            offset_between(e.src, e.dst)}
                                        .pack()]
                           .add(e.path_mm, e.elapsed_s);
                     });
    }
    worker_events[w] = events;
  });

  // Reduce: bucket b of every worker merges into one accumulator, then its
  // cells are grouped by grid block.
  std::vector<std::vector<Stage1Result::Block>> bucket_blocks(kMergeBuckets);
  parallel_for(kMergeBuckets, workers, [&](std::size_t b) {
    SparseAccumulator merged = std::move(partial[0][b]);
    for (std::size_t w = 1; w < nworkers; ++w) {
      merged.merge(partial[w][b]);
      partial[w][b] = SparseAccumulator();
    }
    std::unordered_map<std::uint64_t, std::size_t> index;
    auto& blocks = bucket_blocks[b];
    for (const auto& [key, cell] : merged.cells()) {
      const std::uint64_t order =
          quadkey_order(keyer.block_of(CellKey::unpack(key).tile));
      auto [it, inserted] = index.try_emplace(order, blocks.size());
      if (inserted) blocks.push_back({order, {}});
      blocks[it->second].cells.emplace_back(key, cell);
    }
  });

  Stage1Result result;
  result.worker_events = worker_events;
  for (auto& blocks : bucket_blocks) {
    for (auto& block : blocks) result.blocks.push_back(std::move(block));
  }
  std::sort(result.blocks.begin(), result.blocks.end(),
            [](const auto& a, const auto& b) { return a.order < b.order; });

  // Finalize statistics per block; max and integer sums are exact in any
  // order.
  std::vector<ChannelMaxima> block_maxima(result.blocks.size());
  std::vector<std::uint64_t> block_tiles(result.blocks.size(), 0);
  parallel_for(result.blocks.size(), workers, [&](std::size_t i) {
    auto& cells = result.blocks[i].cells;
    std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
      const std::uint64_t oa = quadkey_order(CellKey::unpack(a.first).tile);
      const std::uint64_t ob = quadkey_order(CellKey::unpack(b.first).tile);
      return oa != ob ? oa < ob : a.first < b.first;
    });
    std::optional<TileId> last;
    for (const auto& [key, cell] : cells) {
      const CellKey k = CellKey::unpack(key);
      block_maxima[i].observe(cell, k.direction);
      if (!last || *last != k.tile) ++block_tiles[i];
      last = k.tile;
    }
  });

  SummaryArchiveHeader& h = result.header;
  h.params = params;
  h.scheme = scheme;
  h.window = window;
  h.shard_block = shard_block;
  h.trajectory_count = paths.size();
  for (std::uint64_t e : worker_events) h.event_count += e;
  for (std::size_t i = 0; i < result.blocks.size(); ++i) {
    h.maxima.merge(block_maxima[i]);
    h.tile_count += block_tiles[i];
  }
  return result;
}

void Stage1Result::write(std::ostream& out, int workers) const {
  SummaryArchiveWriter writer(out, header);
  const std::size_t tensor_size = header.tensor_size();

  // Tile runs: (block, first cell, last cell).
  struct Run {
    std::size_t block, begin, end;
  };
  std::size_t next_block = 0;
  while (next_block < blocks.size()) {
    std::vector<Run> wave;
    std::vector<std::size_t> wave_blocks;
    while (next_block < blocks.size() && wave.size() < kWriteWaveTiles) {
      const auto& cells = blocks[next_block].cells;
      wave_blocks.push_back(wave.size());
      for (std::size_t i = 0; i < cells.size();) {
        const TileId tile = CellKey::unpack(cells[i].first).tile;
        std::size_t j = i + 1;
        while (j < cells.size() && CellKey::unpack(cells[j].first).tile == tile) {
          ++j;
        }
        wave.push_back({next_block, i, j});
        i = j;
      }
      ++next_block;
    }
    std::vector<float> tensors(wave.size() * tensor_size);
    parallel_for(wave.size(), workers, [&](std::size_t t) {
      const Run& run = wave[t];
      const auto& cells = blocks[run.block].cells;
      build_tensor(std::span(cells).subspan(run.begin, run.end - run.begin),
                   header,
                   std::span(tensors).subspan(t * tensor_size, tensor_size));
    });
    for (std::size_t t = 0; t < wave.size(); ++t) {
      const Run& run = wave[t];
      writer.add(CellKey::unpack(blocks[run.block].cells[run.begin].first).tile,
                 std::span<const float>(tensors).subspan(t * tensor_size,
                                                         tensor_size));
    }
  }
  writer.finish();
}

Stage1Report run_stage1(const JobConfig& cfg) {
  cfg.validate();
  Stage1Report report;
  auto start = Clock::now();
  const std::string input = read_file(cfg.trajectory_dump);
  report.input_sha256 = sha256_hex(input);
  std::vector<TilePath> paths;
  {
    std::istringstream in(input);
    paths = read_trajectory_dump(in);
  }
  const ObservationWindow window = cfg.window.value_or(data_extent(paths));
  paths = apply_window(std::move(paths), window);
  report.read_s = seconds_since(start);

  if (cfg.resume && std::filesystem::exists(cfg.output)) {
    std::ifstream in(cfg.output, std::ios::binary);
    SummaryArchiveReader reader(in);
    const SummaryArchiveHeader& have = reader.header();
    auto check = [](bool same, const char* field) {
      if (!same) {
        throw IncompatibleArtifact(field,
                                   "existing archive was built with a "
                                   "different value; refusing to resume");
      }
    };
    check(have.params.r == cfg.params.r, "r");
    check(have.params.tau_s == cfg.params.tau_s, "tau_s");
    check(have.params.h_max == cfg.params.h_max, "h_max");
    check(have.scheme == cfg.scheme, "normalization");
    check(have.window.t0 == window.t0, "window_t0");
    check(have.window.delta_t == window.delta_t, "window_delta_t");
    check(have.shard_block == cfg.shard_block, "shard_block");
    check(have.input_sha256 == report.input_sha256, "input_sha256");
    report.header = have;
    report.resumed = true;
    report.archive_sha256 = sha256_file(cfg.output);
    return report;
  }

  start = Clock::now();
  Stage1Result result = compute_stage1(paths, cfg.params, cfg.scheme, window,
                                       cfg.workers, cfg.shard_block);
  result.header.input_sha256 = report.input_sha256;
  report.compute_s = seconds_since(start);

  start = Clock::now();
  atomic_write(cfg.output,
               [&](std::ostream& out) { result.write(out, cfg.workers); });
  if (cfg.graph_output) {
    const Esg graph = build_esg(paths);
    atomic_write(*cfg.graph_output,
                 [&](std::ostream& out) { write_graph_dump(out, graph); },
                 false);
  }
  if (cfg.lar_output) {
    const LarRaster lar = lar_raster(paths, window);
    atomic_write(*cfg.lar_output,
                 [&](std::ostream& out) { write_lar_csv(out, lar); }, false);
  }
  report.write_s = seconds_since(start);
  report.header = result.header;
  report.worker_events = result.worker_events;
  report.archive_sha256 = sha256_file(cfg.output);
  return report;
}

ScalingReport bench_strong_scaling(std::span<const TilePath> paths,
                                   const SummaryParams& params,
                                   NormalizationScheme scheme,
                                   const ObservationWindow& window,
                                   std::span<const int> worker_counts,
                                   int repeats) {
  if (worker_counts.empty() ||
      std::find(worker_counts.begin(), worker_counts.end(), 1) ==
          worker_counts.end()) {
    throw ParameterError("worker counts must include 1");
  }
  if (repeats < 1) throw ParameterError("repeats must be >= 1");
  ScalingReport report;
  for (const TilePath& p : paths) report.visit_count += p.visits.size();

  std::vector<ScalingRow> rows;
  for (int workers : worker_counts) {
    if (workers < 1) throw ParameterError("worker counts must be >= 1");
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < repeats; ++rep) {
      const auto start = Clock::now();
      Stage1Result result =
          compute_stage1(paths, params, scheme, window, workers);
      Sha256OStream sink;
      result.write(sink, workers);
      const std::string hash = sink.hex();
      best = std::min(best, seconds_since(start));
      if (report.archive_sha256.empty()) {
        report.archive_sha256 = hash;
        report.event_count = result.header.event_count;
      } else if (hash != report.archive_sha256) {
        throw DeterminismError("archive with " + std::to_string(workers) +
                               " workers hashes to " + hash + ", expected " +
                               report.archive_sha256);
      }
    }
    rows.push_back({workers, best, 1.0, 1.0,
                    static_cast<double>(report.event_count) / best});
  }
  double base = 0.0;
  for (const ScalingRow& row : rows) {
    if (row.workers == 1) base = row.wall_s;
  }
  for (ScalingRow& row : rows) {
    row.speedup = row.workers == 1 ? 1.0 : base / row.wall_s;
    row.efficiency = row.speedup / row.workers;
  }
  report.rows = std::move(rows);
  return report;
}

void write_scaling_csv(std::ostream& out, const ScalingReport& report) {
  out << "workers,wall_s,speedup,efficiency,events_per_s\n";
  char buf[160];
  for (const ScalingRow& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.4f,%.4f,%.1f\n", row.workers,
                  row.wall_s, row.speedup, row.efficiency, row.events_per_s);
    out << buf;
  }
}

}  // namespace reachgrid
