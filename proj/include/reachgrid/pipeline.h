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

// Stage 1 orchestration: data-parallel event extraction into grid-block
// sharded integer accumulators, associative merge, and a single
// deterministic finalize pass that writes the RSUM1 archive.

#ifndef REACHGRID_PIPELINE_H_
#define REACHGRID_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reachgrid/parallel.h"
#include "reachgrid/summary.h"
#include "reachgrid/summary_archive.h"
#include "reachgrid/trajectory.h"

namespace reachgrid {

struct JobConfig {
  std::filesystem::path trajectory_dump;
  std::optional<ObservationWindow> window;  // default: extent of the data
  SummaryParams params;
  int workers = 1;
  std::filesystem::path output;
  std::optional<std::filesystem::path> graph_output;
  std::optional<std::filesystem::path> lar_output;
  NormalizationScheme scheme = NormalizationScheme::kLog1pMax;
  std::uint32_t shard_block = 256;
  // Reuse an existing archive whose manifest matches; error if it differs.
  bool resume = false;

  void validate() const;
};

// Merged accumulators grouped by grid block, ready to be written.
class Stage1Result {
 public:
  struct Block {
    std::uint64_t order = 0;  // quadkey order of the block
    // Cells sorted by the quadkey order of their tile.
    std::vector<std::pair<std::uint64_t, CellAccumulator>> cells;
  };

  SummaryArchiveHeader header;
  std::vector<Block> blocks;            // sorted by `order`
  std::vector<std::uint64_t> worker_events;

  // Streams the RSUM1 archive; tensors are built on `workers` threads and
  // written in quadkey order.
  void write(std::ostream& out, int workers) const;
};

// Assigns each path to one of `workers` contiguous partitions balanced by
// visit count.
std::vector<std::pair<std::size_t, std::size_t>> partition_paths(
    std::span<const TilePath> paths, int workers);

Stage1Result compute_stage1(std::span<const TilePath> paths,
                            const SummaryParams& params,
                            NormalizationScheme scheme,
                            const ObservationWindow& window, int workers,
                            std::uint32_t shard_block = 256);

// Drops visits outside the window and paths left without visits.
std::vector<TilePath> apply_window(std::vector<TilePath> paths,
                                   const ObservationWindow& window);

// [min timestamp, max timestamp] of the data, or {0, 1} when empty.
ObservationWindow data_extent(std::span<const TilePath> paths);

struct Stage1Report {
  SummaryArchiveHeader header;
  std::string archive_sha256;
  std::string input_sha256;
  std::vector<std::uint64_t> worker_events;
  double read_s = 0.0;
  double compute_s = 0.0;
  double write_s = 0.0;
  bool resumed = false;
};

Stage1Report run_stage1(const JobConfig& cfg);

struct ScalingRow {
  int workers = 1;
  double wall_s = 0.0;
  double speedup = 1.0;
  double efficiency = 1.0;
  double events_per_s = 0.0;
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
  std::string archive_sha256;
  std::uint64_t event_count = 0;
  std::uint64_t visit_count = 0;
};

// Times compute + finalize + serialization (into a hashing sink) for each
// worker count on the same in-memory paths; the best of `repeats` runs is
// kept. Throws DeterminismError if any archive hash differs.
ScalingReport bench_strong_scaling(std::span<const TilePath> paths,
                                   const SummaryParams& params,
                                   NormalizationScheme scheme,
                                   const ObservationWindow& window,
                                   std::span<const int> worker_counts,
                                   int repeats = 1);

// "workers,wall_s,speedup,efficiency,events_per_s"
void write_scaling_csv(std::ostream& out, const ScalingReport& report);

}  // namespace reachgrid

#endif  // REACHGRID_PIPELINE_H_
