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

// Reachability summaries: neighborhood-restricted emission/absorption
// statistics per tile, plus the local-aggregate (LAR) baseline.

#ifndef REACHGRID_SUMMARY_H_
#define REACHGRID_SUMMARY_H_

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "reachgrid/tilegrid.h"
#include "reachgrid/trajectory.h"

namespace reachgrid {

inline constexpr int kMaxRadius = 63;
inline constexpr int kSummaryChannels = 6;

enum Channel : int {
  kEmissionCount = 0,
  kEmissionMeanM = 1,
  kEmissionMeanS = 2,
  kAbsorptionCount = 3,
  kAbsorptionMeanM = 4,
  kAbsorptionMeanS = 5,
};

inline constexpr std::array<std::string_view, kSummaryChannels> kChannelNames = {
    "emission_count",   "emission_mean_m",   "emission_mean_s",
    "absorption_count", "absorption_mean_m", "absorption_mean_s"};

struct SummaryParams {
  int r = 12;
  std::int64_t tau_s = 600;
  int h_max = 16;

  int side() const { return 2 * r + 1; }
  // Throws ParameterError when out of range.
  void validate() const;
};

struct TransitionEvent {
  TileId src;
  TileId dst;
  std::uint32_t hop_chebyshev = 0;
  std::int64_t path_mm = 0;
  std::int64_t elapsed_s = 0;
  std::uint32_t trajectory = 0;  // index into the caller's path list
  std::uint32_t ordinal = 0;     // index of the src visit in its path

  friend bool operator==(const TransitionEvent&,
                         const TransitionEvent&) = default;
};

// Visits every valid event of `path`: ordered visit pairs (i, i+k) with
// 1 <= k <= h_max, distinct tiles, Chebyshev hop <= r, elapsed <= tau_s.
template <typename Fn>
void for_each_event(const TilePath& path, const SummaryParams& params,
                    std::uint32_t trajectory, Fn&& fn) {
  const auto& v = path.visits;
  const auto r = static_cast<std::uint32_t>(params.r);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t last =
        std::min(v.size() - 1, i + static_cast<std::size_t>(params.h_max));
    for (std::size_t j = i + 1; j <= last; ++j) {
      const std::int64_t elapsed = v[j].timestamp - v[i].timestamp;
      if (elapsed > params.tau_s) break;  // timestamps are non-decreasing
      if (v[i].tile == v[j].tile) continue;
      const std::uint32_t hop = chebyshev(v[i].tile, v[j].tile);
      if (hop > r) continue;
      fn(TransitionEvent{v[i].tile, v[j].tile, hop,
                         v[j].cum_mm - v[i].cum_mm, elapsed, trajectory,
                         static_cast<std::uint32_t>(i)});
    }
  }
}

std::vector<TransitionEvent> extract_events(const TilePath& path,
                                            const SummaryParams& params,
                                            std::uint32_t trajectory = 0);

struct CellAccumulator {
  std::uint64_t count = 0;
  std::int64_t sum_mm = 0;
  std::int64_t sum_s = 0;

  void add(std::int64_t mm, std::int64_t s) {
    ++count;
    sum_mm += mm;
    sum_s += s;
  }
  void merge(const CellAccumulator& o) {
    count += o.count;
    sum_mm += o.sum_mm;
    sum_s += o.sum_s;
  }
  double mean_m() const {
    return count == 0 ? 0.0 : static_cast<double>(sum_mm) / 1000.0 /
                                  static_cast<double>(count);
  }
  double mean_s() const {
    return count == 0 ? 0.0 : static_cast<double>(sum_s) /
                                  static_cast<double>(count);
  }
  friend bool operator==(const CellAccumulator&,
                         const CellAccumulator&) = default;
};

enum class Direction : std::uint8_t { kEmission = 0, kAbsorption = 1 };

// 63-bit key: y(24) | x(24) | direction(1) | dy+63 (7) | dx+63 (7).
struct CellKey {
  TileId tile;
  Direction direction = Direction::kEmission;
  TileOffset offset;

  std::uint64_t pack() const {
    return (std::uint64_t{tile.y} << 39) | (std::uint64_t{tile.x} << 15) |
           (std::uint64_t(direction) << 14) |
           (std::uint64_t(offset.dy + kMaxRadius) << 7) |
           std::uint64_t(offset.dx + kMaxRadius);
  }
  static CellKey unpack(std::uint64_t k) {
    CellKey c;
    c.tile.y = static_cast<std::uint32_t>(k >> 39) & (kGridSize - 1);
    c.tile.x = static_cast<std::uint32_t>(k >> 15) & (kGridSize - 1);
    c.direction = static_cast<Direction>((k >> 14) & 1u);
    c.offset.dy = static_cast<int>((k >> 7) & 0x7f) - kMaxRadius;
    c.offset.dx = static_cast<int>(k & 0x7f) - kMaxRadius;
    return c;
  }
};

// Sparse commutative-monoid accumulator keyed by CellKey. Each event
// updates the emission cell of its destination and the absorption cell of
// its source.
class SparseAccumulator {
 public:
  using CellMap = std::unordered_map<std::uint64_t, CellAccumulator>;

  void add(const TransitionEvent& e);
  void add_cell(std::uint64_t key, const CellAccumulator& cell);
  void merge(const SparseAccumulator& other);

  const CellMap& cells() const { return cells_; }
  CellMap& cells() { return cells_; }

 private:
  CellMap cells_;
};

// Dense raw accumulators of one tile, pixel index i*side + j for
// offset (dx = j - r, dy = i - r).
struct ReachabilitySummary {
  TileId center;
  int r = 0;
  std::vector<CellAccumulator> emission;
  std::vector<CellAccumulator> absorption;

  ReachabilitySummary() = default;
  ReachabilitySummary(TileId c, int radius);

  int side() const { return 2 * r + 1; }
  std::size_t pixel(TileOffset o) const {
    return static_cast<std::size_t>((o.dy + r) * side() + (o.dx + r));
  }
  CellAccumulator& cell(Direction d, TileOffset o) {
    return d == Direction::kEmission ? emission[pixel(o)]
                                     : absorption[pixel(o)];
  }
  const CellAccumulator& cell(Direction d, TileOffset o) const {
    return d == Direction::kEmission ? emission[pixel(o)]
                                     : absorption[pixel(o)];
  }
  // Raw (unnormalized) channel value at pixel index p.
  double raw_channel(std::size_t p, int channel) const;

  friend bool operator==(const ReachabilitySummary&,
                         const ReachabilitySummary&) = default;
};

std::map<TileId, ReachabilitySummary> accumulate(
    std::span<const TransitionEvent> events, int r);

// Densify the cells of a sparse accumulator into per-tile summaries.
std::map<TileId, ReachabilitySummary> to_summaries(
    const SparseAccumulator& acc, int r);

enum class NormalizationScheme { kLog1pMax, kLinearMax };

NormalizationScheme parse_normalization_scheme(std::string_view name);
std::string_view to_string(NormalizationScheme scheme);

// Dataset-wide maxima of the raw channel values, used as the common scale.
struct ChannelMaxima {
  std::array<double, kSummaryChannels> value{};

  void observe(const CellAccumulator& cell, Direction d);
  void merge(const ChannelMaxima& o);
  friend bool operator==(const ChannelMaxima&, const ChannelMaxima&) = default;
};

ChannelMaxima compute_maxima(const std::map<TileId, ReachabilitySummary>& s);

// Normalized channel value in [0, 1].
float normalize_value(double raw, int channel, const ChannelMaxima& maxima,
                      NormalizationScheme scheme);

// Normalized (2r+1) x (2r+1) x 6 tensor, row-major (i, j, channel).
std::vector<float> normalize(const ReachabilitySummary& s,
                             const ChannelMaxima& maxima,
                             NormalizationScheme scheme);

struct LarCell {
  std::uint64_t records = 0;
  std::uint64_t trajectories = 0;
  std::int64_t dist_mm = 0;  // distance to the next visit, summed
  std::int64_t dt_s = 0;     // time to the next visit, summed

  double mean_speed_mps() const {
    return dt_s == 0 ? 0.0 : static_cast<double>(dist_mm) / 1000.0 /
                                 static_cast<double>(dt_s);
  }
};

struct LarRaster {
  std::map<TileId, LarCell> cells;
  std::array<double, 3> maxima{};

  // [record_count, distinct_trajectory_count, mean_speed_mps], in [0, 1].
  std::array<float, 3> normalized(TileId t) const;
};

// Per-tile aggregates from visits inside the window; no neighbor reads.
LarRaster lar_raster(std::span<const TilePath> paths,
                     const ObservationWindow& window);

// "quadkey,record_count,distinct_trajectory_count,mean_speed_mps,
//  norm_record_count,norm_distinct_trajectory_count,norm_mean_speed"
void write_lar_csv(std::ostream& out, const LarRaster& lar);

}  // namespace reachgrid

#endif  // REACHGRID_SUMMARY_H_
