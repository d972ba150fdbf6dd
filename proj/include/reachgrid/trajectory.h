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

// T-Drive log parsing, trajectory segmentation, and tile paths.

#ifndef REACHGRID_TRAJECTORY_H_
#define REACHGRID_TRAJECTORY_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reachgrid/tilegrid.h"

namespace reachgrid {

inline constexpr double kEarthRadiusM = 6371008.8;
// T-Drive timestamps are Beijing local time (UTC+8).
inline constexpr std::int64_t kTdriveUtcOffsetS = 8 * 3600;

struct GpsRecord {
  std::string mover_id;
  std::int64_t timestamp = 0;  // UTC seconds
  double lat = 0.0;
  double lon = 0.0;
  TileId tile;
};

struct Trajectory {
  std::string id;
  std::vector<GpsRecord> records;
};

struct ObservationWindow {
  std::int64_t t0 = 0;
  std::int64_t delta_t = 1;

  bool contains(std::int64_t t) const { return t >= t0 && t <= t0 + delta_t; }
};

struct ParseResult {
  std::vector<GpsRecord> records;
  std::size_t lines = 0;
  std::size_t skipped = 0;
};

// One visit to a tile; `cum_mm` is the along-path distance in millimeters
// from the start of the trajectory to the first record in this tile.
struct TileVisit {
  TileId tile;
  std::int64_t timestamp = 0;
  std::int64_t cum_mm = 0;
};

struct TilePath {
  std::string trajectory_id;
  std::vector<TileVisit> visits;
};

struct SegmentParams {
  std::int64_t gap_s = 300;
  std::uint32_t jump_tiles = 2000;
};

// Parses "YYYY-MM-DD HH:MM:SS" as a civil time and returns seconds since
// the epoch for that civil time taken as UTC.
std::optional<std::int64_t> parse_civil_time(std::string_view text);

// Parses "id,datetime,lon,lat" lines. Malformed lines are counted in
// `skipped`. Throws std::runtime_error if the stream is unreadable.
ParseResult parse_tdrive(std::istream& in);
ParseResult parse_tdrive_file(const std::filesystem::path& path);

// Stable sort by (mover_id, timestamp).
void sort_records(std::vector<GpsRecord>& records);

std::vector<GpsRecord> filter_window(std::vector<GpsRecord> records,
                                     const ObservationWindow& window);

// Requires records sorted by (mover_id, timestamp).
std::vector<Trajectory> segment(const std::vector<GpsRecord>& records,
                                const SegmentParams& params = {});

double haversine_m(double lat1, double lon1, double lat2, double lon2);

TilePath to_tile_path(const Trajectory& t);

// Newline-delimited "trajectory_id\ttimestamp\ttile_x\ttile_y\tcum_m",
// sorted by (trajectory_id, timestamp).
void write_trajectory_dump(std::ostream& out, std::vector<TilePath> paths);
std::vector<TilePath> read_trajectory_dump(std::istream& in);
std::vector<TilePath> read_trajectory_dump_file(
    const std::filesystem::path& path);

struct IngestResult {
  std::vector<TilePath> paths;  // sorted by trajectory id
  std::size_t files = 0;
  std::size_t lines = 0;
  std::size_t parsed = 0;
  std::size_t skipped = 0;
  std::size_t outside_window = 0;
  std::size_t segments = 0;
};

// Parses every regular file of a T-Drive directory (files processed on
// `workers` threads, merged in file-name order), applies the optional
// window, segments, and converts to tile paths.
IngestResult ingest_tdrive_dir(const std::filesystem::path& dir,
                               const SegmentParams& params,
                               const std::optional<ObservationWindow>& window,
                               int workers = 1);

}  // namespace reachgrid

#endif  // REACHGRID_TRAJECTORY_H_
