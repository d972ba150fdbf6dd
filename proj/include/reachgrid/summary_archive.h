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

// RSUM1 summary archive: a key=value manifest followed by one record per
// tile in quadkey order. A record is the 24-byte ASCII quadkey and then
// (2r+1)*(2r+1)*6 little-endian float32 values, row-major (i, j, channel).

#ifndef REACHGRID_SUMMARY_ARCHIVE_H_
#define REACHGRID_SUMMARY_ARCHIVE_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "reachgrid/io.h"
#include "reachgrid/summary.h"
#include "reachgrid/tilegrid.h"
#include "reachgrid/trajectory.h"

namespace reachgrid {

inline constexpr std::string_view kSummaryMagic = "RSUM1";

struct SummaryArchiveHeader {
  SummaryParams params;
  NormalizationScheme scheme = NormalizationScheme::kLog1pMax;
  ChannelMaxima maxima;
  ObservationWindow window;
  std::uint32_t shard_block = 256;
  std::uint64_t trajectory_count = 0;
  std::uint64_t event_count = 0;
  std::uint64_t tile_count = 0;
  std::string input_sha256;  // content hash of the trajectory dump

  std::size_t tensor_size() const {
    return static_cast<std::size_t>(params.side() * params.side() *
                                    kSummaryChannels);
  }
  KeyValueManifest to_manifest() const;
  static SummaryArchiveHeader from_manifest(const KeyValueManifest& m);
};

class SummaryArchiveWriter {
 public:
  SummaryArchiveWriter(std::ostream& out, const SummaryArchiveHeader& header);
  // Tiles must arrive in strictly increasing quadkey order.
  void add(TileId tile, std::span<const float> tensor);
  // Throws if the number of records differs from header.tile_count.
  void finish();

 private:
  std::ostream& out_;
  SummaryArchiveHeader header_;
  std::uint64_t written_ = 0;
  std::optional<std::uint64_t> last_order_;
};

class SummaryArchiveReader {
 public:
  explicit SummaryArchiveReader(std::istream& in);
  const SummaryArchiveHeader& header() const { return header_; }
  const KeyValueManifest& manifest() const { return manifest_; }
  // Returns false once header.tile_count records have been read.
  bool next(TileId& tile, std::span<float> tensor);

 private:
  std::istream& in_;
  KeyValueManifest manifest_;
  SummaryArchiveHeader header_;
  std::uint64_t read_ = 0;
};

// Whole archive in memory: one row per tile.
struct SummaryArchive {
  SummaryArchiveHeader header;
  std::vector<TileId> tiles;
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tensors;
};

SummaryArchive read_summary_archive(std::istream& in);
SummaryArchive read_summary_archive(const std::filesystem::path& path);

}  // namespace reachgrid

#endif  // REACHGRID_SUMMARY_ARCHIVE_H_
