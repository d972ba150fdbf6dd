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

#include "reachgrid/summary_archive.h"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "reachgrid/errors.h"

namespace reachgrid {

namespace {

std::string channel_list() {
  std::string out;
  for (std::size_t c = 0; c < kChannelNames.size(); ++c) {
    if (c) out += ',';
    out += kChannelNames[c];
  }
  return out;
}

}  // namespace

KeyValueManifest SummaryArchiveHeader::to_manifest() const {
  KeyValueManifest m;
  m.set("r", std::int64_t{params.r});
  m.set("side", std::int64_t{params.side()});
  m.set("channels", channel_list());
  m.set("layout", "row-major(i,j,channel) float32-le");
  m.set("normalization", std::string(to_string(scheme)));
  for (int c = 0; c < kSummaryChannels; ++c) {
    m.set("max_" + std::string(kChannelNames[c]), maxima.value[c]);
  }
  m.set("window_t0", window.t0);
  m.set("window_delta_t", window.delta_t);
  m.set("tau_s", params.tau_s);
  m.set("h_max", std::int64_t{params.h_max});
  m.set("shard_block", std::int64_t{shard_block});
  m.set("trajectory_count", static_cast<std::int64_t>(trajectory_count));
  m.set("event_count", static_cast<std::int64_t>(event_count));
  m.set("tile_count", static_cast<std::int64_t>(tile_count));
  m.set("input_sha256", input_sha256);
  return m;
}

SummaryArchiveHeader SummaryArchiveHeader::from_manifest(
    const KeyValueManifest& m) {
  SummaryArchiveHeader h;
  h.params.r = static_cast<int>(m.get_int("r"));
  h.params.tau_s = m.get_int("tau_s");
  h.params.h_max = static_cast<int>(m.get_int("h_max"));
  try {
    h.params.validate();
  } catch (const ParameterError& e) {
    throw FormatError(std::string("RSUM1 manifest: ") + e.what());
  }
  if (m.get_int("side") != h.params.side()) {
    throw FormatError("RSUM1 manifest: side does not match r");
  }
  if (m.get("channels") != channel_list()) {
    throw FormatError("RSUM1 manifest: unsupported channels '" +
                      m.get("channels") + "'");
  }
  h.scheme = parse_normalization_scheme(m.get("normalization"));
  for (int c = 0; c < kSummaryChannels; ++c) {
    h.maxima.value[c] = m.get_double("max_" + std::string(kChannelNames[c]));
  }
  h.window = {m.get_int("window_t0"), m.get_int("window_delta_t")};
  h.shard_block = static_cast<std::uint32_t>(m.get_int("shard_block"));
  h.trajectory_count = static_cast<std::uint64_t>(m.get_int("trajectory_count"));
  h.event_count = static_cast<std::uint64_t>(m.get_int("event_count"));
  h.tile_count = static_cast<std::uint64_t>(m.get_int("tile_count"));
  h.input_sha256 = m.get("input_sha256");
  return h;
}

SummaryArchiveWriter::SummaryArchiveWriter(std::ostream& out,
                                           const SummaryArchiveHeader& header)
    : out_(out), header_(header) {
  out_ << kSummaryMagic << '\n';
  header_.to_manifest().write(out_);
}

void SummaryArchiveWriter::add(TileId tile, std::span<const float> tensor) {
  if (tensor.size() != header_.tensor_size()) {
    throw FormatError("summary tensor has " + std::to_string(tensor.size()) +
                      " values, expected " +
                      std::to_string(header_.tensor_size()));
  }
  const std::uint64_t order = quadkey_order(tile);
  if (last_order_ && order <= *last_order_) {
    throw FormatError("summary records must be in increasing quadkey order");
  }
  last_order_ = order;
  out_ << tile_to_quadkey(tile);
  write_f32_le(out_, tensor);
  ++written_;
}

void SummaryArchiveWriter::finish() {
  if (written_ != header_.tile_count) {
    throw FormatError("wrote " + std::to_string(written_) +
                      " summary records, manifest declares " +
                      std::to_string(header_.tile_count));
  }
  out_.flush();
}

SummaryArchiveReader::SummaryArchiveReader(std::istream& in) : in_(in) {
  std::string magic;
  if (!std::getline(in_, magic) || magic != kSummaryMagic) {
    throw FormatError("not an RSUM1 archive (bad magic)");
  }
  manifest_ = KeyValueManifest::read(in_);
  header_ = SummaryArchiveHeader::from_manifest(manifest_);
}

bool SummaryArchiveReader::next(TileId& tile, std::span<float> tensor) {
  if (read_ == header_.tile_count) return false;
  if (tensor.size() != header_.tensor_size()) {
    throw FormatError("tensor buffer has wrong size for this archive");
  }
  char key[kZoom];
  in_.read(key, kZoom);
  if (in_.gcount() != kZoom) {
    throw FormatError("truncated RSUM1 archive at record " +
                      std::to_string(read_));
  }
  tile = quadkey_to_tile(std::string_view(key, kZoom));
  read_f32_le(in_, tensor);
  ++read_;
  return true;
}

SummaryArchive read_summary_archive(std::istream& in) {
  SummaryArchiveReader reader(in);
  SummaryArchive archive;
  archive.header = reader.header();
  const auto n = static_cast<Eigen::Index>(archive.header.tile_count);
  archive.tensors.resize(n, static_cast<Eigen::Index>(archive.header.tensor_size()));
  archive.tiles.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    reader.next(archive.tiles[static_cast<std::size_t>(i)],
                std::span<float>(archive.tensors.row(i).data(),
                                 archive.header.tensor_size()));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after RSUM1 records");
  }
  return archive;
}

SummaryArchive read_summary_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_summary_archive(in);
}

}  // namespace reachgrid
