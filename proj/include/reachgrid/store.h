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

// Embedding rasters (ERAS1) and the 2-D PCA projection of embeddings.

#ifndef REACHGRID_STORE_H_
#define REACHGRID_STORE_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "reachgrid/cae.h"
#include "reachgrid/io.h"
#include "reachgrid/tilegrid.h"

namespace reachgrid {

inline constexpr std::string_view kRasterMagic = "ERAS1";

struct TileRect {
  std::uint32_t min_x = 0;
  std::uint32_t min_y = 0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  bool contains(TileId t) const {
    return t.x >= min_x && t.y >= min_y && t.x - min_x < width &&
           t.y - min_y < height;
  }
};

// Smallest rectangle covering every embedding's tile.
TileRect bounding_rect(std::span<const EmbeddingVector> embeddings);

struct EmbeddingRaster {
  using Pixels =
      Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  TileId origin;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int d_r = 0;
  // Row i * width + j holds the embedding of tile (origin.x + j, origin.y + i).
  Pixels pixels;
  // Provenance echoed into the file (window, r, model hash, maxima, ...).
  KeyValueManifest manifest;

  auto pixel(std::uint32_t row, std::uint32_t col) {
    return pixels.row(Eigen::Index{row} * width + col);
  }
  auto pixel(std::uint32_t row, std::uint32_t col) const {
    return pixels.row(Eigen::Index{row} * width + col);
  }

  friend bool operator==(const EmbeddingRaster& a, const EmbeddingRaster& b);
};

struct RasterizeResult {
  EmbeddingRaster raster;
  std::size_t outside = 0;  // embeddings dropped for lying outside the bbox
};

// Zero-filled dense raster. Throws ParameterError on an empty bbox and
// IncompatibleArtifact("d_r") on mixed embedding lengths. `d_r` is used
// when `embeddings` is empty.
RasterizeResult rasterize(std::span<const EmbeddingVector> embeddings,
                          const TileRect& bbox, int d_r = 0);

void export_raster(std::ostream& out, const EmbeddingRaster& raster);
void export_raster(const std::filesystem::path& path,
                   const EmbeddingRaster& raster);
// Throws FormatError naming the offending field.
EmbeddingRaster import_raster(std::istream& in);
EmbeddingRaster import_raster(const std::filesystem::path& path);

struct Projection {
  std::vector<TileId> tiles;  // quadkey order
  Eigen::MatrixX2d coords;    // (pc1, pc2) per tile
  Eigen::Vector2d eigenvalues = Eigen::Vector2d::Zero();
  double total_variance = 0.0;
  bool degenerate = false;  // rank-0 data: coords are all zero
};

// Top two principal components by deterministic power iteration with
// deflation on the centered covariance. Each axis is signed so that its
// largest-magnitude loading is positive. Throws ParameterError for fewer
// than two embeddings.
Projection project_2d(std::span<const EmbeddingVector> embeddings);

// "quadkey,pc1,pc2"
void write_projection_csv(std::ostream& out, const Projection& p);

}  // namespace reachgrid

#endif  // REACHGRID_STORE_H_
