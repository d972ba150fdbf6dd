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

#include "reachgrid/store.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include <Eigen/Dense>

#include "reachgrid/errors.h"

namespace reachgrid {

bool operator==(const EmbeddingRaster& a, const EmbeddingRaster& b) {
  if (a.origin != b.origin || a.width != b.width || a.height != b.height ||
      a.d_r != b.d_r || a.pixels.rows() != b.pixels.rows() ||
      a.pixels.cols() != b.pixels.cols()) {
    return false;
  }
  return std::equal(a.pixels.data(), a.pixels.data() + a.pixels.size(),
                    b.pixels.data(), [](float x, float y) {
                      return std::bit_cast<std::uint32_t>(x) ==
                             std::bit_cast<std::uint32_t>(y);
                    });
}

TileRect bounding_rect(std::span<const EmbeddingVector> embeddings) {
  if (embeddings.empty()) return {};
  std::uint32_t lx = kGridSize, ly = kGridSize, hx = 0, hy = 0;
  for (const EmbeddingVector& e : embeddings) {
    lx = std::min(lx, e.tile.x);
    ly = std::min(ly, e.tile.y);
    hx = std::max(hx, e.tile.x);
    hy = std::max(hy, e.tile.y);
  }
  return {lx, ly, hx - lx + 1, hy - ly + 1};
}

RasterizeResult rasterize(std::span<const EmbeddingVector> embeddings,
                          const TileRect& bbox, int d_r) {
  if (bbox.width == 0 || bbox.height == 0) {
    throw ParameterError("raster bounding box is empty");
  }
  if (!embeddings.empty()) {
    d_r = static_cast<int>(embeddings.front().values.size());
  }
  if (d_r < 1) throw ParameterError("raster d_R must be >= 1");
  for (const EmbeddingVector& e : embeddings) {
    if (e.values.size() != d_r) {
      throw IncompatibleArtifact("d_r", "embedding of length " +
                                            std::to_string(e.values.size()) +
                                            " in a d_r=" + std::to_string(d_r) +
                                            " raster");
    }
  }
  RasterizeResult result;
  EmbeddingRaster& r = result.raster;
  r.origin = {bbox.min_x, bbox.min_y};
  r.width = bbox.width;
  r.height = bbox.height;
  r.d_r = d_r;
  r.pixels = EmbeddingRaster::Pixels::Zero(
      Eigen::Index{bbox.width} * bbox.height, d_r);
  for (const EmbeddingVector& e : embeddings) {
    if (!bbox.contains(e.tile)) {
      ++result.outside;
      continue;
    }
    r.pixel(e.tile.y - bbox.min_y, e.tile.x - bbox.min_x) = e.values.transpose();
  }
  return result;
}

void export_raster(std::ostream& out, const EmbeddingRaster& raster) {
  KeyValueManifest m;
  m.set("origin_x", std::int64_t{raster.origin.x});
  m.set("origin_y", std::int64_t{raster.origin.y});
  m.set("origin_quadkey", tile_to_quadkey(raster.origin));
  m.set("width", std::int64_t{raster.width});
  m.set("height", std::int64_t{raster.height});
  m.set("d_r", std::int64_t{raster.d_r});
  m.set("fill", "0");
  m.set("layout", "row-major(row,col,d) float32-le");
  for (const auto& [k, v] : raster.manifest.entries()) {
    if (!m.find(k)) m.set(k, v);
  }
  out << kRasterMagic << '\n';
  m.write(out);
  write_f32_le(out, std::span<const float>(raster.pixels.data(),
                                           static_cast<std::size_t>(raster.pixels.size())));
}

void export_raster(const std::filesystem::path& path,
                   const EmbeddingRaster& raster) {
  atomic_write(path, [&](std::ostream& out) { export_raster(out, raster); });
}

EmbeddingRaster import_raster(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic) || magic != kRasterMagic) {
    throw FormatError("magic: not an ERAS1 raster");
  }
  const KeyValueManifest m = KeyValueManifest::read(in);
  EmbeddingRaster r;
  const std::int64_t ox = m.get_int("origin_x");
  const std::int64_t oy = m.get_int("origin_y");
  const std::int64_t w = m.get_int("width");
  const std::int64_t h = m.get_int("height");
  const std::int64_t d = m.get_int("d_r");
  if (ox < 0 || ox >= kGridSize) throw FormatError("origin_x: out of range");
  if (oy < 0 || oy >= kGridSize) throw FormatError("origin_y: out of range");
  if (w <= 0 || w > kGridSize) throw FormatError("width: out of range");
  if (h <= 0 || h > kGridSize) throw FormatError("height: out of range");
  if (d <= 0 || d > 65536) throw FormatError("d_r: out of range");
  r.origin = {static_cast<std::uint32_t>(ox), static_cast<std::uint32_t>(oy)};
  r.width = static_cast<std::uint32_t>(w);
  r.height = static_cast<std::uint32_t>(h);
  r.d_r = static_cast<int>(d);
  for (const auto& [k, v] : m.entries()) r.manifest.set(k, v);

  const auto payload_start = in.tellg();
  in.seekg(0, std::ios::end);
  const auto payload_bytes = static_cast<std::int64_t>(in.tellg() - payload_start);
  in.seekg(payload_start);
  const std::int64_t pixels = w * h;
  const std::int64_t expected = pixels * d * 4;
  if (payload_bytes != expected) {
    if (payload_bytes > 0 && payload_bytes % (pixels * 4) == 0) {
      throw FormatError("d_r: manifest declares d_r=" + std::to_string(d) +
                        " but the payload holds " +
                        std::to_string(payload_bytes / (pixels * 4)) +
                        " floats per pixel");
    }
    throw FormatError("shape: payload has " + std::to_string(payload_bytes) +
                      " bytes, width*height*d_r*4 = " + std::to_string(expected));
  }
  r.pixels.resize(pixels, d);
  read_f32_le(in, std::span<float>(r.pixels.data(), static_cast<std::size_t>(r.pixels.size())));
  return r;
}

EmbeddingRaster import_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return import_raster(in);
}

namespace {

// Dominant eigenpair of a symmetric positive semi-definite matrix.
std::pair<double, Eigen::VectorXd> power_iteration(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  // Deterministic start with no special alignment to the coordinate axes.
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i + 1) / n;
  v.normalize();
  for (int iter = 0; iter < 200000; ++iter) {
    Eigen::VectorXd w = a * v;
    const double norm = w.norm();
    if (norm == 0.0) return {0.0, v};
    w /= norm;
    const double change = (w - v).norm();
    v = std::move(w);
    if (change < 1e-13) break;
  }
  const double lambda = v.dot(a * v);
  return {lambda, v};
}

void canonical_sign(Eigen::VectorXd& v) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[arg]) + 1e-12) arg = i;
  }
  if (v[arg] < 0) v = -v;
}

}  // namespace

Projection project_2d(std::span<const EmbeddingVector> embeddings) {
  if (embeddings.size() < 2) {
    throw ParameterError("projection needs at least 2 embeddings");
  }
  std::vector<std::size_t> order(embeddings.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return quadkey_order(embeddings[a].tile) < quadkey_order(embeddings[b].tile);
  });
  const Eigen::Index n = static_cast<Eigen::Index>(embeddings.size());
  const Eigen::Index d = embeddings.front().values.size();
  Eigen::MatrixXd x(n, d);
  Projection p;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& e = embeddings[order[static_cast<std::size_t>(i)]];
    if (e.values.size() != d) {
      throw IncompatibleArtifact("d_r", "embeddings have mixed lengths");
    }
    x.row(i) = e.values.cast<double>().transpose();
    p.tiles.push_back(e.tile);
  }
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  p.total_variance = cov.trace();
  p.coords = Eigen::MatrixX2d::Zero(n, 2);
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if (p.total_variance <= 1e-12 * scale * static_cast<double>(d)) {
    p.degenerate = true;
    return p;
  }
  for (int k = 0; k < 2 && k < d; ++k) {
    auto [lambda, v] = power_iteration(cov);
    if (lambda <= 1e-12 * scale) break;
    canonical_sign(v);
    p.eigenvalues[k] = lambda;
    p.coords.col(k) = centered * v;
    cov -= lambda * v * v.transpose();
  }
  return p;
}

void write_projection_csv(std::ostream& out, const Projection& p) {
  out << "quadkey,pc1,pc2\n";
  char buf[64];
  for (std::size_t i = 0; i < p.tiles.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    std::snprintf(buf, sizeof(buf), ",%.9g,%.9g\n", p.coords(row, 0),
                  p.coords(row, 1));
    out << tile_to_quadkey(p.tiles[i]) << buf;
  }
}

}  // namespace reachgrid
