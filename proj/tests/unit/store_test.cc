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

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <limits>
#include <random>
#include <sstream>

#include "reachgrid/errors.h"

namespace reachgrid {
namespace {

EmbeddingVector ev(std::uint32_t x, std::uint32_t y, std::vector<float> v) {
  return {{x, y}, Eigen::Map<Eigen::VectorXf>(v.data(), static_cast<Eigen::Index>(v.size()))};
}

TEST(Store, RasterizeCornerAndEmpty) {
  const TileRect box{100, 200, 4, 3};
  const auto r = rasterize(std::vector{ev(100, 200, {1, 2})}, box);
  EXPECT_EQ(r.outside, 0u);
  EXPECT_EQ(r.raster.pixels.rows(), 12);
  EXPECT_EQ(r.raster.pixel(0, 0)(0), 1.0f);
  EXPECT_EQ(r.raster.pixel(0, 0)(1), 2.0f);
  EXPECT_EQ(r.raster.pixels.cwiseAbs().sum(), 3.0f);

  const auto empty = rasterize({}, box, 8);
  EXPECT_EQ(empty.raster.pixels.cols(), 8);
  EXPECT_EQ(empty.raster.pixels.cwiseAbs().maxCoeff(), 0.0f);
  EXPECT_THROW(rasterize({}, {0, 0, 0, 3}, 8), ParameterError);
}

TEST(Store, RasterizePlacementAndOutside) {
  std::vector<EmbeddingVector> e = {ev(10, 20, {1, 1}), ev(12, 21, {2, 3}),
                                    ev(50, 50, {9, 9})};
  const auto r = rasterize(e, {10, 20, 3, 2});
  EXPECT_EQ(r.outside, 1u);
  EXPECT_EQ(r.raster.pixel(1, 2)(1), 3.0f);
  EXPECT_EQ(r.raster.pixel(0, 0)(0), 1.0f);
  EXPECT_EQ(r.raster.pixel(1, 1)(0), 0.0f);
  e.push_back(ev(11, 20, {1, 2, 3}));
  try {
    rasterize(e, {10, 20, 3, 2});
    FAIL();
  } catch (const IncompatibleArtifact& ex) {
    EXPECT_EQ(ex.field(), "d_r");
  }
  const TileRect tight = bounding_rect(std::vector{ev(5, 9, {0}), ev(7, 6, {0})});
  EXPECT_EQ(tight.min_x, 5u);
  EXPECT_EQ(tight.min_y, 6u);
  EXPECT_EQ(tight.width, 3u);
  EXPECT_EQ(tight.height, 4u);
}

EmbeddingRaster random_raster(int d) {
  std::mt19937_64 rng(d);
  std::normal_distribution<float> g;
  std::vector<EmbeddingVector> e;
  for (std::uint32_t i = 0; i < 30; ++i) {
    std::vector<float> v(static_cast<std::size_t>(d));
    for (float& x : v) x = g(rng);
    e.push_back(ev(1000 + static_cast<std::uint32_t>(rng() % 9),
                   2000 + static_cast<std::uint32_t>(rng() % 7), v));
  }
  auto r = rasterize(e, {1000, 2000, 9, 7}).raster;
  r.pixel(0, 0)(0) = -0.0f;
  r.pixel(0, 1)(0) = std::numeric_limits<float>::denorm_min();
  r.manifest.set("r", std::int64_t{12});
  return r;
}

TEST(Store, ExportImportRoundtrip) {
  for (int d : {8, 16}) {
    const EmbeddingRaster r = random_raster(d);
    std::stringstream bytes;
    export_raster(bytes, r);
    const std::string first = bytes.str();
    const EmbeddingRaster back = import_raster(bytes);
    EXPECT_TRUE(back == r);
    EXPECT_EQ(back.manifest.get("r"), "12");
    EXPECT_EQ(back.manifest.get("fill"), "0");
    EXPECT_EQ(back.manifest.get("origin_quadkey"), tile_to_quadkey({1000, 2000}));
    std::stringstream again;
    export_raster(again, back);
    EXPECT_EQ(again.str(), first);
  }
}

std::string field_of(const std::string& bytes) {
  std::istringstream in(bytes);
  try {
    import_raster(in);
  } catch (const FormatError& e) {
    const std::string what = e.what();
    return what.substr(0, what.find(':'));
  }
  return "";
}

TEST(Store, ImportErrorsNameTheField) {
  const EmbeddingRaster r = random_raster(16);
  std::stringstream bytes;
  export_raster(bytes, r);
  const std::string good = bytes.str();
  EXPECT_EQ(field_of(good), "");
  EXPECT_EQ(field_of(good.substr(0, good.size() - 5)), "shape");
  EXPECT_EQ(field_of("ERAS2" + good.substr(5)), "magic");

  // Manifest says d_r=16 but rows hold 8 floats.
  EmbeddingRaster eight = random_raster(8);
  std::stringstream b8;
  export_raster(b8, eight);
  std::string lie = b8.str();
  lie.replace(lie.find("d_r=8\n"), 6, "d_r=16\n");
  EXPECT_EQ(field_of(lie), "d_r");
}

TEST(Store, ProjectionTwoPointsAndDegenerate) {
  const auto p = project_2d(std::vector{ev(1, 1, {0, 0, 0}), ev(2, 1, {1, 2, 2})});
  EXPECT_FALSE(p.degenerate);
  EXPECT_NEAR(std::abs(p.coords(0, 0) - p.coords(1, 0)), 3.0, 1e-12);
  EXPECT_NEAR(p.coords(0, 1), 0.0, 1e-12);
  EXPECT_NEAR(p.coords(1, 1), 0.0, 1e-12);

  const auto same = project_2d(std::vector{ev(1, 1, {4, 4}), ev(2, 1, {4, 4}), ev(3, 1, {4, 4})});
  EXPECT_TRUE(same.degenerate);
  EXPECT_EQ(same.coords.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(project_2d(std::vector{ev(1, 1, {4, 4})}), ParameterError);
}

TEST(Store, ProjectionMatchesDenseEigensolver) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  for (int round = 0; round < 5; ++round) {
    std::vector<EmbeddingVector> e;
    Eigen::MatrixXd x(50, 8);
    for (int i = 0; i < 50; ++i) {
      std::vector<float> v(8);
      for (int j = 0; j < 8; ++j) v[static_cast<std::size_t>(j)] = static_cast<float>(g(rng) * (j + 1));
      e.push_back(ev(static_cast<std::uint32_t>(i), 3, v));
      for (int j = 0; j < 8; ++j) x(i, j) = v[static_cast<std::size_t>(j)];
    }
    const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd cov = c.transpose() * c / 49.0;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const Eigen::VectorXd ev_sorted = solver.eigenvalues().reverse();
    const auto p = project_2d(e);
    EXPECT_NEAR(p.total_variance, cov.trace(), 1e-6 * cov.trace());
    EXPECT_NEAR(p.eigenvalues[0], ev_sorted[0], 1e-6 * ev_sorted[0]);
    EXPECT_NEAR(p.eigenvalues[1], ev_sorted[1], 1e-6 * ev_sorted[0]);
    EXPECT_NEAR((p.eigenvalues[0] + p.eigenvalues[1]) / p.total_variance,
                (ev_sorted[0] + ev_sorted[1]) / cov.trace(), 1e-6);
    // Coordinates agree with the oracle's axes up to sign.
    for (int k = 0; k < 2; ++k) {
      const Eigen::VectorXd axis = solver.eigenvectors().col(7 - k);
      Eigen::VectorXd want = c * axis;
      Eigen::VectorXd got(50);
      for (int i = 0; i < 50; ++i) {
        const auto it = std::find(p.tiles.begin(), p.tiles.end(),
                                  TileId{static_cast<std::uint32_t>(i), 3});
        got[i] = p.coords(it - p.tiles.begin(), k);
      }
      if (want.dot(got) < 0) want = -want;
      EXPECT_LT((want - got).cwiseAbs().maxCoeff(), 1e-6 * want.cwiseAbs().maxCoeff());
    }
  }
}

TEST(Store, ProjectionIsOrderInvariant) {
  std::mt19937_64 rng(13);
  std::normal_distribution<float> g;
  std::vector<EmbeddingVector> e;
  for (std::uint32_t i = 0; i < 40; ++i) {
    std::vector<float> v(6);
    for (float& x : v) x = g(rng);
    e.push_back(ev(i * 7 % 40, i, v));
  }
  const Projection a = project_2d(e);
  std::shuffle(e.begin(), e.end(), rng);
  const Projection b = project_2d(e);
  EXPECT_EQ(a.tiles, b.tiles);
  for (int k = 0; k < 2; ++k) {
    const double s = a.coords.col(k).dot(b.coords.col(k)) < 0 ? -1.0 : 1.0;
    EXPECT_LT((a.coords.col(k) - s * b.coords.col(k)).cwiseAbs().maxCoeff(), 1e-9);
  }
  std::ostringstream csv;
  write_projection_csv(csv, a);
  EXPECT_EQ(csv.str().substr(0, 16), "quadkey,pc1,pc2\n");
}

}  // namespace
}  // namespace reachgrid
