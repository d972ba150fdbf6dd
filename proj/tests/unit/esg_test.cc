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

#include "reachgrid/esg.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "reachgrid/errors.h"

namespace reachgrid {
namespace {

const TileId A{10, 10}, B{11, 10}, C{12, 10};

TilePath path_of(std::initializer_list<TileId> tiles) {
  TilePath p{"p", {}};
  std::int64_t t = 0;
  for (TileId x : tiles) p.visits.push_back({x, t++, 0});
  return p;
}

double entry(const TransitionMatrixView& v, const SparseRowMatrix<double>& m,
             TileId a, TileId b) {
  return m.coeff(v.index.at(a), v.index.at(b));
}

TEST(Esg, BuildExamples) {
  const TilePath abc = path_of({A, B, C});
  const Esg g = build_esg(std::span(&abc, 1));
  EXPECT_EQ(g.nodes().size(), 3u);
  ASSERT_EQ(g.edges().size(), 2u);
  EXPECT_EQ(g.edges().at({A, B}), 1u);
  EXPECT_EQ(g.edges().at({B, C}), 1u);

  const std::vector<TilePath> twice = {path_of({A, B}), path_of({A, B})};
  EXPECT_EQ(build_esg(twice).edges().at({A, B}), 2u);
  EXPECT_TRUE(build_esg({}).empty());
}

TEST(Esg, TransitionExamples) {
  Esg g;
  g.add_edge(A, B, 3);
  g.add_edge(A, C, 1);
  const auto v = transition_matrix(g);
  EXPECT_EQ(v.nodes, (std::vector<TileId>{A, B, C}));
  EXPECT_DOUBLE_EQ(entry(v, v.p, A, B), 0.75);
  EXPECT_DOUBLE_EQ(entry(v, v.p, A, C), 0.25);
  EXPECT_DOUBLE_EQ(entry(v, v.p, C, C), 1.0);
  EXPECT_DOUBLE_EQ(entry(v, v.p, B, B), 1.0);
  EXPECT_THROW(transition_matrix(Esg{}), ParameterError);
}

TEST(Esg, NStepExamples) {
  const TilePath abc = path_of({A, B, C});
  const auto v = transition_matrix(build_esg(std::span(&abc, 1)));
  EXPECT_TRUE(n_step(v, 1).isApprox(v.p));
  EXPECT_DOUBLE_EQ(entry(v, n_step(v, 2), A, C), 1.0);
  EXPECT_THROW(n_step(v, 0), ParameterError);
  EXPECT_THROW(n_step(v, 2, 2), std::length_error);
}

TEST(Esg, PermutationInvariant) {
  std::mt19937_64 rng(4);
  std::vector<TilePath> paths;
  for (int i = 0; i < 30; ++i) {
    TilePath p{"p" + std::to_string(i), {}};
    for (int k = 0; k < 10; ++k) {
      p.visits.push_back({TileId{static_cast<std::uint32_t>(rng() % 6),
                                 static_cast<std::uint32_t>(rng() % 6)},
                          k, 0});
    }
    paths.push_back(p);
  }
  const Esg ref = build_esg(paths);
  for (int round = 0; round < 10; ++round) {
    std::shuffle(paths.begin(), paths.end(), rng);
    EXPECT_EQ(build_esg(paths), ref);
  }
  Esg left = build_esg(std::span(paths).first(10));
  left.merge(build_esg(std::span(paths).subspan(10)));
  EXPECT_EQ(left, ref);
}

TEST(Esg, RowSumsOfPowers) {
  std::mt19937_64 rng(8);
  for (int round = 0; round < 50; ++round) {
    Esg g;
    const int n = 2 + static_cast<int>(rng() % 19);
    for (int e = 0; e < 3 * n; ++e) {
      g.add_edge({static_cast<std::uint32_t>(rng() % n), 0},
                 {static_cast<std::uint32_t>(rng() % n), 0}, 1 + rng() % 5);
    }
    const auto v = transition_matrix(g);
    for (int k = 1; k <= 6; ++k) {
      const SparseRowMatrix<double> pk = n_step(v, k);
      for (Eigen::Index r = 0; r < pk.rows(); ++r) {
        EXPECT_NEAR(pk.row(r).sum(), 1.0, 1e-9);
      }
    }
  }
}

TEST(Esg, GraphDumpRoundtrip) {
  Esg g;
  g.add_edge(A, B, 3);
  g.add_edge(C, A, 7);
  g.add_edge({8388608, 8388608}, A, 1);
  std::ostringstream out;
  write_graph_dump(out, g);
  std::istringstream in(out.str());
  EXPECT_EQ(read_graph_dump(in), g);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, 24), tile_to_quadkey(A));
}

}  // namespace
}  // namespace reachgrid
