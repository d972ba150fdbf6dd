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

// Earth Surface Graph: observed tiles as nodes, observed consecutive tile
// transitions as edges, and the Markov chain they induce.

#ifndef REACHGRID_ESG_H_
#define REACHGRID_ESG_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "reachgrid/tilegrid.h"
#include "reachgrid/trajectory.h"

namespace reachgrid {

class Esg {
 public:
  using Edge = std::pair<TileId, TileId>;

  void add_path(const TilePath& path);
  void add_edge(TileId from, TileId to, std::uint64_t count);
  // Integer counts only, so merging is exact in any order.
  void merge(const Esg& other);

  const std::set<TileId>& nodes() const { return nodes_; }
  const std::map<Edge, std::uint64_t>& edges() const { return edges_; }
  std::uint64_t out_degree(TileId t) const;
  bool empty() const { return nodes_.empty(); }

  friend bool operator==(const Esg&, const Esg&) = default;

 private:
  std::set<TileId> nodes_;
  std::map<Edge, std::uint64_t> edges_;
  std::map<TileId, std::uint64_t> out_degree_;
};

Esg build_esg(std::span<const TilePath> paths);

template <typename Scalar>
using SparseRowMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

// Row-stochastic transition matrix over nodes indexed in (y, x) order.
// Nodes without outgoing edges are self-absorbing.
struct TransitionMatrixView {
  std::vector<TileId> nodes;
  std::map<TileId, Eigen::Index> index;
  SparseRowMatrix<double> p;
};

TransitionMatrixView transition_matrix(const Esg& g);

inline constexpr Eigen::Index kDefaultNonzeroCap = 50'000'000;

// P^n by repeated sparse multiplication. Throws ParameterError for n < 1
// and std::length_error once an intermediate exceeds `nonzero_cap`.
SparseRowMatrix<double> n_step(const TransitionMatrixView& view, int n,
                               Eigen::Index nonzero_cap = kDefaultNonzeroCap);

// "u_quadkey\tv_quadkey\tcount", sorted lexicographically.
void write_graph_dump(std::ostream& out, const Esg& g);
Esg read_graph_dump(std::istream& in);

}  // namespace reachgrid

#endif  // REACHGRID_ESG_H_
