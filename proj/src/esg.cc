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

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>

#include "reachgrid/errors.h"

namespace reachgrid {

void Esg::add_path(const TilePath& path) {
  for (std::size_t i = 0; i < path.visits.size(); ++i) {
    nodes_.insert(path.visits[i].tile);
    if (i > 0) add_edge(path.visits[i - 1].tile, path.visits[i].tile, 1);
  }
}

void Esg::add_edge(TileId from, TileId to, std::uint64_t count) {
  if (count == 0) return;
  nodes_.insert(from);
  nodes_.insert(to);
  edges_[{from, to}] += count;
  out_degree_[from] += count;
}

void Esg::merge(const Esg& other) {
  nodes_.insert(other.nodes_.begin(), other.nodes_.end());
  for (const auto& [edge, count] : other.edges_) {
    add_edge(edge.first, edge.second, count);
  }
}

std::uint64_t Esg::out_degree(TileId t) const {
  const auto it = out_degree_.find(t);
  return it == out_degree_.end() ? 0 : it->second;
}

Esg build_esg(std::span<const TilePath> paths) {
  Esg g;
  for (const TilePath& p : paths) g.add_path(p);
  return g;
}

TransitionMatrixView transition_matrix(const Esg& g) {
  if (g.empty()) throw ParameterError("transition matrix of an empty graph");
  TransitionMatrixView view;
  view.nodes.assign(g.nodes().begin(), g.nodes().end());
  for (std::size_t i = 0; i < view.nodes.size(); ++i) {
    view.index.emplace(view.nodes[i], static_cast<Eigen::Index>(i));
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(g.edges().size() + view.nodes.size());
  for (const auto& [edge, count] : g.edges()) {
    triplets.emplace_back(view.index.at(edge.first), view.index.at(edge.second),
                          static_cast<double>(count) /
                              static_cast<double>(g.out_degree(edge.first)));
  }
  for (const TileId& node : view.nodes) {
    if (g.out_degree(node) == 0) {
      const Eigen::Index i = view.index.at(node);
      triplets.emplace_back(i, i, 1.0);
    }
  }
  const auto n = static_cast<Eigen::Index>(view.nodes.size());
  view.p.resize(n, n);
  view.p.setFromTriplets(triplets.begin(), triplets.end());
  view.p.makeCompressed();
  return view;
}

SparseRowMatrix<double> n_step(const TransitionMatrixView& view, int n,
                               Eigen::Index nonzero_cap) {
  if (n < 1) throw ParameterError("n_step requires n >= 1");
  SparseRowMatrix<double> result = view.p;
  for (int step = 1; step < n; ++step) {
    result = (result * view.p).pruned();
    if (result.nonZeros() > nonzero_cap) {
      throw std::length_error("P^" + std::to_string(step + 1) + " has " +
                              std::to_string(result.nonZeros()) +
                              " nonzeros, cap is " +
                              std::to_string(nonzero_cap));
    }
  }
  return result;
}

void write_graph_dump(std::ostream& out, const Esg& g) {
  std::vector<std::tuple<std::string, std::string, std::uint64_t>> rows;
  rows.reserve(g.edges().size());
  for (const auto& [edge, count] : g.edges()) {
    rows.emplace_back(tile_to_quadkey(edge.first), tile_to_quadkey(edge.second),
                      count);
  }
  std::sort(rows.begin(), rows.end());
  for (const auto& [u, v, count] : rows) {
    out << u << '\t' << v << '\t' << count << '\n';
  }
}

Esg read_graph_dump(std::istream& in) {
  Esg g;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    std::uint64_t count = 0;
    if (t2 == std::string::npos) {
      throw FormatError("malformed graph dump line " + std::to_string(line_no));
    }
    const char* first = line.data() + t2 + 1;
    const char* last = line.data() + line.size();
    const auto [ptr, ec] = std::from_chars(first, last, count);
    if (ec != std::errc() || ptr != last || count == 0) {
      throw FormatError("bad edge count on graph dump line " +
                        std::to_string(line_no));
    }
    g.add_edge(quadkey_to_tile(std::string_view(line).substr(0, t1)),
               quadkey_to_tile(std::string_view(line).substr(t1 + 1, t2 - t1 - 1)),
               count);
  }
  return g;
}

}  // namespace reachgrid
