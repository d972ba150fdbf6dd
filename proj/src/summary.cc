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

#include "reachgrid/summary.h"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>

#include "reachgrid/errors.h"

namespace reachgrid {

void SummaryParams::validate() const {
  if (r < 1 || r > kMaxRadius) {
    throw ParameterError("r must be in [1, " + std::to_string(kMaxRadius) +
                         "], got " + std::to_string(r));
  }
  if (tau_s <= 0) throw ParameterError("tau_s must be > 0");
  if (h_max < 1) throw ParameterError("h_max must be >= 1");
}

std::vector<TransitionEvent> extract_events(const TilePath& path,
                                            const SummaryParams& params,
                                            std::uint32_t trajectory) {
  params.validate();
  std::vector<TransitionEvent> events;
  for_each_event(path, params, trajectory,
                 [&](const TransitionEvent& e) { events.push_back(e); });
  return events;
}

void SparseAccumulator::add(const TransitionEvent& e) {
  cells_[CellKey{e.dst, Direction::kEmission, offset_between(e.dst, e.src)}
             .pack()]
      .add(e.path_mm, e.elapsed_s);
  cells_[CellKey{e.src, Direction::kAbsorption, offset_between(e.src, e.dst)}
             .pack()]
      .add(e.path_mm, e.elapsed_s);
}

void SparseAccumulator::add_cell(std::uint64_t key,
                                 const CellAccumulator& cell) {
  cells_[key].merge(cell);
}

void SparseAccumulator::merge(const SparseAccumulator& other) {
  for (const auto& [key, cell] : other.cells_) cells_[key].merge(cell);
}

ReachabilitySummary::ReachabilitySummary(TileId c, int radius)
    : center(c),
      r(radius),
      emission(static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1))),
      absorption(emission.size()) {}

double ReachabilitySummary::raw_channel(std::size_t p, int channel) const {
  const CellAccumulator& cell =
      channel < kAbsorptionCount ? emission[p] : absorption[p];
  switch (channel % 3) {
    case 0:
      return static_cast<double>(cell.count);
    case 1:
      return cell.mean_m();
    default:
      return cell.mean_s();
  }
}

std::map<TileId, ReachabilitySummary> to_summaries(
    const SparseAccumulator& acc, int r) {
  std::map<TileId, ReachabilitySummary> out;
  for (const auto& [key, cell] : acc.cells()) {
    const CellKey k = CellKey::unpack(key);
    auto it = out.find(k.tile);
    if (it == out.end()) {
      it = out.emplace(k.tile, ReachabilitySummary(k.tile, r)).first;
    }
    it->second.cell(k.direction, k.offset).merge(cell);
  }
  return out;
}

std::map<TileId, ReachabilitySummary> accumulate(
    std::span<const TransitionEvent> events, int r) {
  SparseAccumulator acc;
  for (const TransitionEvent& e : events) {
    if (chebyshev(e.src, e.dst) > static_cast<std::uint32_t>(r)) {
      throw ParameterError("event outside the r-neighborhood");
    }
    acc.add(e);
  }
  return to_summaries(acc, r);
}

NormalizationScheme parse_normalization_scheme(std::string_view name) {
  if (name == "log1p-max") return NormalizationScheme::kLog1pMax;
  if (name == "linear-max") return NormalizationScheme::kLinearMax;
  throw ParameterError("unknown normalization scheme '" + std::string(name) +
                       "'");
}

std::string_view to_string(NormalizationScheme scheme) {
  return scheme == NormalizationScheme::kLog1pMax ? "log1p-max" : "linear-max";
}

void ChannelMaxima::observe(const CellAccumulator& cell, Direction d) {
  if (cell.count == 0) return;
  const int base = d == Direction::kEmission ? 0 : 3;
  value[base] = std::max(value[base], static_cast<double>(cell.count));
  value[base + 1] = std::max(value[base + 1], cell.mean_m());
  value[base + 2] = std::max(value[base + 2], cell.mean_s());
}

void ChannelMaxima::merge(const ChannelMaxima& o) {
  for (int c = 0; c < kSummaryChannels; ++c) {
    value[c] = std::max(value[c], o.value[c]);
  }
}

ChannelMaxima compute_maxima(const std::map<TileId, ReachabilitySummary>& s) {
  ChannelMaxima m;
  for (const auto& [tile, summary] : s) {
    for (const auto& cell : summary.emission) m.observe(cell, Direction::kEmission);
    for (const auto& cell : summary.absorption) {
      m.observe(cell, Direction::kAbsorption);
    }
  }
  return m;
}

float normalize_value(double raw, int channel, const ChannelMaxima& maxima,
                      NormalizationScheme scheme) {
  const double max = maxima.value[channel];
  if (raw <= 0.0 || max <= 0.0) return 0.0f;
  double v;
  if (channel % 3 == 0 && scheme == NormalizationScheme::kLog1pMax) {
    v = std::log1p(raw) / std::log1p(max);
  } else {
    v = raw / max;
  }
  return static_cast<float>(std::clamp(v, 0.0, 1.0));
}

std::vector<float> normalize(const ReachabilitySummary& s,
                             const ChannelMaxima& maxima,
                             NormalizationScheme scheme) {
  const std::size_t pixels = s.emission.size();
  std::vector<float> out(pixels * kSummaryChannels, 0.0f);
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int c = 0; c < kSummaryChannels; ++c) {
      out[p * kSummaryChannels + c] =
          normalize_value(s.raw_channel(p, c), c, maxima, scheme);
    }
  }
  return out;
}

std::array<float, 3> LarRaster::normalized(TileId t) const {
  std::array<float, 3> out{};
  const auto it = cells.find(t);
  if (it == cells.end()) return out;
  const LarCell& c = it->second;
  const double raw[3] = {static_cast<double>(c.records),
                         static_cast<double>(c.trajectories),
                         c.mean_speed_mps()};
  for (int k = 0; k < 3; ++k) {
    if (raw[k] <= 0.0 || maxima[k] <= 0.0) continue;
    const double v = k < 2 ? std::log1p(raw[k]) / std::log1p(maxima[k])
                           : raw[k] / maxima[k];
    out[k] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

LarRaster lar_raster(std::span<const TilePath> paths,
                     const ObservationWindow& window) {
  LarRaster lar;
  for (const TilePath& path : paths) {
    std::set<TileId> seen;
    const auto& v = path.visits;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!window.contains(v[i].timestamp)) continue;
      LarCell& cell = lar.cells[v[i].tile];
      ++cell.records;
      if (seen.insert(v[i].tile).second) ++cell.trajectories;
      if (i + 1 < v.size() && window.contains(v[i + 1].timestamp)) {
        cell.dist_mm += v[i + 1].cum_mm - v[i].cum_mm;
        cell.dt_s += v[i + 1].timestamp - v[i].timestamp;
      }
    }
  }
  for (const auto& [tile, c] : lar.cells) {
    lar.maxima[0] = std::max(lar.maxima[0], static_cast<double>(c.records));
    lar.maxima[1] =
        std::max(lar.maxima[1], static_cast<double>(c.trajectories));
    lar.maxima[2] = std::max(lar.maxima[2], c.mean_speed_mps());
  }
  return lar;
}

void write_lar_csv(std::ostream& out, const LarRaster& lar) {
  std::vector<std::pair<std::string, TileId>> order;
  order.reserve(lar.cells.size());
  for (const auto& [tile, cell] : lar.cells) {
    order.emplace_back(tile_to_quadkey(tile), tile);
  }
  std::sort(order.begin(), order.end());
  out << "quadkey,record_count,distinct_trajectory_count,mean_speed_mps,"
         "norm_record_count,norm_distinct_trajectory_count,norm_mean_speed\n";
  char buf[160];
  for (const auto& [key, tile] : order) {
    const LarCell& c = lar.cells.at(tile);
    const auto n = lar.normalized(tile);
    std::snprintf(buf, sizeof(buf), ",%llu,%llu,%.17g,%.9g,%.9g,%.9g\n",
                  static_cast<unsigned long long>(c.records),
                  static_cast<unsigned long long>(c.trajectories),
                  c.mean_speed_mps(), n[0], n[1], n[2]);
    out << key << buf;
  }
}

}  // namespace reachgrid
