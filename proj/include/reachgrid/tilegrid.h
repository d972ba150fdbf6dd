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

// Zoom-24 Web-Mercator (slippy map, XYZ) tile arithmetic.

#ifndef REACHGRID_TILEGRID_H_
#define REACHGRID_TILEGRID_H_

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace reachgrid {

inline constexpr int kZoom = 24;
inline constexpr std::uint32_t kGridSize = std::uint32_t{1} << kZoom;
inline constexpr double kMaxLatitude = 85.05112878;

// A zoom-24 tile. Ordered by (y, x), which is the iteration order used
// everywhere determinism matters.
struct TileId {
  std::uint32_t x = 0;
  std::uint32_t y = 0;

  friend constexpr bool operator==(const TileId&, const TileId&) = default;
  friend constexpr std::strong_ordering operator<=>(const TileId& a,
                                                    const TileId& b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

struct TileOffset {
  int dx = 0;
  int dy = 0;
  friend constexpr bool operator==(const TileOffset&,
                                   const TileOffset&) = default;
};

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

constexpr bool is_valid(TileId t) { return t.x < kGridSize && t.y < kGridSize; }

// Returns std::nullopt when the coordinate is outside Web-Mercator validity.
std::optional<TileId> latlon_to_tile(double lat, double lon);

// Geographic center of a tile.
LatLon tile_center(TileId t);

std::string tile_to_quadkey(TileId t);
// Throws FormatError unless `key` is 24 digits over {0,1,2,3}.
TileId quadkey_to_tile(std::string_view key);

// Interleaved (y, x) bits; sorting by this key is sorting by quadkey.
constexpr std::uint64_t quadkey_order(TileId t) {
  std::uint64_t code = 0;
  for (int bit = kZoom - 1; bit >= 0; --bit) {
    code = (code << 2) | (((t.y >> bit) & 1u) << 1) | ((t.x >> bit) & 1u);
  }
  return code;
}

constexpr std::uint32_t chebyshev(TileId a, TileId b) {
  const std::uint32_t dx = a.x > b.x ? a.x - b.x : b.x - a.x;
  const std::uint32_t dy = a.y > b.y ? a.y - b.y : b.y - a.y;
  return dx > dy ? dx : dy;
}

constexpr TileOffset offset_between(TileId from, TileId to) {
  return {static_cast<int>(to.x) - static_cast<int>(from.x),
          static_cast<int>(to.y) - static_cast<int>(from.y)};
}

// Tiles within Chebyshev radius r of s, clipped at the grid edge, in
// (dy, dx) raster order. No antimeridian wraparound.
std::vector<TileId> neighborhood(TileId s, int r);

}  // namespace reachgrid

#endif  // REACHGRID_TILEGRID_H_
