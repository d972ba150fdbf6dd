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

#include "reachgrid/tilegrid.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "reachgrid/errors.h"

namespace reachgrid {

namespace {

std::uint32_t clamp_index(long double v) {
  const long double f = std::floor(v);
  if (f < 0) return 0;
  if (f > static_cast<long double>(kGridSize - 1)) return kGridSize - 1;
  return static_cast<std::uint32_t>(f);
}

}  // namespace

std::optional<TileId> latlon_to_tile(double lat, double lon) {
  if (!std::isfinite(lat) || !std::isfinite(lon)) return std::nullopt;
  if (lat < -kMaxLatitude || lat > kMaxLatitude) return std::nullopt;
  if (lon < -180.0 || lon >= 180.0) return std::nullopt;

  constexpr long double kPi = std::numbers::pi_v<long double>;
  const long double n = static_cast<long double>(kGridSize);
  const long double x = (static_cast<long double>(lon) + 180.0L) / 360.0L * n;
  const long double phi = static_cast<long double>(lat) * kPi / 180.0L;
  const long double merc = std::log(std::tan(phi) + 1.0L / std::cos(phi));
  const long double y = (1.0L - merc / kPi) / 2.0L * n;
  return TileId{clamp_index(x), clamp_index(y)};
}

LatLon tile_center(TileId t) {
  constexpr long double kPi = std::numbers::pi_v<long double>;
  const long double n = static_cast<long double>(kGridSize);
  const long double lon = (t.x + 0.5L) / n * 360.0L - 180.0L;
  const long double merc = kPi * (1.0L - 2.0L * (t.y + 0.5L) / n);
  const long double lat = std::atan(std::sinh(merc)) * 180.0L / kPi;
  return {static_cast<double>(lat), static_cast<double>(lon)};
}

std::string tile_to_quadkey(TileId t) {
  std::string key(kZoom, '0');
  for (int i = 0; i < kZoom; ++i) {
    const int bit = kZoom - 1 - i;
    key[i] = static_cast<char>(
        '0' + ((((t.y >> bit) & 1u) << 1) | ((t.x >> bit) & 1u)));
  }
  return key;
}

TileId quadkey_to_tile(std::string_view key) {
  if (key.size() != static_cast<std::size_t>(kZoom)) {
    throw FormatError("quadkey must have 24 digits, got '" +
                      std::string(key) + "'");
  }
  TileId t;
  for (char c : key) {
    if (c < '0' || c > '3') {
      throw FormatError("invalid quadkey digit in '" + std::string(key) + "'");
    }
    const unsigned d = static_cast<unsigned>(c - '0');
    t.x = (t.x << 1) | (d & 1u);
    t.y = (t.y << 1) | (d >> 1);
  }
  return t;
}

std::vector<TileId> neighborhood(TileId s, int r) {
  if (r < 1) throw ParameterError("neighborhood radius must be >= 1");
  const std::int64_t lo_x = std::max<std::int64_t>(0, std::int64_t{s.x} - r);
  const std::int64_t hi_x =
      std::min<std::int64_t>(kGridSize - 1, std::int64_t{s.x} + r);
  const std::int64_t lo_y = std::max<std::int64_t>(0, std::int64_t{s.y} - r);
  const std::int64_t hi_y =
      std::min<std::int64_t>(kGridSize - 1, std::int64_t{s.y} + r);
  std::vector<TileId> out;
  out.reserve(static_cast<std::size_t>((hi_x - lo_x + 1) * (hi_y - lo_y + 1)));
  for (std::int64_t y = lo_y; y <= hi_y; ++y) {
    for (std::int64_t x = lo_x; x <= hi_x; ++x) {
      out.push_back({static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)});
    }
  }
  return out;
}

}  // namespace reachgrid
