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

// Test fixtures and independent oracles shared by the unit and acceptance
// tests. Nothing here calls into the event enumeration or accumulation code
// under test.

#ifndef REACHGRID_TESTS_TESTING_H_
#define REACHGRID_TESTS_TESTING_H_

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "reachgrid/trajectory.h"

namespace reachgrid::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "reachgrid-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) std::abort();
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

struct RandomPathSpec {
  int max_trajectories = 10;
  int grid = 20;
  int max_visits = 30;
  int max_step = 3;         // Chebyshev step between consecutive visits
  int max_dt = 40;          // seconds between consecutive visits
  std::uint32_t base_x = 13813000;
  std::uint32_t base_y = 6200000;
};

// Random tile paths on a grid x grid patch. Consecutive visits differ, but
// a path may revisit a tile later.
inline std::vector<TilePath> random_paths(std::mt19937_64& rng,
                                          const RandomPathSpec& s = {}) {
  auto pick = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  std::vector<TilePath> paths;
  const int n = pick(1, s.max_trajectories);
  for (int t = 0; t < n; ++t) {
    TilePath p;
    p.trajectory_id = "t" + std::to_string(t);
    int x = pick(0, s.grid - 1), y = pick(0, s.grid - 1);
    std::int64_t ts = 1000 + pick(0, 500);
    std::int64_t mm = 0;
    const int len = pick(1, s.max_visits);
    for (int k = 0; k < len; ++k) {
      if (k > 0) {
        int nx, ny;
        do {
          nx = std::clamp(x + pick(-s.max_step, s.max_step), 0, s.grid - 1);
          ny = std::clamp(y + pick(-s.max_step, s.max_step), 0, s.grid - 1);
        } while (nx == x && ny == y);
        x = nx;
        y = ny;
        ts += pick(0, s.max_dt);
        mm += pick(1, 50000);
      }
      p.visits.push_back({TileId{s.base_x + static_cast<std::uint32_t>(x),
                                 s.base_y + static_cast<std::uint32_t>(y)},
                          ts, mm});
    }
    paths.push_back(std::move(p));
  }
  return paths;
}

// Raw integer accumulators of one pixel.
struct OracleCell {
  std::int64_t count = 0;
  std::int64_t sum_mm = 0;
  std::int64_t sum_s = 0;
};

// Per tile, per direction (0 emission, 1 absorption), per (dy, dx).
using OracleSummaries =
    std::map<std::pair<std::uint32_t, std::uint32_t>,  // (y, x)
             std::map<std::tuple<int, int, int>, OracleCell>>;

struct OracleResult {
  OracleSummaries summaries;
  std::int64_t events = 0;
};

// Naive O(n^2) enumeration of every visit pair of every path.
inline OracleResult brute_force_summaries(const std::vector<TilePath>& paths,
                                          int r, std::int64_t tau_s,
                                          int h_max) {
  OracleResult out;
  for (const TilePath& p : paths) {
    const auto& v = p.visits;
    for (std::size_t i = 0; i < v.size(); ++i) {
      for (std::size_t j = i + 1; j < v.size(); ++j) {
        if (j - i > static_cast<std::size_t>(h_max)) continue;
        const long long dx = static_cast<long long>(v[j].tile.x) - v[i].tile.x;
        const long long dy = static_cast<long long>(v[j].tile.y) - v[i].tile.y;
        if (dx == 0 && dy == 0) continue;
        if (std::llabs(dx) > r || std::llabs(dy) > r) continue;
        const std::int64_t dt = v[j].timestamp - v[i].timestamp;
        if (dt > tau_s) continue;
        const std::int64_t dmm = v[j].cum_mm - v[i].cum_mm;
        // Destination's emission pixel sits at the source offset.
        OracleCell& e = out.summaries[{v[j].tile.y, v[j].tile.x}]
                                     [{0, static_cast<int>(-dy), static_cast<int>(-dx)}];
        e.count += 1;
        e.sum_mm += dmm;
        e.sum_s += dt;
        OracleCell& a = out.summaries[{v[i].tile.y, v[i].tile.x}]
                                     [{1, static_cast<int>(dy), static_cast<int>(dx)}];
        a.count += 1;
        a.sum_mm += dmm;
        a.sum_s += dt;
        ++out.events;
      }
    }
  }
  return out;
}

inline std::string oracle_quadkey(std::uint32_t x, std::uint32_t y) {
  std::string q;
  for (int bit = 23; bit >= 0; --bit) {
    q += static_cast<char>('0' + 2 * ((y >> bit) & 1u) + ((x >> bit) & 1u));
  }
  return q;
}

inline std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Writes the RSUM1 bytes for `paths` straight from the brute-force oracle,
// normalizing with log1p-max. The window is the data extent and every visit
// is inside it.
inline std::string oracle_archive(const std::vector<TilePath>& paths, int r,
                                  std::int64_t tau_s, int h_max,
                                  const std::string& input_sha256) {
  const OracleResult o = brute_force_summaries(paths, r, tau_s, h_max);
  const int side = 2 * r + 1;
  std::array<double, 6> mx{};
  auto raw = [](const OracleCell& c, int k) {
    if (c.count == 0) return 0.0;
    if (k == 0) return static_cast<double>(c.count);
    if (k == 1) return static_cast<double>(c.sum_mm) / 1000.0 / c.count;
    return static_cast<double>(c.sum_s) / c.count;
  };
  for (const auto& [tile, cells] : o.summaries) {
    for (const auto& [key, c] : cells) {
      for (int k = 0; k < 3; ++k) {
        const int ch = std::get<0>(key) * 3 + k;
        mx[ch] = std::max(mx[ch], raw(c, k));
      }
    }
  }
  std::int64_t lo = INT64_MAX, hi = INT64_MIN;
  for (const TilePath& p : paths) {
    for (const TileVisit& v : p.visits) {
      lo = std::min(lo, v.timestamp);
      hi = std::max(hi, v.timestamp);
    }
  }
  std::ostringstream out;
  out << "RSUM1\n"
      << "r=" << r << "\nside=" << side
      << "\nchannels=emission_count,emission_mean_m,emission_mean_s,"
         "absorption_count,absorption_mean_m,absorption_mean_s"
      << "\nlayout=row-major(i,j,channel) float32-le"
      << "\nnormalization=log1p-max"
      << "\nmax_emission_count=" << g17(mx[0])
      << "\nmax_emission_mean_m=" << g17(mx[1])
      << "\nmax_emission_mean_s=" << g17(mx[2])
      << "\nmax_absorption_count=" << g17(mx[3])
      << "\nmax_absorption_mean_m=" << g17(mx[4])
      << "\nmax_absorption_mean_s=" << g17(mx[5])
      << "\nwindow_t0=" << lo << "\nwindow_delta_t=" << std::max<std::int64_t>(1, hi - lo)
      << "\ntau_s=" << tau_s << "\nh_max=" << h_max << "\nshard_block=256"
      << "\ntrajectory_count=" << paths.size() << "\nevent_count=" << o.events
      << "\ntile_count=" << o.summaries.size() << "\ninput_sha256=" << input_sha256
      << "\n\n";
  std::map<std::string, std::vector<float>> records;
  for (const auto& [tile, cells] : o.summaries) {
    std::vector<float> t(static_cast<std::size_t>(side * side * 6), 0.0f);
    for (const auto& [key, c] : cells) {
      const auto [dir, dy, dx] = key;
      const std::size_t pix = static_cast<std::size_t>((dy + r) * side + (dx + r));
      for (int k = 0; k < 3; ++k) {
        const int ch = dir * 3 + k;
        const double v = raw(c, k);
        double n = 0.0;
        if (v > 0 && mx[ch] > 0) {
          n = k == 0 ? std::log1p(v) / std::log1p(mx[ch]) : v / mx[ch];
        }
        t[pix * 6 + ch] = static_cast<float>(std::clamp(n, 0.0, 1.0));
      }
    }
    records[oracle_quadkey(tile.second, tile.first)] = std::move(t);
  }
  for (const auto& [q, t] : records) {
    out << q;
    for (float f : t) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      const char b[4] = {static_cast<char>(bits & 0xff),
                         static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff),
                         static_cast<char>((bits >> 24) & 0xff)};
      out.write(b, 4);
    }
  }
  return out.str();
}

// Haversine reference in long double for the path length checks.
inline long double reference_haversine_m(long double lat1, long double lon1,
                                         long double lat2, long double lon2) {
  const long double rad = 3.14159265358979323846264338327950288L / 180.0L;
  const long double dlat = (lat2 - lat1) * rad, dlon = (lon2 - lon1) * rad;
  const long double a = std::pow(std::sin(dlat / 2), 2) +
                        std::cos(lat1 * rad) * std::cos(lat2 * rad) *
                            std::pow(std::sin(dlon / 2), 2);
  return 2.0L * 6371008.8L * std::asin(std::sqrt(a));
}

}  // namespace reachgrid::testing

#endif  // REACHGRID_TESTS_TESTING_H_
