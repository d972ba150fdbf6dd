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

#include "reachgrid/synth.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "reachgrid/cae_network.h"
#include "reachgrid/errors.h"

namespace reachgrid {

namespace {

constexpr double kMetersPerDegree = 111195.0;

std::int64_t records_for(const SynthConfig& cfg, int taxi) {
  const std::int64_t base = cfg.records / cfg.taxis;
  return base + (taxi <= cfg.records % cfg.taxis ? 1 : 0);
}

}  // namespace

std::string format_civil_time(std::int64_t seconds) {
  const std::int64_t days = seconds >= 0 ? seconds / 86400
                                         : (seconds - 86399) / 86400;
  const std::int64_t rem = seconds - days * 86400;
  const std::chrono::year_month_day ymd{
      std::chrono::sys_days{std::chrono::days{days}}};
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02lld:%02lld:%02lld",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()),
                static_cast<long long>(rem / 3600),
                static_cast<long long>(rem / 60 % 60),
                static_cast<long long>(rem % 60));
  return buf;
}

void write_synthetic_taxi(std::ostream& out, const SynthConfig& cfg, int taxi) {
  Rng rng(cfg.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(taxi));
  const int streets = std::max(2, static_cast<int>(cfg.extent_m / cfg.street_spacing_m) + 1);
  const double span = (streets - 1) * cfg.street_spacing_m;
  const double lon_scale =
      kMetersPerDegree * std::cos(cfg.center_lat * std::numbers::pi / 180.0);

  // Position on the street grid: travelling along x (east/west) or y.
  bool along_x = rng.uniform() < 0.5;
  double x = static_cast<double>(rng.below(static_cast<std::size_t>(streets))) *
             cfg.street_spacing_m;
  double y = static_cast<double>(rng.below(static_cast<std::size_t>(streets))) *
             cfg.street_spacing_m;
  if (along_x) x = rng.uniform(0.0, span); else y = rng.uniform(0.0, span);
  int heading = rng.uniform() < 0.5 ? 1 : -1;
  double speed = rng.uniform(0.0, cfg.max_speed_mps);
  int stopped = 0;

  std::int64_t t = cfg.start_local + static_cast<std::int64_t>(rng.below(86400));
  const std::int64_t n = records_for(cfg, taxi);
  char buf[96];
  for (std::int64_t i = 0; i < n; ++i) {
    const double nx = x + cfg.gps_noise_m * rng.gaussian();
    const double ny = y + cfg.gps_noise_m * rng.gaussian();
    const double lat = cfg.center_lat + (ny - span / 2) / kMetersPerDegree;
    const double lon = cfg.center_lon + (nx - span / 2) / lon_scale;
    std::snprintf(buf, sizeof(buf), ",%.5f,%.5f\n", lon, lat);
    out << taxi << ',' << format_civil_time(t) << buf;

    if (rng.uniform() < cfg.park_probability) {
      t += 600 + static_cast<std::int64_t>(rng.below(6 * 3600));
      speed = 0.0;
      continue;
    }
    const int dt = cfg.min_interval_s +
                   static_cast<int>(rng.below(static_cast<std::size_t>(
                       cfg.max_interval_s - cfg.min_interval_s + 1)));
    t += dt;
    if (stopped > 0) {
      --stopped;
      continue;
    }
    if (rng.uniform() < 0.02) {
      stopped = 1 + static_cast<int>(rng.below(8));
      speed = 0.0;
      continue;
    }
    speed = std::clamp(speed + rng.uniform(-1.5, 1.5), 0.5, cfg.max_speed_mps);
    double remaining = speed * dt;
    while (remaining > 0.0) {
      double& pos = along_x ? x : y;
      // Distance to the next intersection in the heading direction.
      const double cell = pos / cfg.street_spacing_m;
      const double next = heading > 0 ? (std::floor(cell + 1e-9) + 1) * cfg.street_spacing_m
                                      : (std::ceil(cell - 1e-9) - 1) * cfg.street_spacing_m;
      const double to_next = std::abs(next - pos);
      if (remaining < to_next) {
        pos += heading * remaining;
        break;
      }
      pos = next;
      remaining -= to_next;
      // At an intersection: turn, or reverse at the edge of the grid.
      const bool at_edge = next <= 0.0 || next >= span;
      const double turn = rng.uniform();
      if (turn < 0.3 || at_edge) {
        along_x = !along_x;
        const double other = along_x ? x : y;
        heading = other <= 0.0 ? 1 : other >= span ? -1 : (rng.uniform() < 0.5 ? 1 : -1);
      }
    }
  }
}

std::int64_t write_synthetic_tdrive(const std::filesystem::path& dir,
                                    const SynthConfig& cfg) {
  if (cfg.taxis < 1 || cfg.records < 0) {
    throw ParameterError("synthetic data needs taxis >= 1 and records >= 0");
  }
  if (cfg.min_interval_s < 1 || cfg.max_interval_s < cfg.min_interval_s) {
    throw ParameterError("bad sampling interval range");
  }
  std::filesystem::create_directories(dir);
  for (int taxi = 1; taxi <= cfg.taxis; ++taxi) {
    std::ofstream out(dir / (std::to_string(taxi) + ".txt"));
    if (!out) throw std::runtime_error("cannot write into " + dir.string());
    write_synthetic_taxi(out, cfg, taxi);
  }
  return cfg.records;
}

}  // namespace reachgrid
