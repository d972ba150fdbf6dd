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

// Seeded generator of taxi logs in the T-Drive text format: one file per
// taxi, lines "id,YYYY-MM-DD HH:MM:SS,lon,lat" in Beijing local time.
// Taxis drive a Manhattan street grid with stops, turns, and parking gaps.

#ifndef REACHGRID_SYNTH_H_
#define REACHGRID_SYNTH_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace reachgrid {

struct SynthConfig {
  int taxis = 10;
  std::int64_t records = 10000;  // total across all taxis
  std::uint64_t seed = 1;
  double center_lat = 39.9042;
  double center_lon = 116.4074;
  double extent_m = 2000.0;       // side of the square street grid
  double street_spacing_m = 200.0;
  double max_speed_mps = 12.0;
  int min_interval_s = 2;
  int max_interval_s = 6;
  double park_probability = 0.001;  // per sample
  double gps_noise_m = 0.5;
  // 2008-02-02 00:00:00 local, the first day of the public T-Drive week.
  std::int64_t start_local = 1201910400;
};

// Writes the log of one taxi (1-based id) to `out`.
void write_synthetic_taxi(std::ostream& out, const SynthConfig& cfg, int taxi);

// Writes `cfg.taxis` files named "<id>.txt" into `dir` (created if needed).
// Returns the number of records written.
std::int64_t write_synthetic_tdrive(const std::filesystem::path& dir,
                                    const SynthConfig& cfg);

std::string format_civil_time(std::int64_t seconds);

}  // namespace reachgrid

#endif  // REACHGRID_SYNTH_H_
