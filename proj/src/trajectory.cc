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

#include "reachgrid/trajectory.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "reachgrid/errors.h"
#include "reachgrid/parallel.h"

namespace reachgrid {

namespace {

template <typename T>
bool parse_number(std::string_view text, T& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
    text.remove_prefix(1);
  }
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' ||
                           text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (text.empty()) return false;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string segment_id(const std::string& mover, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return mover + ":" + buf;
}

}  // namespace

std::optional<std::int64_t> parse_civil_time(std::string_view text) {
  // YYYY-MM-DD HH:MM:SS
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' ||
      text[10] != ' ' || text[13] != ':' || text[16] != ':') {
    return std::nullopt;
  }
  int year, month, day, hour, minute, second;
  if (!parse_number(text.substr(0, 4), year) ||
      !parse_number(text.substr(5, 2), month) ||
      !parse_number(text.substr(8, 2), day) ||
      !parse_number(text.substr(11, 2), hour) ||
      !parse_number(text.substr(14, 2), minute) ||
      !parse_number(text.substr(17, 2), second)) {
    return std::nullopt;
  }
  const std::chrono::year_month_day ymd{
      std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
      std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) {
    return std::nullopt;
  }
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return std::int64_t{days} * 86400 + hour * 3600 + minute * 60 + second;
}

ParseResult parse_tdrive(std::istream& in) {
  if (!in) throw std::runtime_error("unreadable T-Drive stream");
  ParseResult result;
  std::string line;
  while (std::getline(in, line)) {
    ++result.lines;
    const auto fields = split(line, ',');
    double lon = 0, lat = 0;
    std::optional<std::int64_t> local;
    if (fields.size() != 4 || fields[0].empty() ||
        !(local = parse_civil_time(fields[1])) ||
        !parse_number(fields[2], lon) || !parse_number(fields[3], lat)) {
      ++result.skipped;
      continue;
    }
    const auto tile = latlon_to_tile(lat, lon);
    if (!tile) {
      ++result.skipped;
      continue;
    }
    result.records.push_back({std::string(fields[0]),
                              *local - kTdriveUtcOffsetS, lat, lon, *tile});
  }
  if (in.bad()) throw std::runtime_error("read error on T-Drive stream");
  return result;
}

ParseResult parse_tdrive_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_tdrive(in);
}

void sort_records(std::vector<GpsRecord>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const GpsRecord& a, const GpsRecord& b) {
                     if (a.mover_id != b.mover_id) return a.mover_id < b.mover_id;
                     return a.timestamp < b.timestamp;
                   });
}

std::vector<GpsRecord> filter_window(std::vector<GpsRecord> records,
                                     const ObservationWindow& window) {
  std::erase_if(records, [&](const GpsRecord& r) {
    return !window.contains(r.timestamp);
  });
  return records;
}

std::vector<Trajectory> segment(const std::vector<GpsRecord>& records,
                                const SegmentParams& params) {
  std::vector<Trajectory> out;
  std::vector<GpsRecord> current;
  std::string mover;
  std::size_t mover_segments = 0;

  auto flush = [&] {
    if (current.size() >= 2) {
      out.push_back({segment_id(mover, mover_segments++), std::move(current)});
    }
    current.clear();
  };

  for (const GpsRecord& rec : records) {
    if (rec.mover_id != mover) {
      flush();
      mover = rec.mover_id;
      mover_segments = 0;
    } else if (!current.empty()) {
      const GpsRecord& prev = current.back();
      if (rec.timestamp == prev.timestamp) continue;
      if (rec.timestamp - prev.timestamp > params.gap_s ||
          chebyshev(rec.tile, prev.tile) > params.jump_tiles) {
        flush();
      }
    }
    current.push_back(rec);
  }
  flush();
  return out;
}

double haversine_m(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * kDeg;
  const double dlon = (lon2 - lon1) * kDeg;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * kDeg) * std::cos(lat2 * kDeg) *
                       std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(a)));
}

TilePath to_tile_path(const Trajectory& t) {
  TilePath path{t.id, {}};
  double cum_m = 0.0;
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    const GpsRecord& rec = t.records[i];
    if (i > 0) {
      const GpsRecord& prev = t.records[i - 1];
      cum_m += haversine_m(prev.lat, prev.lon, rec.lat, rec.lon);
    }
    if (!path.visits.empty() && path.visits.back().tile == rec.tile) continue;
    path.visits.push_back(
        {rec.tile, rec.timestamp, std::llround(cum_m * 1000.0)});
  }
  return path;
}

void write_trajectory_dump(std::ostream& out, std::vector<TilePath> paths) {
  std::sort(paths.begin(), paths.end(),
            [](const TilePath& a, const TilePath& b) {
              return a.trajectory_id < b.trajectory_id;
            });
  char buf[96];
  for (const TilePath& p : paths) {
    for (const TileVisit& v : p.visits) {
      const std::int64_t whole = v.cum_mm / 1000;
      const std::int64_t frac = v.cum_mm % 1000;
      std::snprintf(buf, sizeof(buf), "\t%lld\t%u\t%u\t%lld.%03lld\n",
                    static_cast<long long>(v.timestamp), v.tile.x, v.tile.y,
                    static_cast<long long>(whole), static_cast<long long>(frac));
      out << p.trajectory_id << buf;
    }
  }
}

std::vector<TilePath> read_trajectory_dump(std::istream& in) {
  if (!in) throw std::runtime_error("unreadable trajectory dump");
  std::vector<TilePath> paths;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    TileVisit v;
    const auto dot = f.size() == 5 ? f[4].find('.') : std::string_view::npos;
    std::int64_t whole = 0, frac = 0;
    if (f.size() != 5 || f[0].empty() || !parse_number(f[1], v.timestamp) ||
        !parse_number(f[2], v.tile.x) || !parse_number(f[3], v.tile.y) ||
        dot == std::string_view::npos || f[4].size() - dot != 4 ||
        !parse_number(f[4].substr(0, dot), whole) ||
        !parse_number(f[4].substr(dot + 1), frac) || !is_valid(v.tile)) {
      throw FormatError("malformed trajectory dump line " +
                        std::to_string(line_no));
    }
    v.cum_mm = whole * 1000 + frac;
    if (paths.empty() || paths.back().trajectory_id != f[0]) {
      paths.push_back({std::string(f[0]), {}});
    }
    paths.back().visits.push_back(v);
  }
  return paths;
}

std::vector<TilePath> read_trajectory_dump_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_trajectory_dump(in);
}

IngestResult ingest_tdrive_dir(const std::filesystem::path& dir,
                               const SegmentParams& params,
                               const std::optional<ObservationWindow>& window,
                               int workers) {
  if (!std::filesystem::is_directory(dir)) {
    throw ParameterError("input directory does not exist: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<ParseResult> parsed(files.size());
  parallel_for(files.size(), workers,
               [&](std::size_t i) { parsed[i] = parse_tdrive_file(files[i]); });

  IngestResult result;
  result.files = files.size();
  std::vector<GpsRecord> records;
  for (ParseResult& p : parsed) {
    result.lines += p.lines;
    result.skipped += p.skipped;
    result.parsed += p.records.size();
    std::move(p.records.begin(), p.records.end(), std::back_inserter(records));
  }
  if (window) {
    const std::size_t before = records.size();
    records = filter_window(std::move(records), *window);
    result.outside_window = before - records.size();
  }
  sort_records(records);
  const std::vector<Trajectory> trajectories = segment(records, params);
  result.segments = trajectories.size();
  result.paths.reserve(trajectories.size());
  for (const Trajectory& t : trajectories) result.paths.push_back(to_tile_path(t));
  std::sort(result.paths.begin(), result.paths.end(),
            [](const TilePath& a, const TilePath& b) {
              return a.trajectory_id < b.trajectory_id;
            });
  return result;
}

}  // namespace reachgrid
