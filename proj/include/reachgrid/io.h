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

// Shared file plumbing: key=value manifests, little-endian float payloads,
// content hashes, and write-then-rename output.

#ifndef REACHGRID_IO_H_
#define REACHGRID_IO_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <ostream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace reachgrid {

// Ordered key=value text block terminated by an empty line.
class KeyValueManifest {
 public:
  void set(std::string key, std::string value);
  void set(std::string key, std::int64_t value);
  void set(std::string key, double value);

  std::optional<std::string> find(std::string_view key) const;
  // Throws FormatError naming the key when missing or unparsable.
  const std::string& get(std::string_view key) const;
  std::int64_t get_int(std::string_view key) const;
  double get_double(std::string_view key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

  void write(std::ostream& out) const;
  static KeyValueManifest read(std::istream& in);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// %.17g: shortest form that round-trips every double.
std::string format_double(double v);

void write_f32_le(std::ostream& out, std::span<const float> values);
// Throws FormatError("truncated ...") if fewer than `out.size()` floats remain.
void read_f32_le(std::istream& in, std::span<float> out);

class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n);
  std::string hex();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// An ostream that hashes everything written to it and stores nothing.
class Sha256OStream : public std::ostream {
 public:
  Sha256OStream();
  ~Sha256OStream() override;
  std::string hex();

 private:
  class Buf;
  std::unique_ptr<Buf> buf_;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Writes via `fill` to a temporary sibling and renames it over `path`, so the
// final path never holds a partial file. The temporary is removed on error.
void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& fill,
                  bool binary = true);

std::string read_file(const std::filesystem::path& path);

}  // namespace reachgrid

#endif  // REACHGRID_IO_H_
