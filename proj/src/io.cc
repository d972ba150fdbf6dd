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

#include "reachgrid/io.h"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

#include "reachgrid/errors.h"

namespace reachgrid {

void KeyValueManifest::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

void KeyValueManifest::set(std::string key, std::int64_t value) {
  set(std::move(key), std::to_string(value));
}

void KeyValueManifest::set(std::string key, double value) {
  set(std::move(key), format_double(value));
}

std::optional<std::string> KeyValueManifest::find(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

const std::string& KeyValueManifest::get(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw FormatError("manifest field '" + std::string(key) + "' is missing");
}

std::int64_t KeyValueManifest::get_int(std::string_view key) const {
  const std::string& v = get(key);
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw FormatError("manifest field '" + std::string(key) +
                      "' is not an integer: '" + v + "'");
  }
  return out;
}

double KeyValueManifest::get_double(std::string_view key) const {
  const std::string& v = get(key);
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw FormatError("manifest field '" + std::string(key) +
                      "' is not a number: '" + v + "'");
  }
  return out;
}

void KeyValueManifest::write(std::ostream& out) const {
  for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
  out << '\n';
}

KeyValueManifest KeyValueManifest::read(std::istream& in) {
  KeyValueManifest m;
  std::string line;
  while (true) {
    if (!std::getline(in, line)) {
      throw FormatError("truncated manifest: missing terminating blank line");
    }
    if (line.empty()) return m;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw FormatError("malformed manifest line '" + line + "'");
    }
    m.set(line.substr(0, eq), line.substr(eq + 1));
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_f32_le(std::ostream& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (float f : values) {
      auto bits = __builtin_bswap32(std::bit_cast<std::uint32_t>(f));
      out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  }
}

void read_f32_le(std::istream& in, std::span<float> out) {
  in.read(reinterpret_cast<char*>(out.data()),
          static_cast<std::streamsize>(out.size_bytes()));
  if (static_cast<std::size_t>(in.gcount()) != out.size_bytes()) {
    throw FormatError("truncated float payload: expected " +
                      std::to_string(out.size_bytes()) + " bytes, got " +
                      std::to_string(in.gcount()));
  }
  if constexpr (std::endian::native != std::endian::little) {
    for (float& f : out) {
      f = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(f)));
    }
  }
}

struct Sha256::Impl {
  struct Deleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
  };
  std::unique_ptr<EVP_MD_CTX, Deleter> ctx{EVP_MD_CTX_new()};
};

Sha256::Sha256() : impl_(std::make_unique<Impl>()) {
  if (!impl_->ctx ||
      EVP_DigestInit_ex(impl_->ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 init failed");
  }
}

Sha256::~Sha256() = default;

void Sha256::update(const void* data, std::size_t n) {
  EVP_DigestUpdate(impl_->ctx.get(), data, n);
}

std::string Sha256::hex() {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(impl_->ctx.get(), md, &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 15]);
  }
  return out;
}

class Sha256OStream::Buf : public std::streambuf {
 public:
  Buf() { setp(buffer_, buffer_ + sizeof(buffer_)); }
  std::string hex() {
    sync();
    return hash_.hex();
  }

 protected:
  int_type overflow(int_type ch) override {
    sync();
    if (!traits_type::eq_int_type(ch, traits_type::eof())) {
      *pptr() = traits_type::to_char_type(ch);
      pbump(1);
    }
    return traits_type::not_eof(ch);
  }
  int sync() override {
    hash_.update(pbase(), static_cast<std::size_t>(pptr() - pbase()));
    setp(buffer_, buffer_ + sizeof(buffer_));
    return 0;
  }
  std::streamsize xsputn(const char* s, std::streamsize n) override {
    sync();
    hash_.update(s, static_cast<std::size_t>(n));
    return n;
  }

 private:
  char buffer_[1 << 14];
  Sha256 hash_;
};

Sha256OStream::Sha256OStream()
    : std::ostream(nullptr), buf_(std::make_unique<Buf>()) {
  rdbuf(buf_.get());
}

Sha256OStream::~Sha256OStream() = default;

std::string Sha256OStream::hex() {
  flush();
  return buf_->hex();
}

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& fill,
                  bool binary) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  try {
    {
      std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc
                                    : std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
      fill(out);
      out.flush();
      if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace reachgrid
