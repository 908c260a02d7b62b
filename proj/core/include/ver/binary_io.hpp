// Copyright 2026 The ver-engine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Little-endian byte buffers, CRC32 and read-only file mapping shared by the
// WCFT, WCIX and WKCK formats.

#ifndef VER_BINARY_IO_HPP_
#define VER_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "ver/errors.hpp"

namespace ver {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts need byte swapping");

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

class ByteWriter {
 public:
  void put_u32(std::uint32_t v) { put_raw(&v, sizeof v); }
  void put_u64(std::uint64_t v) { put_raw(&v, sizeof v); }
  void put_f64(double v) { put_raw(&v, sizeof v); }
  void put_magic(const char (&magic)[5]) { put_raw(magic, 4); }
  void put_string(const std::string& s) {
    put_u32(static_cast<std::uint32_t>(s.size()));
    put_raw(s.data(), s.size());
  }
  template <typename T>
  void put_array(std::span<const T> values) {
    put_raw(values.data(), values.size_bytes());
  }
  void put_bytes(std::span<const std::uint8_t> bytes) { put_raw(bytes.data(), bytes.size()); }
  // Appends the CRC32 of bytes [from, size()).
  void put_crc_since(std::size_t from) {
    put_u32(crc32(std::span<const std::uint8_t>(buf_).subspan(from)));
  }

  std::size_t size() const { return buf_.size(); }
  const std::vector<std::uint8_t>& bytes() const { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  void put_raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<std::uint8_t> buf_;
};

// Bounds-checked cursor; every overrun throws FormatError naming the offset.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data, std::string what = "file")
      : data_(data), what_(std::move(what)) {}

  std::uint32_t get_u32() { return get_pod<std::uint32_t>(); }
  std::uint64_t get_u64() { return get_pod<std::uint64_t>(); }
  double get_f64() { return get_pod<double>(); }
  void expect_magic(const char (&magic)[5]) {
    require(4);
    if (std::memcmp(data_.data() + pos_, magic, 4) != 0) {
      throw FormatError(what_ + ": bad magic (expected \"" + std::string(magic, 4) + "\")");
    }
    pos_ += 4;
  }
  std::string get_string(std::size_t max_len = 1 << 20) {
    const std::uint32_t n = get_u32();
    if (n > max_len) throw FormatError(what_ + ": string length " + std::to_string(n) +
                                       " too large at offset " + std::to_string(pos_ - 4));
    require(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  template <typename T>
  std::vector<T> get_array(std::size_t count) {
    if (count > remaining() / sizeof(T)) {
      throw FormatError(what_ + ": truncated array of " + std::to_string(count) +
                        " elements at offset " + std::to_string(pos_));
    }
    std::vector<T> out(count);
    std::memcpy(out.data(), data_.data() + pos_, count * sizeof(T));
    pos_ += count * sizeof(T);
    return out;
  }
  std::span<const std::uint8_t> get_bytes(std::size_t n) {
    require(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  // Reads a u32 CRC and checks it against bytes [from, current offset).
  void check_crc_since(std::size_t from, const std::string& section) {
    const std::uint32_t actual = crc32(data_.subspan(from, pos_ - from));
    const std::size_t at = pos_;
    const std::uint32_t stored = get_u32();
    if (stored != actual) {
      throw ChecksumError(what_ + ": checksum mismatch in " + section + " (bytes " +
                          std::to_string(from) + ".." + std::to_string(at) + ")");
    }
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  void seek(std::size_t pos) {
    if (pos > data_.size()) throw FormatError(what_ + ": seek past end");
    pos_ = pos;
  }

 private:
  void require(std::size_t n) const {
    if (n > remaining()) {
      throw FormatError(what_ + ": truncated at offset " + std::to_string(pos_) + " (need " +
                        std::to_string(n) + " bytes, have " + std::to_string(remaining()) + ")");
    }
  }
  template <typename T>
  T get_pod() {
    require(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string what_;
};

// Read-only memory map of a whole file; safe to share between reader threads.
class MappedFile {
 public:
  explicit MappedFile(const std::string& path);
  ~MappedFile();
  MappedFile(const MappedFile&) = delete;
  MappedFile& operator=(const MappedFile&) = delete;
  MappedFile(MappedFile&& o) noexcept;
  MappedFile& operator=(MappedFile&& o) noexcept;

  std::span<const std::uint8_t> bytes() const { return {data_, size_}; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  const std::uint8_t* data_ = nullptr;
  std::size_t size_ = 0;
};

// Writes atomically via a temporary file + rename.
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::string& path, const std::string& text);
std::vector<std::uint8_t> read_file(const std::string& path);
std::string read_text_file(const std::string& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace ver

#endif  // VER_BINARY_IO_HPP_
