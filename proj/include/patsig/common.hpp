// Copyright 2026 The patsig Authors
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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace patsig {

/// Failure categories. The CLI maps each one to its own exit code.
enum class ErrorKind {
  kConfig,      // invalid parameter or flag value
  kMissing,     // input artifact does not exist
  kFormat,      // bad magic, malformed record, inconsistent artifacts
  kVersion,     // artifact format version not understood
  kTruncated,   // artifact shorter than its header promises
  kChecksum,    // stored checksum does not match contents
  kData,        // input content violates a contract (duplicate id, missing year, ...)
  kUndefined,   // mathematically undefined request (cosine of a zero vector)
  kIo,          // read/write failure
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

// ---------------------------------------------------------------------------
// Little-endian binary encoding shared by every artifact format.

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void bytes(std::string_view s) { buf_.append(s); }
  /// u16 length prefix followed by the raw bytes.
  void short_string(std::string_view s);

  const std::string& data() const noexcept { return buf_; }
  std::string& data() noexcept { return buf_; }
  std::size_t size() const noexcept { return buf_.size(); }

 private:
  std::string buf_;
};

/// Bounds-checked cursor over a byte buffer. Every read past the end throws
/// kTruncated with the offset where the read was attempted.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  std::string_view bytes(std::size_t n);
  std::string short_string();

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const;

  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32(std::string_view data);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it into place, so readers never
/// observe a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// ---------------------------------------------------------------------------
// Randomness. All seeded streams come from std::mt19937_64; sub-streams for
// independent workers are derived with splitmix64 so they do not depend on
// scheduling.

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x9e3779b97f4a7c15ULL));
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

double standard_normal(Rng& rng);

/// Runs fn(i) for i in [0, n). threads <= 1 runs in order on the calling
/// thread; otherwise work is split into contiguous blocks.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

/// Worker count used when the caller does not pin one.
unsigned default_threads();

}  // namespace patsig
