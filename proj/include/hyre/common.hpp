#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hyre {

// Raised when an input violates a documented contract (bad dimension,
// reserved attribute id, malformed clause, ...). The message names the field.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised by index/model deserialization. Each failure mode is distinguishable
// so callers can tell a stale file from a corrupt one.
class LoadError : public std::runtime_error {
 public:
  enum class Cause { kBadMagic, kVersionMismatch, kTruncated, kChecksum };

  LoadError(Cause cause, const std::string& msg)
      : std::runtime_error(msg), cause_(cause) {}

  Cause cause() const { return cause_; }

 private:
  Cause cause_;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t state = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    state ^= p[i];
    state *= 0x100000001b3ull;
  }
  return state;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

// Checksummed little-endian binary writer. The running FNV state covers every
// byte written, so a file is "header + payload + u64 checksum".
class ChecksumWriter {
 public:
  explicit ChecksumWriter(const std::string& path)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open for write: " + path);
  }

  void write_bytes(const void* data, std::size_t len) {
    out_.write(static_cast<const char*>(data),
               static_cast<std::streamsize>(len));
    sum_ = fnv1a64(data, len, sum_);
  }

  template <typename T>
  void write_pod(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    write_bytes(&v, sizeof(v));
  }

  template <typename T>
  void write_vec(const std::vector<T>& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    if (!v.empty()) write_bytes(v.data(), v.size() * sizeof(T));
  }

  void write_string(const std::string& s) {
    write_pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    if (!s.empty()) write_bytes(s.data(), s.size());
  }

  // Appends the checksum and closes. Call exactly once.
  void finish() {
    std::uint64_t sum = sum_;
    out_.write(reinterpret_cast<const char*>(&sum), sizeof(sum));
    out_.close();
    if (!out_) throw std::runtime_error("write failed on close");
  }

 private:
  std::ofstream out_;
  std::uint64_t sum_ = 0xcbf29ce484222325ull;
};

class ChecksumReader {
 public:
  explicit ChecksumReader(const std::string& path)
      : in_(path, std::ios::binary) {
    if (!in_) throw LoadError(LoadError::Cause::kTruncated,
                              "cannot open for read: " + path);
    in_.seekg(0, std::ios::end);
    remaining_ = static_cast<std::uint64_t>(in_.tellg());
    in_.seekg(0, std::ios::beg);
    if (remaining_ < sizeof(std::uint64_t))
      throw LoadError(LoadError::Cause::kTruncated,
                      "file shorter than its checksum: " + path);
    remaining_ -= sizeof(std::uint64_t);  // trailing checksum is not payload
  }

  void read_bytes(void* data, std::size_t len) {
    if (len > remaining_)
      throw LoadError(LoadError::Cause::kTruncated,
                      "truncated file: need " + std::to_string(len) +
                          " more bytes, have " + std::to_string(remaining_));
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
    if (!in_)
      throw LoadError(LoadError::Cause::kTruncated, "read failed mid-file");
    remaining_ -= len;
    sum_ = fnv1a64(data, len, sum_);
  }

  template <typename T>
  T read_pod() {
    static_assert(std::is_trivially_copyable_v<T>);
    T v{};
    read_bytes(&v, sizeof(v));
    return v;
  }

  template <typename T>
  void read_vec(std::vector<T>& v, std::size_t count) {
    static_assert(std::is_trivially_copyable_v<T>);
    v.resize(count);
    if (count) read_bytes(v.data(), count * sizeof(T));
  }

  std::string read_string() {
    auto len = read_pod<std::uint32_t>();
    std::string s(len, '\0');
    if (len) read_bytes(s.data(), len);
    return s;
  }

  std::uint64_t remaining() const { return remaining_; }

  // Verifies the trailing checksum against everything read so far.
  void verify() {
    if (remaining_ != 0)
      throw LoadError(LoadError::Cause::kTruncated,
                      "trailing bytes before checksum");
    std::uint64_t stored = 0;
    in_.read(reinterpret_cast<char*>(&stored), sizeof(stored));
    if (!in_)
      throw LoadError(LoadError::Cause::kTruncated, "missing checksum");
    if (stored != sum_)
      throw LoadError(LoadError::Cause::kChecksum, "checksum mismatch");
  }

 private:
  std::ifstream in_;
  std::uint64_t remaining_ = 0;
  std::uint64_t sum_ = 0xcbf29ce484222325ull;
};

// Fisher-Yates with draws taken directly from the engine's standardized
// output stream, so permutations are reproducible across standard libraries.
template <typename T, typename Rng>
void deterministic_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace hyre
