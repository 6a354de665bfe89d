#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hyre/common.hpp"
#include "hyre/types.hpp"

namespace hyre {

// Sign quantization codec: per round, a random permutation of the embedding
// coordinates, a random +-1 sign per position, and a partition of the
// permuted positions into equal-sized bins. Each bin contributes one bit
// (the sign of the signed aggregate). Rounds repeat with fresh randomness
// until num_bits bits exist, so num_bits may exceed dim.
struct QuantCodec {
  struct Round {
    std::vector<std::uint32_t> perm;    // position i reads x[perm[i]]
    std::vector<float> signs;           // +-1 per position
    std::vector<std::uint32_t> bounds;  // bin b = positions [bounds[b], bounds[b+1])
  };

  std::uint32_t dim = 0;
  std::uint32_t num_bits = 0;
  std::uint64_t seed = 0;
  std::vector<Round> rounds;

  std::size_t num_words() const { return (num_bits + 63) / 64; }
};

// Bit b lives in word b/64 at position b%64; unused bits of the last word
// stay zero so word-level comparisons need no special casing elsewhere.
struct Signature {
  std::uint32_t num_bits = 0;
  std::vector<std::uint64_t> words;

  bool bit(std::uint32_t b) const {
    return (words[b / 64] >> (b % 64)) & 1u;
  }
  void set_bit(std::uint32_t b) { words[b / 64] |= std::uint64_t{1} << (b % 64); }

  bool operator==(const Signature&) const = default;
};

// Deterministic in (dim, num_bits, seed). Every round emits
// min(bits remaining, dim) bins; bin sizes differ by at most one.
QuantCodec make_codec(std::uint32_t dim, std::uint32_t num_bits,
                      std::uint64_t seed);

// bit b = sign of the b-th bin aggregate, with sign(0) = +1.
Signature encode(const QuantCodec& codec, std::span<const float> embedding);

// Number of agreeing bit positions, in [0, num_bits].
std::uint32_t quant_score(const Signature& a, const Signature& b);

// Word-level core; both spans hold ceil(num_bits/64) words with zeroed
// trailing bits. Equals the bit-by-bit definition exactly.
std::uint32_t quant_score_words(std::span<const std::uint64_t> a,
                                std::span<const std::uint64_t> b,
                                std::uint32_t num_bits);

Signature complement(const Signature& s);

class FrozenIndex;

// Keeps the quant_k candidates whose signatures agree most with the query
// signature (ties towards lower rowId); no-op when the candidate list already
// fits. Output is in ascending rowId order and messenger scores are left
// untouched -- this stage only narrows, it never scores.
std::vector<Messenger> preselect(const FrozenIndex& index,
                                 const Signature& query_signature,
                                 std::span<const Messenger> candidates,
                                 std::uint32_t quant_k);

}  // namespace hyre
