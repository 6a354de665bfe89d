#include "hyre/quantizer.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <random>

#include "hyre/corpus.hpp"

namespace hyre {

QuantCodec make_codec(std::uint32_t dim, std::uint32_t num_bits,
                      std::uint64_t seed) {
  if (dim == 0) throw ValidationError("codec dim must be >= 1");
  if (num_bits == 0) throw ValidationError("codec numBits must be >= 1");

  QuantCodec codec;
  codec.dim = dim;
  codec.num_bits = num_bits;
  codec.seed = seed;

  std::mt19937_64 rng(seed);
  std::uint32_t emitted = 0;
  while (emitted < num_bits) {
    QuantCodec::Round round;
    round.perm.resize(dim);
    std::iota(round.perm.begin(), round.perm.end(), 0u);
    deterministic_shuffle(round.perm, rng);

    round.signs.resize(dim);
    for (auto& s : round.signs) s = (rng() & 1u) ? 1.0f : -1.0f;

    const std::uint32_t bins = std::min(num_bits - emitted, dim);
    // First (dim % bins) bins take the extra element.
    round.bounds.resize(bins + 1);
    const std::uint32_t base = dim / bins;
    const std::uint32_t extra = dim % bins;
    round.bounds[0] = 0;
    for (std::uint32_t b = 0; b < bins; ++b)
      round.bounds[b + 1] = round.bounds[b] + base + (b < extra ? 1u : 0u);

    emitted += bins;
    codec.rounds.push_back(std::move(round));
  }
  return codec;
}

Signature encode(const QuantCodec& codec, std::span<const float> embedding) {
  if (embedding.size() != codec.dim)
    throw ValidationError("embedding length " +
                          std::to_string(embedding.size()) +
                          " != codec dim " + std::to_string(codec.dim));

  Signature sig;
  sig.num_bits = codec.num_bits;
  sig.words.assign(codec.num_words(), 0);

  std::uint32_t bit = 0;
  for (const auto& round : codec.rounds) {
    const std::uint32_t bins =
        static_cast<std::uint32_t>(round.bounds.size() - 1);
    for (std::uint32_t b = 0; b < bins && bit < codec.num_bits; ++b, ++bit) {
      double agg = 0.0;
      for (std::uint32_t i = round.bounds[b]; i < round.bounds[b + 1]; ++i)
        agg += static_cast<double>(round.signs[i]) * embedding[round.perm[i]];
      if (agg >= 0.0) sig.set_bit(bit);  // sign(0) = +1
    }
  }
  return sig;
}

std::uint32_t quant_score_words(std::span<const std::uint64_t> a,
                                std::span<const std::uint64_t> b,
                                std::uint32_t num_bits) {
  std::uint32_t score = 0;
  const std::size_t words = a.size();
  for (std::size_t w = 0; w < words; ++w) {
    std::uint64_t same = ~(a[w] ^ b[w]);
    if (w + 1 == words && num_bits % 64 != 0)
      same &= (std::uint64_t{1} << (num_bits % 64)) - 1;
    score += static_cast<std::uint32_t>(std::popcount(same));
  }
  return score;
}

std::uint32_t quant_score(const Signature& a, const Signature& b) {
  if (a.num_bits != b.num_bits)
    throw ValidationError("signature width mismatch");
  return quant_score_words(a.words, b.words, a.num_bits);
}

Signature complement(const Signature& s) {
  Signature out = s;
  for (auto& w : out.words) w = ~w;
  if (s.num_bits % 64 != 0)
    out.words.back() &= (std::uint64_t{1} << (s.num_bits % 64)) - 1;
  return out;
}

std::vector<Messenger> preselect(const FrozenIndex& index,
                                 const Signature& query_signature,
                                 std::span<const Messenger> candidates,
                                 std::uint32_t quant_k) {
  if (quant_k < 1) throw ValidationError("quantK must be >= 1");
  if (candidates.size() <= quant_k)
    return {candidates.begin(), candidates.end()};

  const std::uint32_t num_bits = index.codec().num_bits;
  struct Ranked {
    std::uint32_t score;
    std::uint32_t row_id;
    std::uint32_t pos;  // into candidates
  };
  std::vector<Ranked> ranked;
  ranked.reserve(candidates.size());
  for (std::uint32_t i = 0; i < candidates.size(); ++i) {
    auto row_words = index.signature_words(candidates[i].row_id);
    ranked.push_back({quant_score_words(query_signature.words, row_words, num_bits),
                      candidates[i].row_id, i});
  }

  auto better = [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.row_id < b.row_id;
  };
  std::nth_element(ranked.begin(), ranked.begin() + quant_k - 1, ranked.end(),
                   better);

  std::vector<Messenger> kept;
  kept.reserve(quant_k);
  for (std::uint32_t i = 0; i < quant_k; ++i)
    kept.push_back(candidates[ranked[i].pos]);
  std::sort(kept.begin(), kept.end(),
            [](const Messenger& a, const Messenger& b) {
              return a.row_id < b.row_id;
            });
  return kept;
}

}  // namespace hyre
