#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hyre/corpus.hpp"
#include "hyre/types.hpp"

namespace hyre {

// Messengers with cosine scores filled in. Scores are clamped to [-1, 1]
// (float round-off can push a unit-vector self product a hair past 1), which
// is the bound the bucketized selection relies on.
struct ScoredMessengers {
  std::vector<Messenger> items;
  bool query_was_renormalized = false;
};

// Inner product of the (unit) query against each candidate row, sequential
// float accumulation. Non-candidate rows are never touched. A query that is
// not unit norm is normalized internally and flagged in the result; an
// all-zero query is passed through and scores everything 0.
ScoredMessengers exact_scores(const FrozenIndex& index,
                              std::span<const float> query_embedding,
                              std::vector<Messenger> candidates);

// Histogram selection over the known score bounds [-1, 1]: bucket index is
// floor(score * granularity) + granularity, counts are walked from the top
// bucket until k items are covered, and only that suffix is sorted. Returns
// exactly what a full sort would (descending score, ties by ascending
// rowId), truncated to min(k, n).
TopKResult bucket_top_k(const FrozenIndex& index,
                        const ScoredMessengers& scored, std::uint32_t k,
                        std::uint32_t granularity = 100);

}  // namespace hyre
