#include "hyre/knn.hpp"

#include <algorithm>
#include <cmath>

namespace hyre {

ScoredMessengers exact_scores(const FrozenIndex& index,
                              std::span<const float> query_embedding,
                              std::vector<Messenger> candidates) {
  if (query_embedding.size() != index.dim())
    throw ValidationError("query embedding dim " +
                          std::to_string(query_embedding.size()) +
                          " != index dim " + std::to_string(index.dim()));

  ScoredMessengers scored;
  double norm_sq = 0.0;
  for (float v : query_embedding) norm_sq += static_cast<double>(v) * v;

  std::vector<float> normalized;
  std::span<const float> q = query_embedding;
  if (norm_sq != 0.0 && std::abs(norm_sq - 1.0) > 1e-6) {
    scored.query_was_renormalized = true;
    const double inv = 1.0 / std::sqrt(norm_sq);
    normalized.resize(q.size());
    for (std::size_t d = 0; d < q.size(); ++d)
      normalized[d] = static_cast<float>(q[d] * inv);
    q = normalized;
  }

  const std::uint32_t dim = index.dim();
  scored.items = std::move(candidates);
  for (auto& m : scored.items) {
    const float* row = index.embedding_row(m.row_id).data();
    float dot = 0.0f;
    for (std::uint32_t d = 0; d < dim; ++d) dot += q[d] * row[d];
    m.score = std::clamp(dot, -1.0f, 1.0f);
  }
  return scored;
}

TopKResult bucket_top_k(const FrozenIndex& index,
                        const ScoredMessengers& scored, std::uint32_t k,
                        std::uint32_t granularity) {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (granularity < 1) throw ValidationError("granularity must be >= 1");

  const auto& items = scored.items;
  const int g = static_cast<int>(granularity);
  const int num_buckets = 2 * g + 1;  // scores -1..1 map to buckets 0..2g

  auto bucket_of = [&](float score) {
    return static_cast<int>(
               std::floor(static_cast<double>(score) * g)) + g;
  };

  std::vector<std::uint32_t> counts(static_cast<std::size_t>(num_buckets), 0);
  for (const auto& m : items) {
    if (m.score < -1.0f || m.score > 1.0f)
      throw std::domain_error("score " + std::to_string(m.score) +
                              " outside the documented [-1, 1] bounds");
    ++counts[static_cast<std::size_t>(bucket_of(m.score))];
  }

  // Walk from the top bucket until at least k items are covered; everything
  // below that boundary bucket cannot reach the top k.
  std::uint64_t covered = 0;
  int boundary = num_buckets;  // exclusive lower bound
  while (boundary > 0 && covered < k) {
    --boundary;
    covered += counts[static_cast<std::size_t>(boundary)];
  }

  std::vector<const Messenger*> gathered;
  gathered.reserve(covered);
  for (const auto& m : items)
    if (bucket_of(m.score) >= boundary) gathered.push_back(&m);

  std::sort(gathered.begin(), gathered.end(),
            [](const Messenger* a, const Messenger* b) {
              if (a->score != b->score) return a->score > b->score;
              return a->row_id < b->row_id;
            });

  TopKResult result;
  const std::size_t take = std::min<std::size_t>(k, gathered.size());
  result.hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    result.hits.push_back(
        {index.doc_id(gathered[i]->row_id), gathered[i]->row_id,
         gathered[i]->score});
  return result;
}

}  // namespace hyre
