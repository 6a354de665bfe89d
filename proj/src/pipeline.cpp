#include "hyre/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace hyre {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Returns the query embedding as a unit vector (or empty for a zero/absent
// embedding). Signatures are scale-invariant, so quant and EBR can share it.
std::vector<float> unit_embedding(std::span<const float> raw) {
  double norm_sq = 0.0;
  for (float v : raw) norm_sq += static_cast<double>(v) * v;
  std::vector<float> out(raw.begin(), raw.end());
  if (norm_sq != 0.0 && std::abs(norm_sq - 1.0) > 1e-6) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& v : out) v = static_cast<float>(v * inv);
  }
  return out;
}

TopKResult term_only_result(const FrozenIndex& index,
                            std::span<const Messenger> matches,
                            std::uint32_t k) {
  TopKResult result;
  const std::size_t take = std::min<std::size_t>(k, matches.size());
  result.hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    result.hits.push_back(
        {index.doc_id(matches[i].row_id), matches[i].row_id, 0.0f});
  return result;
}

}  // namespace

void validate_query(const FrozenIndex& index, const HybridQuery& query) {
  if (query.k < 1) throw ValidationError("k must be >= 1");
  if (query.options.granularity < 1)
    throw ValidationError("granularity must be >= 1");
  if (query.embedding && query.embedding->size() != index.dim())
    throw ValidationError("embedding: expected dim " +
                          std::to_string(index.dim()) + ", got " +
                          std::to_string(query.embedding->size()));
  std::uint32_t last_slot = 0;
  bool first = true;
  for (const auto& clause : query.terms.clauses) {
    if (clause.slot >= index.num_clauses())
      throw ValidationError("unknown clause slot " +
                            std::to_string(clause.slot));
    if (!first && clause.slot <= last_slot)
      throw ValidationError("clause slots must be ascending and unique");
    first = false;
    last_slot = clause.slot;
    if (clause.attribute_ids.empty())
      throw ValidationError("clause " + std::to_string(clause.slot) +
                            " has no attribute ids");
    for (std::size_t i = 0; i < clause.attribute_ids.size(); ++i) {
      if (clause.attribute_ids[i] == 0)
        throw ValidationError("attribute id 0 is reserved for padding");
      if (i > 0 && clause.attribute_ids[i] <= clause.attribute_ids[i - 1])
        throw ValidationError("clause attribute ids must be strictly "
                              "increasing (use normalize_query)");
    }
  }
}

std::vector<Messenger> batch_scan_tbr(
    const FrozenIndex& index, std::span<const CnfQuery> queries,
    std::span<const std::uint32_t> batch_ids) {
  std::vector<Messenger> merged;
  const std::uint32_t n = index.num_docs();
  for (std::uint32_t row = 0; row < n; ++row) {
    for (std::size_t q = 0; q < queries.size(); ++q) {
      bool all = true;
      for (const auto& clause : queries[q].clauses) {
        if (!clause_matches(index, row, clause)) {
          all = false;
          break;
        }
      }
      if (all) merged.push_back({row, batch_ids[q], 0.0f});
    }
  }
  return merged;
}

Executor::Executor(const FrozenIndex& index, std::uint32_t max_batch)
    : index_(index), max_batch_(max_batch) {
  if (max_batch_ < 1) throw ValidationError("maxBatch must be >= 1");
  // Worst case: every row matches every query in a full batch. Sized once so
  // steady-state execution never reallocates.
  const std::size_t cap = std::size_t{index_.num_docs()} * max_batch_;
  merged_.reserve(cap);
  compacted_.reserve(cap);
  quant_scores_.reserve(cap);
  keep_.reserve(cap);
  per_query_.reserve(index_.num_docs());
}

TopKResult Executor::execute(const HybridQuery& query, StageTimings* timings) {
  validate_query(index_, query);
  StageTimings local;
  const auto start = Clock::now();

  auto t0 = Clock::now();
  std::vector<Messenger> matches = full_scan_tbr(index_, query.terms, 0);
  local.tbr_ms = ms_since(t0);

  TopKResult result;
  if (matches.empty()) {
    // No eligible rows is a successful empty retrieval, not an error.
  } else if (!query.embedding) {
    result = term_only_result(index_, matches, query.k);
  } else {
    std::vector<float> q = unit_embedding(*query.embedding);

    t0 = Clock::now();
    const std::uint32_t quant_k = query.options.effective_quant_k(query.k);
    if (query.options.quant_enabled && matches.size() > quant_k) {
      Signature sig = encode(index_.codec(), q);
      matches = preselect(index_, sig, matches, quant_k);
    }
    local.quant_ms = ms_since(t0);

    t0 = Clock::now();
    ScoredMessengers scored = exact_scores(index_, q, std::move(matches));
    local.ebr_ms = ms_since(t0);

    t0 = Clock::now();
    result = bucket_top_k(index_, scored, query.k, query.options.granularity);
    local.topk_ms = ms_since(t0);
  }

  local.total_ms = ms_since(start);
  if (timings) *timings = local;
  return result;
}

std::vector<QueryOutcome> Executor::execute_batch(const BatchRequest& batch,
                                                  StageTimings* timings) {
  const std::size_t b = batch.queries.size();
  if (b < 1) throw ValidationError("batch must contain at least one query");
  if (b > max_batch_)
    throw ValidationError("batch size " + std::to_string(b) +
                          " exceeds maxBatch " + std::to_string(max_batch_));

  StageTimings local;
  const auto start = Clock::now();

  std::vector<QueryOutcome> outcomes(b);
  std::vector<std::uint32_t> valid;        // positions of well-formed queries
  std::vector<std::vector<float>> units(b);  // unit query embeddings
  for (std::uint32_t i = 0; i < b; ++i) {
    try {
      validate_query(index_, batch.queries[i]);
      valid.push_back(i);
      if (batch.queries[i].embedding)
        units[i] = unit_embedding(*batch.queries[i].embedding);
    } catch (const ValidationError& e) {
      outcomes[i].error = e.what();
    }
  }

  std::vector<CnfQuery> cnfs;
  cnfs.reserve(valid.size());
  for (auto i : valid) cnfs.push_back(batch.queries[i].terms);

  auto t0 = Clock::now();
  merged_.clear();
  {
    std::vector<Messenger> scanned = batch_scan_tbr(index_, cnfs, valid);
    merged_.assign(scanned.begin(), scanned.end());
  }
  local.tbr_ms = ms_since(t0);

  // Quantized pre-selection, still on the merged stream: score every
  // messenger whose query wants it, then keep each query's best quant_k.
  t0 = Clock::now();
  std::vector<std::size_t> counts(b, 0);
  for (const auto& m : merged_) ++counts[m.batch_id];

  std::vector<std::uint8_t> wants_quant(b, 0);
  std::vector<Signature> sigs(b);
  for (auto i : valid) {
    const auto& q = batch.queries[i];
    if (!q.embedding || !q.options.quant_enabled) continue;
    if (counts[i] > q.options.effective_quant_k(q.k)) {
      wants_quant[i] = 1;
      sigs[i] = encode(index_.codec(), units[i]);
    }
  }

  bool any_quant = false;
  for (auto i : valid) any_quant |= (wants_quant[i] != 0);
  if (any_quant) {
    const std::uint32_t num_bits = index_.codec().num_bits;
    quant_scores_.assign(merged_.size(), 0);
    keep_.assign(merged_.size(), 1);
    for (std::size_t pos = 0; pos < merged_.size(); ++pos) {
      const auto& m = merged_[pos];
      if (wants_quant[m.batch_id])
        quant_scores_[pos] = quant_score_words(
            sigs[m.batch_id].words, index_.signature_words(m.row_id),
            num_bits);
    }
    struct Ranked {
      std::uint32_t score;
      std::uint32_t row_id;
      std::size_t pos;
    };
    std::vector<Ranked> ranked;
    for (auto i : valid) {
      if (!wants_quant[i]) continue;
      ranked.clear();
      ranked.reserve(counts[i]);
      for (std::size_t pos = 0; pos < merged_.size(); ++pos)
        if (merged_[pos].batch_id == i)
          ranked.push_back({quant_scores_[pos], merged_[pos].row_id, pos});
      const std::uint32_t quant_k =
          batch.queries[i].options.effective_quant_k(batch.queries[i].k);
      std::nth_element(ranked.begin(), ranked.begin() + quant_k - 1,
                       ranked.end(), [](const Ranked& a, const Ranked& b) {
                         if (a.score != b.score) return a.score > b.score;
                         return a.row_id < b.row_id;
                       });
      for (std::size_t j = 0; j < ranked.size(); ++j)
        if (j >= quant_k) keep_[ranked[j].pos] = 0;
    }
    compacted_.clear();
    for (std::size_t pos = 0; pos < merged_.size(); ++pos)
      if (keep_[pos]) compacted_.push_back(merged_[pos]);
    merged_.swap(compacted_);
  }
  local.quant_ms = ms_since(t0);

  // Exact scoring over the merged stream: adjacent messengers share a row,
  // so each embedding row is pulled through the cache once per batch.
  t0 = Clock::now();
  const std::uint32_t dim = index_.dim();
  for (auto& m : merged_) {
    const auto& unit = units[m.batch_id];
    if (unit.empty()) continue;  // term-only query
    const float* row = index_.embedding_row(m.row_id).data();
    float dot = 0.0f;
    for (std::uint32_t d = 0; d < dim; ++d) dot += unit[d] * row[d];
    m.score = std::clamp(dot, -1.0f, 1.0f);
  }
  local.ebr_ms = ms_since(t0);

  t0 = Clock::now();
  for (auto i : valid) {
    per_query_.clear();
    for (const auto& m : merged_)
      if (m.batch_id == i) per_query_.push_back(m);

    auto& out = outcomes[i];
    out.ok = true;
    if (per_query_.empty()) continue;
    if (!batch.queries[i].embedding) {
      out.result = term_only_result(index_, per_query_, batch.queries[i].k);
    } else {
      ScoredMessengers scored;
      scored.items = per_query_;
      out.result = bucket_top_k(index_, scored, batch.queries[i].k,
                                batch.queries[i].options.granularity);
    }
  }
  local.topk_ms = ms_since(t0);

  local.total_ms = ms_since(start);
  if (timings) *timings = local;
  return outcomes;
}

TopKResult execute(const FrozenIndex& index, const HybridQuery& query) {
  Executor exec(index, 1);
  return exec.execute(query);
}

std::vector<QueryOutcome> execute_batch(const FrozenIndex& index,
                                        const BatchRequest& batch) {
  Executor exec(index,
                std::max<std::uint32_t>(
                    1, static_cast<std::uint32_t>(batch.queries.size())));
  return exec.execute_batch(batch);
}

}  // namespace hyre
