#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyre/corpus.hpp"
#include "hyre/knn.hpp"
#include "hyre/quantizer.hpp"
#include "hyre/term_match.hpp"
#include "hyre/types.hpp"

namespace hyre {

struct ExecOptions {
  bool quant_enabled = true;
  std::uint32_t quant_k = 0;  // 0 means the default 200 * k
  std::uint32_t granularity = 100;

  std::uint32_t effective_quant_k(std::uint32_t k) const {
    return quant_k != 0 ? quant_k : 200 * k;
  }
};

// A term-only query (no embedding) returns its TBR matches truncated to k in
// ascending rowId order, scores 0.
struct HybridQuery {
  CnfQuery terms;
  std::optional<std::vector<float>> embedding;
  std::uint32_t k = 10;
  ExecOptions options;
};

struct BatchRequest {
  std::vector<HybridQuery> queries;  // batchId = position
};

struct StageTimings {
  double tbr_ms = 0;
  double quant_ms = 0;
  double ebr_ms = 0;
  double topk_ms = 0;
  double total_ms = 0;
};

// Per-position batch outcome; a malformed query fails its own slot without
// aborting the rest of the batch.
struct QueryOutcome {
  bool ok = false;
  TopKResult result;
  std::string error;
};

// Throws ValidationError naming the offending field.
void validate_query(const FrozenIndex& index, const HybridQuery& query);

// Shared full scan for a batch: one pass over the rows, emitting matches for
// every query. Output is ordered by (rowId, batchId); batch_ids[i] is the
// batchId stamped on query i's matches.
std::vector<Messenger> batch_scan_tbr(const FrozenIndex& index,
                                      std::span<const CnfQuery> queries,
                                      std::span<const std::uint32_t> batch_ids);

// One in-flight batch per executor; scratch is sized from
// numDocs x maxBatch at construction and never grows afterwards. Any number
// of executors may share one FrozenIndex.
class Executor {
 public:
  explicit Executor(const FrozenIndex& index, std::uint32_t max_batch = 16);

  TopKResult execute(const HybridQuery& query, StageTimings* timings = nullptr);

  // Merged-stream execution: TBR, quantized pre-selection, exact scoring and
  // selection all walk a single (rowId, batchId)-ordered messenger stream,
  // so row data is read once per batch. Results per position are identical
  // to execute() on that query.
  std::vector<QueryOutcome> execute_batch(const BatchRequest& batch,
                                          StageTimings* timings = nullptr);

  const FrozenIndex& index() const { return index_; }
  std::uint32_t max_batch() const { return max_batch_; }

 private:
  const FrozenIndex& index_;
  std::uint32_t max_batch_;

  // Scratch, pre-allocated to worst case (all rows match every query).
  std::vector<Messenger> merged_;
  std::vector<Messenger> compacted_;
  std::vector<std::uint32_t> quant_scores_;
  std::vector<std::uint8_t> keep_;
  std::vector<Messenger> per_query_;
};

// Convenience wrappers over a throwaway executor.
TopKResult execute(const FrozenIndex& index, const HybridQuery& query);
std::vector<QueryOutcome> execute_batch(const FrozenIndex& index,
                                        const BatchRequest& batch);

}  // namespace hyre
