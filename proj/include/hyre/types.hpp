#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hyre {

// Candidate record passed between pipeline stages. batch_id identifies the
// originating query inside a batched execution; score stays 0 until the
// exact scoring stage fills it in.
struct Messenger {
  std::uint32_t row_id = 0;
  std::uint32_t batch_id = 0;
  float score = 0.0f;

  bool operator==(const Messenger&) const = default;
};

struct ScoredDoc {
  std::string doc_id;
  std::uint32_t row_id = 0;
  float score = 0.0f;

  bool operator==(const ScoredDoc&) const = default;
};

// Final result: descending score, ties broken by ascending rowId.
struct TopKResult {
  std::vector<ScoredDoc> hits;

  bool operator==(const TopKResult&) const = default;
};

}  // namespace hyre
