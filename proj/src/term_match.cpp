#include "hyre/term_match.hpp"

#include <algorithm>

namespace hyre {

CnfQuery normalize_query(
    const std::map<std::uint32_t, std::vector<std::uint32_t>>& raw,
    std::uint32_t num_clauses) {
  CnfQuery query;
  for (const auto& [slot, ids] : raw) {
    if (slot >= num_clauses)
      throw ValidationError("unknown clause slot " + std::to_string(slot) +
                            " (index has " + std::to_string(num_clauses) +
                            ")");
    CnfClause clause;
    clause.slot = slot;
    clause.attribute_ids = ids;
    for (auto id : clause.attribute_ids)
      if (id == 0)
        throw ValidationError("attribute id 0 is reserved for padding");
    std::sort(clause.attribute_ids.begin(), clause.attribute_ids.end());
    clause.attribute_ids.erase(
        std::unique(clause.attribute_ids.begin(), clause.attribute_ids.end()),
        clause.attribute_ids.end());
    if (clause.attribute_ids.empty()) continue;  // no constraint on this slot
    query.clauses.push_back(std::move(clause));
  }
  return query;
}

namespace {

bool sorted_intersects(std::span<const std::uint32_t> a,
                       std::span<const std::uint32_t> b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return false;
}

}  // namespace

bool clause_matches(const FrozenIndex& index, std::uint32_t row_id,
                    const CnfClause& clause) {
  return sorted_intersects(index.clause_slice(row_id, clause.slot),
                           clause.attribute_ids);
}

std::vector<Messenger> full_scan_tbr(const FrozenIndex& index,
                                     const CnfQuery& query,
                                     std::uint32_t batch_id) {
  std::vector<Messenger> out;
  const std::uint32_t n = index.num_docs();
  if (query.match_all()) {
    out.reserve(n);
    for (std::uint32_t row = 0; row < n; ++row)
      out.push_back({row, batch_id, 0.0f});
    return out;
  }
  for (std::uint32_t row = 0; row < n; ++row) {
    bool all = true;
    for (const auto& clause : query.clauses) {
      if (!clause_matches(index, row, clause)) {
        all = false;
        break;
      }
    }
    if (all) out.push_back({row, batch_id, 0.0f});
  }
  return out;
}

}  // namespace hyre
