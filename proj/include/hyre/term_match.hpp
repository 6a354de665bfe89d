#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "hyre/corpus.hpp"
#include "hyre/types.hpp"

namespace hyre {

// Conjunctive normal form: AND across clauses, OR across attribute ids
// inside a clause. An empty clause list matches every document.
struct CnfClause {
  std::uint32_t slot = 0;
  std::vector<std::uint32_t> attribute_ids;  // strictly increasing, non-empty

  bool operator==(const CnfClause&) const = default;
};

struct CnfQuery {
  std::vector<CnfClause> clauses;  // at most one per slot, ascending slot

  bool match_all() const { return clauses.empty(); }
  bool operator==(const CnfQuery&) const = default;
};

// Sorts and de-duplicates each attribute list; an empty map yields the
// match-all query and an empty list leaves its slot unconstrained.
// Rejects unknown slots and the reserved id 0.
CnfQuery normalize_query(
    const std::map<std::uint32_t, std::vector<std::uint32_t>>& raw,
    std::uint32_t num_clauses);

// Two-pointer intersection test between the document's stored clause slice
// and the query clause. Both sides are sorted; an empty document-side slice
// never matches.
bool clause_matches(const FrozenIndex& index, std::uint32_t row_id,
                    const CnfClause& clause);

// Evaluates every row against the query and emits one messenger per match,
// in ascending rowId order with scores left at their default.
std::vector<Messenger> full_scan_tbr(const FrozenIndex& index,
                                     const CnfQuery& query,
                                     std::uint32_t batch_id = 0);

}  // namespace hyre
