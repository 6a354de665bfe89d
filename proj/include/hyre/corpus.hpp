#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hyre/common.hpp"
#include "hyre/quantizer.hpp"

namespace hyre {

// One document as handed to the builder: an external id, one attribute-id
// list per clause slot, and an embedding of the configured dimension.
// Attribute id 0 is the padding sentinel and is rejected as a real id.
struct DocumentInput {
  std::string doc_id;
  std::vector<std::vector<std::uint32_t>> clauses;
  std::vector<float> embedding;
};

struct IndexConfig {
  std::uint32_t num_clauses = 0;
  std::uint32_t max_num_attr = 0;
  std::uint32_t dim = 0;
  std::vector<std::string> clause_names;  // optional; defaults to c0, c1, ...
};

class FrozenIndex;

// Single-writer staging area. Validates each document on add; freeze() sorts
// and de-duplicates attributes per clause, zero-pads, L2-normalizes
// embeddings and computes signatures.
class IndexBuilder {
 public:
  explicit IndexBuilder(IndexConfig config);

  // Returns the sequential rowId the document will occupy after freeze.
  std::uint32_t add_document(const DocumentInput& doc);

  std::size_t size() const { return docs_.size(); }

  FrozenIndex freeze(const QuantCodec& codec) &&;

 private:
  IndexConfig config_;
  std::vector<DocumentInput> docs_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  bool frozen_ = false;
};

// Immutable searchable corpus: term matrix (offsets + per-clause sorted
// attributes), L2-normalized embedding matrix, packed signature matrix and
// the rowId <-> docId bijection. Safe for unlimited concurrent readers.
class FrozenIndex {
 public:
  std::uint32_t num_docs() const { return num_docs_; }
  std::uint32_t num_clauses() const { return config_.num_clauses; }
  std::uint32_t max_num_attr() const { return config_.max_num_attr; }
  std::uint32_t dim() const { return config_.dim; }
  const std::vector<std::string>& clause_names() const {
    return config_.clause_names;
  }
  const QuantCodec& codec() const { return codec_; }

  std::span<const std::uint32_t> attribute_row(std::uint32_t row) const {
    return {attributes_.data() + std::size_t{row} * config_.max_num_attr,
            config_.max_num_attr};
  }
  std::span<const std::uint32_t> offsets_row(std::uint32_t row) const {
    return {offsets_.data() + std::size_t{row} * (config_.num_clauses + 1),
            config_.num_clauses + 1u};
  }
  // Sorted, de-duplicated attribute ids of one clause slot (may be empty).
  std::span<const std::uint32_t> clause_slice(std::uint32_t row,
                                              std::uint32_t clause) const {
    auto offs = offsets_row(row);
    auto attrs = attribute_row(row);
    return attrs.subspan(offs[clause], offs[clause + 1] - offs[clause]);
  }
  std::span<const float> embedding_row(std::uint32_t row) const {
    return {embeddings_.data() + std::size_t{row} * config_.dim, config_.dim};
  }
  std::span<const std::uint64_t> signature_words(std::uint32_t row) const {
    const std::size_t w = codec_.num_words();
    return {signatures_.data() + std::size_t{row} * w, w};
  }
  Signature signature_row(std::uint32_t row) const {
    auto words = signature_words(row);
    return Signature{codec_.num_bits, {words.begin(), words.end()}};
  }
  // True when the document was staged with an all-zero embedding; its stored
  // row stays all-zero and its signature follows the sign(0)=+1 convention.
  bool embedding_is_zero(std::uint32_t row) const {
    return zero_embedding_[row] != 0;
  }

  const std::string& doc_id(std::uint32_t row) const { return doc_ids_[row]; }
  std::optional<std::uint32_t> row_of(const std::string& doc_id) const;

  int resolve_clause_slot(const std::string& name) const;

  void save(const std::string& path) const;
  static FrozenIndex load(const std::string& path);

  bool operator==(const FrozenIndex& other) const;

 private:
  friend class IndexBuilder;
  FrozenIndex() = default;

  IndexConfig config_;
  std::uint32_t num_docs_ = 0;
  std::vector<std::uint32_t> attributes_;  // num_docs x max_num_attr
  std::vector<std::uint32_t> offsets_;     // num_docs x (num_clauses+1)
  std::vector<float> embeddings_;          // num_docs x dim, rows unit norm
  std::vector<std::uint64_t> signatures_;  // num_docs x num_words
  std::vector<std::uint8_t> zero_embedding_;
  std::vector<std::string> doc_ids_;
  std::unordered_map<std::string, std::uint32_t> id_to_row_;
  QuantCodec codec_;
};

}  // namespace hyre
