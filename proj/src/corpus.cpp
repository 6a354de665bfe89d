#include "hyre/corpus.hpp"

#include <algorithm>
#include <cmath>

namespace hyre {

namespace {

constexpr std::uint64_t kIndexMagic = 0x314e4449'45525948ull;  // "HYREIDN1"
constexpr std::uint32_t kIndexVersion = 1;

}  // namespace

IndexBuilder::IndexBuilder(IndexConfig config) : config_(std::move(config)) {
  if (config_.num_clauses == 0)
    throw ValidationError("numClauses must be >= 1");
  if (config_.dim == 0) throw ValidationError("dim must be >= 1");
  if (config_.max_num_attr == 0)
    throw ValidationError("maxNumAttr must be >= 1");
  if (config_.clause_names.empty()) {
    for (std::uint32_t c = 0; c < config_.num_clauses; ++c)
      config_.clause_names.push_back("c" + std::to_string(c));
  }
  if (config_.clause_names.size() != config_.num_clauses)
    throw ValidationError("clause_names size != numClauses");
}

std::uint32_t IndexBuilder::add_document(const DocumentInput& doc) {
  if (frozen_) throw ValidationError("builder already frozen");
  if (ids_.contains(doc.doc_id))
    throw ValidationError("duplicate docId: " + doc.doc_id);
  if (doc.clauses.size() != config_.num_clauses)
    throw ValidationError(
        "clauses: expected " + std::to_string(config_.num_clauses) +
        " clause slots, got " + std::to_string(doc.clauses.size()));
  if (doc.embedding.size() != config_.dim)
    throw ValidationError("embedding: expected dim " +
                          std::to_string(config_.dim) + ", got " +
                          std::to_string(doc.embedding.size()));
  for (const auto& clause : doc.clauses)
    for (auto id : clause)
      if (id == 0)
        throw ValidationError(
            "attribute id 0 is reserved for padding (docId " + doc.doc_id +
            ")");

  const auto row = static_cast<std::uint32_t>(docs_.size());
  ids_.emplace(doc.doc_id, row);
  docs_.push_back(doc);
  return row;
}

FrozenIndex IndexBuilder::freeze(const QuantCodec& codec) && {
  if (frozen_) throw ValidationError("builder already frozen");
  if (docs_.empty()) throw ValidationError("no documents staged");
  if (codec.dim != config_.dim)
    throw ValidationError("codec dim != index dim");
  frozen_ = true;

  // Canonicalize first so width checks see the de-duplicated size.
  std::vector<std::vector<std::vector<std::uint32_t>>> canon(docs_.size());
  std::vector<std::string> too_wide;
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    canon[i].resize(config_.num_clauses);
    std::size_t width = 0;
    for (std::uint32_t c = 0; c < config_.num_clauses; ++c) {
      auto attrs = docs_[i].clauses[c];
      std::sort(attrs.begin(), attrs.end());
      attrs.erase(std::unique(attrs.begin(), attrs.end()), attrs.end());
      width += attrs.size();
      canon[i][c] = std::move(attrs);
    }
    if (width > config_.max_num_attr) too_wide.push_back(docs_[i].doc_id);
  }
  if (!too_wide.empty()) {
    std::string msg = "documents wider than maxNumAttr=" +
                      std::to_string(config_.max_num_attr) + ":";
    for (const auto& id : too_wide) msg += " " + id;
    throw ValidationError(msg);
  }

  FrozenIndex index;
  index.config_ = config_;
  index.num_docs_ = static_cast<std::uint32_t>(docs_.size());
  index.codec_ = codec;
  index.attributes_.assign(std::size_t{index.num_docs_} * config_.max_num_attr,
                           0);
  index.offsets_.assign(
      std::size_t{index.num_docs_} * (config_.num_clauses + 1), 0);
  index.embeddings_.assign(std::size_t{index.num_docs_} * config_.dim, 0.0f);
  index.signatures_.assign(std::size_t{index.num_docs_} * codec.num_words(),
                           0);
  index.zero_embedding_.assign(index.num_docs_, 0);
  index.doc_ids_.reserve(index.num_docs_);

  for (std::uint32_t row = 0; row < index.num_docs_; ++row) {
    auto* attr_out =
        index.attributes_.data() + std::size_t{row} * config_.max_num_attr;
    auto* offs_out =
        index.offsets_.data() + std::size_t{row} * (config_.num_clauses + 1);
    std::uint32_t pos = 0;
    for (std::uint32_t c = 0; c < config_.num_clauses; ++c) {
      offs_out[c] = pos;
      for (auto id : canon[row][c]) attr_out[pos++] = id;
    }
    offs_out[config_.num_clauses] = pos;

    const auto& emb = docs_[row].embedding;
    double norm_sq = 0.0;
    for (float v : emb) norm_sq += static_cast<double>(v) * v;
    auto* emb_out = index.embeddings_.data() + std::size_t{row} * config_.dim;
    if (norm_sq == 0.0) {
      index.zero_embedding_[row] = 1;
    } else {
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (std::uint32_t d = 0; d < config_.dim; ++d)
        emb_out[d] = static_cast<float>(emb[d] * inv);
    }

    Signature sig = encode(codec, index.embedding_row(row));
    std::copy(sig.words.begin(), sig.words.end(),
              index.signatures_.data() + std::size_t{row} * codec.num_words());

    index.doc_ids_.push_back(docs_[row].doc_id);
    index.id_to_row_.emplace(docs_[row].doc_id, row);
  }
  return index;
}

std::optional<std::uint32_t> FrozenIndex::row_of(
    const std::string& doc_id) const {
  auto it = id_to_row_.find(doc_id);
  if (it == id_to_row_.end()) return std::nullopt;
  return it->second;
}

int FrozenIndex::resolve_clause_slot(const std::string& name) const {
  for (std::uint32_t c = 0; c < config_.num_clauses; ++c)
    if (config_.clause_names[c] == name) return static_cast<int>(c);
  return -1;
}

void FrozenIndex::save(const std::string& path) const {
  ChecksumWriter w(path);
  w.write_pod(kIndexMagic);
  w.write_pod(kIndexVersion);
  w.write_pod(config_.num_clauses);
  w.write_pod(config_.max_num_attr);
  w.write_pod(config_.dim);
  w.write_pod(codec_.num_bits);
  w.write_pod(codec_.seed);
  w.write_pod(num_docs_);
  w.write_vec(attributes_);
  w.write_vec(offsets_);
  w.write_vec(embeddings_);
  w.write_vec(signatures_);
  w.write_vec(zero_embedding_);
  for (const auto& id : doc_ids_) w.write_string(id);
  for (const auto& name : config_.clause_names) w.write_string(name);
  w.finish();
}

FrozenIndex FrozenIndex::load(const std::string& path) {
  ChecksumReader r(path);
  if (r.read_pod<std::uint64_t>() != kIndexMagic)
    throw LoadError(LoadError::Cause::kBadMagic, "not an index file: " + path);
  const auto version = r.read_pod<std::uint32_t>();
  if (version != kIndexVersion)
    throw LoadError(LoadError::Cause::kVersionMismatch,
                    "index version " + std::to_string(version) +
                        " unsupported (expected " +
                        std::to_string(kIndexVersion) + ")");

  FrozenIndex index;
  index.config_.num_clauses = r.read_pod<std::uint32_t>();
  index.config_.max_num_attr = r.read_pod<std::uint32_t>();
  index.config_.dim = r.read_pod<std::uint32_t>();
  const auto num_bits = r.read_pod<std::uint32_t>();
  const auto seed = r.read_pod<std::uint64_t>();
  index.num_docs_ = r.read_pod<std::uint32_t>();

  index.codec_ = make_codec(index.config_.dim, num_bits, seed);

  const std::size_t n = index.num_docs_;
  r.read_vec(index.attributes_, n * index.config_.max_num_attr);
  r.read_vec(index.offsets_, n * (index.config_.num_clauses + 1));
  r.read_vec(index.embeddings_, n * index.config_.dim);
  r.read_vec(index.signatures_, n * index.codec_.num_words());
  r.read_vec(index.zero_embedding_, n);
  index.doc_ids_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    index.doc_ids_.push_back(r.read_string());
    index.id_to_row_.emplace(index.doc_ids_.back(),
                             static_cast<std::uint32_t>(i));
  }
  for (std::uint32_t c = 0; c < index.config_.num_clauses; ++c)
    index.config_.clause_names.push_back(r.read_string());
  r.verify();
  return index;
}

bool FrozenIndex::operator==(const FrozenIndex& other) const {
  auto emb_equal = [&] {
    if (embeddings_.size() != other.embeddings_.size()) return false;
    // Bit-identical, including signed zero and NaN payloads.
    return std::memcmp(embeddings_.data(), other.embeddings_.data(),
                       embeddings_.size() * sizeof(float)) == 0;
  };
  return config_.num_clauses == other.config_.num_clauses &&
         config_.max_num_attr == other.config_.max_num_attr &&
         config_.dim == other.config_.dim &&
         config_.clause_names == other.config_.clause_names &&
         num_docs_ == other.num_docs_ && attributes_ == other.attributes_ &&
         offsets_ == other.offsets_ && emb_equal() &&
         signatures_ == other.signatures_ &&
         zero_embedding_ == other.zero_embedding_ &&
         doc_ids_ == other.doc_ids_ &&
         codec_.num_bits == other.codec_.num_bits &&
         codec_.seed == other.codec_.seed;
}

}  // namespace hyre
