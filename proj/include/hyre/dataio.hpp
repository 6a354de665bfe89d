#pragma once

#include <string>
#include <vector>

#include "hyre/corpus.hpp"
#include "hyre/link_learner.hpp"
#include "hyre/two_tower.hpp"

// File formats for the CLI: line-delimited JSON for corpora and metrics,
// checksummed binaries for trained models. Parse failures carry file + line
// context; binary failures reuse the index LoadError causes.
namespace hyre {

struct IngestSchema {
  std::vector<std::string> clause_names;
  std::uint32_t dim = 0;
};

// {"clauses": ["geo", "skill"], "dim": 4}
IngestSchema read_schema_json(const std::string& path);

// One document per line:
//   {"id": "doc1", "clauses": {"geo": [934]}, "embedding": [0.1, ...]}
// A clause absent from a document is simply empty; a missing embedding is
// stored as the zero vector (term-only corpora).
std::vector<DocumentInput> read_documents_jsonl(const std::string& path,
                                                const IngestSchema& schema);

// Labeled seeker/job pair with stable side ids. Ids are optional in the
// file; absent ones are derived from the attribute content so identical
// seekers (or jobs) on different lines share an id.
struct LabeledPair {
  std::string seeker_id;
  std::string job_id;
  links::TrainingPair pair;
};

// {"seeker": {"title": ["ML Engineer"]}, "job": {...}, "label": 1,
//  "seeker_id": "s1", "job_id": "j1"}
std::vector<LabeledPair> read_labeled_pairs_jsonl(const std::string& path);

// [{"seeker": "memberTitle", "job": "jobTitle"}, ...]
std::vector<links::LinkTemplate> read_templates_json(const std::string& path);

// {"seeker_tokens": ["t:ml"], "job_tokens": ["t:nlp"]}
std::vector<tt::PairExample> read_pair_examples_jsonl(const std::string& path);

void write_metrics_jsonl(const std::string& path,
                         const std::vector<tt::MetricsRecord>& history);

// Serving-graph export: node definitions plus the attribute-id mappings the
// term index consumes.
void write_links_export(const std::string& path,
                        const links::ServingGraph& graph,
                        const links::IndexExport& exported);

void save_model(const std::string& path, const tt::TowerModel& model);
tt::TowerModel load_model(const std::string& path);

}  // namespace hyre
