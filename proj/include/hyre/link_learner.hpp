#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hyre/common.hpp"

// Explainable seeker<->job link learning: candidate enumeration from
// confirmed-hire data, support and quality pruning, per-seeker liquidity
// selection, and collapse into a flat serving graph that exports onto the
// term index.
namespace hyre::links {

// Attribute name -> values. Multi-valued attributes are the norm
// (e.g. a seeker holding two standardized titles).
using AttrMap = std::map<std::string, std::vector<std::string>>;

// (attribute, value) pairs identifying one side of a link; sorted and
// de-duplicated so segments compare canonically.
using Segment = std::vector<std::pair<std::string, std::string>>;

struct LinkTemplate {
  std::string seeker_attribute;
  std::string job_attribute;
};

struct MetaLink {
  std::string seeker_attribute;
  std::string seeker_value;
  std::string job_attribute;
  std::string job_value;
  auto operator<=>(const MetaLink&) const = default;
};

// A set of meta links treated as one candidate: fires on a pair only when
// every member holds for that pair.
struct ComplexLink {
  std::vector<MetaLink> links;  // canonical: sorted, de-duplicated
  std::uint32_t support = 0;    // confirmed hires it fired on
  std::uint32_t neg_count = 0;  // no-hire pairs it fired on
  double quality = 0.0;

  Segment seeker_segment() const;
  Segment job_segment() const;
  // Identity is the link set; tallies and quality are annotations.
  bool operator==(const ComplexLink& other) const {
    return links == other.links;
  }
};

struct TrainingPair {
  AttrMap seeker;
  AttrMap job;
  int label = 0;  // 1 = hire, 0 = no hire
};

struct GraphNode {
  Segment seeker_segment;
  Segment job_segment;
  auto operator<=>(const GraphNode&) const = default;
};

// 3-layer serving form: seeker -> node -> jobs. Node indices refer to
// `nodes`, which is sorted canonically.
struct ServingGraph {
  std::vector<GraphNode> nodes;
  std::map<std::string, std::vector<std::uint32_t>> seeker_nodes;
  std::vector<std::vector<std::string>> node_jobs;
};

// Node attribute ids for the term index; id = node position + 1 because 0 is
// the corpus padding sentinel. A single-clause query with a seeker's ids
// retrieves exactly the jobs it can reach through the graph.
struct IndexExport {
  std::map<std::string, std::vector<std::uint32_t>> job_attributes;
  std::map<std::string, std::vector<std::uint32_t>> seeker_attributes;
};

// Job segment -> ids of jobs carrying every value in the segment.
using JobSegmentIndex = std::map<Segment, std::vector<std::string>>;

std::vector<MetaLink> enumerate_meta_links(
    const TrainingPair& pair, const std::vector<LinkTemplate>& templates);

// All non-empty subsets of the distinct meta links; k of them yield 2^k - 1
// candidates. k beyond `cap` is refused rather than enumerated.
std::vector<ComplexLink> enumerate_complex_links(std::vector<MetaLink> meta,
                                                 std::uint32_t cap = 20);

std::vector<ComplexLink> aggregate_and_prune(
    const std::vector<TrainingPair>& data,
    const std::vector<LinkTemplate>& templates, std::uint32_t min_support = 3,
    std::uint32_t cap = 20);

// quality = support / (negCount + 1); the +1 keeps pure-positive links finite.
void score_links_ratio(std::vector<ComplexLink>& candidates);

// Minimizes mean logistic loss + lambda * ||w||_1 (no intercept) by cyclic
// coordinate descent with soft-thresholding. rows[i][j] is feature j of
// example i. Stops when the largest coordinate change in a sweep drops below
// `tol`, or after `max_sweeps`.
std::vector<double> l1_logistic_fit(
    const std::vector<std::vector<double>>& rows,
    const std::vector<int>& labels, double lambda, double tol = 1e-6,
    std::uint32_t max_sweeps = 500);

// Fits candidate-fire features against hire labels; keeps links whose weight
// ends up positive, with the weight as quality.
std::vector<ComplexLink> score_links_l1(std::vector<ComplexLink> candidates,
                                        const std::vector<TrainingPair>& data,
                                        double lambda);

// True when every meta link of `link` holds for the (seeker, job) pair.
bool link_fires(const ComplexLink& link, const AttrMap& seeker,
                const AttrMap& job);

JobSegmentIndex build_job_segment_index(
    const std::vector<std::pair<std::string, AttrMap>>& jobs,
    const std::vector<ComplexLink>& links);

// Greedy liquidity selection: seeker-segment mappings ranked by average link
// quality, added until the reachable distinct-job count hits theta.
std::vector<ComplexLink> select_links_for_seeker(
    const AttrMap& seeker, const std::vector<ComplexLink>& scored,
    std::uint32_t theta, const JobSegmentIndex& job_index);

ServingGraph collapse_graph(
    const std::map<std::string, std::vector<ComplexLink>>& selected,
    const JobSegmentIndex& job_index);

IndexExport export_to_index(const ServingGraph& graph);

}  // namespace hyre::links
