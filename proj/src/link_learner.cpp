#include "hyre/link_learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>
#include <string>

namespace hyre::links {

namespace {

Segment side_segment(const std::vector<MetaLink>& links, bool seeker) {
  Segment seg;
  seg.reserve(links.size());
  for (const auto& m : links)
    seg.emplace_back(seeker ? m.seeker_attribute : m.job_attribute,
                     seeker ? m.seeker_value : m.job_value);
  std::sort(seg.begin(), seg.end());
  seg.erase(std::unique(seg.begin(), seg.end()), seg.end());
  return seg;
}

std::vector<MetaLink> canonical_meta(const TrainingPair& pair,
                                     const std::vector<LinkTemplate>& templates) {
  auto meta = enumerate_meta_links(pair, templates);
  std::sort(meta.begin(), meta.end());
  meta.erase(std::unique(meta.begin(), meta.end()), meta.end());
  return meta;
}

// A candidate fires on a pair iff its link set is contained in the pair's
// meta links (both sides sorted).
bool fires(const std::vector<MetaLink>& link,
           const std::vector<MetaLink>& pair_meta) {
  return std::includes(pair_meta.begin(), pair_meta.end(), link.begin(),
                       link.end());
}

bool segment_holds(const Segment& seg, const AttrMap& attrs) {
  for (const auto& [name, value] : seg) {
    auto it = attrs.find(name);
    if (it == attrs.end()) return false;
    if (std::find(it->second.begin(), it->second.end(), value) ==
        it->second.end())
      return false;
  }
  return true;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_label(int label) {
  if (label != 0 && label != 1)
    throw ValidationError("label must be 0 or 1, got " +
                          std::to_string(label));
}

}  // namespace

Segment ComplexLink::seeker_segment() const { return side_segment(links, true); }
Segment ComplexLink::job_segment() const { return side_segment(links, false); }

std::vector<MetaLink> enumerate_meta_links(
    const TrainingPair& pair, const std::vector<LinkTemplate>& templates) {
  std::vector<MetaLink> out;
  for (const auto& t : templates) {
    auto s = pair.seeker.find(t.seeker_attribute);
    auto j = pair.job.find(t.job_attribute);
    if (s == pair.seeker.end() || j == pair.job.end()) continue;
    for (const auto& sv : s->second)
      for (const auto& jv : j->second)
        out.push_back({t.seeker_attribute, sv, t.job_attribute, jv});
  }
  return out;
}

std::vector<ComplexLink> enumerate_complex_links(std::vector<MetaLink> meta,
                                                 std::uint32_t cap) {
  std::sort(meta.begin(), meta.end());
  meta.erase(std::unique(meta.begin(), meta.end()), meta.end());
  const std::size_t k = meta.size();
  if (k > cap)
    throw ValidationError("pair yields " + std::to_string(k) +
                          " meta links, above the cap of " +
                          std::to_string(cap));
  std::vector<ComplexLink> out;
  if (k == 0) return out;
  out.reserve((std::size_t{1} << k) - 1);
  for (std::size_t mask = 1; mask < (std::size_t{1} << k); ++mask) {
    ComplexLink link;
    for (std::size_t bit = 0; bit < k; ++bit)
      if (mask & (std::size_t{1} << bit)) link.links.push_back(meta[bit]);
    out.push_back(std::move(link));
  }
  return out;
}

std::vector<ComplexLink> aggregate_and_prune(
    const std::vector<TrainingPair>& data,
    const std::vector<LinkTemplate>& templates, std::uint32_t min_support,
    std::uint32_t cap) {
  if (data.empty()) throw ValidationError("training data is empty");
  for (const auto& pair : data) check_label(pair.label);

  // Candidates exist only where a hire produced them; no-hire pairs merely
  // count against existing candidates.
  std::map<std::vector<MetaLink>, std::pair<std::uint32_t, std::uint32_t>>
      tally;
  for (const auto& pair : data) {
    if (pair.label != 1) continue;
    for (auto& link : enumerate_complex_links(canonical_meta(pair, templates),
                                              cap))
      ++tally[std::move(link.links)].first;
  }
  for (const auto& pair : data) {
    if (pair.label != 0) continue;
    const auto meta = canonical_meta(pair, templates);
    for (auto& [link, counts] : tally)
      if (fires(link, meta)) ++counts.second;
  }

  std::vector<ComplexLink> out;
  for (const auto& [link, counts] : tally) {
    if (counts.first < min_support) continue;
    if (counts.second > counts.first) continue;
    ComplexLink kept;
    kept.links = link;
    kept.support = counts.first;
    kept.neg_count = counts.second;
    out.push_back(std::move(kept));
  }
  return out;  // map order: canonical, independent of input permutation
}

void score_links_ratio(std::vector<ComplexLink>& candidates) {
  for (auto& c : candidates)
    c.quality = static_cast<double>(c.support) / (c.neg_count + 1.0);
}

std::vector<double> l1_logistic_fit(
    const std::vector<std::vector<double>>& rows,
    const std::vector<int>& labels, double lambda, double tol,
    std::uint32_t max_sweeps) {
  if (lambda < 0.0) throw ValidationError("lambda must be non-negative");
  if (rows.size() != labels.size())
    throw ValidationError("rows/labels size mismatch");
  const std::size_t n = rows.size();
  if (n == 0) return {};
  const std::size_t p = rows[0].size();
  for (const auto& r : rows)
    if (r.size() != p) throw ValidationError("ragged feature rows");
  for (int y : labels) check_label(y);

  std::vector<double> w(p, 0.0);
  std::vector<double> z(n, 0.0);  // running margins w . x_i
  for (std::uint32_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      double grad = 0.0, hess = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double x = rows[i][j];
        if (x == 0.0) continue;
        const double prob = sigmoid(z[i]);
        grad += (prob - labels[i]) * x;
        hess += prob * (1.0 - prob) * x * x;
      }
      grad /= n;
      hess = std::max(hess / n, 1e-12);
      // Newton step on coordinate j with soft-thresholding; the fixed point
      // satisfies the subgradient conditions of the penalized objective.
      const double target = hess * w[j] - grad;
      const double soft =
          (target > lambda) ? target - lambda
                            : (target < -lambda ? target + lambda : 0.0);
      const double updated = soft / hess;
      if (updated != w[j]) {
        const double delta = updated - w[j];
        for (std::size_t i = 0; i < n; ++i)
          if (rows[i][j] != 0.0) z[i] += delta * rows[i][j];
        max_change = std::max(max_change, std::abs(delta));
        w[j] = updated;
      }
    }
    if (max_change < tol) break;
  }
  return w;
}

std::vector<ComplexLink> score_links_l1(std::vector<ComplexLink> candidates,
                                        const std::vector<TrainingPair>& data,
                                        double lambda) {
  if (lambda < 0.0) throw ValidationError("lambda must be non-negative");
  if (candidates.empty() || data.empty()) return {};

  // The templates are implicit in the candidates themselves: a pair's meta
  // links are recoverable attribute-by-attribute, so fire checks only need
  // the pair's own values.
  std::vector<std::vector<double>> rows(data.size(),
                                        std::vector<double>(candidates.size()));
  std::vector<int> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    labels[i] = data[i].label;
    for (std::size_t j = 0; j < candidates.size(); ++j)
      rows[i][j] =
          link_fires(candidates[j], data[i].seeker, data[i].job) ? 1.0 : 0.0;
  }

  const std::vector<double> w = l1_logistic_fit(rows, labels, lambda);
  std::vector<ComplexLink> kept;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    if (w[j] <= 0.0) continue;
    candidates[j].quality = w[j];
    kept.push_back(std::move(candidates[j]));
  }
  return kept;
}

bool link_fires(const ComplexLink& link, const AttrMap& seeker,
                const AttrMap& job) {
  for (const auto& m : link.links) {
    if (!segment_holds({{m.seeker_attribute, m.seeker_value}}, seeker))
      return false;
    if (!segment_holds({{m.job_attribute, m.job_value}}, job)) return false;
  }
  return true;
}

JobSegmentIndex build_job_segment_index(
    const std::vector<std::pair<std::string, AttrMap>>& jobs,
    const std::vector<ComplexLink>& links) {
  JobSegmentIndex out;
  for (const auto& link : links) {
    Segment seg = link.job_segment();
    if (out.count(seg)) continue;
    std::vector<std::string> ids;
    for (const auto& [id, attrs] : jobs)
      if (segment_holds(seg, attrs)) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    out.emplace(std::move(seg), std::move(ids));
  }
  return out;
}

std::vector<ComplexLink> select_links_for_seeker(
    const AttrMap& seeker, const std::vector<ComplexLink>& scored,
    std::uint32_t theta, const JobSegmentIndex& job_index) {
  // Group the seeker's compatible links into seeker-segment mappings.
  std::map<Segment, std::vector<const ComplexLink*>> groups;
  for (const auto& link : scored)
    if (segment_holds(link.seeker_segment(), seeker))
      groups[link.seeker_segment()].push_back(&link);

  struct Mapping {
    double avg_quality;
    const Segment* key;
    const std::vector<const ComplexLink*>* links;
  };
  std::vector<Mapping> order;
  order.reserve(groups.size());
  for (const auto& [key, links] : groups) {
    double sum = 0.0;
    for (const auto* l : links) sum += l->quality;
    order.push_back({sum / links.size(), &key, &links});
  }
  std::sort(order.begin(), order.end(), [](const Mapping& a, const Mapping& b) {
    if (a.avg_quality != b.avg_quality) return a.avg_quality > b.avg_quality;
    return *a.key < *b.key;
  });

  std::vector<ComplexLink> omega;
  std::set<std::string> reachable;
  for (const auto& mapping : order) {
    if (reachable.size() >= theta) break;
    for (const auto* link : *mapping.links) {
      omega.push_back(*link);
      auto it = job_index.find(link->job_segment());
      if (it != job_index.end())
        reachable.insert(it->second.begin(), it->second.end());
    }
  }
  std::sort(omega.begin(), omega.end(),
            [](const ComplexLink& a, const ComplexLink& b) {
              return a.links < b.links;
            });
  return omega;
}

ServingGraph collapse_graph(
    const std::map<std::string, std::vector<ComplexLink>>& selected,
    const JobSegmentIndex& job_index) {
  ServingGraph graph;
  std::map<GraphNode, std::uint32_t> node_index;
  for (const auto& [seeker, links] : selected)
    for (const auto& link : links)
      node_index.emplace(GraphNode{link.seeker_segment(), link.job_segment()},
                         0);
  graph.nodes.reserve(node_index.size());
  for (auto& [node, idx] : node_index) {
    idx = static_cast<std::uint32_t>(graph.nodes.size());
    graph.nodes.push_back(node);
  }

  graph.node_jobs.resize(graph.nodes.size());
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    auto it = job_index.find(graph.nodes[i].job_segment);
    if (it != job_index.end()) graph.node_jobs[i] = it->second;
  }

  for (const auto& [seeker, links] : selected) {
    auto& ids = graph.seeker_nodes[seeker];
    for (const auto& link : links)
      ids.push_back(node_index.at(
          GraphNode{link.seeker_segment(), link.job_segment()}));
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  return graph;
}

IndexExport export_to_index(const ServingGraph& graph) {
  if (graph.nodes.size() >=
      static_cast<std::size_t>(std::numeric_limits<std::uint32_t>::max()))
    throw ValidationError("node attribute id space exhausted");
  IndexExport out;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto attr = static_cast<std::uint32_t>(i + 1);
    for (const auto& job : graph.node_jobs[i])
      out.job_attributes[job].push_back(attr);
  }
  for (auto& [job, attrs] : out.job_attributes) {
    std::sort(attrs.begin(), attrs.end());
    attrs.erase(std::unique(attrs.begin(), attrs.end()), attrs.end());
  }
  for (const auto& [seeker, nodes] : graph.seeker_nodes) {
    auto& attrs = out.seeker_attributes[seeker];
    attrs.reserve(nodes.size());
    for (auto n : nodes) attrs.push_back(n + 1);
  }
  return out;
}

}  // namespace hyre::links
