#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "hyre/link_learner.hpp"

using namespace hyre::links;
using hyre::ValidationError;

namespace {

const std::vector<LinkTemplate> kTitleSkill{{"title", "title"},
                                            {"skill", "skill"}};

TrainingPair pair_of(AttrMap seeker, AttrMap job, int label) {
  return TrainingPair{std::move(seeker), std::move(job), label};
}

MetaLink meta(std::string sa, std::string sv, std::string ja, std::string jv) {
  return MetaLink{std::move(sa), std::move(sv), std::move(ja), std::move(jv)};
}

ComplexLink single(MetaLink m, double quality = 0.0) {
  ComplexLink link;
  link.links = {std::move(m)};
  link.quality = quality;
  return link;
}

// Mean-logistic-loss gradient, computed independently of the fitter.
std::vector<double> logistic_gradient(
    const std::vector<std::vector<double>>& rows,
    const std::vector<int>& labels, const std::vector<double>& w) {
  const std::size_t n = rows.size(), p = w.size();
  std::vector<double> g(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < p; ++j) z += w[j] * rows[i][j];
    const double sigma = 1.0 / (1.0 + std::exp(-z));
    for (std::size_t j = 0; j < p; ++j)
      g[j] += (sigma - labels[i]) * rows[i][j];
  }
  for (auto& v : g) v /= static_cast<double>(n);
  return g;
}

double l1_objective(const std::vector<std::vector<double>>& rows,
                    const std::vector<int>& labels,
                    const std::vector<double>& w, double lambda) {
  double obj = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * rows[i][j];
    // log(1 + exp(-yz)) with y in {-1, +1}
    const double yz = (labels[i] == 1 ? z : -z);
    obj += std::log1p(std::exp(-yz));
  }
  obj /= static_cast<double>(rows.size());
  for (double v : w) obj += lambda * std::abs(v);
  return obj;
}

}  // namespace

TEST_CASE("meta links are the per-template cross product of values") {
  const auto pair = pair_of({{"title", {"a"}}, {"skill", {"x", "y"}}},
                            {{"title", {"b"}}, {"skill", {"x"}}}, 1);
  auto metas = enumerate_meta_links(pair, kTitleSkill);
  std::sort(metas.begin(), metas.end());
  const std::vector<MetaLink> expect{
      meta("skill", "x", "skill", "x"),
      meta("skill", "y", "skill", "x"),
      meta("title", "a", "title", "b"),
  };
  CHECK(metas == expect);
}

TEST_CASE("a missing attribute simply contributes nothing") {
  const auto pair =
      pair_of({{"title", {"a"}}}, {{"skill", {"x"}}}, 1);  // no overlap
  CHECK(enumerate_meta_links(pair, kTitleSkill).empty());

  const auto partial = pair_of({{"title", {"a"}}}, {{"title", {"b"}}}, 1);
  CHECK(enumerate_meta_links(partial, kTitleSkill).size() == 1);
}

TEST_CASE("complex links are all non-empty subsets") {
  const auto m1 = meta("title", "a", "title", "b");
  const auto m2 = meta("skill", "x", "skill", "x");

  CHECK(enumerate_complex_links({}).empty());
  CHECK(enumerate_complex_links({m1}).size() == 1);
  CHECK(enumerate_complex_links({m1, m2}).size() == 3);  // 2^2 - 1

  std::vector<MetaLink> four;
  for (int i = 0; i < 4; ++i)
    four.push_back(meta("skill", "s" + std::to_string(i), "skill", "t"));
  CHECK(enumerate_complex_links(four).size() == 15);  // 2^4 - 1

  // Duplicates collapse before counting.
  CHECK(enumerate_complex_links({m1, m1, m2}).size() == 3);

  // Member sets come out canonically sorted.
  for (const auto& link : enumerate_complex_links({m2, m1}))
    CHECK(std::is_sorted(link.links.begin(), link.links.end()));
}

TEST_CASE("subset enumeration refuses pathological pairs") {
  std::vector<MetaLink> many;
  for (int i = 0; i < 21; ++i)
    many.push_back(meta("skill", "s" + std::to_string(i), "skill", "t"));
  CHECK_THROWS_AS(enumerate_complex_links(many), ValidationError);

  // The cap is a parameter, not a constant: six links refuse a cap of five
  // but enumerate fine one notch up.
  std::vector<MetaLink> six(many.begin(), many.begin() + 6);
  CHECK_THROWS_AS(enumerate_complex_links(six, 5), ValidationError);
  CHECK(enumerate_complex_links(six, 6).size() == 63);
}

TEST_CASE("aggregation keeps well-supported candidates only") {
  const std::vector<LinkTemplate> t{{"t", "t"}};
  std::vector<TrainingPair> data;
  // A: four hires, no negatives -> kept.
  for (int i = 0; i < 4; ++i)
    data.push_back(pair_of({{"t", {"a1"}}}, {{"t", {"b1"}}}, 1));
  // B: two hires -> support below threshold.
  for (int i = 0; i < 2; ++i)
    data.push_back(pair_of({{"t", {"a2"}}}, {{"t", {"b2"}}}, 1));
  // C: three hires but four no-hires -> negatives overwhelm support.
  for (int i = 0; i < 3; ++i)
    data.push_back(pair_of({{"t", {"a3"}}}, {{"t", {"b3"}}}, 1));
  for (int i = 0; i < 4; ++i)
    data.push_back(pair_of({{"t", {"a3"}}}, {{"t", {"b3"}}}, 0));

  const auto kept = aggregate_and_prune(data, t);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].links == std::vector<MetaLink>{meta("t", "a1", "t", "b1")});
  CHECK(kept[0].support == 4);
  CHECK(kept[0].neg_count == 0);

  CHECK_THROWS_AS(aggregate_and_prune({}, t), ValidationError);
}

TEST_CASE("aggregation tallies match brute-force counts on random data") {
  const std::vector<LinkTemplate> templates{{"t", "t"}, {"s", "s"}};
  std::mt19937_64 rng(404);
  auto rand_attrs = [&](int universe) {
    AttrMap m;
    for (const char* name : {"t", "s"}) {
      std::vector<std::string> vals;
      const auto count = rng() % 3;  // 0..2 values per attribute
      for (std::uint64_t i = 0; i < count; ++i)
        vals.push_back(std::string(1, 'a' + static_cast<char>(rng() % universe)));
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      if (!vals.empty()) m[name] = vals;
    }
    return m;
  };

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<TrainingPair> data;
    for (int i = 0; i < 40; ++i)
      data.push_back(pair_of(rand_attrs(3), rand_attrs(3),
                             rng() % 3 != 0 ? 1 : 0));
    const auto kept = aggregate_and_prune(data, templates, 2);
    for (const auto& link : kept) {
      std::uint32_t support = 0, neg = 0;
      for (const auto& p : data)
        if (link_fires(link, p.seeker, p.job)) (p.label ? support : neg)++;
      CHECK(link.support == support);
      CHECK(link.neg_count == neg);
      CHECK(link.support >= 2);
      CHECK(link.neg_count <= link.support);
      CHECK(std::is_sorted(link.links.begin(), link.links.end()));
    }
  }
}

TEST_CASE("ratio quality is support over negatives plus one") {
  std::vector<ComplexLink> links(2);
  links[0].links = {meta("t", "a", "t", "b")};
  links[0].support = 10;
  links[0].neg_count = 0;
  links[1].links = {meta("t", "c", "t", "d")};
  links[1].support = 3;
  links[1].neg_count = 3;
  score_links_ratio(links);
  CHECK(links[0].quality == 10.0);
  CHECK(links[1].quality == 0.75);
}

TEST_CASE("l1 fit satisfies the subgradient optimality conditions") {
  std::mt19937_64 rng(555);
  auto coin = [&]() { return static_cast<double>(rng() % 2); };
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 60, p = 4;
    std::vector<std::vector<double>> rows(n, std::vector<double>(p));
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& x : rows[i]) x = coin();
      // Feature 0 drives the label, with some noise.
      labels[i] = (rows[i][0] > 0.5) == (rng() % 5 != 0) ? 1 : 0;
    }
    const double lambda = 0.02;
    const auto w = l1_logistic_fit(rows, labels, lambda);
    REQUIRE(w.size() == p);
    const auto g = logistic_gradient(rows, labels, w);
    for (std::size_t j = 0; j < p; ++j) {
      if (w[j] > 1e-9)
        CHECK(std::abs(g[j] + lambda) < 1e-4);
      else if (w[j] < -1e-9)
        CHECK(std::abs(g[j] - lambda) < 1e-4);
      else
        CHECK(std::abs(g[j]) <= lambda + 1e-4);
    }
  }
}

TEST_CASE("l1 fit beats a brute-force grid on the shared objective") {
  const std::vector<std::vector<double>> rows{
      {1, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 1}, {0, 0}, {1, 1}, {0, 0}};
  const std::vector<int> labels{1, 1, 1, 0, 0, 0, 1, 1};
  for (const double lambda : {0.0, 0.05, 0.3}) {
    const auto w = l1_logistic_fit(rows, labels, lambda);
    const double fitted = l1_objective(rows, labels, w, lambda);
    double best = 1e300;
    for (double a = -4.0; a <= 4.0; a += 0.05)
      for (double b = -4.0; b <= 4.0; b += 0.05)
        best = std::min(best, l1_objective(rows, labels, {a, b}, lambda));
    CHECK(fitted <= best + 1e-3);
  }
}

TEST_CASE("heavy regularization zeroes every weight") {
  const std::vector<std::vector<double>> rows{{1, 0}, {0, 1}, {1, 1}, {0, 0}};
  const std::vector<int> labels{1, 0, 1, 0};
  const auto w = l1_logistic_fit(rows, labels, 10.0);
  for (double v : w) CHECK(v == 0.0);
}

TEST_CASE("l1 fit validates its inputs") {
  CHECK_THROWS_AS(l1_logistic_fit({{1.0}}, {1}, -0.1), ValidationError);
  CHECK_THROWS_AS(l1_logistic_fit({{1.0, 2.0}, {1.0}}, {1, 0}, 0.1),
                  ValidationError);
}

TEST_CASE("l1 scoring keeps the predictive link and drops the spurious one") {
  std::vector<TrainingPair> data;
  for (int i = 0; i < 30; ++i) {
    const bool hire = i % 2 == 0;
    AttrMap seeker{{"t", {hire ? "good_s" : "bad_s"}}};
    AttrMap job{{"t", {hire ? "good_j" : "bad_j"}}};
    // A noisy attribute shared by both classes.
    seeker["s"] = {"noise"};
    job["s"] = {"noise"};
    data.push_back(pair_of(std::move(seeker), std::move(job), hire ? 1 : 0));
  }
  std::vector<ComplexLink> candidates{
      single(meta("t", "good_s", "t", "good_j")),
      single(meta("s", "noise", "s", "noise")),
      single(meta("t", "bad_s", "t", "bad_j")),
  };
  const auto kept = score_links_l1(candidates, data, 0.01);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].links[0] == meta("t", "good_s", "t", "good_j"));
  CHECK(kept[0].quality > 0.0);
}

TEST_CASE("link_fires requires every member on both sides") {
  ComplexLink link;
  link.links = {meta("t", "a", "t", "b"), meta("s", "x", "s", "y")};

  const AttrMap seeker{{"t", {"a", "z"}}, {"s", {"x"}}};
  const AttrMap job{{"t", {"b"}}, {"s", {"y", "w"}}};
  CHECK(link_fires(link, seeker, job));

  AttrMap missing_value = seeker;
  missing_value["s"] = {"other"};
  CHECK_FALSE(link_fires(link, missing_value, job));

  AttrMap missing_attr{{"t", {"a"}}};
  CHECK_FALSE(link_fires(link, missing_attr, job));
}

TEST_CASE("job segment index lists each segment's carriers") {
  const std::vector<std::pair<std::string, AttrMap>> jobs{
      {"j1", {{"t", {"b1"}}}},
      {"j2", {{"t", {"b1", "b2"}}}},
      {"j3", {{"t", {"b2"}}}},
  };
  const std::vector<ComplexLink> links{single(meta("t", "a", "t", "b1")),
                                       single(meta("t", "a", "t", "b2"))};
  const auto index = build_job_segment_index(jobs, links);
  REQUIRE(index.size() == 2);
  const Segment q1{{"t", "b1"}}, q2{{"t", "b2"}};
  CHECK(index.at(q1) == std::vector<std::string>{"j1", "j2"});
  CHECK(index.at(q2) == std::vector<std::string>{"j2", "j3"});
}

TEST_CASE("greedy selection stops once liquidity is reached") {
  // Two disjoint job pools of five jobs each, behind links of quality 0.9
  // and 0.5.
  std::vector<std::pair<std::string, AttrMap>> jobs;
  for (int i = 0; i < 5; ++i)
    jobs.push_back({"hi" + std::to_string(i), {{"t", {"b1"}}}});
  for (int i = 0; i < 5; ++i)
    jobs.push_back({"lo" + std::to_string(i), {{"t", {"b2"}}}});

  const auto high = single(meta("t", "a1", "t", "b1"), 0.9);
  const auto low = single(meta("t", "a2", "t", "b2"), 0.5);
  const std::vector<ComplexLink> scored{high, low};
  const auto job_index = build_job_segment_index(jobs, scored);

  const AttrMap seeker{{"t", {"a1", "a2"}}};

  SUBCASE("theta above the best pool pulls in the weaker link too") {
    const auto chosen = select_links_for_seeker(seeker, scored, 8, job_index);
    REQUIRE(chosen.size() == 2);
    CHECK((chosen[0] == high || chosen[1] == high));
    CHECK((chosen[0] == low || chosen[1] == low));
  }
  SUBCASE("theta within the best pool stops after it") {
    const auto chosen = select_links_for_seeker(seeker, scored, 3, job_index);
    REQUIRE(chosen.size() == 1);
    CHECK(chosen[0] == high);
  }
  SUBCASE("a seeker holding neither segment gets nothing") {
    const AttrMap stranger{{"t", {"zz"}}};
    CHECK(select_links_for_seeker(stranger, scored, 3, job_index).empty());
  }
}

TEST_CASE("mappings are ranked by average quality across their links") {
  // Segment {a1} carries two links of quality 0.2 and 0.4 (average 0.3);
  // segment {a2} carries one of 0.35. With theta reachable after one
  // mapping, the 0.35 mapping must win despite 0.4 being the best single
  // link.
  std::vector<std::pair<std::string, AttrMap>> jobs{
      {"x1", {{"t", {"b1"}}}},
      {"x2", {{"t", {"b2"}}}},
      {"x3", {{"t", {"b3"}}}},
  };
  auto l1 = single(meta("t", "a1", "t", "b1"), 0.2);
  auto l2 = single(meta("t", "a1", "t", "b2"), 0.4);
  auto l3 = single(meta("t", "a2", "t", "b3"), 0.35);
  const std::vector<ComplexLink> scored{l1, l2, l3};
  const auto job_index = build_job_segment_index(jobs, scored);
  const AttrMap seeker{{"t", {"a1", "a2"}}};

  const auto chosen = select_links_for_seeker(seeker, scored, 1, job_index);
  REQUIRE(chosen.size() == 1);
  CHECK(chosen[0] == l3);
}

TEST_CASE("collapse produces one node per segment pair") {
  std::vector<std::pair<std::string, AttrMap>> jobs{
      {"j1", {{"t", {"q1"}}}},
      {"j2", {{"t", {"q2"}}}},
  };
  auto to_q1 = single(meta("t", "p1", "t", "q1"), 0.8);
  auto to_q2 = single(meta("t", "p1", "t", "q2"), 0.6);
  const std::vector<ComplexLink> scored{to_q1, to_q2};
  const auto job_index = build_job_segment_index(jobs, scored);

  const std::map<std::string, std::vector<ComplexLink>> selected{
      {"seeker1", {to_q1, to_q2}}};
  const auto graph = collapse_graph(selected, job_index);

  REQUIRE(graph.nodes.size() == 2);
  const Segment p1{{"t", "p1"}}, q1{{"t", "q1"}}, q2{{"t", "q2"}};
  CHECK(graph.nodes[0] == GraphNode{p1, q1});
  CHECK(graph.nodes[1] == GraphNode{p1, q2});
  REQUIRE(graph.seeker_nodes.count("seeker1"));
  CHECK(graph.seeker_nodes.at("seeker1") ==
        std::vector<std::uint32_t>{0, 1});
  CHECK(graph.node_jobs[0] == std::vector<std::string>{"j1"});
  CHECK(graph.node_jobs[1] == std::vector<std::string>{"j2"});
}

TEST_CASE("export assigns node ids starting at one") {
  std::vector<std::pair<std::string, AttrMap>> jobs{
      {"j1", {{"t", {"q1"}}}},
      {"j2", {{"t", {"q2"}}}},
      {"j3", {{"t", {"q1"}}}},
  };
  auto to_q1 = single(meta("t", "p1", "t", "q1"), 0.8);
  auto to_q2 = single(meta("t", "p2", "t", "q2"), 0.6);
  const std::vector<ComplexLink> scored{to_q1, to_q2};
  const auto job_index = build_job_segment_index(jobs, scored);
  const std::map<std::string, std::vector<ComplexLink>> selected{
      {"s1", {to_q1}}, {"s2", {to_q1, to_q2}}};
  const auto graph = collapse_graph(selected, job_index);
  const auto exported = export_to_index(graph);

  REQUIRE(graph.nodes.size() == 2);
  // Node 0 = (p1, q1), node 1 = (p2, q2); ids are position + 1.
  CHECK(exported.seeker_attributes.at("s1") == std::vector<std::uint32_t>{1});
  CHECK(exported.seeker_attributes.at("s2") ==
        std::vector<std::uint32_t>{1, 2});
  CHECK(exported.job_attributes.at("j1") == std::vector<std::uint32_t>{1});
  CHECK(exported.job_attributes.at("j2") == std::vector<std::uint32_t>{2});
  CHECK(exported.job_attributes.at("j3") == std::vector<std::uint32_t>{1});

  // Reachability through the graph equals id intersection on the export.
  for (const auto& [seeker, node_ids] : graph.seeker_nodes) {
    std::set<std::string> reachable;
    for (auto n : node_ids)
      reachable.insert(graph.node_jobs[n].begin(), graph.node_jobs[n].end());
    std::set<std::string> via_ids;
    const auto& sids = exported.seeker_attributes.at(seeker);
    for (const auto& [job, jids] : exported.job_attributes)
      for (auto id : jids)
        if (std::find(sids.begin(), sids.end(), id) != sids.end())
          via_ids.insert(job);
    CHECK(via_ids == reachable);
  }
}
