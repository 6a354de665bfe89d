#include "hyre/cli_commands.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "json.hpp"

#include "hyre/dataio.hpp"
#include "hyre/link_learner.hpp"
#include "hyre/quantizer.hpp"

namespace hyre {

namespace {

using nlohmann::json;

int fail(std::ostream& out, const std::string& message) {
  out << json{{"error", message}}.dump() << "\n";
  return 1;
}

double now_ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

int run_build(const BuildArgs& args, std::ostream& out) {
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const IngestSchema schema = read_schema_json(args.schema_path);
    std::vector<DocumentInput> docs =
        read_documents_jsonl(args.ingest_path, schema);
    if (docs.empty()) throw ValidationError("no documents");

    // Storage width: widest document after per-clause de-duplication.
    std::uint32_t max_attr = 1;
    for (const auto& doc : docs) {
      std::size_t width = 0;
      for (const auto& clause : doc.clauses) {
        std::set<std::uint32_t> distinct(clause.begin(), clause.end());
        width += distinct.size();
      }
      max_attr = std::max(max_attr, static_cast<std::uint32_t>(width));
    }

    IndexBuilder builder(
        {static_cast<std::uint32_t>(schema.clause_names.size()), max_attr,
         schema.dim, schema.clause_names});
    for (auto& doc : docs) builder.add_document(std::move(doc));
    const FrozenIndex index =
        std::move(builder).freeze(make_codec(schema.dim, args.num_bits,
                                             args.seed));
    index.save(args.out_path);

    out << json{{"numDocs", index.num_docs()},
                {"bytes", std::filesystem::file_size(args.out_path)},
                {"buildMs", now_ms_since(t0)}}
               .dump()
        << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail(out, e.what());
  }
}

int run_links(const LinksArgs& args, std::ostream& out) {
  try {
    const auto pairs = read_labeled_pairs_jsonl(args.pairs_path);
    const auto templates = read_templates_json(args.templates_path);
    if (pairs.empty()) throw ValidationError("no training pairs");
    if (args.holdout_fraction < 0.0 || args.holdout_fraction >= 1.0)
      throw ValidationError("holdout fraction must be in [0, 1)");

    std::vector<std::uint32_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0u);
    std::mt19937_64 rng(args.seed);
    deterministic_shuffle(order, rng);
    const auto holdout_count = static_cast<std::size_t>(
        args.holdout_fraction * static_cast<double>(pairs.size()));
    std::vector<links::TrainingPair> train_pairs;
    std::vector<const LabeledPair*> holdout;
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i < holdout_count)
        holdout.push_back(&pairs[order[i]]);
      else
        train_pairs.push_back(pairs[order[i]].pair);
    }
    if (train_pairs.empty()) throw ValidationError("empty training split");

    std::vector<links::ComplexLink> scored =
        links::aggregate_and_prune(train_pairs, templates, args.min_support);
    if (args.use_l1) {
      scored = links::score_links_l1(std::move(scored), train_pairs,
                                     args.lambda);
    } else {
      links::score_links_ratio(scored);
    }

    // Entity universes come from the whole corpus; labels were only used
    // above, on the training split.
    std::vector<std::pair<std::string, links::AttrMap>> jobs;
    std::map<std::string, links::AttrMap> seekers;
    std::set<std::string> seen_jobs;
    for (const auto& lp : pairs) {
      if (seen_jobs.insert(lp.job_id).second)
        jobs.emplace_back(lp.job_id, lp.pair.job);
      seekers.emplace(lp.seeker_id, lp.pair.seeker);
    }

    const links::JobSegmentIndex job_index =
        links::build_job_segment_index(jobs, scored);
    std::map<std::string, std::vector<links::ComplexLink>> selected;
    for (const auto& [id, attrs] : seekers)
      selected[id] =
          links::select_links_for_seeker(attrs, scored, args.theta, job_index);

    const links::ServingGraph graph =
        links::collapse_graph(selected, job_index);
    const links::IndexExport exported = links::export_to_index(graph);
    write_links_export(args.out_path, graph, exported);

    std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
    for (const auto* lp : holdout) {
      bool predicted = false;
      auto it = selected.find(lp->seeker_id);
      if (it != selected.end())
        for (const auto& link : it->second)
          if (links::link_fires(link, lp->pair.seeker, lp->pair.job)) {
            predicted = true;
            break;
          }
      if (lp->pair.label == 1)
        (predicted ? tp : fn) += 1;
      else
        (predicted ? fp : tn) += 1;
    }
    const double recall =
        (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn)
                  : 0.0;
    const double fpr =
        (fp + tn) ? static_cast<double>(fp) / static_cast<double>(fp + tn)
                  : 0.0;

    out << json{{"links", scored.size()},
                {"nodes", graph.nodes.size()},
                {"seekers", seekers.size()},
                {"jobs", jobs.size()},
                {"holdoutPairs", holdout.size()},
                {"holdoutRecall", recall},
                {"holdoutFalsePositiveRate", fpr}}
               .dump()
        << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail(out, e.what());
  }
}

int run_train(const TrainArgs& args, std::ostream& out) {
  try {
    const auto data = read_pair_examples_jsonl(args.data_path);
    std::vector<std::vector<std::string>> inventory;
    inventory.reserve(data.size());
    for (const auto& pair : data) inventory.push_back(pair.job_tokens);

    const tt::TrainResult result =
        tt::train(args.train, args.model, data, inventory);
    save_model(args.model_out, result.model);
    if (!args.metrics_out.empty())
      write_metrics_jsonl(args.metrics_out, result.history);

    double stage1_recall = 0.0, final_loss = 0.0, final_recall = 0.0;
    for (const auto& rec : result.history) {
      if (rec.stage == 1) stage1_recall = rec.in_batch_recall;
      final_loss = rec.loss;
      final_recall = rec.in_batch_recall;
    }
    out << json{{"pairs", data.size()},
                {"finalLoss", final_loss},
                {"stage1InBatchRecall", stage1_recall},
                {"finalInBatchRecall", final_recall},
                {"records", result.history.size()}}
               .dump()
        << "\n";
    return 0;
  } catch (const tt::TrainingDiverged& e) {
    return fail(out, e.what());
  } catch (const std::exception& e) {
    return fail(out, e.what());
  }
}

int run_eval(const EvalArgs& args, std::ostream& out) {
  try {
    const tt::TowerModel model = load_model(args.model_path);
    const auto data = read_pair_examples_jsonl(args.data_path);
    if (data.empty()) throw ValidationError("no evaluation pairs");

    const tt::TrainingBatch batch = tt::make_batch(data);
    const std::uint32_t in_batch_k =
        std::min<std::uint32_t>(args.k, batch.d());
    const double in_batch = tt::in_batch_recall(model, batch, in_batch_k);

    // KNN side: index the distinct jobs under their tower embeddings, one
    // placeholder clause so the index accepts them.
    std::map<std::vector<std::string>, std::string> doc_of;
    IndexBuilder builder({1, 1, model.config.out_dim, {"all"}});
    for (const auto& pair : data) {
      if (doc_of.count(pair.job_tokens)) continue;
      const std::string id = "j" + std::to_string(doc_of.size());
      doc_of[pair.job_tokens] = id;
      const Eigen::VectorXd e = tt::tower_forward(
          model.job, model.config.hash_buckets, pair.job_tokens);
      builder.add_document({id, {{1}}, std::vector<float>(e.begin(), e.end())});
    }
    const FrozenIndex index =
        std::move(builder).freeze(make_codec(model.config.out_dim, 64, 1));

    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>
        requests;
    requests.reserve(data.size());
    for (const auto& pair : data)
      requests.push_back({pair.seeker_tokens, {doc_of.at(pair.job_tokens)}});
    const std::uint32_t knn_k = std::min<std::uint32_t>(args.k,
                                                        index.num_docs());
    const double knn = tt::knn_recall(model, requests, index, knn_k);

    out << json{{"pairs", data.size()},
                {"k", args.k},
                {"inBatchRecall", in_batch},
                {"knnRecall", knn}}
               .dump()
        << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail(out, e.what());
  }
}

int run_bench_cmd(const BenchConfig& config, std::ostream& out) {
  try {
    const std::vector<BenchRow> rows = run_bench(config);
    for (const auto& r : rows)
      out << json{{"batch", r.batch_size},
                  {"passRatePct", r.pass_rate_pct},
                  {"qps", r.qps},
                  {"meanMs", r.mean_ms},
                  {"p50Ms", r.p50_ms},
                  {"p95Ms", r.p95_ms},
                  {"p99Ms", r.p99_ms}}
                 .dump()
          << "\n";
    print_bench_table(rows, out);
    return 0;
  } catch (const std::exception& e) {
    return fail(out, e.what());
  }
}

int run_serve(const ServiceConfig& config, std::ostream& out) {
  try {
    FrozenIndex index = FrozenIndex::load(config.index_path);
    SearchService service(std::move(index), config);
    const int port = service.start();
    out << json{{"listening", port},
                {"numDocs", service.index().num_docs()},
                {"workers", config.workers},
                {"maxBatch", config.max_batch}}
               .dump()
        << "\n";
    service.wait();
    return 0;
  } catch (const std::exception& e) {
    return fail(out, e.what());
  }
}

}  // namespace hyre
