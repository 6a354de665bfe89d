#include <iostream>

#include "CLI11.hpp"

#include "hyre/cli_commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"hybrid term + embedding retrieval toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read option defaults from an INI/TOML file");

  hyre::BuildArgs build_args;
  auto* build = app.add_subcommand("build", "build an index from JSONL");
  build->add_option("--ingest", build_args.ingest_path, "documents, one JSON per line")->required();
  build->add_option("--schema", build_args.schema_path, "clause/dim schema JSON")->required();
  build->add_option("--out", build_args.out_path, "output index file")->required();
  build->add_option("--num-bits", build_args.num_bits, "signature bits per document");
  build->add_option("--seed", build_args.seed, "codec seed");

  hyre::ServiceConfig serve_config;
  auto* serve = app.add_subcommand("serve", "serve /search over HTTP");
  serve->add_option("--index", serve_config.index_path, "index file")->required();
  serve->add_option("--host", serve_config.host, "listen address");
  serve->add_option("--port", serve_config.port, "listen port (0 = ephemeral)");
  serve->add_option("--max-batch", serve_config.max_batch, "largest accepted batch");
  serve->add_option("--workers", serve_config.workers, "executor pool size");
  serve->add_option("--default-k", serve_config.default_k, "k when a request omits it");

  hyre::LinksArgs links_args;
  auto* links = app.add_subcommand("links", "learn seeker<->job links");
  links->add_option("--pairs", links_args.pairs_path, "labeled pairs JSONL")->required();
  links->add_option("--templates", links_args.templates_path, "meta-link templates JSON")->required();
  links->add_option("--out", links_args.out_path, "serving-graph export path")->required();
  links->add_option("--min-support", links_args.min_support, "minimum hire count per link");
  links->add_flag("--l1", links_args.use_l1, "score by L1 logistic regression instead of the hire ratio");
  links->add_option("--lambda", links_args.lambda, "L1 strength");
  links->add_option("--theta", links_args.theta, "job liquidity target per seeker");
  links->add_option("--holdout", links_args.holdout_fraction, "held-out fraction for the report");
  links->add_option("--seed", links_args.seed, "split shuffle seed");

  hyre::TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train the two-tower model");
  train->add_option("--data", train_args.data_path, "pair examples JSONL")->required();
  train->add_option("--model-out", train_args.model_out, "model file")->required();
  train->add_option("--metrics-out", train_args.metrics_out, "metrics JSONL");
  train->add_option("--hash-buckets", train_args.model.hash_buckets, "embedding table rows");
  train->add_option("--embed-dim", train_args.model.embed_dim, "embedding width");
  train->add_option("--out-dim", train_args.model.out_dim, "tower output width");
  train->add_option("--model-seed", train_args.model.seed, "parameter init seed");
  train->add_option("--batch", train_args.train.m, "positive pairs per step");
  train->add_option("--easy-negatives", train_args.train.n, "easy negatives n");
  train->add_option("--easy-batches", train_args.train.p, "spread n over p batches");
  train->add_option("--hard-k", train_args.train.k, "columns kept in stage 2");
  train->add_option("--lr", train_args.train.learning_rate, "learning rate");
  train->add_option("--stage1-steps", train_args.train.stage1_steps, "stage-1 steps");
  train->add_option("--stage2-steps", train_args.train.stage2_steps, "stage-2 steps");
  train->add_option("--consolidation", train_args.train.consolidation, "pull toward stage-1 weights");
  train->add_option("--stage2-lr-scale", train_args.train.stage2_lr_scale, "stage-2 learning-rate factor");
  train->add_option("--eval-interval", train_args.train.eval_interval, "steps between metric records");
  train->add_option("--seed", train_args.train.seed, "batch sampling seed");

  hyre::EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "report recall@k for a model");
  eval->add_option("--model", eval_args.model_path, "model file")->required();
  eval->add_option("--data", eval_args.data_path, "pair examples JSONL")->required();
  eval->add_option("--k", eval_args.k, "retrieval depth");

  hyre::BenchConfig bench_config;
  auto* bench = app.add_subcommand("bench", "latency/QPS benchmark on a synthetic corpus");
  bench->add_option("--num-docs", bench_config.num_docs, "corpus size");
  bench->add_option("--dim", bench_config.dim, "embedding dim");
  bench->add_option("--k", bench_config.k, "results per query");
  bench->add_option("--num-bits", bench_config.num_bits, "signature bits");
  bench->add_option("--batch-sizes", bench_config.batch_sizes, "batch sizes to time");
  bench->add_option("--pass-rates", bench_config.pass_rates_pct, "term pass rates, percent");
  bench->add_option("--num-queries", bench_config.num_queries, "queries per cell");
  bench->add_option("--seed", bench_config.seed, "corpus/query seed");
  bench->add_flag("!--no-quant", bench_config.quant_enabled, "disable quantized pre-selection");

  CLI11_PARSE(app, argc, argv);

  if (build->parsed()) return hyre::run_build(build_args, std::cout);
  if (serve->parsed()) return hyre::run_serve(serve_config, std::cout);
  if (links->parsed()) return hyre::run_links(links_args, std::cout);
  if (train->parsed()) return hyre::run_train(train_args, std::cout);
  if (eval->parsed()) return hyre::run_eval(eval_args, std::cout);
  if (bench->parsed()) return hyre::run_bench_cmd(bench_config, std::cout);
  return 1;
}
