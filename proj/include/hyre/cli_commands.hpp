#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "hyre/bench.hpp"
#include "hyre/service.hpp"
#include "hyre/two_tower.hpp"

// Subcommand bodies, callable in-process (the CLI binary is a thin flag
// parser over these). Each prints a one-line JSON summary on success,
// a {"error": ...} line on failure, and returns a process exit code.
namespace hyre {

struct BuildArgs {
  std::string ingest_path;
  std::string schema_path;
  std::string out_path;
  std::uint32_t num_bits = 512;
  std::uint64_t seed = 7;
};
int run_build(const BuildArgs& args, std::ostream& out);

struct LinksArgs {
  std::string pairs_path;
  std::string templates_path;
  std::string out_path;  // serving-graph export JSON
  std::uint32_t min_support = 3;
  bool use_l1 = false;    // default scoring is the hire/no-hire ratio
  double lambda = 0.01;   // L1 strength when use_l1
  std::uint32_t theta = 10;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 7;
};
int run_links(const LinksArgs& args, std::ostream& out);

struct TrainArgs {
  std::string data_path;
  std::string model_out;
  std::string metrics_out;  // empty skips the metrics file
  tt::ModelConfig model;
  tt::TrainConfig train;
};
int run_train(const TrainArgs& args, std::ostream& out);

struct EvalArgs {
  std::string model_path;
  std::string data_path;
  std::uint32_t k = 10;
};
int run_eval(const EvalArgs& args, std::ostream& out);

int run_bench_cmd(const BenchConfig& config, std::ostream& out);

// Loads the index and serves until interrupted.
int run_serve(const ServiceConfig& config, std::ostream& out);

}  // namespace hyre
