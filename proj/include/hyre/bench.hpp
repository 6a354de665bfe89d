#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "hyre/corpus.hpp"

// Synthetic retrieval benchmark: generated corpus with a controllable term
// pass rate, timed single and batched execution, QPS plus latency
// percentiles per cell.
namespace hyre {

struct BenchConfig {
  std::uint32_t num_docs = 200000;
  std::uint32_t dim = 64;
  std::uint32_t k = 100;
  std::uint32_t num_bits = 512;
  bool quant_enabled = true;
  std::vector<std::uint32_t> batch_sizes{1, 8};
  std::vector<std::uint32_t> pass_rates_pct{10, 33, 100};
  std::uint32_t num_queries = 64;  // per (batch size, pass rate) cell
  std::uint64_t seed = 42;
};

struct BenchRow {
  std::uint32_t batch_size = 0;
  std::uint32_t pass_rate_pct = 0;
  double qps = 0.0;      // queries per second across the cell
  double mean_ms = 0.0;  // per-call latency (a call executes one batch)
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;
};

// One clause; document i carries attribute 1 + (i % 100), so a query over
// ids {1..P} passes P% of the corpus through term matching. Embeddings are
// random unit vectors.
FrozenIndex make_bench_index(std::uint32_t num_docs, std::uint32_t dim,
                             std::uint32_t num_bits, std::uint64_t seed);

std::vector<BenchRow> run_bench(const BenchConfig& config,
                                std::ostream* log = nullptr);

void print_bench_table(const std::vector<BenchRow>& rows, std::ostream& out);

}  // namespace hyre
