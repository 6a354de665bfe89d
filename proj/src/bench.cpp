#include "hyre/bench.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <ostream>
#include <random>

#include "hyre/pipeline.hpp"
#include "hyre/quantizer.hpp"

namespace hyre {

namespace {

std::vector<float> random_unit(std::uint32_t dim, std::mt19937_64& rng) {
  std::vector<float> v(dim);
  double norm_sq = 0.0;
  for (auto& x : v) {
    // (rng >> 11) / 2^53 is a uniform double in [0, 1).
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    x = static_cast<float>(2.0 * u - 1.0);
    norm_sq += static_cast<double>(x) * x;
  }
  if (norm_sq == 0.0) {
    v[0] = 1.0f;
    return v;
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (auto& x : v) x = static_cast<float>(x * inv);
  return v;
}

double percentile(std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto idx = static_cast<std::size_t>(q * (sorted.size() - 1));
  return sorted[idx];
}

}  // namespace

FrozenIndex make_bench_index(std::uint32_t num_docs, std::uint32_t dim,
                             std::uint32_t num_bits, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  IndexBuilder builder({1, 1, dim, {"tag"}});
  for (std::uint32_t i = 0; i < num_docs; ++i)
    builder.add_document(
        {"d" + std::to_string(i), {{1 + (i % 100)}}, random_unit(dim, rng)});
  return std::move(builder).freeze(make_codec(dim, num_bits, seed));
}

std::vector<BenchRow> run_bench(const BenchConfig& config, std::ostream* log) {
  if (config.num_docs < 1 || config.dim < 1 || config.k < 1)
    throw ValidationError("numDocs, dim, k must be positive");
  if (config.num_queries < 1)
    throw ValidationError("numQueries must be positive");
  for (auto p : config.pass_rates_pct)
    if (p < 1 || p > 100)
      throw ValidationError("pass rates are percentages in [1, 100]");

  if (log) *log << "building corpus: " << config.num_docs << " docs, dim "
                << config.dim << "\n";
  const FrozenIndex index =
      make_bench_index(config.num_docs, config.dim, config.num_bits,
                       config.seed);

  std::uint32_t max_batch = 1;
  for (auto b : config.batch_sizes) max_batch = std::max(max_batch, b);
  Executor exec(index, max_batch);

  std::vector<BenchRow> rows;
  for (auto pass_rate : config.pass_rates_pct) {
    // Shared query set per pass rate so every batch size times the same work.
    std::mt19937_64 rng(config.seed + pass_rate);
    std::vector<std::uint32_t> ids(pass_rate);
    for (std::uint32_t i = 0; i < pass_rate; ++i) ids[i] = i + 1;
    std::vector<HybridQuery> queries(config.num_queries);
    for (auto& q : queries) {
      q.terms.clauses.push_back({0, ids});
      q.embedding = random_unit(config.dim, rng);
      q.k = config.k;
      q.options.quant_enabled = config.quant_enabled;
    }

    for (auto batch_size : config.batch_sizes) {
      if (batch_size < 1 || batch_size > max_batch)
        throw ValidationError("invalid batch size");
      std::vector<double> latencies;
      const auto cell_start = std::chrono::steady_clock::now();
      std::size_t done = 0;
      while (done < queries.size()) {
        const std::size_t take =
            std::min<std::size_t>(batch_size, queries.size() - done);
        const auto call_start = std::chrono::steady_clock::now();
        if (take == 1) {
          exec.execute(queries[done]);
        } else {
          BatchRequest batch;
          batch.queries.assign(queries.begin() + done,
                               queries.begin() + done + take);
          exec.execute_batch(batch);
        }
        latencies.push_back(std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - call_start)
                                .count());
        done += take;
      }
      const double total_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        cell_start)
              .count();

      std::sort(latencies.begin(), latencies.end());
      double sum = 0.0;
      for (double l : latencies) sum += l;
      BenchRow row;
      row.batch_size = batch_size;
      row.pass_rate_pct = pass_rate;
      row.qps = static_cast<double>(queries.size()) / total_s;
      row.mean_ms = sum / latencies.size();
      row.p50_ms = percentile(latencies, 0.50);
      row.p95_ms = percentile(latencies, 0.95);
      row.p99_ms = percentile(latencies, 0.99);
      rows.push_back(row);
      if (log) {
        print_bench_table({row}, *log);
      }
    }
  }
  return rows;
}

void print_bench_table(const std::vector<BenchRow>& rows, std::ostream& out) {
  for (const auto& r : rows) {
    out << "batch=" << std::setw(3) << r.batch_size
        << "  pass=" << std::setw(3) << r.pass_rate_pct << "%"
        << std::fixed << std::setprecision(2) << "  qps=" << std::setw(9)
        << r.qps << "  mean=" << std::setw(8) << r.mean_ms << "ms"
        << "  p50=" << std::setw(8) << r.p50_ms << "ms"
        << "  p95=" << std::setw(8) << r.p95_ms << "ms"
        << "  p99=" << std::setw(8) << r.p99_ms << "ms\n";
    out.unsetf(std::ios::fixed);
  }
}

}  // namespace hyre
