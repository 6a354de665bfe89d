#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hyre/common.hpp"
#include "hyre/corpus.hpp"

// Desk-scale two-tower contrastive trainer: feature-hashed shallow towers,
// softmax cross-entropy over in-batch + sampled easy negatives, and a second
// training stage on model-ranked hard negatives with a quadratic
// consolidation pull toward the stage-1 weights. All math is double
// precision so gradients can be checked against finite differences.
namespace hyre::tt {

struct ModelConfig {
  std::uint32_t hash_buckets = 1024;
  std::uint32_t embed_dim = 16;
  std::uint32_t out_dim = 16;
  std::uint64_t seed = 1;
};

struct TowerParams {
  Eigen::MatrixXd embed;  // hash_buckets x embed_dim
  Eigen::MatrixXd w;      // out_dim x embed_dim
  Eigen::VectorXd b;      // out_dim
};

struct TowerModel {
  ModelConfig config;
  TowerParams seeker;
  TowerParams job;
};

TowerModel init_model(const ModelConfig& config);

// mean(hashed embedding rows) -> affine -> tanh -> L2 normalize.
// Unit-norm output; throws on an empty token list or a zero-norm activation.
Eigen::VectorXd tower_forward(const TowerParams& params,
                              std::uint32_t hash_buckets,
                              const std::vector<std::string>& tokens);

struct PairExample {
  std::vector<std::string> seeker_tokens;
  std::vector<std::string> job_tokens;
};

// m seeker rows scored against d job columns; row i's positive column is
// recorded in `positives` (identity before negative mixing).
struct TrainingBatch {
  std::vector<std::vector<std::string>> seekers;
  std::vector<std::vector<std::string>> jobs;
  std::vector<std::uint32_t> positives;

  std::uint32_t m() const { return static_cast<std::uint32_t>(seekers.size()); }
  std::uint32_t d() const { return static_cast<std::uint32_t>(jobs.size()); }
};

TrainingBatch make_batch(std::span<const PairExample> pairs);

// Appends n/p uniformly sampled inventory jobs as extra columns, so
// d = m + n/p. Positives keep their column indices.
void mix_easy_negatives(TrainingBatch& batch,
                        const std::vector<std::vector<std::string>>& inventory,
                        std::uint32_t n, std::uint32_t p,
                        std::mt19937_64& rng);

// z[i][j] = cosine(seeker_i, job_j); entries stay within [-1, 1] up to
// floating-point rounding (no clamp, scores feed gradients).
Eigen::MatrixXd score_matrix(const TowerModel& model,
                             const TrainingBatch& batch);

struct SoftmaxResult {
  double loss = 0.0;
  Eigen::MatrixXd dz;
};

// Mean over rows of -log softmax(z_i)[positive_i], stabilized by
// max-subtraction; dz is the exact gradient (softmax - onehot) / numRows.
SoftmaxResult softmax_loss(const Eigen::MatrixXd& z,
                           std::span<const std::uint32_t> positives);

// Per row: the positive column plus the K-1 best-scoring other columns
// (ties broken toward the lower column index), kept in ascending original
// column order.
struct HardSelection {
  Eigen::MatrixXd z;                              // m x K
  std::vector<std::vector<std::uint32_t>> columns;  // original column ids
  std::vector<std::uint32_t> positives;           // positive slot per row
};

HardSelection hard_negative_filter(const Eigen::MatrixXd& z,
                                   std::span<const std::uint32_t> positives,
                                   std::uint32_t k);

struct TowerGrads {
  Eigen::MatrixXd embed;
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

struct ModelGrads {
  TowerGrads seeker;
  TowerGrads job;
};

struct LossEval {
  double loss = 0.0;
  ModelGrads grads;
};

// Forward + backward for one batch. hard_k engages the hard-negative filter;
// anchor adds consolidation * ||params - anchor||^2 (summed over all
// parameters) and its gradient. This is the exact objective train() descends,
// exposed so finite-difference checks can probe it directly.
LossEval batch_loss(const TowerModel& model, const TrainingBatch& batch,
                    std::optional<std::uint32_t> hard_k = std::nullopt,
                    double consolidation = 0.0,
                    const TowerModel* anchor = nullptr);

struct TrainConfig {
  std::uint32_t m = 8;    // positive pairs per batch
  std::uint32_t n = 16;   // easy negatives, spread over p batches
  std::uint32_t p = 4;
  std::uint32_t k = 4;    // stage-2 columns kept per row
  double learning_rate = 0.5;
  std::uint32_t stage1_steps = 200;
  std::uint32_t stage2_steps = 200;
  double consolidation = 0.01;  // pull toward stage-1 weights in stage 2
  double stage2_lr_scale = 0.1;
  std::uint32_t eval_interval = 50;
  std::uint64_t seed = 1;
};

struct MetricsRecord {
  std::uint32_t stage = 0;
  std::uint32_t step = 0;
  double loss = 0.0;
  double in_batch_recall = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& message, std::uint32_t stage,
                   std::uint32_t step)
      : std::runtime_error(message), stage(stage), step(step) {}
  std::uint32_t stage;
  std::uint32_t step;
};

struct TrainResult {
  TowerModel model;
  TowerModel stage1;  // checkpoint after the easy-negative stage
  std::vector<MetricsRecord> history;
};

TrainResult train(const TrainConfig& tc, const ModelConfig& mc,
                  const std::vector<PairExample>& data,
                  const std::vector<std::vector<std::string>>& inventory);

// mean over i of |R_i intersect A_i| / |A_i|; every A_i must be non-empty.
template <typename Id>
double recall_at_k(const std::vector<std::vector<Id>>& retrieved,
                   const std::vector<std::vector<Id>>& actual) {
  if (retrieved.size() != actual.size())
    throw ValidationError("retrieved/actual size mismatch");
  if (actual.empty()) throw ValidationError("no evaluation rows");
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const std::set<Id> a(actual[i].begin(), actual[i].end());
    if (a.empty())
      throw ValidationError("actual set " + std::to_string(i) + " is empty");
    const std::set<Id> r(retrieved[i].begin(), retrieved[i].end());
    std::size_t hit = 0;
    for (const Id& id : r) hit += a.count(id);
    sum += static_cast<double>(hit) / a.size();
  }
  return sum / actual.size();
}

// Fraction of rows whose positive lands in the row's top-k columns
// (ties toward the lower column index).
double in_batch_recall(const TowerModel& model, const TrainingBatch& batch,
                       std::uint32_t k);

// Retrieval recall through the search pipeline: match-all terms, quantized
// pre-selection off, seeker tower output as the query. `requests` pairs
// seeker tokens with the doc ids that count as actual.
double knn_recall(
    const TowerModel& model,
    const std::vector<std::pair<std::vector<std::string>,
                                std::vector<std::string>>>& requests,
    const FrozenIndex& index, std::uint32_t k);

}  // namespace hyre::tt
