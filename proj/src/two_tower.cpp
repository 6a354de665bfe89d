#include "hyre/two_tower.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hyre/pipeline.hpp"

namespace hyre::tt {

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
}

std::uint64_t bucket_of(const std::string& token, std::uint32_t buckets) {
  return fnv1a64(token.data(), token.size()) % buckets;
}

// Per-example activations cached by the forward pass for backprop.
struct TowerCache {
  std::vector<std::vector<std::uint64_t>> buckets;
  Eigen::MatrixXd e;    // mean embeddings
  Eigen::MatrixXd h;    // tanh activations
  Eigen::VectorXd hn;   // activation norms
  Eigen::MatrixXd out;  // unit outputs
};

TowerCache forward_all(const TowerParams& params, std::uint32_t hash_buckets,
                       const std::vector<std::vector<std::string>>& tokens) {
  const auto n = static_cast<Eigen::Index>(tokens.size());
  const Eigen::Index embed_dim = params.embed.cols();
  const Eigen::Index out_dim = params.w.rows();
  TowerCache c;
  c.buckets.resize(tokens.size());
  c.e.resize(n, embed_dim);
  c.h.resize(n, out_dim);
  c.hn.resize(n);
  c.out.resize(n, out_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& toks = tokens[i];
    if (toks.empty()) throw ValidationError("example has no feature tokens");
    auto& ids = c.buckets[i];
    ids.reserve(toks.size());
    Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(embed_dim);
    for (const auto& t : toks) {
      ids.push_back(bucket_of(t, hash_buckets));
      e += params.embed.row(static_cast<Eigen::Index>(ids.back()));
    }
    e /= static_cast<double>(toks.size());
    c.e.row(i) = e;
    const Eigen::VectorXd a = params.w * e.transpose() + params.b;
    const Eigen::VectorXd h = a.array().tanh();
    const double norm = h.norm();
    if (norm == 0.0)
      throw std::domain_error("tower activation has zero norm");
    c.h.row(i) = h;
    c.hn(i) = norm;
    c.out.row(i) = h / norm;
  }
  return c;
}

void backward_all(const TowerParams& params, const TowerCache& c,
                  const Eigen::MatrixXd& dout, TowerGrads& g) {
  for (Eigen::Index i = 0; i < dout.rows(); ++i) {
    const Eigen::VectorXd o = c.out.row(i);
    const Eigen::VectorXd d = dout.row(i);
    // Through the normalization: project out the radial component.
    const Eigen::VectorXd dh = (d - o.dot(d) * o) / c.hn(i);
    const Eigen::VectorXd da =
        dh.array() * (1.0 - c.h.row(i).array().square()).transpose();
    g.w.noalias() += da * c.e.row(i);
    g.b += da;
    const Eigen::VectorXd de = params.w.transpose() * da;
    const double scale = 1.0 / static_cast<double>(c.buckets[i].size());
    for (auto id : c.buckets[i])
      g.embed.row(static_cast<Eigen::Index>(id)) += de.transpose() * scale;
  }
}

TowerGrads zero_grads(const TowerParams& params) {
  return {Eigen::MatrixXd::Zero(params.embed.rows(), params.embed.cols()),
          Eigen::MatrixXd::Zero(params.w.rows(), params.w.cols()),
          Eigen::VectorXd::Zero(params.b.size())};
}

// consolidation * ||params - anchor||^2 plus its gradient, one tower.
double consolidate(const TowerParams& params, const TowerParams& anchor,
                   double strength, TowerGrads& g) {
  const Eigen::MatrixXd de = params.embed - anchor.embed;
  const Eigen::MatrixXd dw = params.w - anchor.w;
  const Eigen::VectorXd db = params.b - anchor.b;
  g.embed += 2.0 * strength * de;
  g.w += 2.0 * strength * dw;
  g.b += 2.0 * strength * db;
  return strength *
         (de.squaredNorm() + dw.squaredNorm() + db.squaredNorm());
}

void apply_sgd(TowerParams& params, const TowerGrads& g, double lr) {
  params.embed -= lr * g.embed;
  params.w -= lr * g.w;
  params.b -= lr * g.b;
}

void validate_config(const TrainConfig& tc) {
  if (tc.m < 2) throw ValidationError("batch size m must be >= 2");
  if (tc.p < 1) throw ValidationError("p must be >= 1");
  if (tc.n % tc.p != 0) throw ValidationError("n must be divisible by p");
  const std::uint32_t d = tc.m + tc.n / tc.p;
  if (tc.k < 1 || tc.k >= d)
    throw ValidationError("k must satisfy 1 <= k < d = m + n/p");
  if (tc.learning_rate <= 0.0) throw ValidationError("learning rate must be positive");
  if (tc.eval_interval < 1) throw ValidationError("eval interval must be >= 1");
  if (tc.consolidation < 0.0) throw ValidationError("consolidation must be non-negative");
}

}  // namespace

TowerModel init_model(const ModelConfig& config) {
  if (config.hash_buckets < 1 || config.embed_dim < 1 || config.out_dim < 1)
    throw ValidationError("model dimensions must be positive");
  std::mt19937_64 rng(config.seed);
  auto fill = [&](Eigen::Index rows, Eigen::Index cols, double radius) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        m(r, c) = (unit_uniform(rng) - 0.5) * 2.0 * radius;
    return m;
  };
  const double w_radius = 1.0 / std::sqrt(static_cast<double>(config.embed_dim));
  auto make_tower = [&] {
    TowerParams p;
    p.embed = fill(config.hash_buckets, config.embed_dim, 1.0);
    p.w = fill(config.out_dim, config.embed_dim, w_radius);
    p.b = fill(config.out_dim, 1, 0.1);
    return p;
  };
  TowerModel model;
  model.config = config;
  model.seeker = make_tower();
  model.job = make_tower();
  return model;
}

Eigen::VectorXd tower_forward(const TowerParams& params,
                              std::uint32_t hash_buckets,
                              const std::vector<std::string>& tokens) {
  const TowerCache c = forward_all(params, hash_buckets, {tokens});
  return c.out.row(0);
}

TrainingBatch make_batch(std::span<const PairExample> pairs) {
  TrainingBatch batch;
  batch.seekers.reserve(pairs.size());
  batch.jobs.reserve(pairs.size());
  batch.positives.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    batch.seekers.push_back(pairs[i].seeker_tokens);
    batch.jobs.push_back(pairs[i].job_tokens);
    batch.positives.push_back(static_cast<std::uint32_t>(i));
  }
  return batch;
}

void mix_easy_negatives(TrainingBatch& batch,
                        const std::vector<std::vector<std::string>>& inventory,
                        std::uint32_t n, std::uint32_t p,
                        std::mt19937_64& rng) {
  if (p < 1) throw ValidationError("p must be >= 1");
  if (n % p != 0) throw ValidationError("n must be divisible by p");
  const std::uint32_t extra = n / p;
  if (extra == 0) return;
  if (inventory.size() < extra)
    throw ValidationError("inventory smaller than n/p");
  for (std::uint32_t i = 0; i < extra; ++i)
    batch.jobs.push_back(inventory[rng() % inventory.size()]);
}

Eigen::MatrixXd score_matrix(const TowerModel& model,
                             const TrainingBatch& batch) {
  const TowerCache sc =
      forward_all(model.seeker, model.config.hash_buckets, batch.seekers);
  const TowerCache jc =
      forward_all(model.job, model.config.hash_buckets, batch.jobs);
  return sc.out * jc.out.transpose();
}

SoftmaxResult softmax_loss(const Eigen::MatrixXd& z,
                           std::span<const std::uint32_t> positives) {
  const Eigen::Index m = z.rows();
  const Eigen::Index d = z.cols();
  if (static_cast<Eigen::Index>(positives.size()) != m)
    throw ValidationError("one positive column per row required");
  if (!z.allFinite()) throw ValidationError("score matrix is not finite");
  SoftmaxResult result;
  result.dz.resize(m, d);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (static_cast<Eigen::Index>(positives[i]) >= d)
      throw ValidationError("positive column out of range");
    const Eigen::VectorXd row = z.row(i).transpose();
    const double zmax = row.maxCoeff();
    const Eigen::ArrayXd ex = (row.array() - zmax).exp();
    const double denom = ex.sum();
    result.loss += -(row(positives[i]) - zmax - std::log(denom));
    result.dz.row(i) = (ex / denom).matrix().transpose();
    result.dz(i, positives[i]) -= 1.0;
  }
  result.loss /= static_cast<double>(m);
  result.dz /= static_cast<double>(m);
  return result;
}

HardSelection hard_negative_filter(const Eigen::MatrixXd& z,
                                   std::span<const std::uint32_t> positives,
                                   std::uint32_t k) {
  const Eigen::Index m = z.rows();
  const Eigen::Index d = z.cols();
  if (k < 1) throw ValidationError("k must be >= 1");
  if (static_cast<Eigen::Index>(k) > d)
    throw ValidationError("k exceeds column count");
  if (static_cast<Eigen::Index>(positives.size()) != m)
    throw ValidationError("one positive column per row required");

  HardSelection sel;
  sel.z.resize(m, k);
  sel.columns.resize(m);
  sel.positives.resize(m);
  const auto num_cols = static_cast<std::uint32_t>(d);
  std::vector<std::uint32_t> order;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (positives[i] >= num_cols)
      throw ValidationError("positive column out of range");
    order.clear();
    for (std::uint32_t c = 0; c < num_cols; ++c)
      if (c != positives[i]) order.push_back(c);
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t a, std::uint32_t b) {
                if (z(i, a) != z(i, b)) return z(i, a) > z(i, b);
                return a < b;
              });
    auto& cols = sel.columns[i];
    cols.assign(order.begin(), order.begin() + (k - 1));
    cols.push_back(positives[i]);
    std::sort(cols.begin(), cols.end());
    for (std::uint32_t slot = 0; slot < k; ++slot) {
      sel.z(i, slot) = z(i, cols[slot]);
      if (cols[slot] == positives[i]) sel.positives[i] = slot;
    }
  }
  return sel;
}

LossEval batch_loss(const TowerModel& model, const TrainingBatch& batch,
                    std::optional<std::uint32_t> hard_k, double consolidation,
                    const TowerModel* anchor) {
  const TowerCache sc =
      forward_all(model.seeker, model.config.hash_buckets, batch.seekers);
  const TowerCache jc =
      forward_all(model.job, model.config.hash_buckets, batch.jobs);
  const Eigen::MatrixXd z = sc.out * jc.out.transpose();

  LossEval eval;
  Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(z.rows(), z.cols());
  if (hard_k) {
    const HardSelection sel = hard_negative_filter(z, batch.positives, *hard_k);
    const SoftmaxResult sm = softmax_loss(sel.z, sel.positives);
    eval.loss = sm.loss;
    for (Eigen::Index i = 0; i < sm.dz.rows(); ++i)
      for (Eigen::Index slot = 0; slot < sm.dz.cols(); ++slot)
        dz(i, sel.columns[i][static_cast<std::size_t>(slot)]) = sm.dz(i, slot);
  } else {
    SoftmaxResult sm = softmax_loss(z, batch.positives);
    eval.loss = sm.loss;
    dz = std::move(sm.dz);
  }

  eval.grads.seeker = zero_grads(model.seeker);
  eval.grads.job = zero_grads(model.job);
  const Eigen::MatrixXd ds = dz * jc.out;
  const Eigen::MatrixXd dj = dz.transpose() * sc.out;
  backward_all(model.seeker, sc, ds, eval.grads.seeker);
  backward_all(model.job, jc, dj, eval.grads.job);

  if (anchor && consolidation > 0.0) {
    eval.loss += consolidate(model.seeker, anchor->seeker, consolidation,
                             eval.grads.seeker);
    eval.loss +=
        consolidate(model.job, anchor->job, consolidation, eval.grads.job);
  }
  return eval;
}

TrainResult train(const TrainConfig& tc, const ModelConfig& mc,
                  const std::vector<PairExample>& data,
                  const std::vector<std::vector<std::string>>& inventory) {
  validate_config(tc);
  if (data.size() < tc.m)
    throw ValidationError("need at least m training pairs");

  TrainResult result;
  result.model = init_model(mc);
  std::mt19937_64 rng(tc.seed);
  std::vector<std::uint32_t> perm(data.size());
  std::iota(perm.begin(), perm.end(), 0u);

  const std::uint32_t eval_k = std::min<std::uint32_t>(10, tc.m + tc.n / tc.p);
  auto run_stage = [&](std::uint32_t stage, std::uint32_t steps, double lr,
                       const TowerModel* anchor) {
    for (std::uint32_t step = 1; step <= steps; ++step) {
      deterministic_shuffle(perm, rng);
      std::vector<PairExample> picked(tc.m);
      for (std::uint32_t i = 0; i < tc.m; ++i) picked[i] = data[perm[i]];
      TrainingBatch batch = make_batch(picked);
      mix_easy_negatives(batch, inventory, tc.n, tc.p, rng);

      const auto hard =
          stage == 2 ? std::optional<std::uint32_t>(tc.k) : std::nullopt;
      const LossEval eval = batch_loss(result.model, batch, hard,
                                       stage == 2 ? tc.consolidation : 0.0,
                                       anchor);
      if (!std::isfinite(eval.loss))
        throw TrainingDiverged("training diverged at stage " +
                                   std::to_string(stage) + " step " +
                                   std::to_string(step),
                               stage, step);
      apply_sgd(result.model.seeker, eval.grads.seeker, lr);
      apply_sgd(result.model.job, eval.grads.job, lr);

      if (step % tc.eval_interval == 0 || step == steps)
        result.history.push_back({stage, step, eval.loss,
                                  in_batch_recall(result.model, batch,
                                                  eval_k)});
    }
  };

  run_stage(1, tc.stage1_steps, tc.learning_rate, nullptr);
  result.stage1 = result.model;
  run_stage(2, tc.stage2_steps, tc.learning_rate * tc.stage2_lr_scale,
            &result.stage1);
  return result;
}

double in_batch_recall(const TowerModel& model, const TrainingBatch& batch,
                       std::uint32_t k) {
  if (k < 1 || k > batch.d())
    throw ValidationError("k must satisfy 1 <= k <= d");
  const Eigen::MatrixXd z = score_matrix(model, batch);
  std::vector<std::uint32_t> order(batch.d());
  double hits = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t a, std::uint32_t b) {
                if (z(i, a) != z(i, b)) return z(i, a) > z(i, b);
                return a < b;
              });
    for (std::uint32_t j = 0; j < k; ++j)
      if (order[j] == batch.positives[i]) {
        hits += 1.0;
        break;
      }
  }
  return hits / static_cast<double>(z.rows());
}

double knn_recall(
    const TowerModel& model,
    const std::vector<std::pair<std::vector<std::string>,
                                std::vector<std::string>>>& requests,
    const FrozenIndex& index, std::uint32_t k) {
  if (k < 1 || k > index.num_docs())
    throw ValidationError("k must satisfy 1 <= k <= numDocs");
  std::vector<std::vector<std::string>> retrieved, actual;
  retrieved.reserve(requests.size());
  actual.reserve(requests.size());
  Executor exec(index, 1);
  for (const auto& [tokens, target_ids] : requests) {
    const Eigen::VectorXd q =
        tower_forward(model.seeker, model.config.hash_buckets, tokens);
    HybridQuery query;
    query.embedding.emplace(q.begin(), q.end());
    query.k = k;
    query.options.quant_enabled = false;
    const TopKResult result = exec.execute(query);
    auto& r = retrieved.emplace_back();
    r.reserve(result.hits.size());
    for (const auto& hit : result.hits) r.push_back(hit.doc_id);
    actual.push_back(target_ids);
  }
  return recall_at_k(retrieved, actual);
}

}  // namespace hyre::tt
