#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pam/training.hpp"

namespace pam {

// ---------------------------------------------------------------------------
// Untrained cosine-similarity retrieval.
// ---------------------------------------------------------------------------

// Cosine similarity of the query against every memory row. Self-exclusion is
// a ranking-time concern, not a scoring one.
inline std::vector<double> cosine_scores(const std::vector<double>& query, const Matrix& memory) {
  if (static_cast<int>(query.size()) != memory.cols) throw NumericError("cosine_scores: dimension mismatch");
  const double query_norm = l2_norm(query.data(), memory.cols);
  if (query_norm < kZeroNormFloor) throw NumericError("cosine_scores: zero-norm query");
  std::vector<double> scores(static_cast<std::size_t>(memory.rows));
  for (int i = 0; i < memory.rows; ++i) {
    const double row_norm = l2_norm(memory.row(i), memory.cols);
    scores[static_cast<std::size_t>(i)] =
        row_norm < kZeroNormFloor ? 0.0 : dot(query.data(), memory.row(i), memory.cols) / (query_norm * row_norm);
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Learned bilinear compatibility s(x, y) = x^T W y, trained with the same
// harness and InfoNCE objective as the predictor.
// ---------------------------------------------------------------------------

struct BilinearParams {
  Matrix w;  // embed_dim x embed_dim
  std::uint64_t init_seed = 0;
};

// identity + N(0, 0.01) noise, so early training behaves like dot-product retrieval
inline BilinearParams init_bilinear(int embed_dim, std::uint64_t seed) {
  BilinearParams params;
  params.init_seed = seed;
  params.w = Matrix(embed_dim, embed_dim);
  Rng rng(seed, 0);
  for (int i = 0; i < embed_dim; ++i)
    for (int j = 0; j < embed_dim; ++j) params.w(i, j) = (i == j ? 1.0 : 0.0) + 0.01 * rng.next_gaussian();
  return params;
}

inline std::vector<double> bilinear_scores(const BilinearParams& params, const std::vector<double>& query,
                                           const Matrix& memory) {
  if (static_cast<int>(query.size()) != params.w.rows || memory.cols != params.w.cols)
    throw NumericError("bilinear_scores: dimension mismatch");
  // q^T W, then dot with each memory row
  std::vector<double> projected(static_cast<std::size_t>(params.w.cols), 0.0);
  for (int i = 0; i < params.w.rows; ++i) {
    const double q = query[static_cast<std::size_t>(i)];
    const double* wrow = params.w.row(i);
    for (int j = 0; j < params.w.cols; ++j) projected[static_cast<std::size_t>(j)] += q * wrow[j];
  }
  std::vector<double> scores(static_cast<std::size_t>(memory.rows));
  for (int i = 0; i < memory.rows; ++i)
    scores[static_cast<std::size_t>(i)] = dot(projected.data(), memory.row(i), memory.cols);
  return scores;
}

struct BilinearModel {
  BilinearParams params;
  AdamState adam;

  explicit BilinearModel(BilinearParams p) : params(std::move(p)), adam(params.w.size()) {}

  double train_step(const Matrix& anchors, const Matrix& targets, double temperature, double lr) {
    // logits s_ij = x_i^T W y_j / temperature
    const Matrix projected = matmul(anchors, params.w);
    Matrix logits = matmul(projected, transpose(targets));
    for (double& v : logits.data) v /= temperature;

    Matrix dlogits;
    const double loss = softmax_cross_entropy_in_batch(logits, dlogits);
    if (!std::isfinite(loss)) return loss;  // the loop aborts with epoch/batch context
    for (double& v : dlogits.data) v /= temperature;

    // dW = X^T (dlogits Y)
    const Matrix d_projected = matmul(dlogits, targets);
    const Matrix d_w = matmul(transpose(anchors), d_projected);
    ++adam.step_count;
    adam_update(params.w.data.data(), d_w.data.data(), params.w.size(), adam, lr);
    return loss;
  }
};

inline std::pair<BilinearParams, TrainReport> bilinear_train(const World& world, const AssociationGraph& graph,
                                                             const TrainConfig& config) {
  config.validate();
  BilinearModel model(init_bilinear(world.config.embed_dim, config.init_seed));
  TrainReport report = run_training(model, world, graph, config);
  report.model = "bilinear";
  if (!model.params.w.all_finite()) throw NumericError("bilinear training produced non-finite parameters");
  return {std::move(model.params), std::move(report)};
}

}  // namespace pam
