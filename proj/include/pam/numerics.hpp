#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "pam/matrix.hpp"

namespace pam {

// ---------------------------------------------------------------------------
// GELU, exact Gaussian-CDF form: y = x * Phi(x).
// ---------------------------------------------------------------------------

inline double gauss_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)); }

inline double gauss_pdf(double x) { return std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2; }

inline double gelu_scalar(double x) { return x * gauss_cdf(x); }

inline Matrix gelu_forward(const Matrix& x) {
  Matrix y(x.rows, x.cols);
  parallel_for(x.rows, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      const double* xr = x.row(static_cast<int>(i));
      double* yr = y.row(static_cast<int>(i));
      for (int j = 0; j < x.cols; ++j) yr[j] = xr[j] * gauss_cdf(xr[j]);
    }
  });
  return y;
}

// dx = dy * (Phi(x) + x * phi(x))
inline Matrix gelu_backward(const Matrix& x, const Matrix& dy) {
  Matrix dx(x.rows, x.cols);
  parallel_for(x.rows, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      const double* xr = x.row(static_cast<int>(i));
      const double* dyr = dy.row(static_cast<int>(i));
      double* dxr = dx.row(static_cast<int>(i));
      for (int j = 0; j < x.cols; ++j) dxr[j] = dyr[j] * (gauss_cdf(xr[j]) + xr[j] * gauss_pdf(xr[j]));
    }
  });
  return dx;
}

// ---------------------------------------------------------------------------
// Layer normalisation over each row, with affine gain/bias.
// ---------------------------------------------------------------------------

inline constexpr double kLayerNormEpsilon = 1e-5;

struct LayerNormCache {
  Matrix normalized;             // (x - mean) / sqrt(var + eps), per row
  std::vector<double> inv_std;   // per row
};

inline Matrix layernorm_forward(const Matrix& x, const std::vector<double>& gain, const std::vector<double>& bias,
                                LayerNormCache* cache = nullptr) {
  Matrix y(x.rows, x.cols);
  if (cache) {
    cache->normalized = Matrix(x.rows, x.cols);
    cache->inv_std.assign(static_cast<std::size_t>(x.rows), 0.0);
  }
  const int n = x.cols;
  for (int i = 0; i < x.rows; ++i) {
    const double* xr = x.row(i);
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += xr[j];
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = xr[j] - mean;
      var += d * d;
    }
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    double* yr = y.row(i);
    for (int j = 0; j < n; ++j) {
      const double normalized = (xr[j] - mean) * inv_std;
      if (cache) cache->normalized(i, j) = normalized;
      yr[j] = gain[static_cast<std::size_t>(j)] * normalized + bias[static_cast<std::size_t>(j)];
    }
    if (cache) cache->inv_std[static_cast<std::size_t>(i)] = inv_std;
  }
  return y;
}

struct LayerNormGrads {
  Matrix dx;
  std::vector<double> dgain;
  std::vector<double> dbias;
};

inline LayerNormGrads layernorm_backward(const Matrix& dy, const std::vector<double>& gain,
                                         const LayerNormCache& cache) {
  const int rows = dy.rows;
  const int n = dy.cols;
  LayerNormGrads g;
  g.dx = Matrix(rows, n);
  g.dgain.assign(static_cast<std::size_t>(n), 0.0);
  g.dbias.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < rows; ++i) {
    const double* dyr = dy.row(i);
    const double* nr = cache.normalized.row(i);
    const double inv_std = cache.inv_std[static_cast<std::size_t>(i)];
    double sum_dg = 0.0;      // sum_j dy_j * gain_j
    double sum_dg_nr = 0.0;   // sum_j dy_j * gain_j * normalized_j
    for (int j = 0; j < n; ++j) {
      const double dg = dyr[j] * gain[static_cast<std::size_t>(j)];
      sum_dg += dg;
      sum_dg_nr += dg * nr[j];
      g.dgain[static_cast<std::size_t>(j)] += dyr[j] * nr[j];
      g.dbias[static_cast<std::size_t>(j)] += dyr[j];
    }
    double* dxr = g.dx.row(i);
    for (int j = 0; j < n; ++j) {
      const double dg = dyr[j] * gain[static_cast<std::size_t>(j)];
      dxr[j] = inv_std * (dg - sum_dg / n - nr[j] * sum_dg_nr / n);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// InfoNCE with in-batch negatives over cosine logits.
// ---------------------------------------------------------------------------

inline constexpr double kZeroNormFloor = 1e-12;

struct InfoNceResult {
  double loss = 0.0;
  Matrix d_predicted;
  Matrix d_targets;
  Matrix probabilities;  // softmax rows, kept for diagnostics
};

// Softmax cross-entropy where row i's positive is column i.
// Returns the mean row loss; writes dL/dlogits into dlogits.
inline double softmax_cross_entropy_in_batch(const Matrix& logits, Matrix& dlogits) {
  const int b = logits.rows;
  dlogits = Matrix(b, b);
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    const double* row = logits.row(i);
    double max_logit = row[0];
    for (int j = 1; j < b; ++j) max_logit = std::max(max_logit, row[j]);
    double denom = 0.0;
    for (int j = 0; j < b; ++j) denom += std::exp(row[j] - max_logit);
    const double log_denom = std::log(denom) + max_logit;
    loss += log_denom - row[i];
    double* drow = dlogits.row(i);
    for (int j = 0; j < b; ++j) drow[j] = std::exp(row[j] - log_denom) / b;
    drow[i] -= 1.0 / b;
  }
  return loss / b;
}

namespace detail {

inline Matrix normalize_rows_checked(const Matrix& m, std::vector<double>& norms, const char* role) {
  Matrix out(m.rows, m.cols);
  norms.assign(static_cast<std::size_t>(m.rows), 0.0);
  for (int i = 0; i < m.rows; ++i) {
    const double norm = l2_norm(m.row(i), m.cols);
    if (norm < kZeroNormFloor)
      throw NumericError(std::string("infonce: zero-norm ") + role + " vector at row " + std::to_string(i));
    norms[static_cast<std::size_t>(i)] = norm;
    const double* src = m.row(i);
    double* dst = out.row(i);
    for (int j = 0; j < m.cols; ++j) dst[j] = src[j] / norm;
  }
  return out;
}

// Given dL/d(unit row u_i) for each row, maps back through u = v / |v|:
// dL/dv_i = (dL/du_i - (u_i . dL/du_i) u_i) / |v_i|
inline Matrix denormalize_row_grads(const Matrix& d_unit, const Matrix& unit, const std::vector<double>& norms) {
  Matrix d(d_unit.rows, d_unit.cols);
  for (int i = 0; i < d_unit.rows; ++i) {
    const double* du = d_unit.row(i);
    const double* u = unit.row(i);
    const double proj = dot(u, du, d_unit.cols);
    double* dst = d.row(i);
    for (int j = 0; j < d_unit.cols; ++j) dst[j] = (du[j] - proj * u[j]) / norms[static_cast<std::size_t>(i)];
  }
  return d;
}

}  // namespace detail

// Logits s_ij = cosine(predicted_i, targets_j) / temperature; the positive
// for row i is column i. Gradients are returned for both inputs; callers
// training against a fixed embedding bank simply ignore d_targets.
inline InfoNceResult infonce_loss(const Matrix& predicted, const Matrix& targets, double temperature,
                                  bool want_target_grads = true) {
  if (predicted.rows != targets.rows || predicted.cols != targets.cols)
    throw NumericError("infonce: predicted/target shape mismatch");
  if (predicted.rows < 2) throw NumericError("infonce: batch size must be at least 2");
  if (!(temperature > 0.0)) throw NumericError("infonce: temperature must be positive");

  std::vector<double> pred_norms, target_norms;
  const Matrix pred_unit = detail::normalize_rows_checked(predicted, pred_norms, "predicted");
  const Matrix target_unit = detail::normalize_rows_checked(targets, target_norms, "target");

  Matrix logits = matmul(pred_unit, transpose(target_unit));
  for (double& v : logits.data) v /= temperature;

  InfoNceResult result;
  Matrix dlogits;
  result.loss = softmax_cross_entropy_in_batch(logits, dlogits);
  result.probabilities = Matrix(logits.rows, logits.cols);
  for (int i = 0; i < logits.rows; ++i) {
    double* p = result.probabilities.row(i);
    const double* dl = dlogits.row(i);
    for (int j = 0; j < logits.cols; ++j) p[j] = dl[j] * logits.rows + (i == j ? 1.0 : 0.0);
  }

  for (double& v : dlogits.data) v /= temperature;  // through s = cos / temperature
  const Matrix d_pred_unit = matmul(dlogits, target_unit);
  result.d_predicted = detail::denormalize_row_grads(d_pred_unit, pred_unit, pred_norms);
  if (want_target_grads) {
    const Matrix d_target_unit = matmul(transpose(dlogits), pred_unit);
    result.d_targets = detail::denormalize_row_grads(d_target_unit, target_unit, target_norms);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Adam with bias correction.
// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(std::size_t n_params = 0, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8)
      : first_moment(n_params, 0.0), second_moment(n_params, 0.0), beta1(b1), beta2(b2), epsilon(eps) {}
};

// One bias-corrected update over a flat parameter span. The caller advances
// state.step_count once per optimiser step (shared across parameter groups).
inline void adam_update(double* params, const double* grads, std::size_t n, AdamState& state, double lr) {
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    if (!std::isfinite(g))
      throw NumericError("adam: non-finite gradient at step " + std::to_string(state.step_count));
    state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
    state.second_moment[i] = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.first_moment[i] / bc1;
    const double v_hat = state.second_moment[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

inline void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw NumericError("adam: parameter/gradient shape mismatch");
  ++state.step_count;
  adam_update(params.data(), grads.data(), params.size(), state, lr);
}

// ---------------------------------------------------------------------------
// Learning-rate and temperature schedules.
// ---------------------------------------------------------------------------

struct ScheduleConfig {
  double lr_start = 5e-4;
  double lr_end = 1e-5;
  double temp_start = 0.15;
  double temp_end = 0.05;
  int total_epochs = 500;

  void validate() const {
    if (!(lr_start >= lr_end && lr_end > 0.0)) throw ConfigError("schedule: requires lr_start >= lr_end > 0");
    if (!(temp_start >= temp_end && temp_end > 0.0)) throw ConfigError("schedule: requires temp_start >= temp_end > 0");
    if (total_epochs <= 0) throw ConfigError("schedule: total_epochs must be positive");
  }
};

inline double cosine_lr(int epoch, const ScheduleConfig& s) {
  const double phase = std::numbers::pi * static_cast<double>(epoch) / s.total_epochs;
  return s.lr_end + 0.5 * (s.lr_start - s.lr_end) * (1.0 + std::cos(phase));
}

inline double anneal_temp(int epoch, const ScheduleConfig& s) {
  const double t = static_cast<double>(epoch) / s.total_epochs;
  return s.temp_start + (s.temp_end - s.temp_start) * t;
}

}  // namespace pam
