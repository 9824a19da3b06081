#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pam/training.hpp"

namespace pam {

// ---------------------------------------------------------------------------
// Residual MLP predictor. For n_layers = 4 (the reference architecture):
//   h1 = GELU(W1 x + b1)
//   h2 = h1 + GELU(W2 h1 + b2)
//   h3 = h2 + GELU(W3 h2 + b3)
//   z  = LayerNorm(W4 h3 + b4)
// The middle n_layers - 2 layers always carry the residual connections.
// ---------------------------------------------------------------------------

struct MlpParams {
  int in_dim = 0;
  int hidden_dim = 0;
  int out_dim = 0;
  int n_layers = 4;
  std::vector<Matrix> weights;               // weights[l]: fan_in x fan_out
  std::vector<std::vector<double>> biases;   // biases[l]: fan_out
  std::vector<double> ln_gain;
  std::vector<double> ln_bias;

  long long param_count() const {
    long long count = 0;
    for (const Matrix& w : weights) count += static_cast<long long>(w.size());
    for (const auto& b : biases) count += static_cast<long long>(b.size());
    count += static_cast<long long>(ln_gain.size() + ln_bias.size());
    return count;
  }

  bool all_finite() const {
    for (const Matrix& w : weights)
      if (!w.all_finite()) return false;
    for (const auto& b : biases)
      for (double v : b)
        if (!std::isfinite(v)) return false;
    for (double v : ln_gain)
      if (!std::isfinite(v)) return false;
    for (double v : ln_bias)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// Glorot-uniform weights, zero biases, unit layernorm gain. One RNG
// substream per layer under `seed`.
inline MlpParams init_params(int in_dim, int hidden_dim, int out_dim, int n_layers, std::uint64_t seed) {
  if (in_dim <= 0 || hidden_dim <= 0 || out_dim <= 0) throw ConfigError("init_params: dims must be positive");
  if (n_layers < 3) throw ConfigError("init_params: n_layers must be at least 3");
  MlpParams params;
  params.in_dim = in_dim;
  params.hidden_dim = hidden_dim;
  params.out_dim = out_dim;
  params.n_layers = n_layers;
  for (int l = 0; l < n_layers; ++l) {
    const int fan_in = l == 0 ? in_dim : hidden_dim;
    const int fan_out = l == n_layers - 1 ? out_dim : hidden_dim;
    Matrix w(fan_in, fan_out);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng(seed, static_cast<std::uint64_t>(l));
    for (double& v : w.data) v = rng.uniform(-limit, limit);
    params.weights.push_back(std::move(w));
    params.biases.emplace_back(static_cast<std::size_t>(fan_out), 0.0);
  }
  params.ln_gain.assign(static_cast<std::size_t>(out_dim), 1.0);
  params.ln_bias.assign(static_cast<std::size_t>(out_dim), 0.0);
  return params;
}

inline MlpParams init_params(int embed_dim, int hidden_dim, std::uint64_t seed) {
  return init_params(embed_dim, hidden_dim, embed_dim, 4, seed);
}

struct MlpWorkspace {
  std::vector<Matrix> pre;     // pre-activations, one per layer
  std::vector<Matrix> phi;     // Phi(pre) cache for the GELU layers
  std::vector<Matrix> hidden;  // h_0 .. h_{n_layers-2}
  Matrix input;
  LayerNormCache ln;
};

namespace mlp_detail {

// y = pre .* Phi(pre), storing Phi for the backward pass
inline Matrix gelu_cached(const Matrix& pre, Matrix& phi) {
  phi = Matrix(pre.rows, pre.cols);
  Matrix y(pre.rows, pre.cols);
  parallel_for(pre.rows, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      const double* a = pre.row(static_cast<int>(i));
      double* f = phi.row(static_cast<int>(i));
      double* out = y.row(static_cast<int>(i));
      for (int j = 0; j < pre.cols; ++j) {
        f[j] = gauss_cdf(a[j]);
        out[j] = a[j] * f[j];
      }
    }
  });
  return y;
}

// dpre = dy .* (Phi(pre) + pre * pdf(pre))
inline Matrix gelu_grad_cached(const Matrix& dy, const Matrix& pre, const Matrix& phi) {
  Matrix dpre(pre.rows, pre.cols);
  parallel_for(pre.rows, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      const double* d = dy.row(static_cast<int>(i));
      const double* a = pre.row(static_cast<int>(i));
      const double* f = phi.row(static_cast<int>(i));
      double* out = dpre.row(static_cast<int>(i));
      for (int j = 0; j < pre.cols; ++j) out[j] = d[j] * (f[j] + a[j] * gauss_pdf(a[j]));
    }
  });
  return dpre;
}

}  // namespace mlp_detail

inline Matrix mlp_forward(const MlpParams& params, const Matrix& x, MlpWorkspace& ws) {
  if (x.cols != params.in_dim)
    throw NumericError("mlp_forward: input dim " + std::to_string(x.cols) + ", expected " +
                       std::to_string(params.in_dim));
  const int n = params.n_layers;
  ws.pre.assign(static_cast<std::size_t>(n), Matrix());
  ws.phi.assign(static_cast<std::size_t>(n - 1), Matrix());
  ws.hidden.assign(static_cast<std::size_t>(n - 1), Matrix());
  ws.input = x;

  Matrix h;
  for (int l = 0; l < n - 1; ++l) {
    const Matrix& layer_in = l == 0 ? x : ws.hidden[static_cast<std::size_t>(l - 1)];
    Matrix pre = matmul(layer_in, params.weights[static_cast<std::size_t>(l)]);
    add_row_broadcast(pre, params.biases[static_cast<std::size_t>(l)]);
    ws.pre[static_cast<std::size_t>(l)] = std::move(pre);
    Matrix activated = mlp_detail::gelu_cached(ws.pre[static_cast<std::size_t>(l)], ws.phi[static_cast<std::size_t>(l)]);
    if (l == 0) {
      h = std::move(activated);
    } else {
      add_inplace(activated, h);  // residual
      h = std::move(activated);
    }
    ws.hidden[static_cast<std::size_t>(l)] = h;
  }
  Matrix pre_out = matmul(h, params.weights[static_cast<std::size_t>(n - 1)]);
  add_row_broadcast(pre_out, params.biases[static_cast<std::size_t>(n - 1)]);
  ws.pre[static_cast<std::size_t>(n - 1)] = std::move(pre_out);
  return layernorm_forward(ws.pre[static_cast<std::size_t>(n - 1)], params.ln_gain, params.ln_bias, &ws.ln);
}

// Batched convenience without reusable workspace.
inline Matrix forward(const MlpParams& params, const Matrix& x) {
  MlpWorkspace ws;
  return mlp_forward(params, x, ws);
}

inline std::vector<double> forward(const MlpParams& params, const std::vector<double>& x) {
  Matrix in(1, static_cast<int>(x.size()));
  std::copy(x.begin(), x.end(), in.row(0));
  const Matrix out = forward(params, in);
  return {out.data.begin(), out.data.end()};
}

struct MlpGrads {
  std::vector<Matrix> d_weights;
  std::vector<std::vector<double>> d_biases;
  std::vector<double> d_ln_gain;
  std::vector<double> d_ln_bias;
};

inline MlpGrads mlp_backward(const MlpParams& params, const MlpWorkspace& ws, const Matrix& d_out,
                             Matrix* d_input = nullptr) {
  const int n = params.n_layers;
  MlpGrads grads;
  grads.d_weights.assign(static_cast<std::size_t>(n), Matrix());
  grads.d_biases.assign(static_cast<std::size_t>(n), {});

  LayerNormGrads ln = layernorm_backward(d_out, params.ln_gain, ws.ln);
  grads.d_ln_gain = std::move(ln.dgain);
  grads.d_ln_bias = std::move(ln.dbias);

  // output layer
  const Matrix& last_hidden = ws.hidden[static_cast<std::size_t>(n - 2)];
  grads.d_weights[static_cast<std::size_t>(n - 1)] = matmul(transpose(last_hidden), ln.dx);
  grads.d_biases[static_cast<std::size_t>(n - 1)] = column_sums(ln.dx);
  Matrix dh = matmul(ln.dx, transpose(params.weights[static_cast<std::size_t>(n - 1)]));

  // residual middle layers
  for (int l = n - 2; l >= 1; --l) {
    const Matrix dpre = mlp_detail::gelu_grad_cached(dh, ws.pre[static_cast<std::size_t>(l)],
                                                     ws.phi[static_cast<std::size_t>(l)]);
    const Matrix& layer_in = ws.hidden[static_cast<std::size_t>(l - 1)];
    grads.d_weights[static_cast<std::size_t>(l)] = matmul(transpose(layer_in), dpre);
    grads.d_biases[static_cast<std::size_t>(l)] = column_sums(dpre);
    add_inplace(dh, matmul(dpre, transpose(params.weights[static_cast<std::size_t>(l)])));
  }

  // input layer (no residual)
  const Matrix dpre0 = mlp_detail::gelu_grad_cached(dh, ws.pre[0], ws.phi[0]);
  grads.d_weights[0] = matmul(transpose(ws.input), dpre0);
  grads.d_biases[0] = column_sums(dpre0);
  if (d_input) *d_input = matmul(dpre0, transpose(params.weights[0]));
  return grads;
}

// ---------------------------------------------------------------------------
// Adam over all parameter groups; every group's step counter advances once
// per optimiser step so bias correction stays in sync.
// ---------------------------------------------------------------------------

struct MlpAdam {
  std::vector<AdamState> weight_states;
  std::vector<AdamState> bias_states;
  AdamState gain_state;
  AdamState bias_out_state;

  explicit MlpAdam(const MlpParams& params)
      : gain_state(params.ln_gain.size()), bias_out_state(params.ln_bias.size()) {
    for (const Matrix& w : params.weights) weight_states.emplace_back(w.size());
    for (const auto& b : params.biases) bias_states.emplace_back(b.size());
  }

  void step(MlpParams& params, const MlpGrads& grads, double lr) {
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      auto& state = weight_states[l];
      ++state.step_count;
      adam_update(params.weights[l].data.data(), grads.d_weights[l].data.data(), params.weights[l].size(), state, lr);
    }
    for (std::size_t l = 0; l < params.biases.size(); ++l) {
      auto& state = bias_states[l];
      ++state.step_count;
      adam_update(params.biases[l].data(), grads.d_biases[l].data(), params.biases[l].size(), state, lr);
    }
    ++gain_state.step_count;
    adam_update(params.ln_gain.data(), grads.d_ln_gain.data(), params.ln_gain.size(), gain_state, lr);
    ++bias_out_state.step_count;
    adam_update(params.ln_bias.data(), grads.d_ln_bias.data(), params.ln_bias.size(), bias_out_state, lr);
  }
};

struct PredictorModel {
  MlpParams params;
  MlpAdam adam;
  MlpWorkspace workspace;

  explicit PredictorModel(MlpParams p) : params(std::move(p)), adam(params) {}

  double train_step(const Matrix& anchors, const Matrix& targets, double temperature, double lr) {
    const Matrix predicted = mlp_forward(params, anchors, workspace);
    InfoNceResult loss = infonce_loss(predicted, targets, temperature, /*want_target_grads=*/false);
    if (!std::isfinite(loss.loss)) return loss.loss;  // the loop aborts with epoch/batch context
    const MlpGrads grads = mlp_backward(params, workspace, loss.d_predicted);
    adam.step(params, grads, lr);
    return loss.loss;
  }
};

// Trains the predictor on temporal association pairs. Deterministic given
// config.init_seed / config.pair_seed.
inline std::pair<MlpParams, TrainReport> train(const World& world, const AssociationGraph& graph,
                                               const TrainConfig& config) {
  config.validate();
  PredictorModel model(
      init_params(world.config.embed_dim, config.hidden_dim, world.config.embed_dim, config.n_layers,
                  config.init_seed));
  TrainReport report = run_training(model, world, graph, config);
  report.model = "predictor";
  if (!model.params.all_finite()) throw NumericError("training produced non-finite parameters");
  return {std::move(model.params), std::move(report)};
}

inline std::vector<double> predict_point(const MlpParams& params, int state_id, const World& world) {
  if (state_id < 0 || state_id >= world.state_count())
    throw ConfigError("predict_point: unknown state id " + std::to_string(state_id));
  Matrix in(1, world.config.embed_dim);
  const double* e = world.embedding(state_id);
  std::copy(e, e + world.config.embed_dim, in.row(0));
  const Matrix out = forward(params, in);
  return {out.data.begin(), out.data.end()};
}

}  // namespace pam
