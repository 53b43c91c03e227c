#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ra/data.hpp"
#include "ra/types.hpp"

namespace ra::resnet {

/// Outer block nonlinearity: post-activation applies relu to h + F(h),
/// pre-activation leaves it as the identity so h_{i+1} - h_i = F(h_i)
/// holds exactly.
enum class Activation { kPre, kPost };

struct ModelConfig {
  Index input_dim = 0;
  Index width = 128;   // D
  Index blocks = 8;    // L
  Index classes = 2;   // C
  bool skip_enabled = true;
  Activation activation = Activation::kPost;
  double stochastic_depth_p = 0.0;
  double weight_decay = 5e-2;
  std::uint64_t seed = 0;
};

struct BlockParams {
  Matrix wa;  // D x D
  Vector ba;
  Matrix wb;  // D x D
  Vector bb;
};

struct ModelParams {
  Matrix w0;  // D x input_dim
  Vector b0;
  std::vector<BlockParams> blocks;
  Matrix wc;  // C x D
  Vector bc;

  double squared_norm() const;
};

/// Single-input forward capture: h[0] = h_1 through h[L] = h_{L+1}, the
/// logits, and the relu-derivative masks needed to rebuild Jacobians.
struct ForwardTrace {
  std::vector<Vector> h;
  Vector logits;
  Vector input_mask;               // relu'(w0 x + b0)
  std::vector<Vector> inner_mask;  // relu'(wa h_i + ba) per block
  std::vector<Vector> outer_mask;  // relu'(h_i + gate F) per block, post style only
};

struct TrainConfig {
  int epochs = 100;
  Index batch_size = 128;
  double lr0 = 0.1;
  double momentum = 0.0;  // plain SGD by default
  double weight_decay = 5e-2;
  double stochastic_depth_p = 0.0;
  std::uint64_t seed = 0;
};

struct EpochStats {
  double loss = 0.0;      // mean total batch loss (data + decay)
  double accuracy = 0.0;  // full training-split accuracy, evaluation mode
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> history;
};

void validate(const ModelConfig& cfg);

/// He-initialized weights (std sqrt(2 / fan_in)) with the closing layer of
/// each residual branch damped by 1/sqrt(2 blocks); zero biases;
/// bit-deterministic per cfg.seed.
ModelParams init_model(const ModelConfig& cfg);

/// Evaluation-mode forward pass for one input; residual branches are scaled
/// by (1 - stochastic_depth_p) when stochastic depth is configured.
ForwardTrace forward(const ModelParams& params, const ModelConfig& cfg,
                     const Vector& x);

/// Mean softmax cross-entropy plus (weight_decay / 2) * ||params||^2, with
/// analytic gradients for every parameter. All residual branches are active
/// (training-mode with no drops); `train` samples its own drop gates.
std::pair<double, ModelParams> loss_and_grads(const ModelParams& params,
                                              const ModelConfig& cfg,
                                              const Matrix& batch_inputs,
                                              const std::vector<int>& batch_labels);

/// lr = 0.5 * lr0 * (1 + cos(pi * step / total)).
double cosine_lr(Index step, Index total, double lr0);

/// SGD with per-step cosine schedule, seeded shuffling, and optional
/// per-batch stochastic depth. tcfg.weight_decay and
/// tcfg.stochastic_depth_p take precedence over the ModelConfig copies.
TrainResult train(const ModelConfig& cfg, const TrainConfig& tcfg,
                  const data::LabeledDataset& ds);

/// Analytic derivative of residual block i (1-based) with respect to its
/// input, excluding the skip connection:
///   gate * [post: diag(relu'(h_i + gate F))] wb diag(relu'(wa h_i + ba)) wa
/// where gate is the evaluation-mode branch scale.
Matrix residual_jacobian(const ModelParams& params, const ModelConfig& cfg,
                         const Vector& x, Index block_index);

/// Evaluation-mode accuracy over a dataset.
double evaluate_accuracy(const ModelParams& params, const ModelConfig& cfg,
                         const data::LabeledDataset& ds);

/// Binary checkpoint ("RACP", version 1, little-endian); the round trip is
/// bit-exact.
void save_checkpoint(const ModelParams& params, const ModelConfig& cfg,
                     const std::string& path);
std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path);

}  // namespace ra::resnet
