#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string_view>

#include "lect/common.hpp"
#include "lect/rng.hpp"

namespace lect {

struct ModelConfig {
  std::size_t in_dim = 384;
  std::size_t proj_dim = 128;
  std::size_t hidden_dim = 64;
  std::size_t out_dim = 1;
  double dropout = 0.5;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Trainable tensors. Also used as the gradient container.
struct Weights {
  Matrix proj_w;  // in_dim x proj_dim
  Vector proj_b;
  Matrix conv1_w;  // proj_dim x hidden_dim
  Vector conv1_b;
  Matrix conv2_w;  // hidden_dim x out_dim
  Vector conv2_b;
  Vector bn_gamma;
  Vector bn_beta;

  /// Zero tensors shaped like `like`.
  static Weights zeros_like(const Weights& like);

  /// Visits every tensor as a flat column of coefficients, in a fixed order.
  void for_each(const std::function<void(std::string_view, Eigen::Map<Vector>)>& fn);
  void for_each(const std::function<void(std::string_view, Eigen::Map<const Vector>)>& fn) const;
};

struct ModelParams {
  ModelConfig config;
  Weights weights;
  Vector bn_running_mean;
  Vector bn_running_var;
  /// Bumped on every optimizer step; ties a ForwardTrace to the parameter
  /// state that produced it.
  std::uint64_t version = 0;
};

/// Glorot-uniform weights, zero biases, gamma = 1, beta = 0, running mean 0
/// and running variance 1.
ModelParams init_params(const ModelConfig& config);

enum class Mode { Train, Eval };

/// Everything backward() needs from one forward pass.
struct ForwardTrace {
  Mode mode = Mode::Eval;
  std::uint64_t params_version = 0;
  const Matrix* embeddings = nullptr;  // non-owning; must outlive backward()
  const SparseMatrix* adj = nullptr;    // non-owning
  Matrix projected;    // H' = H W_p + b_p
  Matrix normalized;   // BN input standardized (x_hat)
  Matrix bn_out;       // gamma * x_hat + beta (pre-ReLU)
  Matrix dropped;      // layer-1 output after ReLU and dropout
  Matrix dropout_scale;  // per-entry multiplier, 0 or 1/(1-p); empty if no dropout
  Vector batch_mean;
  Vector batch_var;    // biased
  Vector inv_std;
};

struct ForwardResult {
  Matrix logits;
  ForwardTrace trace;
};

/// Projector -> graph convolution -> BN -> ReLU -> dropout -> graph
/// convolution. Train mode uses batch statistics over every node and needs
/// an rng for the dropout mask; eval mode uses running statistics and no
/// dropout. The parameters are not modified.
ForwardResult forward(const ModelParams& params, const Matrix& embeddings,
                      const SparseMatrix& adj, Mode mode, Rng* rng = nullptr);

/// Exact reverse pass for a train-mode trace.
Weights backward(const ModelParams& params, const ForwardTrace& trace,
                 const Matrix& grad_logits);

/// Folds the trace's batch statistics into the running estimates
/// (running var uses the unbiased batch variance).
void update_running_stats(ModelParams& params, const ForwardTrace& trace);

struct AdamConfig {
  double lr = 0.001;
  double weight_decay = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Weights m;
  Weights v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const Weights& w);
};

/// One Adam update with bias correction; weight decay is added to the
/// gradient (coupled form). Running BN statistics are untouched.
void adam_step(ModelParams& params, const Weights& grads, AdamState& state,
               const AdamConfig& config = {});

struct Checkpoint {
  ModelParams params;
  AdamState optimizer;
  std::uint64_t epoch = 0;
  std::uint64_t rng_seed = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lect
