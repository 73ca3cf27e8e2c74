#include "lect/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace lect {

void ModelConfig::validate() const {
  if (in_dim < 1 || proj_dim < 1 || hidden_dim < 1 || out_dim < 1) {
    throw Error("model config: all dimensions must be >= 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("model config: dropout must lie in [0, 1)");
}

Weights Weights::zeros_like(const Weights& like) {
  return {Matrix::Zero(like.proj_w.rows(), like.proj_w.cols()),   Vector::Zero(like.proj_b.size()),
          Matrix::Zero(like.conv1_w.rows(), like.conv1_w.cols()), Vector::Zero(like.conv1_b.size()),
          Matrix::Zero(like.conv2_w.rows(), like.conv2_w.cols()), Vector::Zero(like.conv2_b.size()),
          Vector::Zero(like.bn_gamma.size()),                     Vector::Zero(like.bn_beta.size())};
}

namespace {
template <typename Fn>
void visit(Fn&& fn, auto& w) {
  fn("proj_w", w.proj_w);
  fn("proj_b", w.proj_b);
  fn("conv1_w", w.conv1_w);
  fn("conv1_b", w.conv1_b);
  fn("conv2_w", w.conv2_w);
  fn("conv2_b", w.conv2_b);
  fn("bn_gamma", w.bn_gamma);
  fn("bn_beta", w.bn_beta);
}
}  // namespace

void Weights::for_each(const std::function<void(std::string_view, Eigen::Map<Vector>)>& fn) {
  visit([&](std::string_view name, auto& t) { fn(name, Eigen::Map<Vector>(t.data(), t.size())); }, *this);
}

void Weights::for_each(const std::function<void(std::string_view, Eigen::Map<const Vector>)>& fn) const {
  visit([&](std::string_view name, const auto& t) { fn(name, Eigen::Map<const Vector>(t.data(), t.size())); },
        *this);
}

ModelParams init_params(const ModelConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, "init"));
  auto glorot = [&rng](std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-limit, limit);
    }
    return w;
  };
  const auto p = static_cast<Eigen::Index>(config.proj_dim);
  const auto h = static_cast<Eigen::Index>(config.hidden_dim);
  const auto o = static_cast<Eigen::Index>(config.out_dim);
  ModelParams params;
  params.config = config;
  params.weights.proj_w = glorot(config.in_dim, config.proj_dim);
  params.weights.proj_b = Vector::Zero(p);
  params.weights.conv1_w = glorot(config.proj_dim, config.hidden_dim);
  params.weights.conv1_b = Vector::Zero(h);
  params.weights.conv2_w = glorot(config.hidden_dim, config.out_dim);
  params.weights.conv2_b = Vector::Zero(o);
  params.weights.bn_gamma = Vector::Ones(h);
  params.weights.bn_beta = Vector::Zero(h);
  params.bn_running_mean = Vector::Zero(h);
  params.bn_running_var = Vector::Ones(h);
  return params;
}

namespace {
void require_finite(const Matrix& m, const char* layer) {
  if (!m.allFinite()) throw NonFiniteError(std::string("forward: non-finite activation in ") + layer);
}
}  // namespace

ForwardResult forward(const ModelParams& params, const Matrix& embeddings,
                      const SparseMatrix& adj, Mode mode, Rng* rng) {
  const ModelConfig& cfg = params.config;
  const Weights& w = params.weights;
  const Eigen::Index n = embeddings.rows();
  if (embeddings.cols() != static_cast<Eigen::Index>(cfg.in_dim)) {
    throw Error("forward: embedding width " + std::to_string(embeddings.cols()) +
                " does not match in_dim " + std::to_string(cfg.in_dim));
  }
  if (adj.rows() != n || adj.cols() != n) {
    throw Error("forward: adjacency is " + std::to_string(adj.rows()) + "x" + std::to_string(adj.cols()) +
                " but there are " + std::to_string(n) + " embedding rows");
  }
  if (mode == Mode::Train && cfg.dropout > 0.0 && rng == nullptr) {
    throw Error("forward: train mode with dropout needs an rng");
  }
  if (mode == Mode::Train && n < 2) throw Error("forward: train-mode batch norm needs at least 2 nodes");

  ForwardResult out;
  ForwardTrace& t = out.trace;
  t.mode = mode;
  t.params_version = params.version;
  t.embeddings = &embeddings;
  t.adj = &adj;

  t.projected = (embeddings * w.proj_w).rowwise() + w.proj_b.transpose();
  require_finite(t.projected, "projector");

  Matrix conv1 = adj * (t.projected * w.conv1_w);
  conv1.rowwise() += w.conv1_b.transpose();
  require_finite(conv1, "conv1");

  if (mode == Mode::Train) {
    t.batch_mean = conv1.colwise().mean().transpose();
    Matrix centered = conv1.rowwise() - t.batch_mean.transpose();
    t.batch_var = centered.colwise().squaredNorm().transpose() / static_cast<double>(n);
    t.inv_std = (t.batch_var.array() + cfg.bn_eps).rsqrt().matrix();
    t.normalized = centered * t.inv_std.asDiagonal();
  } else {
    t.inv_std = (params.bn_running_var.array() + cfg.bn_eps).rsqrt().matrix();
    t.normalized = (conv1.rowwise() - params.bn_running_mean.transpose()) * t.inv_std.asDiagonal();
  }
  t.bn_out = (t.normalized * w.bn_gamma.asDiagonal()).rowwise() + w.bn_beta.transpose();
  require_finite(t.bn_out, "batch norm");

  t.dropped = t.bn_out.cwiseMax(0.0);
  if (mode == Mode::Train && cfg.dropout > 0.0) {
    const double keep_scale = 1.0 / (1.0 - cfg.dropout);
    t.dropout_scale.resize(t.dropped.rows(), t.dropped.cols());
    // Row-major fill order so the mask depends only on the rng stream.
    for (Eigen::Index i = 0; i < t.dropout_scale.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.dropout_scale.cols(); ++j) {
        t.dropout_scale(i, j) = rng->bernoulli(cfg.dropout) ? 0.0 : keep_scale;
      }
    }
    t.dropped = t.dropped.cwiseProduct(t.dropout_scale);
  }

  out.logits = adj * (t.dropped * w.conv2_w);
  out.logits.rowwise() += w.conv2_b.transpose();
  require_finite(out.logits, "conv2");
  return out;
}

Weights backward(const ModelParams& params, const ForwardTrace& trace, const Matrix& grad_logits) {
  if (trace.mode != Mode::Train) throw Error("backward: trace comes from an eval-mode forward");
  if (trace.params_version != params.version || trace.embeddings == nullptr || trace.adj == nullptr) {
    throw Error("backward: trace does not belong to these parameters");
  }
  const Weights& w = params.weights;
  const Matrix& H = *trace.embeddings;
  const SparseMatrix& adj = *trace.adj;
  const Eigen::Index n = H.rows();
  if (grad_logits.rows() != n || grad_logits.cols() != w.conv2_w.cols()) {
    throw Error("backward: upstream gradient has the wrong shape");
  }
  if (trace.dropped.rows() != n || trace.projected.cols() != w.conv1_w.rows() ||
      trace.dropped.cols() != w.conv2_w.rows()) {
    throw Error("backward: trace does not belong to these parameters");
  }

  Weights g;
  // Z = A (D W2) + b2
  g.conv2_b = grad_logits.colwise().sum().transpose();
  const Matrix grad_t2 = adj.transpose() * grad_logits;
  g.conv2_w = trace.dropped.transpose() * grad_t2;
  Matrix grad_act = grad_t2 * w.conv2_w.transpose();

  if (trace.dropout_scale.size() > 0) grad_act = grad_act.cwiseProduct(trace.dropout_scale);
  const Matrix grad_bn_out = (trace.bn_out.array() > 0.0).select(grad_act, 0.0);

  g.bn_beta = grad_bn_out.colwise().sum().transpose();
  g.bn_gamma = grad_bn_out.cwiseProduct(trace.normalized).colwise().sum().transpose();
  const Matrix grad_xhat = grad_bn_out * w.bn_gamma.asDiagonal();
  // Batch-statistics BN: dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)).
  const Vector mean_g = grad_xhat.colwise().mean().transpose();
  const Vector mean_gx = grad_xhat.cwiseProduct(trace.normalized).colwise().mean().transpose();
  Matrix grad_conv1 = grad_xhat.rowwise() - mean_g.transpose();
  grad_conv1 -= trace.normalized * mean_gx.asDiagonal();
  grad_conv1 = grad_conv1 * trace.inv_std.asDiagonal();

  // conv1 = A (H' W1) + b1
  g.conv1_b = grad_conv1.colwise().sum().transpose();
  const Matrix grad_t1 = adj.transpose() * grad_conv1;
  g.conv1_w = trace.projected.transpose() * grad_t1;
  const Matrix grad_proj = grad_t1 * w.conv1_w.transpose();

  // H' = H Wp + bp
  g.proj_b = grad_proj.colwise().sum().transpose();
  g.proj_w = H.transpose() * grad_proj;
  return g;
}

void update_running_stats(ModelParams& params, const ForwardTrace& trace) {
  if (trace.mode != Mode::Train) return;
  const double m = params.config.bn_momentum;
  const auto n = static_cast<double>(trace.dropped.rows());
  const Vector unbiased = trace.batch_var * (n / (n - 1.0));
  params.bn_running_mean = (1.0 - m) * params.bn_running_mean + m * trace.batch_mean;
  params.bn_running_var = (1.0 - m) * params.bn_running_var + m * unbiased;
}

AdamState AdamState::zeros_like(const Weights& w) {
  return {Weights::zeros_like(w), Weights::zeros_like(w), 0};
}

void adam_step(ModelParams& params, const Weights& grads, AdamState& state, const AdamConfig& config) {
  bool finite = true;
  grads.for_each([&](std::string_view, Eigen::Map<const Vector> g) { finite = finite && g.allFinite(); });
  if (!finite) throw NonFiniteError("adam: non-finite gradient");

  std::vector<Eigen::Map<const Vector>> g_views;
  grads.for_each([&](std::string_view, Eigen::Map<const Vector> g) { g_views.push_back(g); });
  std::vector<Eigen::Map<Vector>> m_views, v_views, p_views;
  state.m.for_each([&](std::string_view, Eigen::Map<Vector> t) { m_views.push_back(t); });
  state.v.for_each([&](std::string_view, Eigen::Map<Vector> t) { v_views.push_back(t); });
  params.weights.for_each([&](std::string_view, Eigen::Map<Vector> t) { p_views.push_back(t); });
  for (std::size_t k = 0; k < p_views.size(); ++k) {
    if (g_views[k].size() != p_views[k].size() || m_views[k].size() != p_views[k].size() ||
        v_views[k].size() != p_views[k].size()) {
      throw Error("adam: optimizer state does not match parameter shapes");
    }
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < p_views.size(); ++k) {
    auto& p = p_views[k];
    auto& m = m_views[k];
    auto& v = v_views[k];
    const auto& g = g_views[k];
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double gi = g[i] + config.weight_decay * p[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
  ++params.version;
}

namespace {

constexpr char kCheckpointMagic[8] = {'L', 'E', 'C', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("checkpoint: truncated file");
  return v;
}

void put_tensor(std::ostream& out, Eigen::Map<const Vector> t) {
  put<std::uint64_t>(out, static_cast<std::uint64_t>(t.size()));
  out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
}
void get_tensor(std::istream& in, Eigen::Map<Vector> t) {
  const auto size = get<std::uint64_t>(in);
  if (size != static_cast<std::uint64_t>(t.size())) throw Error("checkpoint: tensor size mismatch");
  in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!in) throw Error("checkpoint: truncated file");
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  const ModelConfig& c = ckpt.params.config;
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put(out, kCheckpointVersion);
  for (std::size_t d : {c.in_dim, c.proj_dim, c.hidden_dim, c.out_dim}) put<std::uint64_t>(out, d);
  put(out, c.dropout);
  put(out, c.bn_momentum);
  put(out, c.bn_eps);
  put(out, c.seed);
  put(out, ckpt.epoch);
  put(out, ckpt.rng_seed);
  put(out, ckpt.params.version);
  put(out, ckpt.optimizer.step);
  ckpt.params.weights.for_each([&](std::string_view, Eigen::Map<const Vector> t) { put_tensor(out, t); });
  put_tensor(out, Eigen::Map<const Vector>(ckpt.params.bn_running_mean.data(), ckpt.params.bn_running_mean.size()));
  put_tensor(out, Eigen::Map<const Vector>(ckpt.params.bn_running_var.data(), ckpt.params.bn_running_var.size()));
  ckpt.optimizer.m.for_each([&](std::string_view, Eigen::Map<const Vector> t) { put_tensor(out, t); });
  ckpt.optimizer.v.for_each([&](std::string_view, Eigen::Map<const Vector> t) { put_tensor(out, t); });
  if (!out) throw Error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw Error("checkpoint " + path.string() + ": bad magic");
  }
  if (get<std::uint32_t>(in) != kCheckpointVersion) throw Error("checkpoint: unsupported version");
  ModelConfig c;
  c.in_dim = get<std::uint64_t>(in);
  c.proj_dim = get<std::uint64_t>(in);
  c.hidden_dim = get<std::uint64_t>(in);
  c.out_dim = get<std::uint64_t>(in);
  c.dropout = get<double>(in);
  c.bn_momentum = get<double>(in);
  c.bn_eps = get<double>(in);
  c.seed = get<std::uint64_t>(in);
  Checkpoint ckpt;
  ckpt.params = init_params(c);
  ckpt.epoch = get<std::uint64_t>(in);
  ckpt.rng_seed = get<std::uint64_t>(in);
  ckpt.params.version = get<std::uint64_t>(in);
  ckpt.optimizer = AdamState::zeros_like(ckpt.params.weights);
  ckpt.optimizer.step = get<std::uint64_t>(in);
  ckpt.params.weights.for_each([&](std::string_view, Eigen::Map<Vector> t) { get_tensor(in, t); });
  get_tensor(in, Eigen::Map<Vector>(ckpt.params.bn_running_mean.data(), ckpt.params.bn_running_mean.size()));
  get_tensor(in, Eigen::Map<Vector>(ckpt.params.bn_running_var.data(), ckpt.params.bn_running_var.size()));
  ckpt.optimizer.m.for_each([&](std::string_view, Eigen::Map<Vector> t) { get_tensor(in, t); });
  ckpt.optimizer.v.for_each([&](std::string_view, Eigen::Map<Vector> t) { get_tensor(in, t); });
  return ckpt;
}

}  // namespace lect
