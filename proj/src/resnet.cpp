#include "ra/resnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "ra/random.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace ra::resnet {

namespace {

template <class F>
void zip_params(ModelParams& a, const ModelParams& b, F f) {
  f(a.w0, b.w0);
  f(a.b0, b.b0);
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    f(a.blocks[i].wa, b.blocks[i].wa);
    f(a.blocks[i].ba, b.blocks[i].ba);
    f(a.blocks[i].wb, b.blocks[i].wb);
    f(a.blocks[i].bb, b.blocks[i].bb);
  }
  f(a.wc, b.wc);
  f(a.bc, b.bc);
}

double eval_branch_gate(const ModelConfig& cfg) {
  return cfg.stochastic_depth_p > 0.0 ? 1.0 - cfg.stochastic_depth_p : 1.0;
}

Matrix relu(const Matrix& a) { return a.cwiseMax(0.0); }
Matrix relu_mask(const Matrix& a) {
  return (a.array() > 0.0).cast<double>().matrix();  // relu'(0) = 0
}

struct BatchTrace {
  Matrix pre0_mask;
  std::vector<Matrix> h;       // h_1 .. h_{L+1}, each D x B
  std::vector<Matrix> z;       // interior relu outputs
  std::vector<Matrix> mask_a;  // interior relu masks
  std::vector<Matrix> mask_p;  // outer relu masks (post style)
  Matrix logits;               // C x B
};

BatchTrace forward_batch(const ModelParams& params, const ModelConfig& cfg,
                         const Matrix& x, const Vector& gates) {
  if (x.rows() != cfg.input_dim)
    throw std::invalid_argument("forward: input dimension mismatch");
  const Index batch = x.cols();
  const bool post = cfg.activation == Activation::kPost;

  BatchTrace trace;
  trace.h.reserve(std::size_t(cfg.blocks) + 1);
  Matrix pre0 = params.w0 * x;
  pre0.colwise() += params.b0;
  trace.pre0_mask = relu_mask(pre0);
  trace.h.push_back(relu(pre0));

  for (Index i = 0; i < cfg.blocks; ++i) {
    const BlockParams& blk = params.blocks[std::size_t(i)];
    const Matrix& hi = trace.h.back();
    Matrix a = blk.wa * hi;
    a.colwise() += blk.ba;
    trace.mask_a.push_back(relu_mask(a));
    trace.z.push_back(relu(a));
    Matrix f = blk.wb * trace.z.back();
    f.colwise() += blk.bb;
    Matrix pre_out = gates(i) * f;
    if (cfg.skip_enabled) pre_out += hi;
    if (post) {
      trace.mask_p.push_back(relu_mask(pre_out));
      trace.h.push_back(relu(pre_out));
    } else {
      trace.h.push_back(std::move(pre_out));
    }
  }

  trace.logits = params.wc * trace.h.back();
  trace.logits.colwise() += params.bc;
  (void)batch;
  return trace;
}

// Mean cross-entropy of the batch plus dLogits = (softmax - onehot) / B.
double cross_entropy(const Matrix& logits, const std::vector<int>& labels,
                     Matrix& dlogits) {
  const Index batch = logits.cols();
  dlogits.resize(logits.rows(), batch);
  double total = 0.0;
  for (Index n = 0; n < batch; ++n) {
    const Index y = labels[std::size_t(n)];
    const double m = logits.col(n).maxCoeff();
    const Vector shifted = logits.col(n).array() - m;
    const Vector expv = shifted.array().exp();
    const double z = expv.sum();
    total += std::log(z) - shifted(y);
    dlogits.col(n) = expv / (z * double(batch));
    dlogits(y, n) -= 1.0 / double(batch);
  }
  return total / double(batch);
}

std::pair<double, ModelParams> loss_and_grads_gated(
    const ModelParams& params, const ModelConfig& cfg, const Matrix& x,
    const std::vector<int>& labels, const Vector& gates, double lambda) {
  if (x.cols() == 0) throw std::invalid_argument("loss_and_grads: empty batch");
  if (Index(labels.size()) != x.cols())
    throw std::invalid_argument("loss_and_grads: label count mismatch");

  const BatchTrace trace = forward_batch(params, cfg, x, gates);
  Matrix dlogits;
  double loss = cross_entropy(trace.logits, labels, dlogits);
  loss += 0.5 * lambda * params.squared_norm();
  if (!std::isfinite(loss)) {
    Index bad = 0;
    for (Index n = 0; n < trace.logits.cols(); ++n)
      if (!trace.logits.col(n).allFinite()) {
        bad = n;
        break;
      }
    throw NumericalError("loss_and_grads: non-finite loss (batch sample " +
                         std::to_string(bad) + ")");
  }

  ModelParams grads;
  grads.wc.noalias() = dlogits * trace.h.back().transpose();
  grads.bc = dlogits.rowwise().sum();
  Matrix dh = params.wc.transpose() * dlogits;

  const bool post = cfg.activation == Activation::kPost;
  grads.blocks.resize(std::size_t(cfg.blocks));
  for (Index i = cfg.blocks - 1; i >= 0; --i) {
    const BlockParams& blk = params.blocks[std::size_t(i)];
    BlockParams& g = grads.blocks[std::size_t(i)];
    const Matrix dp =
        post ? Matrix(dh.cwiseProduct(trace.mask_p[std::size_t(i)])) : dh;
    const Matrix df = gates(i) * dp;
    g.wb.noalias() = df * trace.z[std::size_t(i)].transpose();
    g.bb = df.rowwise().sum();
    const Matrix da =
        (blk.wb.transpose() * df).cwiseProduct(trace.mask_a[std::size_t(i)]);
    g.wa.noalias() = da * trace.h[std::size_t(i)].transpose();
    g.ba = da.rowwise().sum();
    dh = blk.wa.transpose() * da;
    if (cfg.skip_enabled) dh += dp;
  }

  const Matrix dpre0 = dh.cwiseProduct(trace.pre0_mask);
  grads.w0.noalias() = dpre0 * x.transpose();
  grads.b0 = dpre0.rowwise().sum();

  if (lambda != 0.0) {
    zip_params(grads, params,
               [lambda](auto& g, const auto& p) { g += lambda * p; });
  }
  return {loss, std::move(grads)};
}

void put_u32(std::string& out, std::uint32_t v) {
  out.append(reinterpret_cast<const char*>(&v), 4);
}
void put_u64(std::string& out, std::uint64_t v) {
  out.append(reinterpret_cast<const char*>(&v), 8);
}
void put_f64(std::string& out, double v) {
  out.append(reinterpret_cast<const char*>(&v), 8);
}
void put_matrix(std::string& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
}
void put_vector(std::string& out, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) put_f64(out, v(i));
}

struct Reader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) {
    if (pos + n > size)
      throw FormatError("checkpoint: truncated " + std::string(what) +
                        " at byte " + std::to_string(pos));
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v;
    std::memcpy(&v, data + pos, 4);
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v;
    std::memcpy(&v, data + pos, 8);
    pos += 8;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    double v;
    std::memcpy(&v, data + pos, 8);
    pos += 8;
    return v;
  }
  void matrix(Matrix& m, Index rows, Index cols, const char* what) {
    m.resize(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = f64(what);
  }
  void vector(Vector& v, Index n, const char* what) {
    v.resize(n);
    for (Index i = 0; i < n; ++i) v(i) = f64(what);
  }
};

}  // namespace

double ModelParams::squared_norm() const {
  double total = w0.squaredNorm() + b0.squaredNorm() + wc.squaredNorm() +
                 bc.squaredNorm();
  for (const BlockParams& blk : blocks)
    total += blk.wa.squaredNorm() + blk.ba.squaredNorm() +
             blk.wb.squaredNorm() + blk.bb.squaredNorm();
  return total;
}

void validate(const ModelConfig& cfg) {
  if (cfg.input_dim < 1) throw std::invalid_argument("config: input_dim must be >= 1");
  if (cfg.blocks < 1) throw std::invalid_argument("config: need at least one block");
  if (cfg.width < cfg.classes)
    throw std::invalid_argument("config: width must be >= class count");
  if (cfg.classes < 2) throw std::invalid_argument("config: need >= 2 classes");
  if (cfg.weight_decay < 0.0)
    throw std::invalid_argument("config: weight_decay must be >= 0");
  if (cfg.stochastic_depth_p < 0.0 || cfg.stochastic_depth_p >= 1.0)
    throw std::invalid_argument("config: stochastic_depth_p must be in [0, 1)");
}

ModelParams init_model(const ModelConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  auto he = [&rng](Index rows, Index cols, Index fan_in) {
    const double std = std::sqrt(2.0 / double(fan_in));
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = std * rng.gaussian();
    return m;
  };

  ModelParams p;
  p.w0 = he(cfg.width, cfg.input_dim, cfg.input_dim);
  p.b0 = Vector::Zero(cfg.width);
  p.blocks.resize(std::size_t(cfg.blocks));
  // With skip connections, He branches double the representation variance
  // per block and a depth-8 model overflows within a few SGD steps, so the
  // closing layer of each branch is damped by 1/sqrt(2L). Without skips the
  // branch is the only signal path and must keep plain He scaling.
  const double branch_damp =
      cfg.skip_enabled ? 1.0 / std::sqrt(2.0 * double(cfg.blocks)) : 1.0;
  for (BlockParams& blk : p.blocks) {
    blk.wa = he(cfg.width, cfg.width, cfg.width);
    blk.ba = Vector::Zero(cfg.width);
    blk.wb = branch_damp * he(cfg.width, cfg.width, cfg.width);
    blk.bb = Vector::Zero(cfg.width);
  }
  p.wc = he(cfg.classes, cfg.width, cfg.width);
  p.bc = Vector::Zero(cfg.classes);
  return p;
}

ForwardTrace forward(const ModelParams& params, const ModelConfig& cfg,
                     const Vector& x) {
  const Vector gates = Vector::Constant(cfg.blocks, eval_branch_gate(cfg));
  const BatchTrace batch = forward_batch(params, cfg, x, gates);

  ForwardTrace trace;
  trace.h.reserve(batch.h.size());
  for (const Matrix& h : batch.h) trace.h.push_back(h.col(0));
  trace.logits = batch.logits.col(0);
  trace.input_mask = batch.pre0_mask.col(0);
  for (const Matrix& m : batch.mask_a) trace.inner_mask.push_back(m.col(0));
  for (const Matrix& m : batch.mask_p) trace.outer_mask.push_back(m.col(0));
  return trace;
}

std::pair<double, ModelParams> loss_and_grads(const ModelParams& params,
                                              const ModelConfig& cfg,
                                              const Matrix& batch_inputs,
                                              const std::vector<int>& batch_labels) {
  const Vector gates = Vector::Ones(cfg.blocks);
  return loss_and_grads_gated(params, cfg, batch_inputs, batch_labels, gates,
                              cfg.weight_decay);
}

double cosine_lr(Index step, Index total, double lr0) {
  if (total == 0) throw std::invalid_argument("cosine_lr: total must be positive");
  if (step < 0 || step > total)
    throw std::invalid_argument("cosine_lr: step out of range");
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * double(step) / double(total)));
}

TrainResult train(const ModelConfig& cfg, const TrainConfig& tcfg,
                  const data::LabeledDataset& ds) {
  if (ds.class_count != cfg.classes)
    throw std::invalid_argument("train: dataset class count does not match config");
  if (tcfg.epochs < 1 || tcfg.batch_size < 1)
    throw std::invalid_argument("train: epochs and batch_size must be positive");
  if (tcfg.lr0 < 0.0) throw std::invalid_argument("train: lr0 must be >= 0");

  ModelConfig run_cfg = cfg;
  run_cfg.input_dim = ds.dim();
  run_cfg.weight_decay = tcfg.weight_decay;
  run_cfg.stochastic_depth_p = tcfg.stochastic_depth_p;
  validate(run_cfg);

  TrainResult result;
  result.params = init_model(run_cfg);
  ModelParams velocity;
  const bool use_momentum = tcfg.momentum != 0.0;
  if (use_momentum) {
    velocity = result.params;
    zip_params(velocity, result.params,
               [](auto& v, const auto&) { v.setZero(); });
  }

  Rng rng(tcfg.seed);
  const Index n = ds.size();
  const Index batches = (n + tcfg.batch_size - 1) / tcfg.batch_size;
  const Index total_steps = Index(tcfg.epochs) * batches;
  const double p_drop = tcfg.stochastic_depth_p;

  Index step = 0;
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const auto perm = rng.permutation(std::size_t(n));
    double loss_sum = 0.0;
    for (Index b = 0; b < batches; ++b, ++step) {
      const Index begin = b * tcfg.batch_size;
      const Index count = std::min(tcfg.batch_size, n - begin);
      Matrix x(ds.dim(), count);
      std::vector<int> labels(static_cast<std::size_t>(count), 0);
      for (Index i = 0; i < count; ++i) {
        const std::size_t src = perm[std::size_t(begin + i)];
        x.col(i) = ds.inputs.row(Index(src)).transpose();
        labels[std::size_t(i)] = ds.labels[src];
      }
      Vector gates = Vector::Ones(run_cfg.blocks);
      if (p_drop > 0.0)
        for (Index i = 0; i < run_cfg.blocks; ++i)
          if (rng.uniform() < p_drop) gates(i) = 0.0;

      const double lr = cosine_lr(step, total_steps, tcfg.lr0);
      try {
        auto [loss, grads] = loss_and_grads_gated(result.params, run_cfg, x,
                                                  labels, gates, tcfg.weight_decay);
        loss_sum += loss;
        if (use_momentum) {
          zip_params(velocity, grads, [&](auto& v, const auto& g) {
            v = tcfg.momentum * v + g;
          });
          zip_params(result.params, velocity,
                     [lr](auto& p, const auto& v) { p -= lr * v; });
        } else {
          zip_params(result.params, grads,
                     [lr](auto& p, const auto& g) { p -= lr * g; });
        }
      } catch (const NumericalError& e) {
        throw NumericalError("train: diverged at epoch " +
                             std::to_string(epoch) + ", step " +
                             std::to_string(step) + ": " + e.what());
      }
    }
    EpochStats stats;
    stats.loss = loss_sum / double(batches);
    stats.accuracy = evaluate_accuracy(result.params, run_cfg, ds);
    result.history.push_back(stats);
  }
  return result;
}

Matrix residual_jacobian(const ModelParams& params, const ModelConfig& cfg,
                         const Vector& x, Index block_index) {
  if (block_index < 1 || block_index > cfg.blocks)
    throw std::invalid_argument("residual_jacobian: block index out of range");
  const double gate = eval_branch_gate(cfg);
  const ForwardTrace trace = forward(params, cfg, x);

  const std::size_t i = std::size_t(block_index - 1);
  const BlockParams& blk = params.blocks[i];
  Matrix j = gate * (blk.wb * trace.inner_mask[i].asDiagonal() * blk.wa);
  if (cfg.activation == Activation::kPost)
    j = trace.outer_mask[i].asDiagonal() * j;
  return j;
}

double evaluate_accuracy(const ModelParams& params, const ModelConfig& cfg,
                         const data::LabeledDataset& ds) {
  const Vector gates = Vector::Constant(cfg.blocks, eval_branch_gate(cfg));
  const Index chunk = 256;
  Index correct = 0;
  for (Index begin = 0; begin < ds.size(); begin += chunk) {
    const Index count = std::min(chunk, ds.size() - begin);
    Matrix x(ds.dim(), count);
    for (Index i = 0; i < count; ++i)
      x.col(i) = ds.inputs.row(begin + i).transpose();
    const BatchTrace trace = forward_batch(params, cfg, x, gates);
    for (Index i = 0; i < count; ++i) {
      Index argmax = 0;
      trace.logits.col(i).maxCoeff(&argmax);
      if (int(argmax) == ds.labels[std::size_t(begin + i)]) ++correct;
    }
  }
  return double(correct) / double(ds.size());
}

void save_checkpoint(const ModelParams& params, const ModelConfig& cfg,
                     const std::string& path) {
  std::string out;
  out.append("RACP", 4);
  put_u32(out, 1);  // version
  put_u32(out, std::uint32_t(cfg.input_dim));
  put_u32(out, std::uint32_t(cfg.width));
  put_u32(out, std::uint32_t(cfg.blocks));
  put_u32(out, std::uint32_t(cfg.classes));
  put_u32(out, cfg.skip_enabled ? 1 : 0);
  put_u32(out, cfg.activation == Activation::kPre ? 0 : 1);
  put_f64(out, cfg.stochastic_depth_p);
  put_f64(out, cfg.weight_decay);
  put_u64(out, cfg.seed);
  put_matrix(out, params.w0);
  put_vector(out, params.b0);
  for (const BlockParams& blk : params.blocks) {
    put_matrix(out, blk.wa);
    put_vector(out, blk.ba);
    put_matrix(out, blk.wb);
    put_vector(out, blk.bb);
  }
  put_matrix(out, params.wc);
  put_vector(out, params.bc);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path) {
  const auto bytes = data::read_file(path);
  Reader r{bytes.data(), bytes.size()};

  r.need(4, "magic");
  if (std::memcmp(r.data, "RACP", 4) != 0)
    throw FormatError("checkpoint: bad magic at byte 0");
  r.pos = 4;
  const std::uint32_t version = r.u32("version");
  if (version != 1)
    throw FormatError("checkpoint: unsupported version " +
                      std::to_string(version) + " (expected 1)");

  ModelConfig cfg;
  cfg.input_dim = Index(r.u32("input_dim"));
  cfg.width = Index(r.u32("width"));
  cfg.blocks = Index(r.u32("blocks"));
  cfg.classes = Index(r.u32("classes"));
  cfg.skip_enabled = r.u32("skip flag") != 0;
  cfg.activation = r.u32("activation") == 0 ? Activation::kPre : Activation::kPost;
  cfg.stochastic_depth_p = r.f64("stochastic_depth_p");
  cfg.weight_decay = r.f64("weight_decay");
  cfg.seed = r.u64("seed");
  validate(cfg);

  ModelParams p;
  r.matrix(p.w0, cfg.width, cfg.input_dim, "w0");
  r.vector(p.b0, cfg.width, "b0");
  p.blocks.resize(std::size_t(cfg.blocks));
  for (BlockParams& blk : p.blocks) {
    r.matrix(blk.wa, cfg.width, cfg.width, "wa");
    r.vector(blk.ba, cfg.width, "ba");
    r.matrix(blk.wb, cfg.width, cfg.width, "wb");
    r.vector(blk.bb, cfg.width, "bb");
  }
  r.matrix(p.wc, cfg.classes, cfg.width, "classifier");
  r.vector(p.bc, cfg.classes, "classifier bias");
  if (r.pos != r.size)
    throw FormatError("checkpoint: " + std::to_string(r.size - r.pos) +
                      " trailing bytes at byte " + std::to_string(r.pos));
  return {std::move(p), cfg};
}

}  // namespace ra::resnet
