#pragma once

#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sparsebench/common.hpp"

namespace sparsebench {

enum class HeadKind { Relu, Linear };
enum class NetMode { Train, Eval };
enum class StopReason { Patience, Ceiling };

// Factor-grouped input layout for the embedding variant: each factor's
// design-matrix columns are projected to embed_dim values before the core.
struct EmbeddingSpec {
  std::vector<std::string> factor_names;
  std::vector<std::vector<int>> factor_columns;
  int embed_dim = 16;

  int output_width() const { return embed_dim * static_cast<int>(factor_names.size()); }
};

struct NetSpec {
  int input_width = 0;
  HeadKind head = HeadKind::Relu;
  int hidden = 256;
  int n_blocks = 3;
  double dropout_p = 0.5;
  double leaky_slope = 0.01;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;
  std::optional<EmbeddingSpec> embedding;

  int core_input_width() const { return embedding ? embedding->output_width() : input_width; }
};

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Named view of one parameter tensor and its gradient (Adam, checkpoints,
// finite-difference checks all walk this list).
template <typename S>
struct TensorRef {
  std::string name;
  S* data;
  S* grad;
  Eigen::Index size;
};

template <typename S>
struct DenseLayer {
  MatX<S> W;  // in x out
  VecX<S> b;
  MatX<S> dW;
  VecX<S> db;
  MatX<S> x_cache;

  void init(int in, int out, double sd, Rng& rng) {
    W.resize(in, out);
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = static_cast<S>(sd * rng.normal());
    b = VecX<S>::Zero(out);
    dW = MatX<S>::Zero(in, out);
    db = VecX<S>::Zero(out);
  }

  MatX<S> forward(const MatX<S>& x) {
    x_cache = x;
    return (x * W).rowwise() + b.transpose();
  }

  MatX<S> backward(const MatX<S>& dy) {
    dW = x_cache.transpose() * dy;
    db = dy.colwise().sum();
    return dy * W.transpose();
  }
};

template <typename S>
struct BatchNormLayer {
  VecX<S> gamma, beta, run_mean, run_var;
  VecX<S> dgamma, dbeta;
  S momentum, eps;

  // caches
  MatX<S> xhat_cache, xc_cache;
  VecX<S> inv_sd_cache;
  NetMode mode_cache = NetMode::Train;

  void init(int width, double mom, double epsilon) {
    gamma = VecX<S>::Ones(width);
    beta = VecX<S>::Zero(width);
    run_mean = VecX<S>::Zero(width);
    run_var = VecX<S>::Ones(width);
    dgamma = VecX<S>::Zero(width);
    dbeta = VecX<S>::Zero(width);
    momentum = static_cast<S>(mom);
    eps = static_cast<S>(epsilon);
  }

  MatX<S> forward(const MatX<S>& x, NetMode mode) {
    mode_cache = mode;
    const Eigen::Index n = x.rows();
    VecX<S> mean, var;
    if (mode == NetMode::Train) {
      if (n < 2) throw ValidationError("batch normalization needs batch size >= 2 in Train mode");
      mean = x.colwise().mean();
      var = ((x.rowwise() - mean.transpose()).array().square().colwise().sum() / static_cast<S>(n))
                .matrix()
                .transpose();
      run_mean = momentum * run_mean + (S(1) - momentum) * mean;
      run_var = momentum * run_var + (S(1) - momentum) * var;
    } else {
      mean = run_mean;
      var = run_var;
    }
    inv_sd_cache = (var.array() + eps).rsqrt();
    xc_cache = x.rowwise() - mean.transpose();
    xhat_cache = xc_cache.array().rowwise() * inv_sd_cache.transpose().array();
    return (xhat_cache.array().rowwise() * gamma.transpose().array()).rowwise() +
           beta.transpose().array();
  }

  MatX<S> backward(const MatX<S>& dy) {
    const Eigen::Index n = dy.rows();
    dgamma = (dy.array() * xhat_cache.array()).colwise().sum();
    dbeta = dy.colwise().sum();
    MatX<S> dxhat = dy.array().rowwise() * gamma.transpose().array();
    if (mode_cache == NetMode::Eval) {
      return dxhat.array().rowwise() * inv_sd_cache.transpose().array();
    }
    // Train mode: gradients flow through the batch statistics.
    VecX<S> sum_dxhat = dxhat.colwise().sum();
    VecX<S> sum_dxhat_xhat = (dxhat.array() * xhat_cache.array()).colwise().sum();
    MatX<S> dx =
        (dxhat.array() * static_cast<S>(n) - (MatX<S>::Ones(n, 1) * sum_dxhat.transpose()).array() -
         xhat_cache.array() * (MatX<S>::Ones(n, 1) * sum_dxhat_xhat.transpose()).array()) /
        static_cast<S>(n);
    return dx.array().rowwise() * inv_sd_cache.transpose().array();
  }
};

template <typename S>
struct NetT {
  NetSpec spec;
  std::vector<DenseLayer<S>> embed;  // one per factor, out = embed_dim
  std::vector<DenseLayer<S>> dense;  // n_blocks of hidden plus head at the end
  std::vector<BatchNormLayer<S>> bnorm;

  // forward caches
  std::vector<MatX<S>> act_sign;     // leaky relu pass-through mask per block
  std::vector<MatX<S>> drop_mask;    // dropout mask per block (train only)
  MatX<S> head_z;
  MatX<S> input_cache;
  NetMode mode_cache = NetMode::Eval;

  static NetT make(const NetSpec& spec, std::uint64_t seed) {
    NetT net;
    net.spec = spec;
    Rng rng(derive_seed(seed, "init"));
    if (spec.embedding) {
      const auto& emb = *spec.embedding;
      if (emb.factor_names.size() != emb.factor_columns.size())
        throw ValidationError("embedding factor name/column count mismatch");
      net.embed.resize(emb.factor_columns.size());
      for (std::size_t f = 0; f < emb.factor_columns.size(); ++f) {
        int in = static_cast<int>(emb.factor_columns[f].size());
        if (in == 0) throw ValidationError("embedding factor '" + emb.factor_names[f] + "' has no columns");
        net.embed[f].init(in, emb.embed_dim, 1.0 / std::sqrt(static_cast<double>(in)), rng);
      }
    }
    int in = spec.core_input_width();
    net.dense.resize(spec.n_blocks + 1);
    net.bnorm.resize(spec.n_blocks);
    for (int l = 0; l < spec.n_blocks; ++l) {
      net.dense[l].init(in, spec.hidden, std::sqrt(2.0 / in), rng);
      net.bnorm[l].init(spec.hidden, spec.bn_momentum, spec.bn_eps);
      in = spec.hidden;
    }
    net.dense[spec.n_blocks].init(in, 1, std::sqrt(2.0 / in), rng);
    net.act_sign.resize(spec.n_blocks);
    net.drop_mask.resize(spec.n_blocks);
    return net;
  }

  MatX<S> embed_forward(const MatX<S>& x) {
    const auto& emb = *spec.embedding;
    MatX<S> out(x.rows(), emb.output_width());
    for (std::size_t f = 0; f < emb.factor_columns.size(); ++f) {
      const auto& cols = emb.factor_columns[f];
      MatX<S> xf(x.rows(), cols.size());
      for (std::size_t c = 0; c < cols.size(); ++c) xf.col(c) = x.col(cols[c]);
      out.middleCols(static_cast<Eigen::Index>(f) * emb.embed_dim, emb.embed_dim) =
          embed[f].forward(xf);
    }
    return out;
  }

  // Dropout rng must be supplied in Train mode.
  VecX<S> forward(const MatX<S>& x, NetMode mode, Rng* dropout_rng = nullptr) {
    if (x.cols() != spec.input_width)
      throw ValidationError("input width " + std::to_string(x.cols()) + ", expected " +
                            std::to_string(spec.input_width));
    if (mode == NetMode::Train && x.rows() < 2)
      throw ValidationError("Train mode needs batch size >= 2");
    mode_cache = mode;
    input_cache = x;
    MatX<S> h = spec.embedding ? embed_forward(x) : x;
    const S slope = static_cast<S>(spec.leaky_slope);
    const S keep = static_cast<S>(1.0 - spec.dropout_p);
    for (int l = 0; l < spec.n_blocks; ++l) {
      h = dense[l].forward(h);
      h = bnorm[l].forward(h, mode);
      act_sign[l] = (h.array() >= S(0)).template cast<S>() * (S(1) - slope) + slope;
      h = h.array() * act_sign[l].array();
      if (mode == NetMode::Train && spec.dropout_p > 0) {
        if (!dropout_rng) throw ValidationError("Train-mode forward needs a dropout rng");
        drop_mask[l].resize(h.rows(), h.cols());
        for (Eigen::Index i = 0; i < h.size(); ++i)
          drop_mask[l].data()[i] = dropout_rng->uniform() < spec.dropout_p ? S(0) : S(1) / keep;
        h = h.array() * drop_mask[l].array();
      } else {
        drop_mask[l].resize(0, 0);
      }
    }
    head_z = dense[spec.n_blocks].forward(h);
    if (spec.head == HeadKind::Relu) return head_z.array().max(S(0)).matrix().col(0);
    return head_z.col(0);
  }

  // MSE loss over the cached forward pass; fills all parameter gradients.
  S backward(const VecX<S>& predictions, const VecX<S>& targets) {
    const Eigen::Index n = predictions.size();
    VecX<S> diff = predictions - targets;
    S loss = diff.squaredNorm() / static_cast<S>(n);
    if (!std::isfinite(static_cast<double>(loss))) {
      Eigen::Index bad = 0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!std::isfinite(static_cast<double>(diff(i)))) {
          bad = i;
          break;
        }
      throw Error("non-finite loss at batch index " + std::to_string(bad));
    }
    MatX<S> d = (S(2) / static_cast<S>(n)) * diff;
    if (spec.head == HeadKind::Relu)
      d = d.array() * (head_z.array() > S(0)).template cast<S>().array();
    MatX<S> dh = dense[spec.n_blocks].backward(d);
    for (int l = spec.n_blocks - 1; l >= 0; --l) {
      if (drop_mask[l].size() > 0) dh = dh.array() * drop_mask[l].array();
      dh = dh.array() * act_sign[l].array();
      dh = bnorm[l].backward(dh);
      dh = dense[l].backward(dh);
    }
    if (spec.embedding) {
      const auto& emb = *spec.embedding;
      for (std::size_t f = 0; f < emb.factor_columns.size(); ++f) {
        MatX<S> df = dh.middleCols(static_cast<Eigen::Index>(f) * emb.embed_dim, emb.embed_dim);
        embed[f].backward(df);
      }
    }
    return loss;
  }

  VecX<S> predict(const MatX<S>& x) { return forward(x, NetMode::Eval); }

  std::vector<TensorRef<S>> tensors() {
    std::vector<TensorRef<S>> out;
    auto add = [&](const std::string& name, auto& param, auto& grad) {
      out.push_back({name, param.data(), grad.data(), param.size()});
    };
    for (std::size_t f = 0; f < embed.size(); ++f) {
      add("embed" + std::to_string(f) + ".W", embed[f].W, embed[f].dW);
      add("embed" + std::to_string(f) + ".b", embed[f].b, embed[f].db);
    }
    for (std::size_t l = 0; l < dense.size(); ++l) {
      add("dense" + std::to_string(l) + ".W", dense[l].W, dense[l].dW);
      add("dense" + std::to_string(l) + ".b", dense[l].b, dense[l].db);
    }
    for (std::size_t l = 0; l < bnorm.size(); ++l) {
      add("bnorm" + std::to_string(l) + ".gamma", bnorm[l].gamma, bnorm[l].dgamma);
      add("bnorm" + std::to_string(l) + ".beta", bnorm[l].beta, bnorm[l].dbeta);
    }
    return out;
  }
};

using Net = NetT<float>;
using NetD = NetT<double>;

struct TrainConfig {
  int batch_size = 32;
  int max_epochs = 10000;
  double learning_rate = 0.001;
  int early_stop_patience = 500;
  double val_fraction = 0.15;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size < 2 || max_epochs < 1 || learning_rate <= 0 || early_stop_patience < 1 ||
        val_fraction <= 0 || val_fraction >= 1)
      throw ValidationError("invalid training configuration");
  }
};

template <typename S>
struct TrainedNetT {
  NetT<S> net;
  int best_epoch = 0;
  double best_val_mse = 0.0;
  StopReason stopped_reason = StopReason::Ceiling;
  std::vector<double> val_history;   // per-epoch validation MSE
  std::vector<int> best_val_rows;    // validation rows of the best epoch
};

using TrainedNet = TrainedNetT<float>;

template <typename S>
struct Adam {
  std::vector<VecX<S>> m, v;
  double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;

  explicit Adam(std::vector<TensorRef<S>>& refs, double learning_rate) : lr(learning_rate) {
    for (auto& r : refs) {
      m.push_back(VecX<S>::Zero(r.size));
      v.push_back(VecX<S>::Zero(r.size));
    }
  }

  void step(std::vector<TensorRef<S>>& refs) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < refs.size(); ++i) {
      Eigen::Map<VecX<S>> p(refs[i].data, refs[i].size);
      Eigen::Map<VecX<S>> g(refs[i].grad, refs[i].size);
      m[i] = static_cast<S>(beta1) * m[i] + static_cast<S>(1 - beta1) * g;
      v[i] = static_cast<S>(beta2) * v[i] + static_cast<S>(1 - beta2) * g.cwiseProduct(g);
      for (Eigen::Index j = 0; j < p.size(); ++j) {
        double mhat = m[i](j) / bc1;
        double vhat = v[i](j) / bc2;
        p(j) -= static_cast<S>(lr * mhat / (std::sqrt(vhat) + eps));
      }
    }
  }
};

// The training protocol: fresh random 15% validation rows each epoch,
// shuffled mini-batches of 32, Adam at lr=0.001, patience of 500 epochs on
// the best validation MSE seen so far, weights restored from the best epoch.
template <typename S>
TrainedNetT<S> train_net(const MatX<S>& X, const VecX<S>& y, const NetSpec& spec,
                         const TrainConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(X.rows());
  const int n_val = std::max(1, static_cast<int>(std::ceil(cfg.val_fraction * n)));
  if (n - n_val < 2) throw ValidationError("need >= 2 training rows after the validation split");

  NetT<S> net = NetT<S>::make(spec, cfg.seed);
  auto refs = net.tensors();
  Adam<S> opt(refs, cfg.learning_rate);
  Rng rng(derive_seed(cfg.seed, "train_loop"));

  TrainedNetT<S> result;
  result.best_val_mse = std::numeric_limits<double>::infinity();
  NetT<S> best_net = net;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  auto gather = [&](const std::vector<int>& rows, int from, int count, MatX<S>& bx, VecX<S>& by) {
    bx.resize(count, X.cols());
    by.resize(count);
    for (int i = 0; i < count; ++i) {
      bx.row(i) = X.row(rows[from + i]);
      by(i) = y(rows[from + i]);
    }
  };

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    std::vector<int> val_rows(order.begin(), order.begin() + n_val);
    std::vector<int> train_rows(order.begin() + n_val, order.end());

    MatX<S> bx;
    VecX<S> by;
    for (int from = 0; from < static_cast<int>(train_rows.size()); from += cfg.batch_size) {
      int count = std::min(cfg.batch_size, static_cast<int>(train_rows.size()) - from);
      if (count < 2) continue;  // batchnorm cannot take a singleton batch
      gather(train_rows, from, count, bx, by);
      VecX<S> pred = net.forward(bx, NetMode::Train, &rng);
      net.backward(pred, by);
      opt.step(refs);
    }

    gather(val_rows, 0, n_val, bx, by);
    VecX<S> vpred = net.forward(bx, NetMode::Eval);
    double val_mse = static_cast<double>((vpred - by).squaredNorm()) / n_val;
    result.val_history.push_back(val_mse);

    if (val_mse < result.best_val_mse) {
      result.best_val_mse = val_mse;
      result.best_epoch = epoch;
      result.best_val_rows = val_rows;
      best_net = net;
    }
    if (epoch - result.best_epoch >= cfg.early_stop_patience) {
      result.stopped_reason = StopReason::Patience;
      break;
    }
    if (epoch == cfg.max_epochs) result.stopped_reason = StopReason::Ceiling;
  }
  result.net = std::move(best_net);
  return result;
}

void save_checkpoint(Net& net, const TrainConfig& cfg, int best_epoch, const std::string& blob_path,
                     const std::string& manifest_path);
Net load_checkpoint(const std::string& blob_path, const std::string& manifest_path);

}  // namespace sparsebench
