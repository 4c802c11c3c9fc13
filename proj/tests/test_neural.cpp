#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "sparsebench/neural.hpp"

using namespace sparsebench;

namespace {

template <typename S>
MatX<S> random_matrix(int rows, int cols, Rng& rng) {
  MatX<S> X(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) X(i, j) = static_cast<S>(rng.normal());
  return X;
}

double mse_at(NetD& net, const MatX<double>& X, const VecX<double>& y, NetMode mode,
              Rng* rng = nullptr) {
  VecX<double> pred = net.forward(X, mode, rng);
  return (pred - y).squaredNorm() / X.rows();
}

// Central finite differences against the analytic gradients, sampling a
// spread of entries from every parameter tensor.
void check_gradients(NetD& net, const MatX<double>& X, const VecX<double>& y, NetMode mode) {
  const double h = 1e-5;
  VecX<double> pred = net.forward(X, mode);
  net.backward(pred, y);
  auto refs = net.tensors();
  std::vector<VecX<double>> grads;
  for (auto& r : refs) grads.push_back(Eigen::Map<VecX<double>>(r.grad, r.size));

  for (std::size_t t = 0; t < refs.size(); ++t) {
    auto& r = refs[t];
    Eigen::Index n_probe = std::min<Eigen::Index>(r.size, 12);
    for (Eigen::Index k = 0; k < n_probe; ++k) {
      Eigen::Index idx = k * r.size / n_probe;
      double saved = r.data[idx];
      r.data[idx] = saved + h;
      double up = mse_at(net, X, y, mode);
      r.data[idx] = saved - h;
      double down = mse_at(net, X, y, mode);
      r.data[idx] = saved;
      double fd = (up - down) / (2 * h);
      double an = grads[t](idx);
      double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
      INFO(r.name, " entry ", idx, " analytic ", an, " fd ", fd);
      CHECK(std::abs(fd - an) / denom < 1e-4);
    }
  }
}

NetSpec small_spec(int input_width, int hidden = 6, double dropout = 0.0) {
  NetSpec spec;
  spec.input_width = input_width;
  spec.hidden = hidden;
  spec.dropout_p = dropout;
  spec.head = HeadKind::Linear;
  return spec;
}

}  // namespace

TEST_CASE("default architecture is three 256-wide blocks") {
  NetSpec spec;
  spec.input_width = 40;
  Net net = Net::make(spec, 1);
  REQUIRE(net.dense.size() == 4);  // 3 blocks + head
  REQUIRE(net.bnorm.size() == 3);
  CHECK(net.dense[0].W.rows() == 40);
  for (int l = 0; l < 3; ++l) {
    CHECK(net.dense[l].W.cols() == 256);
    CHECK(net.bnorm[l].gamma.size() == 256);
  }
  CHECK(net.dense[3].W.cols() == 1);
  CHECK(spec.dropout_p == 0.5);
  CHECK(spec.leaky_slope == 0.01);
}

TEST_CASE("55 factor embeddings widen the core input to 880") {
  EmbeddingSpec emb;
  int col = 0;
  for (int f = 0; f < 55; ++f) {
    emb.factor_names.push_back("F" + std::to_string(f));
    emb.factor_columns.push_back({col, col + 1, col + 2});
    col += 3;
  }
  NetSpec spec;
  spec.input_width = col;
  spec.embedding = emb;
  CHECK(spec.core_input_width() == 880);
  Net net = Net::make(spec, 0);
  CHECK(net.embed.size() == 55);
  CHECK(net.embed[0].W.cols() == 16);
  CHECK(net.dense[0].W.rows() == 880);
}

TEST_CASE("zeroed head with relu gives all-zero predictions") {
  NetSpec spec = small_spec(3);
  spec.head = HeadKind::Relu;
  NetD net = NetD::make(spec, 7);
  net.dense.back().W.setZero();
  net.dense.back().b.setZero();
  Rng rng(1);
  MatX<double> X = random_matrix<double>(5, 3, rng);
  CHECK(net.predict(X).isZero(0.0));
}

TEST_CASE("constant batch leaves only the batchnorm shift") {
  BatchNormLayer<double> bn;
  bn.init(4, 0.9, 1e-5);
  bn.beta = VecX<double>::LinSpaced(4, 1.0, 4.0);
  MatX<double> x = MatX<double>::Ones(6, 4) * 2.5;
  MatX<double> out = bn.forward(x, NetMode::Train);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) CHECK(out(i, j) == bn.beta(j));
}

TEST_CASE("leaky relu slope is 0.01 on the negative side") {
  NetSpec spec = small_spec(1, 1);
  spec.n_blocks = 1;
  NetD net = NetD::make(spec, 0);
  net.dense[0].W(0, 0) = 1.0;
  net.dense[0].b.setZero();
  net.dense[1].W(0, 0) = 1.0;
  net.dense[1].b.setZero();
  MatX<double> x(1, 1);
  x << -1.0;
  // eval mode normalizes with running stats (mean 0, var 1)
  CHECK(net.predict(x)(0) == doctest::Approx(-0.01).epsilon(1e-3));
  x << 2.0;
  CHECK(net.predict(x)(0) == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("perfect predictions give zero gradients") {
  NetSpec spec = small_spec(3);
  NetD net = NetD::make(spec, 3);
  for (auto& d : net.dense) {
    d.W.setZero();
    d.b.setZero();
  }
  for (auto& bn : net.bnorm) bn.beta.setZero();
  Rng rng(4), drop(5);
  MatX<double> X = random_matrix<double>(4, 3, rng);
  VecX<double> y = VecX<double>::Zero(4);
  VecX<double> pred = net.forward(X, NetMode::Train, &drop);
  CHECK(net.backward(pred, y) == 0.0);
  for (auto& r : net.tensors())
    for (Eigen::Index i = 0; i < r.size; ++i) CHECK(r.grad[i] == 0.0);
}

TEST_CASE("dense layer gradient matches the matrix-calculus formula") {
  DenseLayer<double> layer;
  Rng rng(9);
  layer.init(2, 1, 1.0, rng);
  MatX<double> X(3, 2);
  X << 1, 2, 3, 4, 5, 6;
  VecX<double> y(3);
  y << 1, -1, 0;
  MatX<double> pred = layer.forward(X);
  MatX<double> d = (2.0 / 3.0) * (pred.col(0) - y);
  layer.backward(d);
  MatX<double> expected = X.transpose() * ((2.0 / 3.0) * (pred.col(0) - y));
  CHECK((layer.dW - expected).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(layer.db(0) == doctest::Approx(d.sum()).epsilon(1e-12));
}

TEST_CASE("analytic gradients match finite differences, plain net") {
  NetSpec spec = small_spec(4, 6);
  NetD net = NetD::make(spec, 11);
  Rng rng(12), drop(13);
  MatX<double> X = random_matrix<double>(8, 4, rng);
  VecX<double> y = random_matrix<double>(8, 1, rng);
  // give the running stats some history so the eval path is nontrivial
  net.forward(X, NetMode::Train, &drop);
  check_gradients(net, X, y, NetMode::Eval);
  // train mode (dropout off) checks the batch-statistics backward path
  check_gradients(net, X, y, NetMode::Train);
}

TEST_CASE("analytic gradients match finite differences, embedding net and relu head") {
  EmbeddingSpec emb;
  emb.factor_names = {"A", "B"};
  emb.factor_columns = {{0, 1, 2}, {3, 4}};
  emb.embed_dim = 4;
  NetSpec spec = small_spec(5, 6);
  spec.embedding = emb;
  spec.head = HeadKind::Relu;
  NetD net = NetD::make(spec, 21);
  Rng rng(22);
  MatX<double> X = random_matrix<double>(8, 5, rng);
  // keep targets near the positive branch so the relu head stays informative
  VecX<double> y = random_matrix<double>(8, 1, rng).array() + 2.0;
  check_gradients(net, X, y, NetMode::Train);
}

TEST_CASE("embedding with zero projections emits the biases") {
  EmbeddingSpec emb;
  emb.factor_names = {"A", "B"};
  emb.factor_columns = {{0, 1}, {2}};
  emb.embed_dim = 3;
  NetSpec spec = small_spec(3);
  spec.embedding = emb;
  NetD net = NetD::make(spec, 2);
  for (auto& e : net.embed) e.W.setZero();
  net.embed[0].b << 1, 2, 3;
  net.embed[1].b << 4, 5, 6;
  Rng rng(3);
  MatX<double> out = net.embed_forward(random_matrix<double>(2, 3, rng));
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 6; ++j) CHECK(out(i, j) == doctest::Approx(j + 1.0));
  }
}

TEST_CASE("identity-padded projections pass inputs through") {
  EmbeddingSpec emb;
  emb.factor_names = {"A", "B"};
  emb.factor_columns = {{0, 1, 2}, {3, 4}};
  emb.embed_dim = 16;
  NetSpec spec = small_spec(5);
  spec.embedding = emb;
  NetD net = NetD::make(spec, 2);
  for (auto& e : net.embed) {
    e.W.setZero();
    e.b.setZero();
    for (int i = 0; i < e.W.rows(); ++i) e.W(i, i) = 1.0;
  }
  Rng rng(6);
  MatX<double> X = random_matrix<double>(3, 5, rng);
  MatX<double> out = net.embed_forward(X);
  REQUIRE(out.cols() == 32);
  for (int i = 0; i < 3; ++i) {
    CHECK(out(i, 0) == X(i, 0));
    CHECK(out(i, 2) == X(i, 2));
    CHECK(out(i, 16) == X(i, 3));
    CHECK(out(i, 17) == X(i, 4));
    CHECK(out(i, 3) == 0.0);
  }
}

TEST_CASE("train-mode preconditions") {
  NetSpec spec = small_spec(2, 4, 0.5);
  NetD net = NetD::make(spec, 0);
  Rng rng(1);
  MatX<double> one = random_matrix<double>(1, 2, rng);
  MatX<double> batch = random_matrix<double>(4, 2, rng);
  CHECK_THROWS_AS(net.forward(one, NetMode::Train, &rng), ValidationError);
  CHECK_THROWS_AS(net.forward(batch, NetMode::Train, nullptr), ValidationError);
  MatX<double> wrong = random_matrix<double>(4, 3, rng);
  CHECK_THROWS_AS(net.forward(wrong, NetMode::Eval), ValidationError);
}

TEST_CASE("dropout masks are inverted and train-only") {
  NetSpec spec = small_spec(3, 50, 0.5);
  NetD net = NetD::make(spec, 8);
  Rng data_rng(9), drop(10);
  MatX<double> X = random_matrix<double>(64, 3, data_rng);
  net.forward(X, NetMode::Train, &drop);
  int zeros = 0, total = 0;
  for (const auto& mask : net.drop_mask) {
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
      // surviving units are scaled by 1/keep so eval needs no rescaling
      CHECK((mask.data()[i] == 0.0 || mask.data()[i] == doctest::Approx(2.0)));
      zeros += mask.data()[i] == 0.0;
      ++total;
    }
  }
  CHECK(static_cast<double>(zeros) / total == doctest::Approx(0.5).epsilon(0.05));
  // eval mode applies no mask
  net.forward(X, NetMode::Eval);
  for (const auto& mask : net.drop_mask) CHECK(mask.size() == 0);
}

TEST_CASE("training memorizes a small noiseless linear task") {
  Rng rng(31);
  MatX<float> X = random_matrix<float>(32, 3, rng);
  VecX<float> y = X * VecX<float>::LinSpaced(3, 0.5f, 1.5f);
  NetSpec spec;
  spec.input_width = 3;
  spec.hidden = 64;
  spec.dropout_p = 0.0;
  spec.head = HeadKind::Linear;
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.max_epochs = 12000;
  cfg.early_stop_patience = 12000;
  cfg.learning_rate = 0.0002;
  cfg.seed = 5;
  TrainedNet trained = train_net<float>(X, y, spec, cfg);
  Net net = trained.net;
  VecX<float> pred = net.forward(X, NetMode::Eval);
  double mse = (pred - y).squaredNorm() / 32;
  CHECK(mse < 1e-3);
}

TEST_CASE("pure-noise targets exhaust patience") {
  Rng rng(41);
  MatX<float> X = random_matrix<float>(40, 4, rng);
  VecX<float> y = random_matrix<float>(40, 1, rng);
  NetSpec spec;
  spec.input_width = 4;
  spec.hidden = 8;
  spec.head = HeadKind::Linear;
  TrainConfig cfg;
  cfg.max_epochs = 400;
  cfg.early_stop_patience = 40;
  cfg.batch_size = 8;
  cfg.seed = 6;
  TrainedNet trained = train_net<float>(X, y, spec, cfg);
  CHECK(trained.stopped_reason == StopReason::Patience);
  CHECK(trained.best_epoch < static_cast<int>(trained.val_history.size()));
  CHECK(trained.best_val_mse ==
        doctest::Approx(trained.val_history[trained.best_epoch - 1]).epsilon(1e-12));
}

TEST_CASE("training is bitwise deterministic in the seed") {
  Rng rng(51);
  MatX<float> X = random_matrix<float>(30, 3, rng);
  VecX<float> y = random_matrix<float>(30, 1, rng);
  NetSpec spec;
  spec.input_width = 3;
  spec.hidden = 8;
  TrainConfig cfg;
  cfg.max_epochs = 30;
  cfg.early_stop_patience = 30;
  cfg.batch_size = 8;
  cfg.seed = 77;
  TrainedNet a = train_net<float>(X, y, spec, cfg);
  TrainedNet b = train_net<float>(X, y, spec, cfg);
  auto ta = a.net.tensors(), tb = b.net.tensors();
  REQUIRE(ta.size() == tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i)
    for (Eigen::Index j = 0; j < ta[i].size; ++j) CHECK(ta[i].data[j] == tb[i].data[j]);
  CHECK(a.val_history == b.val_history);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.val_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("checkpoints round trip through blob and manifest") {
  namespace fs = std::filesystem;
  NetSpec spec = small_spec(4, 6);
  EmbeddingSpec emb;
  emb.factor_names = {"A", "B"};
  emb.factor_columns = {{0, 1}, {2, 3}};
  emb.embed_dim = 3;
  spec.embedding = emb;
  Net net = Net::make(spec, 123);
  // leave nontrivial running statistics behind
  Rng rng(1), drop(2);
  MatX<float> X = random_matrix<float>(8, 4, rng);
  net.forward(X, NetMode::Train, &drop);

  fs::path dir = fs::temp_directory_path() / "sb_ckpt_test";
  fs::create_directories(dir);
  std::string blob = (dir / "net.bin").string(), manifest = (dir / "net.json").string();
  TrainConfig cfg;
  save_checkpoint(net, cfg, 42, blob, manifest);
  Net back = load_checkpoint(blob, manifest);
  CHECK((back.predict(X) - net.predict(X)).norm() == 0.0f);

  // truncated blob is detected
  fs::resize_file(blob, fs::file_size(blob) / 2);
  CHECK_THROWS_AS(load_checkpoint(blob, manifest), Error);
  fs::remove_all(dir);
}
