#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "sparsebench/tree_models.hpp"

using namespace sparsebench;

namespace {

// Exhaustive split search used as the oracle: try every feature and every
// midpoint between consecutive sorted unique values, same tie-break rule.
SplitChoice brute_force_split(const Matrix& X, const Vector& y, const std::vector<int>& samples,
                              const std::vector<int>& features, int min_leaf) {
  SplitChoice best;
  double total_mean = 0.0;
  for (int s : samples) total_mean += y(s);
  total_mean /= samples.size();
  double total_sse = 0.0;
  for (int s : samples) total_sse += (y(s) - total_mean) * (y(s) - total_mean);

  for (int f : features) {
    std::vector<double> vals;
    for (int s : samples) vals.push_back(X(s, f));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      double thr = (vals[i] + vals[i + 1]) / 2.0;
      std::vector<int> left, right;
      for (int s : samples) (X(s, f) <= thr ? left : right).push_back(s);
      if (static_cast<int>(left.size()) < min_leaf || static_cast<int>(right.size()) < min_leaf)
        continue;
      auto sse = [&](const std::vector<int>& part) {
        double m = 0.0;
        for (int s : part) m += y(s);
        m /= part.size();
        double out = 0.0;
        for (int s : part) out += (y(s) - m) * (y(s) - m);
        return out;
      };
      double reduction = total_sse - sse(left) - sse(right);
      bool better = reduction > best.sse_reduction + 1e-12;
      bool tie = std::abs(reduction - best.sse_reduction) <= 1e-12;
      if (reduction > 1e-12 &&
          (!best.valid || better ||
           (tie && (f < best.feature || (f == best.feature && thr < best.threshold))))) {
        best = {true, f, thr, reduction};
      }
    }
  }
  return best;
}

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix X(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) X(i, j) = rng.normal();
  return X;
}

}  // namespace

TEST_CASE("best_split matches exhaustive search on random nodes") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 4 + static_cast<int>(rng.below(17));   // up to 20 samples
    int d = 1 + static_cast<int>(rng.below(3));    // up to 3 features
    Matrix X = random_matrix(n, d, rng);
    // quantize some features to force ties
    if (trial % 3 == 0)
      for (int i = 0; i < n; ++i) X(i, 0) = std::round(X(i, 0));
    Vector y = random_matrix(n, 1, rng);
    std::vector<int> samples, features;
    for (int i = 0; i < n; ++i) samples.push_back(i);
    for (int f = 0; f < d; ++f) features.push_back(f);
    int min_leaf = 1 + static_cast<int>(rng.below(3));

    SplitChoice got = best_split(X, y, samples, features, min_leaf);
    SplitChoice want = brute_force_split(X, y, samples, features, min_leaf);
    CHECK(got.valid == want.valid);
    if (got.valid) {
      CHECK(got.feature == want.feature);
      CHECK(got.threshold == doctest::Approx(want.threshold).epsilon(1e-12));
      CHECK(got.sse_reduction == doctest::Approx(want.sse_reduction).epsilon(1e-9));
    }
  }
}

TEST_CASE("constant target yields no split") {
  Matrix X = Matrix::Random(10, 2);
  Vector y = Vector::Constant(10, 3.0);
  std::vector<int> samples{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  CHECK(!best_split(X, y, samples, {0, 1}, 1).valid);
}

TEST_CASE("depth-0 forest predicts the bootstrap mean everywhere") {
  Rng rng(5);
  Matrix X = random_matrix(20, 2, rng);
  Vector y = random_matrix(20, 1, rng);
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.max_depth = 0;
  EnsembleFit ens = fit_random_forest(X, y, cfg, 3);
  Vector pred = predict(ens, X);
  for (int i = 1; i < 20; ++i) CHECK(pred(i) == pred(0));
  CHECK(pred(0) >= y.minCoeff());
  CHECK(pred(0) <= y.maxCoeff());
}

TEST_CASE("pure target trains to zero error") {
  Matrix X = Matrix::Random(15, 2);
  Vector y = Vector::Constant(15, -2.0);
  ForestConfig cfg;
  cfg.n_trees = 10;
  EnsembleFit ens = fit_random_forest(X, y, cfg, 1);
  Vector pred = predict(ens, X);
  CHECK((pred.array() + 2.0).abs().maxCoeff() == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("depth-1 forest nails a step function") {
  Rng rng(21);
  Matrix X(200, 1);
  Vector y(200);
  for (int i = 0; i < 200; ++i) {
    X(i, 0) = rng.uniform(-1.0, 1.0);
    y(i) = X(i, 0) > 0 ? 1.0 : 0.0;
  }
  ForestConfig cfg;
  cfg.n_trees = 50;
  cfg.max_depth = 1;
  EnsembleFit ens = fit_random_forest(X, y, cfg, 9);
  Vector pred = predict(ens, X);
  CHECK(std::sqrt((pred - y).squaredNorm() / 200) < 0.05);
}

TEST_CASE("forest averages its trees") {
  RegressionTree t1, t2;
  t1.nodes = {{true, 1.0, -1, 0.0, -1, -1}};
  t2.nodes = {{true, 3.0, -1, 0.0, -1, -1}};
  EnsembleFit ens;
  ens.kind = EnsembleKind::RandomForest;
  ens.trees = {t1, t2};
  ens.n_cols = 1;
  Matrix X = Matrix::Zero(2, 1);
  Vector pred = predict(ens, X);
  CHECK(pred(0) == 2.0);
  CHECK(pred(1) == 2.0);
}

TEST_CASE("gradient boosting composes base + lr * tree sum") {
  RegressionTree t;
  t.nodes = {{true, 10.0, -1, 0.0, -1, -1}};
  EnsembleFit ens;
  ens.kind = EnsembleKind::GradientBoosting;
  ens.trees = {t};
  ens.base_prediction = 5.0;
  ens.learning_rate = 0.1;
  ens.n_cols = 1;
  Vector pred = predict(ens, Matrix::Zero(1, 1));
  CHECK(pred(0) == doctest::Approx(6.0));
}

TEST_CASE("one full-rate boosting stage memorizes small noiseless data") {
  Matrix X(6, 1);
  X << 0, 1, 2, 3, 4, 5;
  Vector y(6);
  y << 3, 1, 4, 1, 5, 9;
  BoostConfig cfg;
  cfg.n_trees = 1;
  cfg.learning_rate = 1.0;
  cfg.max_depth = 10;
  EnsembleFit ens = fit_gradient_boosting(X, y, cfg, 0);
  Vector pred = predict(ens, X);
  CHECK((pred - y).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("invalid ensemble configs are rejected") {
  Matrix X = Matrix::Random(10, 2);
  Vector y = Vector::Random(10);
  BoostConfig bad;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(fit_gradient_boosting(X, y, bad, 0), ValidationError);
  ForestConfig none;
  none.n_trees = 0;
  CHECK_THROWS_AS(fit_random_forest(X, y, none, 0), ValidationError);
  BoostConfig zero;
  zero.n_trees = 0;
  CHECK_THROWS_AS(fit_gradient_boosting(X, y, zero, 0), ValidationError);
}

TEST_CASE("boosting training mse never increases across 100 stages") {
  Rng rng(33);
  Matrix X = random_matrix(120, 4, rng);
  Vector y(120);
  for (int i = 0; i < 120; ++i)
    y(i) = std::sin(X(i, 0)) + 0.5 * X(i, 1) * X(i, 2) + 0.1 * rng.normal();
  BoostConfig cfg;
  cfg.n_trees = 100;
  EnsembleFit ens = fit_gradient_boosting(X, y, cfg, 77);
  auto mse = gb_stagewise_mse(ens, X, y);
  REQUIRE(mse.size() == 100);
  for (std::size_t i = 1; i < mse.size(); ++i) CHECK(mse[i] <= mse[i - 1] + 1e-12);
  CHECK(mse.back() < mse.front());
}

TEST_CASE("fits are deterministic in the seed") {
  Rng rng(55);
  Matrix X = random_matrix(60, 3, rng);
  Vector y = random_matrix(60, 1, rng);
  ForestConfig cfg;
  cfg.n_trees = 20;
  cfg.max_features = 2;
  Vector a = predict(fit_random_forest(X, y, cfg, 9), X);
  Vector b = predict(fit_random_forest(X, y, cfg, 9), X);
  Vector c = predict(fit_random_forest(X, y, cfg, 10), X);
  CHECK((a - b).norm() == 0.0);
  CHECK((a - c).norm() > 0.0);  // different seed, different bootstraps
}

TEST_CASE("ensembles survive a json round trip") {
  Rng rng(8);
  Matrix X = random_matrix(40, 3, rng);
  Vector y = random_matrix(40, 1, rng);
  ForestConfig fc;
  fc.n_trees = 5;
  BoostConfig bc;
  bc.n_trees = 5;
  for (auto ens : {fit_random_forest(X, y, fc, 2), fit_gradient_boosting(X, y, bc, 2)}) {
    EnsembleFit back = ensemble_from_json_text(ensemble_to_json_text(ens, "cols"));
    CHECK(back.kind == ens.kind);
    CHECK((predict(back, X) - predict(ens, X)).norm() == 0.0);
  }
}
