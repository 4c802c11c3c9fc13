#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "sparsebench/linear_models.hpp"

using namespace sparsebench;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix X(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) X(i, j) = rng.normal();
  return X;
}

// Normal-equations oracle on centered data, intercept recovered afterwards.
std::pair<Vector, double> normal_equations(const Matrix& X, const Vector& y, double lambda = 0.0) {
  Vector xm = X.colwise().mean();
  double ym = y.mean();
  Matrix Xc = X.rowwise() - xm.transpose();
  Vector yc = y.array() - ym;
  Matrix A = Xc.transpose() * Xc + lambda * Matrix::Identity(X.cols(), X.cols());
  Vector beta = A.ldlt().solve(Xc.transpose() * yc);
  return {beta, ym - beta.dot(xm)};
}

}  // namespace

TEST_CASE("ols recovers an exact line") {
  Matrix X(3, 1);
  X << 1, 2, 3;
  Vector y(3);
  y << 2, 4, 6;
  LinearFit fit = fit_ols(X, y);
  CHECK(fit.coefficients(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  Vector pred = predict(fit, X);
  CHECK((pred - y).norm() == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
}

TEST_CASE("constant target gives zero slope") {
  Matrix X(4, 2);
  X << 1, 0, 2, 1, 3, 5, 4, 2;
  Vector y = Vector::Constant(4, 7.5);
  LinearFit fit = fit_ols(X, y);
  CHECK(fit.coefficients.norm() == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  CHECK(fit.intercept == doctest::Approx(7.5));
}

TEST_CASE("ols matches the normal-equations oracle on 20 random systems") {
  Rng rng(314);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix X = random_matrix(50, 5, rng);
    Vector y = random_matrix(50, 1, rng);
    LinearFit fit = fit_ols(X, y);
    auto [beta, b0] = normal_equations(X, y);
    CHECK((fit.coefficients - beta).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK(std::abs(fit.intercept - b0) < 1e-8);
  }
}

TEST_CASE("rank-deficient system resolves to the minimum-norm solution") {
  Rng rng(99);
  Matrix X(30, 3);
  for (int i = 0; i < 30; ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal();
    X(i, 2) = X(i, 0);  // exact duplicate column
  }
  Vector y(30);
  for (int i = 0; i < 30; ++i) y(i) = 3.0 * X(i, 0) + X(i, 1) + 0.01 * rng.normal();
  LinearFit fit = fit_ols(X, y);
  // duplicated columns share the weight in the min-norm solution
  CHECK(fit.coefficients(0) == doctest::Approx(fit.coefficients(2)).epsilon(1e-8));
  // and predictions still match the reduced full-rank fit
  LinearFit reduced = fit_ols(X.leftCols(2), y);
  Vector p1 = predict(fit, X);
  Vector p2 = predict(reduced, X.leftCols(2));
  CHECK((p1 - p2).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("ridge matches the closed form") {
  Rng rng(2718);
  Matrix X = random_matrix(20, 3, rng);
  Vector y = random_matrix(20, 1, rng);
  LinearFit fit = fit_ridge(X, y, 1.0);
  auto [beta, b0] = normal_equations(X, y, 1.0);
  CHECK((fit.coefficients - beta).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK(std::abs(fit.intercept - b0) < 1e-8);

  // lambda=0 degenerates to OLS
  LinearFit r0 = fit_ridge(X, y, 0.0);
  LinearFit ols = fit_ols(X, y);
  CHECK((r0.coefficients - ols.coefficients).lpNorm<Eigen::Infinity>() < 1e-8);

  // enormous lambda shrinks everything away
  LinearFit big = fit_ridge(X, y, 1e12);
  CHECK(big.coefficients.norm() < 1e-6);
  CHECK(big.intercept == doctest::Approx(y.mean()));

  CHECK_THROWS_AS(fit_ridge(X, y, -1.0), ValidationError);
}

TEST_CASE("lasso at zero penalty matches ols") {
  Rng rng(42);
  Matrix X = random_matrix(40, 4, rng);
  Vector y = X * Vector::LinSpaced(4, 1.0, 2.5) + 0.1 * random_matrix(40, 1, rng);
  LinearFit lasso = fit_lasso(X, y, 0.0, 1e-10, 50000);
  LinearFit ols = fit_ols(X, y);
  CHECK((lasso.coefficients - ols.coefficients).lpNorm<Eigen::Infinity>() < 1e-4);
  CHECK(lasso.converged);
}

TEST_CASE("lasso kills every coefficient at lambda_max") {
  Rng rng(7);
  Matrix X = random_matrix(30, 5, rng);
  Vector y = random_matrix(30, 1, rng);
  double lmax = lasso_lambda_max(X, y);
  for (double lambda : {lmax, 2 * lmax}) {
    LinearFit fit = fit_lasso(X, y, lambda);
    CHECK(fit.coefficients.isZero(0.0));
    CHECK(fit.intercept == doctest::Approx(y.mean()));
  }
  // just below lambda_max something survives
  LinearFit below = fit_lasso(X, y, 0.9 * lmax);
  CHECK(below.coefficients.lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("single-feature lasso equals the scalar soft threshold") {
  Matrix X(2, 1);
  X << 1, -1;
  Vector y(2);
  y << 1, -1;
  // x'y/n = 1, x'x/n = 1, so beta = S(1, lambda); lambda=0.5 halves the OLS slope
  LinearFit fit = fit_lasso(X, y, 0.5);
  CHECK(fit.coefficients(0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(fit.intercept == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("lasso objective fixture with known solution") {
  // Orthonormal-ish design: each coordinate solves independently, so the
  // solution is the soft threshold of each OLS coordinate.
  int n = 64;
  Matrix X(n, 2);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = (i % 2 ? 1.0 : -1.0);
    X(i, 1) = (i / 2 % 2 ? 1.0 : -1.0);
  }
  Vector y = X.col(0) * 2.0 + X.col(1) * 0.3;
  LinearFit fit = fit_lasso(X, y, 0.5);
  CHECK(fit.coefficients(0) == doctest::Approx(1.5).epsilon(1e-8));
  CHECK(fit.coefficients(1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));
}

TEST_CASE("lasso flags non-convergence instead of failing") {
  Rng rng(5);
  Matrix X = random_matrix(25, 8, rng);
  Vector y = random_matrix(25, 1, rng);
  LinearFit fit = fit_lasso(X, y, 0.01, 1e-14, 2);
  CHECK(!fit.converged);
  CHECK(fit.iterations == 2);
}

TEST_CASE("fits survive a json round trip") {
  Rng rng(6);
  Matrix X = random_matrix(15, 3, rng);
  Vector y = random_matrix(15, 1, rng);
  for (auto fit : {fit_ols(X, y), fit_ridge(X, y, 2.0), fit_lasso(X, y, 0.1)}) {
    std::string text = linear_fit_to_json_text(fit, "digest123");
    LinearFit back = linear_fit_from_json_text(text);
    CHECK((back.coefficients - fit.coefficients).norm() == 0.0);
    CHECK(back.intercept == fit.intercept);
    CHECK(back.penalty == fit.penalty);
    CHECK(back.lambda == fit.lambda);
  }
}

TEST_CASE("shape mismatches are rejected") {
  Matrix X(3, 2);
  X.setOnes();
  Vector y(4);
  y.setZero();
  CHECK_THROWS_AS(fit_ols(X, y), ValidationError);
  LinearFit fit = fit_ols(Matrix::Identity(3, 3), Vector::Ones(3));
  Matrix wrong(2, 2);
  wrong.setZero();
  CHECK_THROWS_AS(predict(fit, wrong), ValidationError);
}
