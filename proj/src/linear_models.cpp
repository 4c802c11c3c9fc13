#include "sparsebench/linear_models.hpp"

#include <cmath>

#include <Eigen/QR>
#include <json.hpp>

namespace sparsebench {

namespace {

void check_shapes(const Matrix& X, const Vector& y) {
  if (X.rows() != y.size() || X.rows() < 1)
    throw ValidationError("fit requires rows(X) == len(y) >= 1");
}

struct Centered {
  Matrix X;
  Vector y;
  Vector x_mean;
  double y_mean;
};

Centered center(const Matrix& X, const Vector& y) {
  Centered c;
  c.x_mean = X.colwise().mean();
  c.y_mean = y.mean();
  c.X = X.rowwise() - c.x_mean.transpose();
  c.y = y.array() - c.y_mean;
  return c;
}

double intercept_from(const Centered& c, const Vector& beta) {
  return c.y_mean - c.x_mean.dot(beta);
}

}  // namespace

LinearFit fit_ols(const Matrix& X, const Vector& y) {
  check_shapes(X, y);
  Centered c = center(X, y);
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(c.X);
  LinearFit fit;
  fit.coefficients = cod.solve(c.y);
  fit.intercept = intercept_from(c, fit.coefficients);
  fit.penalty = Penalty::None;
  return fit;
}

LinearFit fit_ridge(const Matrix& X, const Vector& y, double lambda) {
  check_shapes(X, y);
  if (lambda < 0) throw ValidationError("ridge lambda must be >= 0");
  if (lambda == 0) {
    LinearFit fit = fit_ols(X, y);
    fit.penalty = Penalty::L2;
    return fit;
  }
  Centered c = center(X, y);
  const Eigen::Index p = X.cols();
  Matrix A = c.X.transpose() * c.X + lambda * Matrix::Identity(p, p);
  Vector b = c.X.transpose() * c.y;
  LinearFit fit;
  fit.coefficients = A.ldlt().solve(b);
  fit.intercept = intercept_from(c, fit.coefficients);
  fit.lambda = lambda;
  fit.penalty = Penalty::L2;
  return fit;
}

double lasso_lambda_max(const Matrix& X, const Vector& y) {
  Centered c = center(X, y);
  const double n = static_cast<double>(X.rows());
  return (c.X.transpose() * c.y).cwiseAbs().maxCoeff() / n;
}

LinearFit fit_lasso(const Matrix& X, const Vector& y, double lambda, double tol, int max_iter) {
  check_shapes(X, y);
  if (lambda < 0) throw ValidationError("lasso lambda must be >= 0");
  if (tol <= 0) throw ValidationError("lasso tol must be > 0");
  Centered c = center(X, y);
  const Eigen::Index n = X.rows(), p = X.cols();
  const double dn = static_cast<double>(n);

  Vector col_sq(p);  // (1/n) ||x_j||^2
  for (Eigen::Index j = 0; j < p; ++j) col_sq(j) = c.X.col(j).squaredNorm() / dn;

  Vector beta = Vector::Zero(p);
  Vector residual = c.y;  // y - X beta, centered

  auto soft = [](double z, double g) { return std::copysign(std::max(std::abs(z) - g, 0.0), z); };

  LinearFit fit;
  fit.lambda = lambda;
  fit.penalty = Penalty::L1;
  fit.converged = false;
  auto objective = [&]() { return residual.squaredNorm() / (2.0 * dn) + lambda * beta.lpNorm<1>(); };
  double prev_obj = objective();
  int sweep = 0;
  for (; sweep < max_iter; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (col_sq(j) == 0.0) continue;  // constant column after centering
      double old = beta(j);
      double rho = c.X.col(j).dot(residual) / dn + col_sq(j) * old;
      double updated = soft(rho, lambda) / col_sq(j);
      if (updated != old) {
        residual -= (updated - old) * c.X.col(j);
        max_delta = std::max(max_delta, std::abs(updated - old));
        beta(j) = updated;
      }
    }
    double obj = objective();
    if (obj > prev_obj + 1e-8 * (1.0 + std::abs(prev_obj)))
      throw Error("lasso objective increased during sweep " + std::to_string(sweep));
    prev_obj = obj;
    if (max_delta < tol) {
      fit.converged = true;
      ++sweep;
      break;
    }
  }
  fit.iterations = sweep;
  fit.coefficients = beta;
  fit.intercept = intercept_from(c, beta);
  return fit;
}

Vector predict(const LinearFit& fit, const Matrix& X) {
  if (X.cols() != fit.coefficients.size())
    throw ValidationError("prediction column count mismatch");
  return (X * fit.coefficients).array() + fit.intercept;
}

std::string linear_fit_to_json_text(const LinearFit& fit, const std::string& column_digest) {
  nlohmann::json doc;
  doc["penalty"] = fit.penalty == Penalty::None ? "None" : fit.penalty == Penalty::L2 ? "L2" : "L1";
  doc["lambda"] = fit.lambda;
  doc["intercept"] = fit.intercept;
  doc["coefficients"] = std::vector<double>(fit.coefficients.data(), fit.coefficients.data() + fit.coefficients.size());
  doc["column_meta_digest"] = column_digest;
  return doc.dump() + "\n";
}

LinearFit linear_fit_from_json_text(const std::string& text) {
  auto doc = nlohmann::json::parse(text);
  LinearFit fit;
  std::string pen = doc.at("penalty").get<std::string>();
  fit.penalty = pen == "None" ? Penalty::None : pen == "L2" ? Penalty::L2 : Penalty::L1;
  fit.lambda = doc.at("lambda").get<double>();
  fit.intercept = doc.at("intercept").get<double>();
  auto coefs = doc.at("coefficients").get<std::vector<double>>();
  fit.coefficients = Eigen::Map<Vector>(coefs.data(), static_cast<Eigen::Index>(coefs.size()));
  return fit;
}

}  // namespace sparsebench
