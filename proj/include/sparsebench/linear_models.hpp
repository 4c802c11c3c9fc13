#pragma once

#include "sparsebench/common.hpp"

namespace sparsebench {

enum class Penalty { None, L2, L1 };

struct LinearFit {
  Vector coefficients;
  double intercept = 0.0;
  double lambda = 0.0;
  Penalty penalty = Penalty::None;
  bool converged = true;
  int iterations = 0;
};

// Least squares with intercept; rank-deficient systems resolve to the
// minimum-norm solution.
LinearFit fit_ols(const Matrix& X, const Vector& y);

// Minimizes ||y - Xb - b0||^2 + lambda * ||b||^2, intercept unpenalized.
LinearFit fit_ridge(const Matrix& X, const Vector& y, double lambda);

// Cyclic coordinate descent on (1/2n) ||y - Xb - b0||^2 + lambda * ||b||_1.
// converged=false when max_iter sweeps are exhausted (not an error).
LinearFit fit_lasso(const Matrix& X, const Vector& y, double lambda, double tol = 1e-7,
                    int max_iter = 10000);

// Smallest lambda at which lasso shrinks every coefficient to zero.
double lasso_lambda_max(const Matrix& X, const Vector& y);

Vector predict(const LinearFit& fit, const Matrix& X);

std::string linear_fit_to_json_text(const LinearFit& fit, const std::string& column_digest = "");
LinearFit linear_fit_from_json_text(const std::string& text);

}  // namespace sparsebench
