#pragma once

#include <string>
#include <vector>

#include "sparsebench/common.hpp"

namespace sparsebench {

struct PairedTestResult {
  std::string model_a;
  std::string model_b;
  double t = 0.0;
  int dof = 0;
  double p_raw = 1.0;
  double p_corrected = 1.0;
  bool zero_variance = false;  // reported, excluded from the correction family
};

struct AnovaResult {
  double rss_reduced = 0.0;
  double rss_full = 0.0;
  int df_reduced = 0;
  int df_full = 0;
  double f_stat = 0.0;
  int df_num = 0;
  int df_den = 0;
  double p = 1.0;
};

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double reg_inc_beta(double a, double b, double x);

// Two-sided tail helpers.
double student_t_cdf(double t, int dof);
double student_t_two_sided_p(double t, int dof);
double f_tail_p(double f, int df_num, int df_den);

// Paired two-sided t-test on matched vectors; sample-sd (n-1) convention.
// Throws ZeroVariance error when all differences are identical.
std::tuple<double, int, double> paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

// Holm's step-down correction; output travels with the input order.
std::vector<double> holm_bonferroni(const std::vector<double>& p_values);

// One paired test per unordered model pair over per-task mean RMSEs;
// correction applied jointly across all non-degenerate pairs.
// task_means: per model name, the per-task mean RMSE vector (same task order).
std::vector<PairedTestResult> ttest_matrix(const std::vector<std::string>& model_names,
                                           const std::vector<std::vector<double>>& task_means);

struct SparsityRecord {
  std::string model;
  double sparsity = 0.0;
  double abs_error = 0.0;
};

// Nested-regression F-test: intercept + model dummies + sparsity, against the
// same plus model x sparsity interaction terms. Response is the per-sample
// absolute error.
AnovaResult sparsity_anova(const std::vector<SparsityRecord>& records);

std::string ttest_results_to_csv(const std::vector<PairedTestResult>& results);
std::string anova_to_json_text(const AnovaResult& r);

// Kolmogorov-Smirnov one-sample test against U(0,1); asymptotic p-value.
double ks_uniform_pvalue(std::vector<double> samples);

}  // namespace sparsebench
