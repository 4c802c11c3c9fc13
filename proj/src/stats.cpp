#include "sparsebench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

#include <Eigen/QR>
#include <json.hpp>

namespace sparsebench {

namespace {

// Lentz's continued fraction for the incomplete beta function.
double betacf(double a, double b, double x) {
  const int kMaxIter = 300;
  const double kEps = 3e-16, kFpMin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double reg_inc_beta(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) throw ValidationError("reg_inc_beta requires x in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                    b * std::log(1.0 - x);
  double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, int dof) {
  if (dof < 1) throw ValidationError("t distribution needs dof >= 1");
  double x = dof / (dof + t * t);
  double tail = 0.5 * reg_inc_beta(dof / 2.0, 0.5, x);
  return t >= 0 ? 1.0 - tail : tail;
}

double student_t_two_sided_p(double t, int dof) {
  if (dof < 1) throw ValidationError("t distribution needs dof >= 1");
  return reg_inc_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

double f_tail_p(double f, int df_num, int df_den) {
  if (df_num < 1 || df_den < 1) throw ValidationError("F distribution needs positive dof");
  if (f <= 0) return 1.0;
  return reg_inc_beta(df_den / 2.0, df_num / 2.0, df_den / (df_den + df_num * f));
}

std::tuple<double, int, double> paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw ValidationError("paired t-test needs matched vectors of length >= 2");
  const int n = static_cast<int>(a.size());
  std::vector<double> d(n);
  for (int i = 0; i < n; ++i) d[i] = a[i] - b[i];
  double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  double sd = std::sqrt(ss / (n - 1));  // sample convention
  if (sd == 0.0) throw Error("ZeroVariance");
  double t = mean / (sd / std::sqrt(static_cast<double>(n)));
  int dof = n - 1;
  return {t, dof, student_t_two_sided_p(t, dof)};
}

std::vector<double> holm_bonferroni(const std::vector<double>& p_values) {
  const int m = static_cast<int>(p_values.size());
  for (double p : p_values)
    if (p < 0.0 || p > 1.0) throw ValidationError("p-value outside [0,1]");
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return p_values[i] < p_values[j]; });
  std::vector<double> corrected(m);
  double running = 0.0;
  for (int i = 0; i < m; ++i) {
    double adj = std::min(1.0, (m - i) * p_values[order[i]]);
    running = std::max(running, adj);
    corrected[order[i]] = running;
  }
  return corrected;
}

std::vector<PairedTestResult> ttest_matrix(const std::vector<std::string>& model_names,
                                           const std::vector<std::vector<double>>& task_means) {
  if (model_names.size() != task_means.size() || model_names.size() < 2)
    throw ValidationError("ttest_matrix needs >= 2 models with per-task means");
  const std::size_t n_tasks = task_means[0].size();
  for (const auto& v : task_means)
    if (v.size() != n_tasks) throw ValidationError("task coverage mismatch between models");

  std::vector<PairedTestResult> results;
  std::vector<double> family;
  std::vector<std::size_t> family_index;
  for (std::size_t i = 0; i < model_names.size(); ++i) {
    for (std::size_t j = i + 1; j < model_names.size(); ++j) {
      PairedTestResult r;
      r.model_a = model_names[i];
      r.model_b = model_names[j];
      try {
        auto [t, dof, p] = paired_ttest(task_means[i], task_means[j]);
        r.t = t;
        r.dof = dof;
        r.p_raw = p;
        family.push_back(p);
        family_index.push_back(results.size());
      } catch (const Error&) {
        r.zero_variance = true;
        r.dof = static_cast<int>(n_tasks) - 1;
      }
      results.push_back(std::move(r));
    }
  }
  auto corrected = holm_bonferroni(family);
  for (std::size_t k = 0; k < family_index.size(); ++k)
    results[family_index[k]].p_corrected = corrected[k];
  return results;
}

AnovaResult sparsity_anova(const std::vector<SparsityRecord>& records) {
  std::vector<std::string> levels;
  for (const auto& r : records)
    if (std::find(levels.begin(), levels.end(), r.model) == levels.end()) levels.push_back(r.model);
  const int k = static_cast<int>(levels.size());
  const int n = static_cast<int>(records.size());
  if (k < 2) throw ValidationError("sparsity_anova needs >= 2 model levels");
  bool varies = false;
  for (const auto& r : records)
    if (r.sparsity != records[0].sparsity) varies = true;
  if (!varies) throw Error("SingularDesign");

  const int p_reduced = 1 + (k - 1) + 1;
  const int p_full = p_reduced + (k - 1);
  Matrix Xr = Matrix::Zero(n, p_reduced), Xf = Matrix::Zero(n, p_full);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    const auto& r = records[i];
    int lvl = static_cast<int>(std::find(levels.begin(), levels.end(), r.model) - levels.begin());
    y(i) = r.abs_error;
    Xr(i, 0) = Xf(i, 0) = 1.0;
    if (lvl > 0) Xr(i, lvl) = Xf(i, lvl) = 1.0;
    Xr(i, k) = Xf(i, k) = r.sparsity;
    if (lvl > 0) Xf(i, k + lvl) = r.sparsity;
  }

  auto fit_rss = [&](const Matrix& X) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(X);
    if (cod.rank() < X.cols()) throw Error("SingularDesign");
    Vector beta = cod.solve(y);
    return (y - X * beta).squaredNorm();
  };

  AnovaResult out;
  out.rss_reduced = fit_rss(Xr);
  out.rss_full = fit_rss(Xf);
  out.df_reduced = n - p_reduced;
  out.df_full = n - p_full;
  out.df_num = out.df_reduced - out.df_full;
  out.df_den = out.df_full;
  out.f_stat = ((out.rss_reduced - out.rss_full) / out.df_num) / (out.rss_full / out.df_den);
  out.p = f_tail_p(out.f_stat, out.df_num, out.df_den);
  return out;
}

std::string ttest_results_to_csv(const std::vector<PairedTestResult>& results) {
  std::ostringstream out;
  out << "model_a,model_b,t,dof,p_corrected,zero_variance\n";
  for (const auto& r : results) {
    out << r.model_a << ',' << r.model_b << ',';
    if (r.zero_variance)
      out << ',' << r.dof << ",,true\n";
    else
      out << r.t << ',' << r.dof << ',' << r.p_corrected << ",false\n";
  }
  return out.str();
}

std::string anova_to_json_text(const AnovaResult& r) {
  nlohmann::json doc = {{"rss_reduced", r.rss_reduced}, {"rss_full", r.rss_full},
                        {"df_reduced", r.df_reduced},   {"df_full", r.df_full},
                        {"f_stat", r.f_stat},           {"df_num", r.df_num},
                        {"df_den", r.df_den},           {"p", r.p}};
  return doc.dump(2) + "\n";
}

double ks_uniform_pvalue(std::vector<double> samples) {
  if (samples.empty()) throw ValidationError("KS test needs samples");
  std::sort(samples.begin(), samples.end());
  const int n = static_cast<int>(samples.size());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    d = std::max(d, (i + 1.0) / n - samples[i]);
    d = std::max(d, samples[i] - static_cast<double>(i) / n);
  }
  double sn = std::sqrt(static_cast<double>(n));
  double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k)
    p += 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace sparsebench
