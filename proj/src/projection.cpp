#include "sparsebench/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sparsebench {

namespace {

Matrix pairwise_sq_dist(const Matrix& X) {
  const Eigen::Index n = X.rows();
  Vector sq = X.rowwise().squaredNorm();
  Matrix d = (-2.0 * X * X.transpose()).colwise() + sq;
  d.rowwise() += sq.transpose();
  d.diagonal().setZero();
  return d.cwiseMax(0.0);
}

}  // namespace

Matrix joint_probabilities(const Matrix& X, double perplexity, double entropy_tol) {
  const Eigen::Index n = X.rows();
  if (n < 4) throw ValidationError("t-SNE needs at least 4 points");
  // entropy of a point's neighbor distribution is bounded by log(n-1)
  if (perplexity <= 1.0 || perplexity >= static_cast<double>(n - 1))
    throw ValidationError("perplexity infeasible for " + std::to_string(n) + " points");

  const Matrix d2 = pairwise_sq_dist(X);
  const double target_entropy = std::log(perplexity);  // nats
  Matrix cond = Matrix::Zero(n, n);

  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
    // shift by the nearest-neighbor distance so large beta cannot underflow
    // the whole row (ties then saturate at a uniform distribution)
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, d2(i, j));
    Vector p(n);
    for (int iter = 0; iter < 200; ++iter) {
      double sum = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        p(j) = j == i ? 0.0 : std::exp(-beta * (d2(i, j) - dmin));
        sum += p(j);
      }
      // H = log(sum) + beta * E[d2 - dmin]
      double h = 0.0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (p(j) > 0) h += p(j) * (d2(i, j) - dmin);
      h = std::log(sum) + beta * h / sum;
      double diff = h - target_entropy;
      if (std::abs(diff) < entropy_tol) break;
      if (diff > 0) {  // entropy too high -> sharpen
        beta_lo = beta;
        beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta_lo + beta_hi);
      } else {
        beta_hi = beta;
        beta = 0.5 * (beta_lo + beta_hi);
      }
    }
    double sum = p.sum();
    for (Eigen::Index j = 0; j < n; ++j) cond(i, j) = p(j) / sum;
  }

  Matrix P = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
  P = P.cwiseMax(1e-12);
  P.diagonal().setZero();
  return P;
}

Matrix tsne(const Matrix& X, const TsneConfig& cfg, TsneDiagnostics* diag) {
  const Eigen::Index n = X.rows();
  Matrix P = joint_probabilities(X, cfg.perplexity, cfg.entropy_tol);
  if (diag) diag->P = P;

  Rng rng(derive_seed(cfg.seed, "tsne_init"));
  Matrix Y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int k = 0; k < 2; ++k) Y(i, k) = 1e-4 * rng.normal();

  Matrix inc = Matrix::Zero(n, 2);
  Matrix gains = Matrix::Ones(n, 2);

  for (int iter = 1; iter <= cfg.n_iter; ++iter) {
    const double exag = iter <= cfg.exaggeration_iters ? cfg.early_exaggeration : 1.0;
    const double momentum = iter <= cfg.momentum_switch_iter ? cfg.momentum_initial : cfg.momentum_final;

    // Student-t kernel in the plane.
    Matrix num(n, n);
    double q_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      num(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        double d2 = (Y.row(i) - Y.row(j)).squaredNorm();
        double v = 1.0 / (1.0 + d2);
        num(i, j) = num(j, i) = v;
        q_sum += 2.0 * v;
      }
    }

    Matrix grad = Matrix::Zero(n, 2);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        double mult = (exag * P(i, j) - num(i, j) / q_sum) * num(i, j);
        grad.row(i) += 4.0 * mult * (Y.row(i) - Y.row(j));
      }

    for (Eigen::Index i = 0; i < n; ++i)
      for (int k = 0; k < 2; ++k) {
        bool same_dir = (grad(i, k) > 0) == (inc(i, k) > 0);
        gains(i, k) = same_dir ? std::max(gains(i, k) * 0.8, 0.01) : gains(i, k) + 0.2;
        inc(i, k) = momentum * inc(i, k) - cfg.learning_rate * gains(i, k) * grad(i, k);
      }
    Y += inc;
    Y.rowwise() -= Y.colwise().mean();

    if (diag) {
      double kl = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          if (i == j || P(i, j) <= 0) continue;
          double q = std::max(num(i, j) / q_sum, 1e-12);
          kl += P(i, j) * std::log(P(i, j) / q);
        }
      diag->kl_history.push_back(kl);
    }
  }
  return Y;
}

std::map<std::string, std::vector<double>> factor_vectors(const FactorRanking& ranking) {
  std::map<std::string, std::vector<double>> sums;
  std::map<std::string, int> counts;
  for (const auto& r : ranking.results) {
    if (r.failed || r.embedding_vector.empty()) continue;
    auto& acc = sums[r.factor];
    if (acc.empty()) acc.assign(r.embedding_vector.size(), 0.0);
    if (acc.size() != r.embedding_vector.size())
      throw ValidationError("inconsistent embedding width for factor '" + r.factor + "'");
    for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += r.embedding_vector[d];
    counts[r.factor]++;
  }
  if (sums.empty()) throw ValidationError("no successful factor runs");
  for (auto& [factor, acc] : sums)
    for (auto& v : acc) v /= counts[factor];
  return sums;
}

std::vector<AtlasEntry> build_atlas(const Codebook& cb, const FactorRanking& ranking,
                                    const TsneConfig& cfg) {
  auto vectors = factor_vectors(ranking);

  // Codebook factor order defines atlas indices (Table-style numbering).
  std::vector<std::string> names;
  for (const auto& f : cb.factors())
    if (vectors.count(f.name)) names.push_back(f.name);

  Matrix X(static_cast<Eigen::Index>(names.size()), 16);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& v = vectors.at(names[i]);
    for (int d = 0; d < 16; ++d) X(static_cast<Eigen::Index>(i), d) = v[d];
  }
  Matrix Y = tsne(X, cfg);

  std::vector<AtlasEntry> atlas;
  for (std::size_t i = 0; i < names.size(); ++i) {
    AtlasEntry e;
    e.index = static_cast<int>(i) + 1;
    e.factor = names[i];
    e.project = cb.factor_project(names[i]);
    e.x = Y(static_cast<Eigen::Index>(i), 0);
    e.y = Y(static_cast<Eigen::Index>(i), 1);
    auto it = ranking.inverse_rank.find(names[i]);
    e.inverse_rank = it == ranking.inverse_rank.end() ? 0.0 : it->second;
    atlas.push_back(std::move(e));
  }
  return atlas;
}

std::string atlas_to_csv(const std::vector<AtlasEntry>& atlas) {
  std::ostringstream out;
  out << "index,factor,project,x,y,inverse_rank\n";
  for (const auto& e : atlas)
    out << e.index << ',' << e.factor << ',' << to_string(e.project) << ',' << e.x << ',' << e.y
        << ',' << e.inverse_rank << '\n';
  return out.str();
}

}  // namespace sparsebench
