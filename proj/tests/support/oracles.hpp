#pragma once

// Reference implementations written independently of the library code:
// naive loops, dense matrices and brute-force enumeration.

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Dense = Eigen::MatrixXd;

/// -log(sum(exp(z))) by direct summation, no max shift.
inline double energy(const std::vector<double>& z) {
  long double sum = 0.0L;
  for (double v : z) sum += std::exp(static_cast<long double>(v));
  return -static_cast<double>(std::log(sum));
}

inline double cross_entropy(const std::vector<double>& z, int label) {
  long double sum = 0.0L;
  for (double v : z) sum += std::exp(static_cast<long double>(v));
  return static_cast<double>(std::log(sum)) - z[static_cast<std::size_t>(label)];
}

inline double hinge(double x) { return x > 0.0 ? x : 0.0; }

/// Dense D^{-1/2}(A+I)D^{-1/2} built entry by entry.
inline Dense normalized_adjacency(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  Dense a = Dense::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (auto [u, v] : edges) {
    a(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) = 1.0;
    a(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u)) = 1.0;
  }
  Dense out = a;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out(i, j) = a(i, j) / std::sqrt(a.row(i).sum() * a.row(j).sum());
    }
  }
  return out;
}

/// P(ood > ind) + 0.5 P(ood == ind) over every (ood, ind) pair.
inline double auroc(const std::vector<double>& scores, const std::vector<bool>& is_ood) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!is_ood[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (is_ood[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

/// Walks every distinct threshold from the top, recomputing precision and
/// recall from scratch at each one, and sums recall steps times precision.
inline double aupr(const std::vector<double>& scores, const std::vector<bool>& is_ood) {
  std::set<double, std::greater<>> thresholds(scores.begin(), scores.end());
  double positives = 0.0;
  for (bool b : is_ood) positives += b ? 1.0 : 0.0;
  double area = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) (is_ood[i] ? tp : fp) += 1.0;
    }
    const double recall = tp / positives;
    area += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
  }
  return area;
}

/// Tries every IND score as a threshold and keeps the smallest one that
/// accepts at least `tpr` of IND scores.
inline double fpr_at_tpr(const std::vector<double>& scores, const std::vector<bool>& is_ood, double tpr) {
  double n_ind = 0.0, n_ood = 0.0;
  for (bool b : is_ood) (b ? n_ood : n_ind) += 1.0;
  double best = INFINITY;
  for (std::size_t t = 0; t < scores.size(); ++t) {
    if (is_ood[t]) continue;
    double accepted = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (!is_ood[i] && scores[i] <= scores[t]) accepted += 1.0;
    }
    if (accepted / n_ind >= tpr) best = std::min(best, scores[t]);
  }
  double fp = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (is_ood[i] && scores[i] <= best) fp += 1.0;
  }
  return fp / n_ood;
}

struct DenseParams {
  Dense wp, w1, w2;
  Eigen::VectorXd bp, b1, b2, gamma, beta, mean, var;
  double eps = 1e-5;
};

/// Eval-mode forward with dense algebra and explicit loops for BN and ReLU.
inline Dense forward_eval(const DenseParams& p, const Dense& h, const Dense& adj) {
  Dense x = h * p.wp;
  x.rowwise() += p.bp.transpose();
  Dense z1 = adj * x * p.w1;
  z1.rowwise() += p.b1.transpose();
  for (Eigen::Index i = 0; i < z1.rows(); ++i) {
    for (Eigen::Index j = 0; j < z1.cols(); ++j) {
      const double bn = p.gamma[j] * (z1(i, j) - p.mean[j]) / std::sqrt(p.var[j] + p.eps) + p.beta[j];
      z1(i, j) = bn > 0.0 ? bn : 0.0;
    }
  }
  Dense z2 = adj * z1 * p.w2;
  z2.rowwise() += p.b2.transpose();
  return z2;
}

/// One Adam step on a scalar from zero moments.
inline double adam_first_step(double theta, double g, double lr, double wd, double b1, double b2, double eps) {
  const double grad = g + wd * theta;
  const double m = (1.0 - b1) * grad;
  const double v = (1.0 - b2) * grad * grad;
  const double m_hat = m / (1.0 - b1);
  const double v_hat = v / (1.0 - b2);
  return theta - lr * m_hat / (std::sqrt(v_hat) + eps);
}

}  // namespace oracle
