#include "lect/energy.hpp"

#include <algorithm>
#include <cmath>

namespace lect {

double energy(std::span<const double> logits) {
  if (logits.empty()) throw Error("energy: empty logits");
  const double max = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(max)) throw NonFiniteError("energy: non-finite logits");
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max);
  return -(max + std::log(sum));
}

Vector energies(const Matrix& logits) {
  Vector out(logits.rows());
  std::vector<double> row(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index c = 0; c < logits.cols(); ++c) row[static_cast<std::size_t>(c)] = logits(i, c);
    out[i] = energy(row);
  }
  return out;
}

Matrix energy_grad_to_logits(const Matrix& logits, const Vector& grad_energy) {
  if (grad_energy.size() != logits.rows()) throw Error("energy gradient size does not match logits");
  Matrix out = Matrix::Zero(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (grad_energy[i] == 0.0) continue;
    const double max = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - max).exp().matrix();
    out.row(i) = -grad_energy[i] * e / e.sum();
  }
  return out;
}

double calibrate_tau(std::span<const double> ind_val_energies, double target_tpr) {
  if (ind_val_energies.empty()) throw Error("calibrate_tau: no validation energies");
  if (!(target_tpr > 0.0 && target_tpr <= 1.0)) throw Error("calibrate_tau: target TPR must lie in (0, 1]");
  std::vector<double> sorted(ind_val_energies.begin(), ind_val_energies.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  // k = ceil(tpr * n), guarded against representation error in tpr * n.
  auto k = static_cast<std::size_t>(std::ceil(target_tpr * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

std::vector<Decision> detect(std::span<const double> energies, const Detector& detector) {
  std::vector<Decision> out;
  out.reserve(energies.size());
  for (double e : energies) out.push_back(detector.decide(e));
  return out;
}

}  // namespace lect
