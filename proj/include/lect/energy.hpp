#pragma once

#include <span>
#include <vector>

#include "lect/common.hpp"

namespace lect {

/// -logsumexp(logits), computed as -(max + log sum exp(z - max)).
double energy(std::span<const double> logits);

/// Per-row energies of a logits matrix.
Vector energies(const Matrix& logits);

/// Chain rule through the energy: dE_i/dz_ic = -softmax(z_i)_c, so the
/// logit gradient is -grad_energy_i * softmax(z_i).
Matrix energy_grad_to_logits(const Matrix& logits, const Vector& grad_energy);

/// Smallest observed energy e with fraction(energies <= e) >= target_tpr.
double calibrate_tau(std::span<const double> ind_val_energies, double target_tpr = 0.95);

enum class Decision { Ind, Ood };

/// Energy <= tau is IND, energy > tau is OOD.
struct Detector {
  double tau = 0.0;
  Decision decide(double e) const { return e <= tau ? Decision::Ind : Decision::Ood; }
};

std::vector<Decision> detect(std::span<const double> energies, const Detector& detector);

}  // namespace lect
