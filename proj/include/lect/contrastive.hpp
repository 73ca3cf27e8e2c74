#pragma once

#include <span>
#include <vector>

#include "lect/common.hpp"
#include "lect/graph.hpp"
#include "lect/rng.hpp"

namespace lect {

struct LinkedPair {
  NodeId ind = 0;
  NodeId pseudo = 0;
  auto operator<=>(const LinkedPair&) const = default;
};

/// (IND neighbor v_i, IND center v_c, pseudo neighbor v_j).
struct Triplet {
  NodeId neighbor = 0;
  NodeId center = 0;
  NodeId pseudo = 0;
  auto operator<=>(const Triplet&) const = default;
};

struct LossWeights {
  double gamma = 1.0;
  double lambda1 = 0.1;
  double lambda2 = 0.1;
  double lambda_mean = 0.01;
  double gamma_mean = 1.0;
  bool mean_constraint = true;

  void validate() const;
};

/// Uniform sample without replacement of min(count, |E_o|) pseudo edges,
/// given as (ind, pseudo) pairs.
std::vector<LinkedPair> sample_linked_pairs(std::span<const Edge> pseudo_edges, std::size_t count,
                                            Rng& rng);

/// Edges whose endpoints both lie in `nodes`.
std::vector<Edge> restrict_edges(std::span<const Edge> edges, std::span<const NodeId> nodes);

/// Number of distinct triplets obtainable from the given edge sets.
std::size_t count_available_triplets(std::span<const Edge> ind_edges,
                                     std::span<const Edge> pseudo_edges);

/// Picks a pseudo edge (v_c, v_j) uniformly among those whose center has an
/// IND neighbor in ind_edges, then one such neighbor v_i uniformly; repeats
/// without duplicates until min(count, available) triplets are drawn.
std::vector<Triplet> sample_triplets(std::span<const Edge> ind_edges,
                                     std::span<const Edge> pseudo_edges, std::size_t count,
                                     Rng& rng);

/// A scalar loss and its gradient with respect to every node energy.
struct EnergyLoss {
  double value = 0.0;
  Vector grad;
};

/// A scalar loss and its gradient with respect to the logits.
struct LogitLoss {
  double value = 0.0;
  Matrix grad;
};

/// mean over pairs of max(0, gamma - (E_pseudo - E_ind)).
EnergyLoss loss_ind_ood(std::span<const LinkedPair> pairs, const Vector& energies, double gamma);

/// max(0, gamma_mean - (mean E[ood] - mean E[ind])); zero if either set is empty.
EnergyLoss loss_mean_constraint(std::span<const NodeId> ind_nodes, std::span<const NodeId> ood_nodes,
                                const Vector& energies, double gamma_mean);

/// mean over triplets of max(0, |E_i - E_c| - (E_j - E_c)).
EnergyLoss loss_triplet(std::span<const Triplet> triplets, const Vector& energies);

/// Mean cross-entropy of logits rows `nodes` against `labels` (same order).
LogitLoss loss_supervised(const Matrix& logits, std::span<const NodeId> nodes,
                          std::span<const int> labels);

struct LossBreakdown {
  double sup = 0.0;
  double pairs = 0.0;
  double mean = 0.0;
  double triplet = 0.0;
  double total = 0.0;
};

struct LossComponents {
  LogitLoss sup;
  EnergyLoss pairs;    // empty grad means "not computed"
  EnergyLoss mean;
  EnergyLoss triplet;
};

/// sup + lambda1 * (pairs + lambda_mean * mean) + lambda2 * triplet.
double combine_losses(const LossBreakdown& parts, const LossWeights& weights);

struct TotalLoss {
  LossBreakdown parts;
  Matrix grad_logits;
};

/// Combines the components and pushes the energy gradients through the
/// energy function onto the logits.
TotalLoss loss_total(const LossComponents& components, const Matrix& logits,
                     const LossWeights& weights);

}  // namespace lect
