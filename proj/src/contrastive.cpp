#include "lect/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "lect/energy.hpp"

namespace lect {

void LossWeights::validate() const {
  if (!(gamma >= 0.0)) throw Error("loss weights: gamma must be >= 0");
  if (!(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda_mean >= 0.0)) {
    throw Error("loss weights: lambdas must be >= 0");
  }
  if (!(gamma_mean >= 0.0)) throw Error("loss weights: gamma_mean must be >= 0");
}

std::vector<LinkedPair> sample_linked_pairs(std::span<const Edge> pseudo_edges, std::size_t count,
                                            Rng& rng) {
  if (pseudo_edges.empty()) throw Error("sample_linked_pairs: no pseudo edges");
  std::vector<std::size_t> order(pseudo_edges.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t k = std::min(count, order.size());
  for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[i + rng.uniform_index(order.size() - i)]);
  std::vector<LinkedPair> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const Edge& e = pseudo_edges[order[i]];
    out.push_back({e.u, e.v});
  }
  return out;
}

std::vector<Edge> restrict_edges(std::span<const Edge> edges, std::span<const NodeId> nodes) {
  const std::set<NodeId> keep(nodes.begin(), nodes.end());
  std::vector<Edge> out;
  for (const Edge& e : edges) {
    if (keep.contains(e.u) && keep.contains(e.v)) out.push_back(e);
  }
  return out;
}

namespace {

std::map<NodeId, std::vector<NodeId>> neighbor_map(std::span<const Edge> edges) {
  std::map<NodeId, std::set<NodeId>> sets;
  for (const Edge& e : edges) {
    if (e.u == e.v) continue;
    sets[e.u].insert(e.v);
    sets[e.v].insert(e.u);
  }
  std::map<NodeId, std::vector<NodeId>> out;
  for (auto& [k, s] : sets) out[k] = std::vector<NodeId>(s.begin(), s.end());
  return out;
}

}  // namespace

std::size_t count_available_triplets(std::span<const Edge> ind_edges, std::span<const Edge> pseudo_edges) {
  const auto nbrs = neighbor_map(ind_edges);
  std::size_t total = 0;
  for (const Edge& e : pseudo_edges) {
    if (auto it = nbrs.find(e.u); it != nbrs.end()) total += it->second.size();
  }
  return total;
}

std::vector<Triplet> sample_triplets(std::span<const Edge> ind_edges, std::span<const Edge> pseudo_edges,
                                     std::size_t count, Rng& rng) {
  if (count == 0) return {};
  const auto nbrs = neighbor_map(ind_edges);
  std::vector<std::pair<const Edge*, const std::vector<NodeId>*>> eligible;
  std::size_t available = 0;
  for (const Edge& e : pseudo_edges) {
    if (auto it = nbrs.find(e.u); it != nbrs.end()) {
      eligible.emplace_back(&e, &it->second);
      available += it->second.size();
    }
  }
  if (eligible.empty()) throw Error("sample_triplets: no center has both an IND and a pseudo neighbor");

  std::vector<Triplet> out;
  if (count >= available) {
    for (const auto& [edge, list] : eligible) {
      for (NodeId i : *list) out.push_back({i, edge->u, edge->v});
    }
    return out;
  }
  std::set<Triplet> seen;
  out.reserve(count);
  while (out.size() < count) {
    const auto& [edge, list] = eligible[rng.uniform_index(eligible.size())];
    const Triplet t{(*list)[rng.uniform_index(list->size())], edge->u, edge->v};
    if (seen.insert(t).second) out.push_back(t);
  }
  return out;
}

namespace {
void require_node(const Vector& energies, NodeId n, const char* who) {
  if (n >= static_cast<std::size_t>(energies.size())) {
    throw Error(std::string(who) + ": node " + std::to_string(n) + " has no energy");
  }
}
}  // namespace

EnergyLoss loss_ind_ood(std::span<const LinkedPair> pairs, const Vector& energies, double gamma) {
  EnergyLoss out{0.0, Vector::Zero(energies.size())};
  if (pairs.empty()) return out;
  const double w = 1.0 / static_cast<double>(pairs.size());
  for (const auto& p : pairs) {
    require_node(energies, p.ind, "loss_ind_ood");
    require_node(energies, p.pseudo, "loss_ind_ood");
    const auto i = static_cast<Eigen::Index>(p.ind), j = static_cast<Eigen::Index>(p.pseudo);
    const double h = gamma - (energies[j] - energies[i]);
    if (h > 0.0) {
      out.value += w * h;
      out.grad[i] += w;
      out.grad[j] -= w;
    }
  }
  return out;
}

EnergyLoss loss_mean_constraint(std::span<const NodeId> ind_nodes, std::span<const NodeId> ood_nodes,
                                const Vector& energies, double gamma_mean) {
  EnergyLoss out{0.0, Vector::Zero(energies.size())};
  if (ind_nodes.empty() || ood_nodes.empty()) return out;
  double mean_ind = 0.0, mean_ood = 0.0;
  for (NodeId n : ind_nodes) {
    require_node(energies, n, "loss_mean_constraint");
    mean_ind += energies[static_cast<Eigen::Index>(n)];
  }
  for (NodeId n : ood_nodes) {
    require_node(energies, n, "loss_mean_constraint");
    mean_ood += energies[static_cast<Eigen::Index>(n)];
  }
  mean_ind /= static_cast<double>(ind_nodes.size());
  mean_ood /= static_cast<double>(ood_nodes.size());
  const double h = gamma_mean - (mean_ood - mean_ind);
  if (h > 0.0) {
    out.value = h;
    for (NodeId n : ind_nodes) out.grad[static_cast<Eigen::Index>(n)] += 1.0 / static_cast<double>(ind_nodes.size());
    for (NodeId n : ood_nodes) out.grad[static_cast<Eigen::Index>(n)] -= 1.0 / static_cast<double>(ood_nodes.size());
  }
  return out;
}

EnergyLoss loss_triplet(std::span<const Triplet> triplets, const Vector& energies) {
  EnergyLoss out{0.0, Vector::Zero(energies.size())};
  if (triplets.empty()) return out;
  const double w = 1.0 / static_cast<double>(triplets.size());
  for (const auto& t : triplets) {
    require_node(energies, t.neighbor, "loss_triplet");
    require_node(energies, t.center, "loss_triplet");
    require_node(energies, t.pseudo, "loss_triplet");
    const auto i = static_cast<Eigen::Index>(t.neighbor);
    const auto c = static_cast<Eigen::Index>(t.center);
    const auto j = static_cast<Eigen::Index>(t.pseudo);
    const double diff = energies[i] - energies[c];
    const double h = std::abs(diff) - (energies[j] - energies[c]);
    if (h > 0.0) {
      const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      out.value += w * h;
      out.grad[i] += w * sign;
      out.grad[c] += w * (1.0 - sign);
      out.grad[j] -= w;
    }
  }
  return out;
}

LogitLoss loss_supervised(const Matrix& logits, std::span<const NodeId> nodes, std::span<const int> labels) {
  if (nodes.size() != labels.size()) throw Error("loss_supervised: nodes and labels differ in length");
  LogitLoss out{0.0, Matrix::Zero(logits.rows(), logits.cols())};
  if (nodes.empty()) return out;
  const double w = 1.0 / static_cast<double>(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(nodes[k]);
    if (i >= logits.rows()) throw Error("loss_supervised: node " + std::to_string(nodes[k]) + " has no logits");
    if (labels[k] < 0 || labels[k] >= logits.cols()) {
      throw Error("loss_supervised: label " + std::to_string(labels[k]) + " out of range [0, " +
                  std::to_string(logits.cols()) + ")");
    }
    const double max = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - max).exp().matrix();
    const double sum = e.sum();
    out.value += w * (max + std::log(sum) - logits(i, labels[k]));
    out.grad.row(i) = w * e / sum;
    out.grad(i, labels[k]) -= w;
  }
  return out;
}

double combine_losses(const LossBreakdown& p, const LossWeights& w) {
  const double mean = w.mean_constraint ? w.lambda_mean * p.mean : 0.0;
  return p.sup + w.lambda1 * (p.pairs + mean) + w.lambda2 * p.triplet;
}

TotalLoss loss_total(const LossComponents& c, const Matrix& logits, const LossWeights& w) {
  const std::pair<const char*, double> named[] = {
      {"l_sup", c.sup.value}, {"l_pairs", c.pairs.value}, {"l_mean", c.mean.value}, {"l_triplet", c.triplet.value}};
  for (const auto& [name, value] : named) {
    if (!std::isfinite(value)) throw NonFiniteError(std::string("loss component ") + name + " is not finite");
  }
  TotalLoss out;
  out.parts = {c.sup.value, c.pairs.value, c.mean.value, c.triplet.value, 0.0};
  out.parts.total = combine_losses(out.parts, w);

  Vector grad_energy = Vector::Zero(logits.rows());
  auto add = [&](const EnergyLoss& l, double scale) {
    if (l.grad.size() == 0 || scale == 0.0) return;
    if (l.grad.size() != logits.rows()) throw Error("loss_total: energy gradient size mismatch");
    grad_energy += scale * l.grad;
  };
  add(c.pairs, w.lambda1);
  if (w.mean_constraint) add(c.mean, w.lambda1 * w.lambda_mean);
  add(c.triplet, w.lambda2);

  out.grad_logits = c.sup.grad.size() == 0 ? Matrix::Zero(logits.rows(), logits.cols()) : c.sup.grad;
  if (out.grad_logits.rows() != logits.rows() || out.grad_logits.cols() != logits.cols()) {
    throw Error("loss_total: supervised gradient shape mismatch");
  }
  out.grad_logits += energy_grad_to_logits(logits, grad_energy);
  return out;
}

}  // namespace lect
