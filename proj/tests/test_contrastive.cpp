#include <doctest.h>

#include <set>

#include "lect/contrastive.hpp"
#include "lect/energy.hpp"
#include "support/oracles.hpp"
#include "support/toy.hpp"

using namespace lect;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

std::vector<Edge> numbered_edges(std::size_t n) {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({i, 1000 + i});
  return out;
}

}  // namespace

TEST_CASE("linked-pair sampling") {
  Rng rng(1);
  const auto edges = numbered_edges(50);
  CHECK(sample_linked_pairs(edges, 300, rng).size() == 50);
  CHECK(sample_linked_pairs(edges, 0, rng).empty());
  Rng a(5), b(5);
  CHECK(sample_linked_pairs(edges, 20, a) == sample_linked_pairs(edges, 20, b));
  CHECK_THROWS_WITH_AS(sample_linked_pairs(std::vector<Edge>{}, 3, rng), doctest::Contains("no pseudo edges"), Error);

  for (int trial = 0; trial < 100; ++trial) {
    const auto s = sample_linked_pairs(edges, 1 + rng.uniform_index(60), rng);
    const std::set<LinkedPair> uniq(s.begin(), s.end());
    CHECK(uniq.size() == s.size());
    for (const auto& p : s) CHECK(p.pseudo == 1000 + p.ind);
  }
}

TEST_CASE("triplet sampling") {
  // Center 0 has IND neighbors 1, 2, 3 and one pseudo neighbor 10; node 5
  // has a pseudo neighbor but no IND neighbor.
  const std::vector<Edge> ind = {{0, 1}, {0, 2}, {0, 3}};
  const std::vector<Edge> pseudo = {{0, 10}, {5, 11}};
  CHECK(count_available_triplets(ind, pseudo) == 3);
  Rng rng(2);
  const auto all = sample_triplets(ind, pseudo, 10, rng);
  CHECK(all.size() == 3);
  for (const auto& t : all) {
    CHECK(t.center == 0);
    CHECK(t.pseudo == 10);
  }
  CHECK(sample_triplets(ind, pseudo, 0, rng).empty());
  const auto two = sample_triplets(ind, pseudo, 2, rng);
  CHECK(std::set<Triplet>(two.begin(), two.end()).size() == 2);
  Rng a(8), b(8);
  CHECK(sample_triplets(ind, pseudo, 2, a) == sample_triplets(ind, pseudo, 2, b));
  CHECK_THROWS_AS(sample_triplets(ind, std::vector<Edge>{{5, 11}}, 2, rng), Error);
}

TEST_CASE("triplet sampling property: every triplet is backed by real edges") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Edge> ind, pseudo;
    std::set<Edge> ind_set;
    for (int k = 0; k < 30; ++k) {
      const NodeId a = rng.uniform_index(15), b = rng.uniform_index(15);
      if (a != b) ind_set.insert(Edge::canonical(a, b));
    }
    ind.assign(ind_set.begin(), ind_set.end());
    for (int k = 0; k < 8; ++k) pseudo.push_back({rng.uniform_index(15), 100 + static_cast<NodeId>(k)});
    if (count_available_triplets(ind, pseudo) == 0) continue;
    const std::size_t want = rng.uniform_index(40);
    const auto ts = sample_triplets(ind, pseudo, want, rng);
    CHECK(ts.size() == std::min(want, count_available_triplets(ind, pseudo)));
    CHECK(std::set<Triplet>(ts.begin(), ts.end()).size() == ts.size());
    for (const auto& t : ts) {
      CHECK(ind_set.contains(Edge::canonical(t.center, t.neighbor)));
      CHECK(std::find(pseudo.begin(), pseudo.end(), Edge{t.center, t.pseudo}) != pseudo.end());
    }
  }
}

TEST_CASE("linked-pair hinge examples") {
  const Vector e = vec({-5, -2});
  CHECK(loss_ind_ood(std::vector<LinkedPair>{{0, 1}}, e, 1.0).value == 0.0);
  CHECK(loss_ind_ood(std::vector<LinkedPair>{{0, 1}}, vec({-2, -2}), 1.0).value == 1.0);
  // (E_i, E_j) = (-3, -2) and (-5, -1)
  const Vector e4 = vec({-3, -2, -5, -1});
  const std::vector<LinkedPair> pairs = {{0, 1}, {2, 3}};
  const double expected = 0.5 * (oracle::hinge(2.0 - (-2.0 + 3.0)) + oracle::hinge(2.0 - (-1.0 + 5.0)));
  CHECK(std::abs(loss_ind_ood(pairs, e4, 2.0).value - 0.5) < 1e-9);
  CHECK(std::abs(loss_ind_ood(pairs, e4, 2.0).value - expected) < 1e-12);
  CHECK_THROWS_AS(loss_ind_ood(std::vector<LinkedPair>{{0, 9}}, e, 1.0), Error);
}

TEST_CASE("mean constraint examples") {
  const std::vector<NodeId> ind = {0, 1}, ood = {2, 3};
  CHECK(loss_mean_constraint(ind, ood, vec({-6, -6, -1, -1}), 1.0).value == 0.0);
  CHECK(loss_mean_constraint(ind, ood, vec({-2, -4, -3, -3}), 1.0).value == 1.0);
  CHECK(loss_mean_constraint(ind, {}, vec({-2, -4, -3, -3}), 1.0).value == 0.0);
}

TEST_CASE("triplet examples") {
  const std::vector<Triplet> t = {{0, 1, 2}};
  CHECK(loss_triplet(t, vec({-5, -5, -2})).value == 0.0);
  CHECK(loss_triplet(t, vec({-4, -6, -6})).value == 2.0);
  CHECK(loss_triplet(t, vec({-1, -1, -1})).value == 0.0);
}

TEST_CASE("supervised loss examples") {
  Matrix z(2, 2);
  z << 1, 0, 0, 1;
  const std::vector<NodeId> nodes = {0, 1};
  const LogitLoss l = loss_supervised(z, nodes, std::vector<int>{0, 1});
  const double each = std::log(1.0 + std::exp(-1.0));
  CHECK(std::abs(l.value - each) < 1e-12);
  CHECK(std::abs(l.value - 0.5 * (oracle::cross_entropy({1, 0}, 0) + oracle::cross_entropy({0, 1}, 1))) < 1e-12);
  CHECK(l.value == doctest::Approx(0.313262).epsilon(1e-6));

  const Matrix flat = Matrix::Zero(3, 5);
  CHECK(std::abs(loss_supervised(flat, std::vector<NodeId>{0, 2}, std::vector<int>{1, 4}).value - std::log(5.0)) <
        1e-12);
  Matrix sat(1, 2);
  sat << 20, -20;
  CHECK(loss_supervised(sat, std::vector<NodeId>{0}, std::vector<int>{0}).value < 1e-8);
  CHECK_THROWS_WITH_AS(loss_supervised(sat, std::vector<NodeId>{0}, std::vector<int>{2}),
                       doctest::Contains("out of range"), Error);
}

TEST_CASE("hinge losses are non-negative, shift-invariant and match scalar oracles") {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 6;
    Vector e(6);
    for (Eigen::Index i = 0; i < 6; ++i) e[i] = rng.uniform(-6, 0);
    std::vector<LinkedPair> pairs;
    std::vector<Triplet> triplets;
    for (int k = 0; k < 5; ++k) {
      pairs.push_back({rng.uniform_index(n), rng.uniform_index(n)});
      triplets.push_back({rng.uniform_index(n), rng.uniform_index(n), rng.uniform_index(n)});
    }
    const double gamma = rng.uniform(0, 3);
    double pair_ref = 0.0, trip_ref = 0.0;
    for (const auto& p : pairs) pair_ref += oracle::hinge(gamma - (e[p.pseudo] - e[p.ind])) / 5.0;
    for (const auto& t : triplets) {
      trip_ref += oracle::hinge(std::abs(e[t.neighbor] - e[t.center]) - (e[t.pseudo] - e[t.center])) / 5.0;
    }
    const double lp = loss_ind_ood(pairs, e, gamma).value;
    const double lt = loss_triplet(triplets, e).value;
    CHECK(std::abs(lp - pair_ref) < 1e-12);
    CHECK(std::abs(lt - trip_ref) < 1e-12);
    CHECK(lp >= 0.0);
    CHECK(lt >= 0.0);
    const Vector shifted = e.array() + rng.uniform(-10, 10);
    CHECK(std::abs(loss_ind_ood(pairs, shifted, gamma).value - lp) < 1e-9);
    CHECK(std::abs(loss_triplet(triplets, shifted).value - lt) < 1e-9);
  }
}

TEST_CASE("pair loss drops strictly when a violating gap widens") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Vector e(4);
    for (Eigen::Index i = 0; i < 4; ++i) e[i] = rng.uniform(-3, 0);
    const std::vector<LinkedPair> pairs = {{0, 1}, {2, 3}};
    const double gamma = 5.0;  // every pair violates
    Vector wider = e;
    wider[1] += 0.1;
    CHECK(loss_ind_ood(pairs, wider, gamma).value < loss_ind_ood(pairs, e, gamma).value);
  }
}

TEST_CASE("energy-loss gradients match finite differences away from kinks") {
  Rng rng(6);
  int checked = 0;
  while (checked < 100) {
    Vector e(6);
    for (Eigen::Index i = 0; i < 6; ++i) e[i] = rng.uniform(-5, 0);
    std::vector<LinkedPair> pairs = {{0, 3}, {1, 4}, {2, 5}};
    std::vector<Triplet> trips = {{0, 1, 4}, {2, 1, 5}};
    const std::vector<NodeId> ind = {0, 1, 2}, ood = {3, 4, 5};
    const double gamma = 1.5;
    bool smooth = true;
    for (const auto& p : pairs) smooth = smooth && std::abs(gamma - (e[p.pseudo] - e[p.ind])) > 1e-3;
    for (const auto& t : trips) {
      smooth = smooth && std::abs(e[t.neighbor] - e[t.center]) > 1e-3 &&
               std::abs(std::abs(e[t.neighbor] - e[t.center]) - (e[t.pseudo] - e[t.center])) > 1e-3;
    }
    if (!smooth) continue;
    ++checked;
    const auto fp = [&](const Vector& x) { return loss_ind_ood(pairs, x, gamma).value; };
    const auto ft = [&](const Vector& x) { return loss_triplet(trips, x).value; };
    const auto fm = [&](const Vector& x) { return loss_mean_constraint(ind, ood, x, 3.0).value; };
    const Vector gp = loss_ind_ood(pairs, e, gamma).grad, gt = loss_triplet(trips, e).grad,
                 gm = loss_mean_constraint(ind, ood, e, 3.0).grad;
    for (Eigen::Index i = 0; i < 6; ++i) {
      Vector up = e, down = e;
      up[i] += 1e-6;
      down[i] -= 1e-6;
      CHECK(std::abs((fp(up) - fp(down)) / 2e-6 - gp[i]) < 1e-6);
      CHECK(std::abs((ft(up) - ft(down)) / 2e-6 - gt[i]) < 1e-6);
      CHECK(std::abs((fm(up) - fm(down)) / 2e-6 - gm[i]) < 1e-6);
    }
  }
}

TEST_CASE("total loss combination") {
  LossComponents c;
  Matrix z = Matrix::Zero(2, 2);
  c.sup = {1.0, Matrix::Zero(2, 2)};
  c.pairs = {1.0, Vector::Zero(2)};
  c.mean = {1.0, Vector::Zero(2)};
  c.triplet = {1.0, Vector::Zero(2)};
  LossWeights w;
  w.mean_constraint = false;
  CHECK(loss_total(c, z, w).parts.total == doctest::Approx(1.2).epsilon(1e-15));
  w.mean_constraint = true;
  CHECK(std::abs(loss_total(c, z, w).parts.total - (1.0 + 0.1 * (1.0 + 0.01) + 0.1)) < 1e-12);
  w.lambda1 = w.lambda2 = 0.0;
  CHECK(loss_total(c, z, w).parts.total == 1.0);

  c.triplet.value = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(loss_total(c, z, w), doctest::Contains("l_triplet"), NonFiniteError);
}

TEST_CASE("total gradient is the weighted sum of component gradients") {
  const toy::Problem p = toy::make_smooth();
  Rng rng(1);
  const ForwardResult fwd = forward(p.params, p.emb, p.adj, Mode::Train, &rng);
  const Vector e = energies(fwd.logits);
  LossComponents c;
  c.sup = loss_supervised(fwd.logits, p.train, p.labels);
  c.pairs = loss_ind_ood(p.pairs, e, p.weights.gamma);
  c.triplet = loss_triplet(p.triplets, e);
  LossWeights w = p.weights;
  w.mean_constraint = false;
  const TotalLoss total = loss_total(c, fwd.logits, w);
  const Matrix expected = c.sup.grad + w.lambda1 * energy_grad_to_logits(fwd.logits, c.pairs.grad) +
                          w.lambda2 * energy_grad_to_logits(fwd.logits, c.triplet.grad);
  CHECK((total.grad_logits - expected).cwiseAbs().maxCoeff() < 1e-14);

  // And the whole objective, through the network, agrees with finite differences.
  const toy::GradCheck check = toy::check_gradients(p);
  CHECK(check.max_rel_error < 1e-4);
}

TEST_CASE("supervised loss never touches nodes outside its set") {
  Rng rng(2);
  Matrix z(6, 3);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.uniform(-2, 2);
  const LogitLoss l = loss_supervised(z, std::vector<NodeId>{0, 2}, std::vector<int>{1, 2});
  for (Eigen::Index r : {1, 3, 4, 5}) CHECK(l.grad.row(r).cwiseAbs().maxCoeff() == 0.0);
}
