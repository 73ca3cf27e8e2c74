#include <doctest.h>

#include <algorithm>
#include <set>

#include "lect/graph.hpp"
#include "lect/rng.hpp"
#include "support/oracles.hpp"

using namespace lect;

namespace {

TextAttributedGraph ten_nodes() {
  std::vector<std::string> texts(10, "t");
  std::vector<std::optional<int>> labels = {0, 0, 0, 1, 1, 1, 2, 2, 2, 2};
  return TextAttributedGraph(texts, labels, {{0, 1}, {3, 4}, {6, 7}}, 3);
}

/// Random graph with some unlabeled nodes and duplicate/reversed edges.
TextAttributedGraph random_graph(Rng& rng, int classes) {
  const std::size_t n = 8 + rng.uniform_index(40);
  std::vector<std::string> texts(n, "x");
  std::vector<std::optional<int>> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < static_cast<std::size_t>(classes)) labels[i] = static_cast<int>(i);
    else if (!rng.bernoulli(0.1)) labels[i] = static_cast<int>(rng.uniform_index(classes));
  }
  std::vector<Edge> edges;
  for (std::size_t k = 0; k < 3 * n; ++k) {
    const NodeId a = rng.uniform_index(n), b = rng.uniform_index(n);
    if (a != b) edges.push_back({a, b});
  }
  return TextAttributedGraph(texts, labels, edges, classes);
}

}  // namespace

TEST_CASE("build_split counts on a 10-node graph") {
  const SplitSpec spec{{2}, 0.5, 0.25, 7};
  const NodeSplit s = build_split(ten_nodes(), spec);
  CHECK(s.test_ood_idx.size() == 4);
  CHECK(s.train_idx.size() == 3);
  CHECK(s.num_ind_classes == 2);
  CHECK(s == build_split(ten_nodes(), spec));
}

TEST_CASE("build_split rejects degenerate class choices") {
  CHECK_THROWS_WITH_AS(build_split(ten_nodes(), {{0, 1, 2}, 0.6, 0.2, 0}), doctest::Contains("no IND classes remain"),
                       Error);
  const TextAttributedGraph empty_class({"a", "b", "c"}, {0, 0, 1}, {}, 3);
  CHECK_THROWS_WITH_AS(build_split(empty_class, {{1}, 0.5, 0.25, 0}), doctest::Contains("zero nodes"), Error);
}

TEST_CASE("build_split partitions labeled nodes and remaps densely") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int classes = 2 + static_cast<int>(rng.uniform_index(4));
    const TextAttributedGraph g = random_graph(rng, classes);
    SplitSpec spec;
    spec.ood_classes = {static_cast<int>(rng.uniform_index(classes))};
    spec.train_fraction = rng.uniform(0.2, 0.6);
    spec.val_fraction = rng.uniform(0.05, 0.3);
    spec.seed = rng.next();
    const NodeSplit s = build_split(g, spec);

    std::multiset<NodeId> all;
    for (const auto* part : {&s.train_idx, &s.val_idx, &s.test_ind_idx, &s.test_ood_idx}) {
      all.insert(part->begin(), part->end());
    }
    std::multiset<NodeId> labeled;
    std::size_t ind = 0;
    for (NodeId i = 0; i < g.node_count(); ++i) {
      if (!g.labels()[i]) continue;
      labeled.insert(i);
      const bool is_ood = spec.ood_classes.contains(*g.labels()[i]);
      ind += is_ood ? 0 : 1;
      CHECK((std::find(s.test_ood_idx.begin(), s.test_ood_idx.end(), i) != s.test_ood_idx.end()) == is_ood);
    }
    REQUIRE(all == labeled);
    CHECK(s.train_idx.size() == static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(ind))));

    std::set<int> seen;
    for (NodeId i : s.train_idx) seen.insert(s.ind_labels[i]);
    for (NodeId i : s.val_idx) seen.insert(s.ind_labels[i]);
    for (NodeId i : s.test_ind_idx) seen.insert(s.ind_labels[i]);
    for (int c : seen) CHECK((c >= 0 && c < s.num_ind_classes));
    CHECK(s.num_ind_classes == classes - 1);
    CHECK(s == build_split(g, spec));
  }
}

TEST_CASE("normalized adjacency examples") {
  const Matrix none = Matrix(normalized_adjacency(2, {}));
  CHECK(none.isApprox(Matrix::Identity(2, 2)));
  const std::vector<Edge> one = {{0, 1}};
  const Matrix a = Matrix(normalized_adjacency(2, one));
  const oracle::Dense ref = oracle::normalized_adjacency(2, {{0, 1}});
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(a(i, j) == doctest::Approx(0.5).epsilon(1e-15));
      CHECK(a(i, j) == doctest::Approx(ref(i, j)).epsilon(1e-15));
    }
  }
  CHECK_THROWS_AS(normalized_adjacency(2, std::vector<Edge>{{0, 2}}), Error);
}

TEST_CASE("normalized adjacency matches the dense oracle and is symmetric") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(15);
    std::vector<Edge> edges;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t k = 0; k < 2 * n; ++k) {
      const NodeId a = rng.uniform_index(n), b = rng.uniform_index(n);
      if (a == b) continue;
      // Either orientation; duplicates allowed.
      edges.push_back(rng.bernoulli(0.5) ? Edge{a, b} : Edge{b, a});
      pairs.emplace_back(a, b);
    }
    const Matrix a = Matrix(normalized_adjacency(n, edges));
    const oracle::Dense ref = oracle::normalized_adjacency(n, pairs);
    CHECK((a - ref).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double v = a.data()[i];
      CHECK((v == 0.0 || (v > 0.0 && v <= 1.0)));
    }
  }
}

TEST_CASE("graph loader canonicalizes and names the bad record") {
  nlohmann::json doc = {{"nodes",
                         {{{"id", 0}, {"text", "a"}, {"label", 0}},
                          {{"id", 1}, {"text", "b"}, {"label", nullptr}},
                          {{"id", 2}, {"text", "c"}, {"label", 1}}}},
                        {"edges", {{1, 0}, {0, 1}, {2, 1}}},
                        {"num_classes", 2}};
  const TextAttributedGraph g = graph_from_json(doc);
  CHECK(g.edges() == std::vector<Edge>{{0, 1}, {1, 2}});
  CHECK_FALSE(g.labels()[1].has_value());
  CHECK(graph_from_json(graph_to_json(g)).content_hash() == g.content_hash());

  auto bad = doc;
  bad["edges"].push_back({0, 9});
  CHECK_THROWS_WITH_AS(graph_from_json(bad), doctest::Contains("edges[3]"), Error);
  bad = doc;
  bad["nodes"][2]["label"] = 5;
  CHECK_THROWS_WITH_AS(graph_from_json(bad), doctest::Contains("nodes[2]"), Error);
}

TEST_CASE("homophily counts labeled edges only") {
  const TextAttributedGraph g({"a", "b", "c", "d"}, {0, 0, 1, std::nullopt}, {{0, 1}, {1, 2}, {2, 3}}, 2);
  CHECK(g.homophily() == doctest::Approx(0.5));
}
