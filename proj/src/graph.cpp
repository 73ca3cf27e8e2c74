#include "lect/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "lect/rng.hpp"

namespace lect {

TextAttributedGraph::TextAttributedGraph(std::vector<std::string> texts,
                                         std::vector<std::optional<int>> labels,
                                         std::vector<Edge> edges, int num_classes,
                                         std::vector<std::string> class_names)
    : texts_(std::move(texts)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      class_names_(std::move(class_names)) {
  if (num_classes_ < 1) throw Error("num_classes must be positive");
  if (labels_.size() != texts_.size()) {
    throw Error("texts and labels differ in length (" + std::to_string(texts_.size()) +
                " vs " + std::to_string(labels_.size()) + ")");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] && (*labels_[i] < 0 || *labels_[i] >= num_classes_)) {
      throw Error("node " + std::to_string(i) + ": label " + std::to_string(*labels_[i]) +
                  " out of range [0, " + std::to_string(num_classes_) + ")");
    }
  }
  if (class_names_.empty()) {
    for (int c = 0; c < num_classes_; ++c) class_names_.push_back("class " + std::to_string(c));
  } else if (class_names_.size() != static_cast<std::size_t>(num_classes_)) {
    throw Error("class_names has " + std::to_string(class_names_.size()) +
                " entries, expected " + std::to_string(num_classes_));
  }

  const std::size_t n = texts_.size();
  edges_.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.u >= n || e.v >= n) {
      throw Error("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                  ") references a node outside [0, " + std::to_string(n) + ")");
    }
    if (e.u == e.v) continue;  // self-loops are implied by the normalization
    edges_.push_back(Edge::canonical(e.u, e.v));
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

std::vector<std::vector<NodeId>> TextAttributedGraph::adjacency_lists() const {
  std::vector<std::vector<NodeId>> adj(node_count());
  for (const Edge& e : edges_) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

double TextAttributedGraph::homophily() const {
  std::size_t labeled = 0, same = 0;
  for (const Edge& e : edges_) {
    if (!labels_[e.u] || !labels_[e.v]) continue;
    ++labeled;
    if (*labels_[e.u] == *labels_[e.v]) ++same;
  }
  return labeled == 0 ? 0.0 : static_cast<double>(same) / static_cast<double>(labeled);
}

std::uint64_t TextAttributedGraph::content_hash() const {
  std::uint64_t h = fnv1a64("lect-graph");
  auto mix_u64 = [&h](std::uint64_t x) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((x >> (8 * i)) & 0xff);
    h = fnv1a64(std::string_view(bytes, 8), h);
  };
  mix_u64(texts_.size());
  mix_u64(static_cast<std::uint64_t>(num_classes_));
  for (std::size_t i = 0; i < texts_.size(); ++i) {
    mix_u64(texts_[i].size());
    h = fnv1a64(texts_[i], h);
    mix_u64(labels_[i] ? static_cast<std::uint64_t>(*labels_[i]) : ~0ull);
  }
  for (const Edge& e : edges_) {
    mix_u64(e.u);
    mix_u64(e.v);
  }
  for (const auto& name : class_names_) h = fnv1a64(name + '\n', h);
  return h;
}

std::vector<std::string> NodeSplit::ind_class_names(const TextAttributedGraph& graph) const {
  std::vector<std::string> names(static_cast<std::size_t>(num_ind_classes));
  for (const auto& [original, remapped] : ind_class_remap) {
    names[static_cast<std::size_t>(remapped)] = graph.class_names()[static_cast<std::size_t>(original)];
  }
  return names;
}

NodeSplit build_split(const TextAttributedGraph& graph, const SplitSpec& spec) {
  const int num_classes = graph.num_classes();
  if (spec.ood_classes.empty()) throw Error("split: ood_classes must not be empty");
  for (int c : spec.ood_classes) {
    if (c < 0 || c >= num_classes) {
      throw Error("split: OOD class " + std::to_string(c) + " out of range [0, " +
                  std::to_string(num_classes) + ")");
    }
  }
  if (spec.ood_classes.size() >= static_cast<std::size_t>(num_classes)) {
    throw Error("split: no IND classes remain");
  }
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) ||
      !(spec.val_fraction > 0.0 && spec.val_fraction < 1.0) ||
      spec.train_fraction + spec.val_fraction >= 1.0) {
    throw Error("split: fractions must lie in (0, 1) with train + val < 1");
  }

  std::vector<std::size_t> class_sizes(static_cast<std::size_t>(num_classes), 0);
  for (const auto& label : graph.labels()) {
    if (label) ++class_sizes[static_cast<std::size_t>(*label)];
  }
  for (int c = 0; c < num_classes; ++c) {
    if (class_sizes[static_cast<std::size_t>(c)] == 0) {
      throw Error("split: class " + std::to_string(c) + " has zero nodes");
    }
  }

  NodeSplit split;
  int next = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (!spec.ood_classes.contains(c)) split.ind_class_remap[c] = next++;
  }
  split.num_ind_classes = next;
  split.ind_labels.assign(graph.node_count(), -1);

  std::vector<NodeId> ind_nodes;
  for (NodeId i = 0; i < graph.node_count(); ++i) {
    const auto& label = graph.labels()[i];
    if (!label) continue;
    if (spec.ood_classes.contains(*label)) {
      split.test_ood_idx.push_back(i);
    } else {
      ind_nodes.push_back(i);
      split.ind_labels[i] = split.ind_class_remap.at(*label);
    }
  }

  Rng rng(derive_seed(spec.seed, "split"));
  for (std::size_t i = ind_nodes.size(); i > 1; --i) {
    std::swap(ind_nodes[i - 1], ind_nodes[rng.uniform_index(i)]);
  }
  const auto n_ind = static_cast<double>(ind_nodes.size());
  const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * n_ind));
  const auto n_val = static_cast<std::size_t>(std::floor(spec.val_fraction * n_ind));
  auto first = ind_nodes.begin();
  split.train_idx.assign(first, first + static_cast<std::ptrdiff_t>(n_train));
  split.val_idx.assign(first + static_cast<std::ptrdiff_t>(n_train),
                       first + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test_ind_idx.assign(first + static_cast<std::ptrdiff_t>(n_train + n_val), ind_nodes.end());
  for (auto* set : {&split.train_idx, &split.val_idx, &split.test_ind_idx}) {
    std::sort(set->begin(), set->end());
  }
  return split;
}

SparseMatrix normalized_adjacency(std::size_t node_count, std::span<const Edge> edges) {
  std::vector<Edge> canon;
  canon.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.u >= node_count || e.v >= node_count) {
      throw Error("adjacency: edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                  ") references a node outside [0, " + std::to_string(node_count) + ")");
    }
    if (e.u != e.v) canon.push_back(Edge::canonical(e.u, e.v));
  }
  std::sort(canon.begin(), canon.end());
  canon.erase(std::unique(canon.begin(), canon.end()), canon.end());

  std::vector<double> degree(node_count, 1.0);
  for (const Edge& e : canon) {
    degree[e.u] += 1.0;
    degree[e.v] += 1.0;
  }
  std::vector<double> inv_sqrt(node_count);
  for (std::size_t i = 0; i < node_count; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(node_count + 2 * canon.size());
  for (std::size_t i = 0; i < node_count; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    triplets.emplace_back(k, k, 1.0 / degree[i]);
  }
  for (const Edge& e : canon) {
    const double w = inv_sqrt[e.u] * inv_sqrt[e.v];
    const auto a = static_cast<Eigen::Index>(e.u), b = static_cast<Eigen::Index>(e.v);
    triplets.emplace_back(a, b, w);
    triplets.emplace_back(b, a, w);
  }
  const auto n = static_cast<Eigen::Index>(node_count);
  SparseMatrix adj(n, n);
  adj.setFromTriplets(triplets.begin(), triplets.end());
  adj.makeCompressed();
  return adj;
}

SparseMatrix normalized_adjacency(const TextAttributedGraph& graph,
                                  std::span<const Edge> extra_edges,
                                  std::optional<std::size_t> total_nodes) {
  const std::size_t n = total_nodes.value_or(graph.node_count());
  if (n < graph.node_count()) throw Error("adjacency: total_nodes smaller than the graph");
  std::vector<Edge> all(graph.edges().begin(), graph.edges().end());
  all.insert(all.end(), extra_edges.begin(), extra_edges.end());
  return normalized_adjacency(n, all);
}

TextAttributedGraph graph_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error("graph file: top level must be an object");
  for (const char* key : {"nodes", "edges", "num_classes"}) {
    if (!doc.contains(key)) throw Error(std::string("graph file: missing key \"") + key + "\"");
  }
  const auto& nodes = doc.at("nodes");
  const auto& edges = doc.at("edges");
  if (!nodes.is_array() || !edges.is_array()) throw Error("graph file: nodes and edges must be arrays");
  if (!doc.at("num_classes").is_number_integer()) throw Error("graph file: num_classes must be an integer");
  const int num_classes = doc.at("num_classes").get<int>();
  if (num_classes < 1) throw Error("graph file: num_classes must be positive");

  const std::size_t n = nodes.size();
  std::vector<std::string> texts(n);
  std::vector<std::optional<int>> labels(n);
  std::vector<bool> seen(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& node = nodes[k];
    const std::string where = "graph file: nodes[" + std::to_string(k) + "]";
    if (!node.is_object() || !node.contains("id") || !node.contains("text")) {
      throw Error(where + ": expected {\"id\", \"text\", \"label\"}");
    }
    if (!node.at("id").is_number_integer()) throw Error(where + ": id must be an integer");
    const auto id = node.at("id").get<long long>();
    if (id < 0 || static_cast<std::size_t>(id) >= n) {
      throw Error(where + ": id " + std::to_string(id) + " out of range [0, " + std::to_string(n) + ")");
    }
    const auto slot = static_cast<std::size_t>(id);
    if (seen[slot]) throw Error(where + ": duplicate id " + std::to_string(id));
    seen[slot] = true;
    if (!node.at("text").is_string()) throw Error(where + ": text must be a string");
    texts[slot] = node.at("text").get<std::string>();
    if (node.contains("label") && !node.at("label").is_null()) {
      if (!node.at("label").is_number_integer()) throw Error(where + ": label must be an integer or null");
      const int label = node.at("label").get<int>();
      if (label < 0 || label >= num_classes) {
        throw Error(where + ": label " + std::to_string(label) + " out of range [0, " +
                    std::to_string(num_classes) + ")");
      }
      labels[slot] = label;
    }
  }

  std::vector<Edge> edge_list;
  edge_list.reserve(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& e = edges[k];
    const std::string where = "graph file: edges[" + std::to_string(k) + "]";
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
      throw Error(where + ": expected a pair of integers");
    }
    const auto a = e[0].get<long long>(), b = e[1].get<long long>();
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n) {
      throw Error(where + " = [" + std::to_string(a) + ", " + std::to_string(b) +
                  "]: dangling edge, node count is " + std::to_string(n));
    }
    edge_list.push_back({static_cast<NodeId>(a), static_cast<NodeId>(b)});
  }

  std::vector<std::string> class_names;
  if (doc.contains("class_names")) {
    if (!doc.at("class_names").is_array()) throw Error("graph file: class_names must be an array");
    class_names = doc.at("class_names").get<std::vector<std::string>>();
  }
  return TextAttributedGraph(std::move(texts), std::move(labels), std::move(edge_list),
                             num_classes, std::move(class_names));
}

nlohmann::json graph_to_json(const TextAttributedGraph& graph) {
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const auto& label = graph.labels()[i];
    nodes.push_back({{"id", i},
                     {"text", graph.texts()[i]},
                     {"label", label ? nlohmann::json(*label) : nlohmann::json(nullptr)}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : graph.edges()) edges.push_back({e.u, e.v});
  return {{"nodes", std::move(nodes)},
          {"edges", std::move(edges)},
          {"num_classes", graph.num_classes()},
          {"class_names", graph.class_names()}};
}

TextAttributedGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open graph file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("graph file " + path.string() + ": " + e.what());
  }
  return graph_from_json(doc);
}

void save_graph(const TextAttributedGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write graph file " + path.string());
  out << graph_to_json(graph).dump() << '\n';
}

nlohmann::json split_spec_to_json(const SplitSpec& spec) {
  return {{"ood_classes", std::vector<int>(spec.ood_classes.begin(), spec.ood_classes.end())},
          {"train_fraction", spec.train_fraction},
          {"val_fraction", spec.val_fraction},
          {"seed", spec.seed}};
}

SplitSpec split_spec_from_json(const nlohmann::json& doc) {
  SplitSpec spec;
  const auto classes = doc.at("ood_classes").get<std::vector<int>>();
  spec.ood_classes = std::set<int>(classes.begin(), classes.end());
  spec.train_fraction = doc.value("train_fraction", spec.train_fraction);
  spec.val_fraction = doc.value("val_fraction", spec.val_fraction);
  spec.seed = doc.value("seed", spec.seed);
  return spec;
}

}  // namespace lect
