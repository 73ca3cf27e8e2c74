#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lect/common.hpp"

namespace lect {

/// Undirected edge stored in canonical (min, max) order.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  static Edge canonical(NodeId a, NodeId b) { return a < b ? Edge{a, b} : Edge{b, a}; }
  auto operator<=>(const Edge&) const = default;
};

/// Text-attributed graph: one text and an optional class label per node,
/// plus a deduplicated undirected edge set. Immutable once constructed.
class TextAttributedGraph {
 public:
  TextAttributedGraph() = default;

  /// Validates and canonicalizes. Edges are stored as (min, max), sorted and
  /// deduplicated; self-loops and out-of-range endpoints are rejected.
  TextAttributedGraph(std::vector<std::string> texts,
                      std::vector<std::optional<int>> labels,
                      std::vector<Edge> edges, int num_classes,
                      std::vector<std::string> class_names = {});

  std::size_t node_count() const { return texts_.size(); }
  int num_classes() const { return num_classes_; }
  const std::vector<std::string>& texts() const { return texts_; }
  const std::vector<std::optional<int>>& labels() const { return labels_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::string>& class_names() const { return class_names_; }

  /// Neighbor lists derived from the edge set, each sorted ascending.
  std::vector<std::vector<NodeId>> adjacency_lists() const;

  /// Fraction of edges between two labeled nodes that join equal labels.
  double homophily() const;

  /// Stable 64-bit content hash (texts, labels, edges, class count).
  std::uint64_t content_hash() const;

 private:
  std::vector<std::string> texts_;
  std::vector<std::optional<int>> labels_;
  std::vector<Edge> edges_;
  int num_classes_ = 0;
  std::vector<std::string> class_names_;
};

struct SplitSpec {
  std::set<int> ood_classes;
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct NodeSplit {
  std::vector<NodeId> train_idx;
  std::vector<NodeId> val_idx;
  std::vector<NodeId> test_ind_idx;
  std::vector<NodeId> test_ood_idx;
  std::map<int, int> ind_class_remap;
  int num_ind_classes = 0;
  /// Remapped IND label per node, -1 for OOD-class and unlabeled nodes.
  std::vector<int> ind_labels;

  bool operator==(const NodeSplit&) const = default;

  /// Original class names of the retained classes, in remapped order.
  std::vector<std::string> ind_class_names(const TextAttributedGraph& graph) const;
};

/// Label-shift split: classes in spec.ood_classes become test-time OOD, the
/// remaining labeled nodes are shuffled and cut into train/val/test-IND with
/// floor rounding.
NodeSplit build_split(const TextAttributedGraph& graph, const SplitSpec& spec);

/// D^{-1/2}(A + I)D^{-1/2} over node_count nodes, with D the degree of A + I.
/// Duplicate edges (in either orientation) count once.
SparseMatrix normalized_adjacency(std::size_t node_count, std::span<const Edge> edges);

/// Same as above over the graph's edges plus extra_edges; the matrix is sized
/// for total_nodes (defaults to the graph's node count).
SparseMatrix normalized_adjacency(const TextAttributedGraph& graph,
                                  std::span<const Edge> extra_edges,
                                  std::optional<std::size_t> total_nodes = std::nullopt);

// JSON interchange format:
//   {"nodes": [{"id", "text", "label"}], "edges": [[i, j], ...],
//    "num_classes": C, "class_names": [...] (optional)}
TextAttributedGraph graph_from_json(const nlohmann::json& doc);
nlohmann::json graph_to_json(const TextAttributedGraph& graph);
TextAttributedGraph load_graph(const std::filesystem::path& path);
void save_graph(const TextAttributedGraph& graph, const std::filesystem::path& path);

nlohmann::json split_spec_to_json(const SplitSpec& spec);
SplitSpec split_spec_from_json(const nlohmann::json& doc);

}  // namespace lect
