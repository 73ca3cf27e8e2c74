#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "lect/common.hpp"
#include "lect/graph.hpp"
#include "lect/http_client.hpp"
#include "lect/rng.hpp"

namespace lect {

enum class OodMode { Near, Far };
enum class ModeMix { Near, Far, Mixed };
enum class GeneratorKind { RemoteLlm, Template, RandomText };

std::string to_string(OodMode mode);
std::string to_string(ModeMix mix);
std::string to_string(GeneratorKind kind);
OodMode parse_ood_mode(const std::string& s);
ModeMix parse_mode_mix(const std::string& s);
GeneratorKind parse_generator_kind(const std::string& s);

struct OodGenConfig {
  /// N_o; 0 selects the default of 10% of the training nodes, minimum 8.
  std::size_t num_pseudo = 0;
  /// Maximum IND neighbors per pseudo node; 0 selects the IND class count.
  std::size_t c_max = 0;
  ModeMix mode = ModeMix::Mixed;
  std::uint64_t seed = 0;
  GeneratorKind generator = GeneratorKind::Template;
};

std::size_t default_num_pseudo(std::size_t train_count);

/// Fills the zero-valued defaults from the split and validates.
OodGenConfig resolve_defaults(OodGenConfig cfg, const NodeSplit& split);

/// Per-node generation modes: mixed puts the first ceil(N/2) nodes in near.
std::vector<OodMode> assign_modes(std::size_t count, ModeMix mix);

/// Pseudo-node structure before any text exists.
struct PseudoSkeleton {
  std::size_t base_node_count = 0;
  std::vector<std::vector<NodeId>> neighbors;  // per pseudo node, ascending
  std::vector<OodMode> modes;

  std::size_t size() const { return neighbors.size(); }
  /// (ind_node, pseudo_node) pairs, pseudo ids start at base_node_count.
  std::vector<Edge> edges() const;
};

/// Connects each pseudo node to k ~ U{1..c_max} distinct training nodes
/// (k capped at the training set size).
PseudoSkeleton init_pseudo_edges(const NodeSplit& split, std::size_t base_node_count,
                                 const OodGenConfig& cfg, Rng& rng);

/// Distinct class names of a pseudo node's neighbors, in IND class order.
std::vector<std::string> neighbor_label_names(const std::vector<NodeId>& neighbors,
                                              const NodeSplit& split,
                                              const std::vector<std::string>& ind_class_names);

struct CotPrompt {
  std::string system;
  /// Domain classification, OOD-category selection, neighbor-label
  /// analysis, sample generation.
  std::array<std::string, 4> steps;
};

CotPrompt build_cot_prompt(const std::vector<std::string>& ind_class_names,
                           const std::vector<std::string>& neighbor_labels, OodMode mode);

struct ChatMessage {
  std::string role;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

struct GenerationRequest {
  std::vector<std::string> ind_class_names;
  std::vector<std::string> neighbor_labels;
  OodMode mode = OodMode::Near;
  std::uint64_t seed = 0;
};

struct GeneratedText {
  std::string category;
  std::string text;
  std::vector<ChatMessage> transcript;  // empty for offline generators
};

class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual std::string id() const = 0;
  /// Must be safe to call concurrently.
  virtual GeneratedText generate(const GenerationRequest& request) const = 0;
};

/// Offline stand-in for the language model: emulates the four reasoning
/// steps with the built-in lexicon. Pure in (seed, neighbor labels, mode)
/// for a fixed set of IND class names.
class TemplateGenerator final : public TextGenerator {
 public:
  std::string id() const override { return "template-v1"; }
  GeneratedText generate(const GenerationRequest& request) const override;
};

/// Ablation generator: random words from the lexicon-wide pool, ignoring the
/// neighbors and the IND domain.
class RandomTextGenerator final : public TextGenerator {
 public:
  std::string id() const override { return "random-text-v1"; }
  GeneratedText generate(const GenerationRequest& request) const override;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages) const = 0;
};

struct RemoteChatConfig {
  std::string endpoint;
  std::string model;
  RetryPolicy retry;
  std::string token;  // defaults to $LECT_LLM_TOKEN
};

/// Chat-completion client:
///   POST {"model", "messages": [{"role", "content"}]}
///     -> {"choices": [{"message": {"content": str}}]}
class RemoteChatClient final : public ChatClient {
 public:
  RemoteChatClient(RemoteChatConfig config, std::shared_ptr<HttpTransport> transport,
                   JsonPostClient::Sleeper sleeper = {});
  std::string complete(const std::vector<ChatMessage>& messages) const override;

 private:
  RemoteChatConfig config_;
  JsonPostClient client_;
};

/// Runs the four prompt steps as one conversation per pseudo node.
class ChatGenerator final : public TextGenerator {
 public:
  explicit ChatGenerator(std::shared_ptr<const ChatClient> client, std::string model_id = "remote");
  std::string id() const override { return "llm:" + model_id_; }
  GeneratedText generate(const GenerationRequest& request) const override;

 private:
  std::shared_ptr<const ChatClient> client_;
  std::string model_id_;
};

/// Last non-empty line of a model answer, trimmed.
std::string last_nonempty_line(const std::string& answer);

struct PseudoNodeMeta {
  OodMode mode = OodMode::Near;
  std::string chosen_category;
  std::vector<std::string> neighbor_labels;
  bool operator==(const PseudoNodeMeta&) const = default;
};

struct PseudoOodBatch {
  std::size_t base_node_count = 0;
  std::vector<NodeId> node_ids;
  std::vector<Edge> edges;  // (ind_node, pseudo_node)
  std::vector<std::string> texts;
  std::vector<PseudoNodeMeta> meta;
  std::string generator_id;
  std::uint64_t seed = 0;
  std::vector<std::vector<ChatMessage>> transcripts;

  std::size_t size() const { return node_ids.size(); }
};

/// Raised when generation for one pseudo node fails; nothing is returned.
class GenerationError : public Error {
 public:
  GenerationError(const std::string& what, NodeId node)
      : Error("pseudo node " + std::to_string(node) + ": " + what), node_(node) {}
  NodeId node() const { return node_; }

 private:
  NodeId node_;
};

/// Fills one text per pseudo node. Either every node succeeds or a
/// GenerationError is thrown.
PseudoOodBatch generate_texts(const PseudoSkeleton& skeleton, const OodGenConfig& cfg,
                              const NodeSplit& split,
                              const std::vector<std::string>& ind_class_names,
                              const TextGenerator& generator, unsigned concurrency = 1);

/// init_pseudo_edges + generate_texts with stage-derived seeds.
PseudoOodBatch generate_pseudo_ood(const TextAttributedGraph& graph, const NodeSplit& split,
                                   const OodGenConfig& cfg, const TextGenerator& generator,
                                   unsigned concurrency = 1);

/// The enhanced graph: original nodes and edges plus pseudo nodes (unlabeled)
/// and their edges.
struct AugmentedGraph {
  TextAttributedGraph graph;
  std::size_t original_count = 0;
  std::vector<bool> is_pseudo;
  std::vector<Edge> pseudo_edges;
};

AugmentedGraph augment_graph(const TextAttributedGraph& graph, const NodeSplit& split,
                             const PseudoOodBatch& batch);

nlohmann::json batch_to_json(const PseudoOodBatch& batch);
PseudoOodBatch batch_from_json(const nlohmann::json& doc);
void save_batch(const PseudoOodBatch& batch, const std::filesystem::path& path);
PseudoOodBatch load_batch(const std::filesystem::path& path);

}  // namespace lect
