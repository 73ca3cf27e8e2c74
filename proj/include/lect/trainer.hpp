#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lect/contrastive.hpp"
#include "lect/encoders.hpp"
#include "lect/graph.hpp"
#include "lect/metrics.hpp"
#include "lect/net.hpp"
#include "lect/oodgen.hpp"

namespace lect {

struct TrainConfig {
  std::size_t epochs = 300;
  /// in_dim and out_dim are taken from the embeddings and the split.
  ModelConfig model;
  AdamConfig adam;
  LossWeights loss;
  std::size_t num_pairs = 300;
  std::size_t num_triplets = 100;
  /// Train a plain GCN on the original graph (no pseudo nodes, no
  /// contrastive terms). Implies no_ind_ood and no_triplet.
  bool no_contrastive = false;
  /// Pseudo-node texts come from the random-vocabulary generator.
  bool random_text_ood = false;
  /// Drops the linked-pair hinge together with the mean constraint.
  bool no_ind_ood = false;
  bool no_triplet = false;
  std::uint64_t seed = 0;

  void validate() const;
  /// Copy with implied flags filled in (no_contrastive sets both loss flags).
  TrainConfig normalized() const;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& doc);
/// 16 hex digits of a hash over the canonical JSON form.
std::string config_hash(const nlohmann::json& doc);

/// The original graph seen as an augmented graph with zero pseudo nodes.
AugmentedGraph unaugmented(const TextAttributedGraph& graph);

/// Encoder output rounded through float32, matching what the embedding cache
/// stores, so cached and fresh runs see identical inputs.
Matrix embed_texts(std::span<const std::string> texts, const TextEncoder& encoder,
                   unsigned threads = 1);

std::string loss_log_line(std::size_t epoch, const LossBreakdown& parts);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossBreakdown> losses;  // one per epoch
};

/// Raised when a loss, activation or gradient becomes non-finite. Carries the
/// state after the last completed epoch.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, Checkpoint last_good)
      : Error("training diverged at epoch " + std::to_string(last_good.epoch + 1) + ": " + what),
        last_good_(std::move(last_good)) {}
  const Checkpoint& last_good() const { return last_good_; }

 private:
  Checkpoint last_good_;
};

using EpochCallback = std::function<void(std::size_t epoch, const LossBreakdown& parts)>;

/// Full-batch training on the augmented graph. Embeddings are read only.
TrainResult train(const AugmentedGraph& graph, const NodeSplit& split, const Matrix& embeddings,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct Evaluation {
  EvalReport report;
  Vector energies;  // eval-mode, every node of the augmented graph
  Matrix logits;
};

/// Eval-mode forward, tau from IND validation energies, metrics over the
/// test sets. Pseudo nodes never enter a metric.
Evaluation evaluate(const ModelParams& params, const AugmentedGraph& graph, const NodeSplit& split,
                    const Matrix& embeddings);

/// CSV with columns node_id,is_pseudo,split,energy,decision.
void write_energy_dump(const std::filesystem::path& path, const AugmentedGraph& graph,
                       const NodeSplit& split, const Vector& energies, double tau);

struct RunManifest {
  std::string config_hash;
  std::string graph_hash;
  std::string generator_id;
  std::string loss_log;
  std::string checkpoint;
  EvalReport report;
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& doc);

enum class Arm { Full, NoContrastive, RandomText, NoIndOod, NoTriplet };

std::string to_string(Arm arm);
Arm parse_arm(const std::string& s);
/// The four ablation arms, in report order.
const std::vector<Arm>& ablation_arms();
TrainConfig apply_arm(TrainConfig cfg, Arm arm);

/// One end-to-end run: split, pseudo-node generation, encoding, training and
/// evaluation, all seeded from `seed`.
struct PipelineSpec {
  SplitSpec split;
  OodGenConfig oodgen;
  TrainConfig train;
};

struct PipelineOutcome {
  PseudoOodBatch batch;  // empty for the no-contrastive arm
  TrainResult training;
  Evaluation evaluation;
  /// Eval-mode mean energies after training.
  double mean_pseudo_energy = 0.0;
  double mean_train_energy = 0.0;
};

/// Applies `seed` to every stage and runs the given arm. Pseudo texts come
/// from `generator` unless the arm asks for random text.
PipelineOutcome run_pipeline(const TextAttributedGraph& graph, PipelineSpec spec, Arm arm,
                             std::uint64_t seed, const TextEncoder& encoder,
                             const TextGenerator& generator);

}  // namespace lect
