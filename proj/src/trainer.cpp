#include "lect/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "lect/energy.hpp"

namespace lect {

void TrainConfig::validate() const {
  if (epochs < 1) throw Error("train config: epochs must be >= 1");
  if (no_contrastive && !(no_ind_ood && no_triplet)) {
    throw Error("train config: no_contrastive requires no_ind_ood and no_triplet");
  }
  if (no_contrastive && random_text_ood) {
    throw Error("train config: random_text_ood has no effect without pseudo nodes");
  }
  if (!(adam.lr > 0.0) || !(adam.weight_decay >= 0.0)) throw Error("train config: bad optimizer settings");
  loss.validate();
}

TrainConfig TrainConfig::normalized() const {
  TrainConfig out = *this;
  if (out.no_contrastive) out.no_ind_ood = out.no_triplet = true;
  return out;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"proj_dim", c.model.proj_dim},
          {"hidden_dim", c.model.hidden_dim},
          {"dropout", c.model.dropout},
          {"bn_momentum", c.model.bn_momentum},
          {"bn_eps", c.model.bn_eps},
          {"lr", c.adam.lr},
          {"weight_decay", c.adam.weight_decay},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"adam_eps", c.adam.eps},
          {"gamma", c.loss.gamma},
          {"lambda1", c.loss.lambda1},
          {"lambda2", c.loss.lambda2},
          {"lambda_mean", c.loss.lambda_mean},
          {"gamma_mean", c.loss.gamma_mean},
          {"mean_constraint", c.loss.mean_constraint},
          {"num_pairs", c.num_pairs},
          {"num_triplets", c.num_triplets},
          {"no_contrastive", c.no_contrastive},
          {"random_text_ood", c.random_text_ood},
          {"no_ind_ood", c.no_ind_ood},
          {"no_triplet", c.no_triplet},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error("train config: expected an object");
  const nlohmann::json known = train_config_to_json(TrainConfig{});
  for (const auto& [key, _] : doc.items()) {
    if (!known.contains(key)) throw Error("train config: unknown key \"" + key + "\"");
  }
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("epochs", c.epochs);
  get("proj_dim", c.model.proj_dim);
  get("hidden_dim", c.model.hidden_dim);
  get("dropout", c.model.dropout);
  get("bn_momentum", c.model.bn_momentum);
  get("bn_eps", c.model.bn_eps);
  get("lr", c.adam.lr);
  get("weight_decay", c.adam.weight_decay);
  get("beta1", c.adam.beta1);
  get("beta2", c.adam.beta2);
  get("adam_eps", c.adam.eps);
  get("gamma", c.loss.gamma);
  get("lambda1", c.loss.lambda1);
  get("lambda2", c.loss.lambda2);
  get("lambda_mean", c.loss.lambda_mean);
  get("gamma_mean", c.loss.gamma_mean);
  get("mean_constraint", c.loss.mean_constraint);
  get("num_pairs", c.num_pairs);
  get("num_triplets", c.num_triplets);
  get("no_contrastive", c.no_contrastive);
  get("random_text_ood", c.random_text_ood);
  get("no_ind_ood", c.no_ind_ood);
  get("no_triplet", c.no_triplet);
  get("seed", c.seed);
  return c;
}

std::string config_hash(const nlohmann::json& doc) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(doc.dump())));
  return buf;
}

AugmentedGraph unaugmented(const TextAttributedGraph& graph) {
  return AugmentedGraph{graph, graph.node_count(), std::vector<bool>(graph.node_count(), false), {}};
}

Matrix embed_texts(std::span<const std::string> texts, const TextEncoder& encoder, unsigned threads) {
  return encode_all(texts, encoder, threads).cast<float>().cast<double>();
}

std::string loss_log_line(std::size_t epoch, const LossBreakdown& p) {
  const nlohmann::ordered_json line = {{"epoch", epoch},     {"l_sup", p.sup},         {"l_pairs", p.pairs},
                                       {"l_mean", p.mean},   {"l_triplet", p.triplet}, {"l_total", p.total}};
  return line.dump();
}

namespace {

void require_compatible(const ModelParams& params, const AugmentedGraph& graph, const NodeSplit& split,
                        const Matrix& embeddings) {
  if (embeddings.rows() != static_cast<Eigen::Index>(graph.graph.node_count())) {
    throw Error("dimension mismatch: " + std::to_string(embeddings.rows()) + " embedding rows for " +
                std::to_string(graph.graph.node_count()) + " nodes");
  }
  if (embeddings.cols() != static_cast<Eigen::Index>(params.config.in_dim)) {
    throw Error("dimension mismatch: embeddings have width " + std::to_string(embeddings.cols()) +
                ", model expects " + std::to_string(params.config.in_dim));
  }
  if (params.config.out_dim != static_cast<std::size_t>(split.num_ind_classes)) {
    throw Error("dimension mismatch: model has " + std::to_string(params.config.out_dim) + " outputs, split has " +
                std::to_string(split.num_ind_classes) + " IND classes");
  }
  if (split.ind_labels.size() != graph.original_count) {
    throw Error("split does not belong to this graph (" + std::to_string(split.ind_labels.size()) + " vs " +
                std::to_string(graph.original_count) + " nodes)");
  }
}

std::vector<int> labels_of(const NodeSplit& split, std::span<const NodeId> nodes) {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (NodeId n : nodes) out.push_back(split.ind_labels[n]);
  return out;
}

bool all_finite(const ModelParams& p) {
  bool ok = true;
  p.weights.for_each([&](std::string_view, Eigen::Map<const Vector> t) { ok = ok && t.allFinite(); });
  return ok && p.bn_running_mean.allFinite() && p.bn_running_var.allFinite();
}

}  // namespace

TrainResult train(const AugmentedGraph& graph, const NodeSplit& split, const Matrix& embeddings,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  const TrainConfig cfg = config.normalized();
  cfg.validate();

  ModelConfig mc = cfg.model;
  mc.in_dim = static_cast<std::size_t>(embeddings.cols());
  mc.out_dim = static_cast<std::size_t>(split.num_ind_classes);
  mc.seed = cfg.seed;
  mc.validate();

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  ck.params = init_params(mc);
  ck.optimizer = AdamState::zeros_like(ck.params.weights);
  ck.rng_seed = cfg.seed;
  require_compatible(ck.params, graph, split, embeddings);

  const SparseMatrix adj = normalized_adjacency(graph.graph.node_count(), graph.graph.edges());
  const std::vector<int> train_labels = labels_of(split, split.train_idx);
  std::vector<NodeId> pseudo_nodes;
  for (NodeId i = 0; i < graph.is_pseudo.size(); ++i) {
    if (graph.is_pseudo[i]) pseudo_nodes.push_back(i);
  }
  const std::vector<Edge> ind_edges = restrict_edges(graph.graph.edges(), split.train_idx);
  const bool use_pairs = !cfg.no_ind_ood;
  const bool use_mean = use_pairs && cfg.loss.mean_constraint;
  const bool use_triplet = !cfg.no_triplet;
  if ((use_pairs || use_triplet) && graph.pseudo_edges.empty()) {
    throw Error("train: contrastive losses need pseudo nodes; run generate first or pass the no_contrastive flag");
  }

  result.losses.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Checkpoint before = ck;
    try {
      Rng dropout_rng(derive_seed(cfg.seed, "dropout", epoch));
      const ForwardResult fwd = forward(ck.params, embeddings, adj, Mode::Train, &dropout_rng);

      LossComponents parts;
      parts.sup = loss_supervised(fwd.logits, split.train_idx, train_labels);
      if (use_pairs || use_triplet) {
        const Vector e = energies(fwd.logits);
        if (use_pairs && cfg.num_pairs > 0) {
          Rng rng(derive_seed(cfg.seed, "pairs", epoch));
          const auto pairs = sample_linked_pairs(graph.pseudo_edges, cfg.num_pairs, rng);
          parts.pairs = loss_ind_ood(pairs, e, cfg.loss.gamma);
        }
        if (use_mean) parts.mean = loss_mean_constraint(split.train_idx, pseudo_nodes, e, cfg.loss.gamma_mean);
        if (use_triplet && cfg.num_triplets > 0) {
          Rng rng(derive_seed(cfg.seed, "triplets", epoch));
          const auto triplets = sample_triplets(ind_edges, graph.pseudo_edges, cfg.num_triplets, rng);
          parts.triplet = loss_triplet(triplets, e);
        }
      }
      const TotalLoss total = loss_total(parts, fwd.logits, cfg.loss);
      const Weights grads = backward(ck.params, fwd.trace, total.grad_logits);
      adam_step(ck.params, grads, ck.optimizer, cfg.adam);
      update_running_stats(ck.params, fwd.trace);
      if (!all_finite(ck.params)) throw NonFiniteError("parameters became non-finite");
      ck.epoch = epoch + 1;
      result.losses.push_back(total.parts);
      if (on_epoch) on_epoch(epoch, total.parts);
    } catch (const NonFiniteError& err) {
      throw DivergenceError(err.what(), std::move(before));
    }
  }
  return result;
}

Evaluation evaluate(const ModelParams& params, const AugmentedGraph& graph, const NodeSplit& split,
                    const Matrix& embeddings) {
  require_compatible(params, graph, split, embeddings);
  if (split.val_idx.empty()) throw Error("evaluate: the split has no validation nodes to calibrate tau");
  if (split.test_ind_idx.empty()) throw Error("evaluate: the split has no IND test nodes");

  const SparseMatrix adj = normalized_adjacency(graph.graph.node_count(), graph.graph.edges());
  Evaluation out;
  out.logits = forward(params, embeddings, adj, Mode::Eval).logits;
  out.energies = energies(out.logits);

  std::vector<double> val;
  for (NodeId n : split.val_idx) val.push_back(out.energies[static_cast<Eigen::Index>(n)]);
  out.report.tau = calibrate_tau(val, 0.95);
  out.report.ind_acc = ind_accuracy(out.logits, split.test_ind_idx, labels_of(split, split.test_ind_idx));
  out.report.seed = params.config.seed;

  if (!split.test_ood_idx.empty()) {
    ScoredSet s;
    for (NodeId n : split.test_ind_idx) {
      s.scores.push_back(out.energies[static_cast<Eigen::Index>(n)]);
      s.is_ood.push_back(false);
    }
    for (NodeId n : split.test_ood_idx) {
      s.scores.push_back(out.energies[static_cast<Eigen::Index>(n)]);
      s.is_ood.push_back(true);
    }
    out.report.auroc = auroc(s);
    out.report.aupr = aupr(s);
    out.report.fpr95 = fpr_at_tpr(s, 0.95);
  }
  return out;
}

void write_energy_dump(const std::filesystem::path& path, const AugmentedGraph& graph, const NodeSplit& split,
                       const Vector& energies, double tau) {
  std::vector<const char*> role(graph.graph.node_count(), "unassigned");
  for (NodeId n : split.train_idx) role[n] = "train";
  for (NodeId n : split.val_idx) role[n] = "val";
  for (NodeId n : split.test_ind_idx) role[n] = "test_ind";
  for (NodeId n : split.test_ood_idx) role[n] = "test_ood";
  for (NodeId n = 0; n < graph.is_pseudo.size(); ++n) {
    if (graph.is_pseudo[n]) role[n] = "pseudo";
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  const Detector detector{tau};
  out << "node_id,is_pseudo,split,energy,decision\n";
  char buf[64];
  for (NodeId n = 0; n < role.size(); ++n) {
    const double e = energies[static_cast<Eigen::Index>(n)];
    std::snprintf(buf, sizeof(buf), "%.17g", e);
    out << n << ',' << (graph.is_pseudo[n] ? 1 : 0) << ',' << role[n] << ',' << buf << ','
        << (detector.decide(e) == Decision::Ind ? "IND" : "OOD") << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

nlohmann::json manifest_to_json(const RunManifest& m) {
  return {{"config_hash", m.config_hash}, {"graph_hash", m.graph_hash}, {"generator_id", m.generator_id},
          {"loss_log", m.loss_log},       {"checkpoint", m.checkpoint}, {"report", report_to_json(m.report)}};
}

RunManifest manifest_from_json(const nlohmann::json& doc) {
  return RunManifest{doc.at("config_hash").get<std::string>(),  doc.at("graph_hash").get<std::string>(),
                     doc.at("generator_id").get<std::string>(), doc.at("loss_log").get<std::string>(),
                     doc.at("checkpoint").get<std::string>(),   report_from_json(doc.at("report"))};
}

std::string to_string(Arm arm) {
  switch (arm) {
    case Arm::Full: return "full";
    case Arm::NoContrastive: return "no_contrastive";
    case Arm::RandomText: return "random_text";
    case Arm::NoIndOod: return "no_ind_ood";
    case Arm::NoTriplet: return "no_triplet";
  }
  return "?";
}

Arm parse_arm(const std::string& s) {
  for (Arm a : {Arm::Full, Arm::NoContrastive, Arm::RandomText, Arm::NoIndOod, Arm::NoTriplet}) {
    if (to_string(a) == s) return a;
  }
  throw Error("unknown arm \"" + s + "\"");
}

const std::vector<Arm>& ablation_arms() {
  static const std::vector<Arm> arms = {Arm::NoContrastive, Arm::RandomText, Arm::NoIndOod, Arm::NoTriplet};
  return arms;
}

TrainConfig apply_arm(TrainConfig cfg, Arm arm) {
  switch (arm) {
    case Arm::Full: break;
    case Arm::NoContrastive: cfg.no_contrastive = cfg.no_ind_ood = cfg.no_triplet = true; break;
    case Arm::RandomText: cfg.random_text_ood = true; break;
    case Arm::NoIndOod: cfg.no_ind_ood = true; break;
    case Arm::NoTriplet: cfg.no_triplet = true; break;
  }
  return cfg;
}

PipelineOutcome run_pipeline(const TextAttributedGraph& graph, PipelineSpec spec, Arm arm, std::uint64_t seed,
                             const TextEncoder& encoder, const TextGenerator& generator) {
  spec.split.seed = seed;
  spec.oodgen.seed = seed;
  spec.train = apply_arm(spec.train, arm).normalized();
  spec.train.seed = seed;
  spec.train.validate();

  const NodeSplit split = build_split(graph, spec.split);
  PipelineOutcome out;
  AugmentedGraph aug;
  if (spec.train.no_contrastive) {
    aug = unaugmented(graph);
  } else {
    if (spec.train.random_text_ood) {
      spec.oodgen.generator = GeneratorKind::RandomText;
      out.batch = generate_pseudo_ood(graph, split, spec.oodgen, RandomTextGenerator{});
    } else {
      out.batch = generate_pseudo_ood(graph, split, spec.oodgen, generator);
    }
    aug = augment_graph(graph, split, out.batch);
  }
  const Matrix emb = embed_texts(aug.graph.texts(), encoder);
  out.training = train(aug, split, emb, spec.train);
  out.evaluation = evaluate(out.training.checkpoint.params, aug, split, emb);
  out.evaluation.report.epoch = out.training.checkpoint.epoch;
  out.evaluation.report.config_hash = config_hash(train_config_to_json(spec.train));

  const Vector& e = out.evaluation.energies;
  double sum = 0.0;
  for (NodeId n : split.train_idx) sum += e[static_cast<Eigen::Index>(n)];
  out.mean_train_energy = sum / static_cast<double>(split.train_idx.size());
  sum = 0.0;
  std::size_t count = 0;
  for (NodeId n = 0; n < aug.is_pseudo.size(); ++n) {
    if (aug.is_pseudo[n]) {
      sum += e[static_cast<Eigen::Index>(n)];
      ++count;
    }
  }
  out.mean_pseudo_energy = count > 0 ? sum / static_cast<double>(count) : 0.0;
  return out;
}

}  // namespace lect
