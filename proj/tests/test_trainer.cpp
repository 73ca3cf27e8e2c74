#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lect/benchmark.hpp"
#include "lect/config.hpp"
#include "lect/energy.hpp"
#include "lect/trainer.hpp"

using namespace lect;

namespace {

struct Small {
  SynthBenchmark bench;
  NodeSplit split;
  PseudoOodBatch batch;
  AugmentedGraph aug;
  Matrix emb;
  TrainConfig cfg;

  explicit Small(std::uint64_t seed = 0) {
    SynthConfig sc;
    sc.nodes_per_class = 40;
    sc.p_in = 0.15;
    sc.p_out = 0.01;
    bench = synth_benchmark(seed, sc);
    split = build_split(bench.graph, bench.split);
    OodGenConfig og;
    og.seed = seed;
    batch = generate_pseudo_ood(bench.graph, split, og, TemplateGenerator{});
    aug = augment_graph(bench.graph, split, batch);
    emb = embed_texts(aug.graph.texts(), HashEncoder(64, 0));
    cfg.epochs = 15;
    cfg.num_pairs = 20;
    cfg.num_triplets = 20;
    cfg.seed = seed;
  }
};

bool same_params(const ModelParams& a, const ModelParams& b) {
  std::vector<Vector> x, y;
  a.weights.for_each([&](std::string_view, Eigen::Map<const Vector> t) { x.push_back(t); });
  b.weights.for_each([&](std::string_view, Eigen::Map<const Vector> t) { y.push_back(t); });
  return x == y && a.bn_running_mean == b.bn_running_mean && a.bn_running_var == b.bn_running_var;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig c;
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.no_contrastive = true;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_NOTHROW(c.normalized().validate());
  CHECK(c.normalized().no_ind_ood);
  c.random_text_ood = true;
  CHECK_THROWS_AS(c.normalized().validate(), Error);
}

TEST_CASE("zero auxiliary weights reproduce the supervised-only trajectory") {
  Small s;
  TrainConfig zero = s.cfg;
  zero.loss.lambda1 = zero.loss.lambda2 = 0.0;
  TrainConfig sup_only = s.cfg;
  sup_only.no_ind_ood = sup_only.no_triplet = true;
  std::vector<ModelParams> a, b;
  const TrainResult ra = train(s.aug, s.split, s.emb, zero);
  const TrainResult rb = train(s.aug, s.split, s.emb, sup_only);
  CHECK(same_params(ra.checkpoint.params, rb.checkpoint.params));
  for (std::size_t e = 0; e < ra.losses.size(); ++e) CHECK(ra.losses[e].total == rb.losses[e].total);
}

TEST_CASE("training is deterministic and leaves embeddings untouched") {
  Small s;
  const Matrix before = s.emb;
  const TrainResult a = train(s.aug, s.split, s.emb, s.cfg);
  const TrainResult b = train(s.aug, s.split, s.emb, s.cfg);
  CHECK(s.emb == before);
  CHECK(same_params(a.checkpoint.params, b.checkpoint.params));
  CHECK(a.checkpoint.epoch == 15);
  CHECK(a.losses.size() == 15);
  CHECK(evaluate(a.checkpoint.params, s.aug, s.split, s.emb).report ==
        evaluate(b.checkpoint.params, s.aug, s.split, s.emb).report);
}

TEST_CASE("evaluation protocol") {
  Small s;
  const TrainResult r = train(s.aug, s.split, s.emb, s.cfg);
  const Evaluation ev = evaluate(r.checkpoint.params, s.aug, s.split, s.emb);
  std::vector<double> val;
  for (NodeId n : s.split.val_idx) val.push_back(ev.energies[static_cast<Eigen::Index>(n)]);
  CHECK(ev.report.tau == calibrate_tau(val, 0.95));
  REQUIRE(ev.report.auroc.has_value());
  for (double m : {ev.report.ind_acc, *ev.report.auroc, *ev.report.aupr, *ev.report.fpr95}) {
    CHECK((m >= 0.0 && m <= 1.0));
  }

  NodeSplit no_ood = s.split;
  no_ood.test_ood_idx.clear();
  const Evaluation partial = evaluate(r.checkpoint.params, s.aug, no_ood, s.emb);
  CHECK_FALSE(partial.report.auroc.has_value());
  CHECK(partial.report.ind_acc == ev.report.ind_acc);

  const Matrix narrow = s.emb.leftCols(32);
  CHECK_THROWS_WITH_AS(evaluate(r.checkpoint.params, s.aug, s.split, narrow), doctest::Contains("dimension mismatch"),
                       Error);
}

TEST_CASE("pseudo nodes do not influence the metric sets") {
  Small s;
  const TrainResult r = train(s.aug, s.split, s.emb, s.cfg);
  Evaluation ev = evaluate(r.checkpoint.params, s.aug, s.split, s.emb);
  // Recompute AUROC from the IND/OOD test nodes only.
  ScoredSet set;
  for (NodeId n : s.split.test_ind_idx) {
    set.scores.push_back(ev.energies[static_cast<Eigen::Index>(n)]);
    set.is_ood.push_back(false);
  }
  for (NodeId n : s.split.test_ood_idx) {
    set.scores.push_back(ev.energies[static_cast<Eigen::Index>(n)]);
    set.is_ood.push_back(true);
  }
  CHECK(*ev.report.auroc == auroc(set));

  const auto path = std::filesystem::temp_directory_path() / "lect-energies.csv";
  write_energy_dump(path, s.aug, s.split, ev.energies, ev.report.tau);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "node_id,is_pseudo,split,energy,decision");
  std::size_t pseudo_rows = 0;
  while (std::getline(in, line)) pseudo_rows += line.find(",1,pseudo,") != std::string::npos ? 1 : 0;
  CHECK(pseudo_rows == s.batch.size());
  std::filesystem::remove(path);
}

TEST_CASE("divergence aborts with the last good state") {
  Small s;
  TrainConfig cfg = s.cfg;
  cfg.adam.lr = 1e308;
  cfg.adam.weight_decay = 0.0;
  try {
    train(s.aug, s.split, s.emb, cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.last_good().epoch < cfg.epochs);
    bool finite = true;
    e.last_good().params.weights.for_each(
        [&](std::string_view, Eigen::Map<const Vector> t) { finite = finite && t.allFinite(); });
    CHECK(finite);
  }
}

TEST_CASE("contrastive training needs pseudo nodes") {
  Small s;
  CHECK_THROWS_AS(train(unaugmented(s.bench.graph), s.split, s.emb.topRows(160), s.cfg), Error);
  TrainConfig plain = s.cfg;
  plain.no_contrastive = true;
  CHECK_NOTHROW(train(unaugmented(s.bench.graph), s.split, s.emb.topRows(160), plain));
}

TEST_CASE("loss log line format") {
  const std::string line = loss_log_line(3, {1.0, 0.5, 0.25, 0.125, 2.0});
  CHECK(line == R"({"epoch":3,"l_sup":1.0,"l_pairs":0.5,"l_mean":0.25,"l_triplet":0.125,"l_total":2.0})");
}

TEST_CASE("pipeline arms") {
  SynthConfig sc;
  sc.nodes_per_class = 40;
  sc.p_in = 0.15;
  const SynthBenchmark bench = synth_benchmark(2, sc);
  PipelineSpec spec{bench.split, {}, {}};
  spec.train.epochs = 5;
  const HashEncoder enc(64, 0);
  const TemplateGenerator gen;

  const PipelineOutcome plain = run_pipeline(bench.graph, spec, Arm::NoContrastive, 2, enc, gen);
  CHECK(plain.batch.size() == 0);
  const PipelineOutcome random = run_pipeline(bench.graph, spec, Arm::RandomText, 2, enc, gen);
  CHECK(random.batch.generator_id == RandomTextGenerator{}.id());
  const PipelineOutcome full = run_pipeline(bench.graph, spec, Arm::Full, 2, enc, gen);
  CHECK(full.batch.generator_id == gen.id());
  CHECK(full.batch.edges == random.batch.edges);
  const PipelineOutcome again = run_pipeline(bench.graph, spec, Arm::Full, 2, enc, gen);
  CHECK(again.evaluation.report == full.evaluation.report);
  CHECK(batch_to_json(again.batch) == batch_to_json(full.batch));

  CHECK(parse_arm("no_triplet") == Arm::NoTriplet);
  CHECK_THROWS_AS(parse_arm("bogus"), Error);
  CHECK(ablation_arms().size() == 4);
}

TEST_CASE("synthetic benchmark construction") {
  const SynthBenchmark a = synth_benchmark(0);
  CHECK(a.graph.node_count() == 600);
  CHECK(build_split(a.graph, a.split).test_ood_idx.size() == 150);
  CHECK(synth_benchmark(0).graph.content_hash() == a.graph.content_hash());
  CHECK(synth_benchmark(1).graph.content_hash() != a.graph.content_hash());

  const double expected = 0.05 * (150.0 * 149.0 / 2.0) * 4.0;
  CHECK(std::abs(a.expected_intra_edges - expected) < 1e-9);
  double mean_intra = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SynthBenchmark b = synth_benchmark(seed);
    for (const Edge& e : b.graph.edges()) mean_intra += b.graph.labels()[e.u] == b.graph.labels()[e.v] ? 0.2 : 0.0;
  }
  CHECK(std::abs(mean_intra - expected) <= 0.1 * expected);
}

TEST_CASE("config parsing") {
  const nlohmann::json doc = {{"seed", 7},
                              {"split", {{"ood_classes", {3}}}},
                              {"train", {{"epochs", 12}, {"gamma", 2.0}}},
                              {"experiment", {{"seeds", {1, 2}}}}};
  const AppConfig cfg = config_from_json(doc);
  CHECK(cfg.seed == 7);
  CHECK(cfg.train.epochs == 12);
  CHECK(cfg.train.loss.gamma == 2.0);
  CHECK(cfg.experiment.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(config_to_json(config_from_json(config_to_json(cfg))) == config_to_json(cfg));

  CHECK_THROWS_WITH_AS(config_from_json({{"train", {{"epoch", 3}}}}), doctest::Contains("train.epoch"), Error);
  CHECK_THROWS_WITH_AS(config_from_json({{"train", {{"seed", 3}}}}), doctest::Contains("train.seed"), Error);
  CHECK_THROWS_AS(config_from_json({{"train", {{"epochs", 0}}}}), Error);
  CHECK(config_hash(config_to_json(cfg)).size() == 16);
}
