#include "commands.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "lect/benchmark.hpp"
#include "lect/config.hpp"
#include "lect/energy.hpp"
#include "lect/trainer.hpp"

namespace lect::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kExitError = 1;
constexpr int kExitDiverged = 3;

struct Paths {
  fs::path dir;
  fs::path graph() const { return dir / "graph.json"; }
  fs::path split() const { return dir / "split.json"; }
  fs::path batch() const { return dir / "pseudo_ood.json"; }
  fs::path transcripts() const { return dir / "transcripts.jsonl"; }
  fs::path checkpoint() const { return dir / "checkpoint.bin"; }
  fs::path losses() const { return dir / "losses.jsonl"; }
  fs::path manifest() const { return dir / "manifest.json"; }
  fs::path report() const { return dir / "report.json"; }
  fs::path energies() const { return dir / "energies.csv"; }
  fs::path cache() const { return dir / "cache"; }
};

void require(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw Error("missing " + path.string() + ": run `lect " + producer + "` first");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Context {
  AppConfig cfg;
  Paths paths;
  unsigned jobs = 1;
  std::ostream& out;
  std::ostream& err;
};

/// The split spec for this run: the config's classes when given, otherwise
/// the one stored next to the graph.
SplitSpec resolve_split(const Context& ctx) {
  SplitSpec spec = ctx.cfg.split;
  if (spec.ood_classes.empty()) {
    if (!fs::exists(ctx.paths.split())) {
      throw Error("no OOD classes configured: set split.ood_classes in the config (or run `lect synth`)");
    }
    const SplitSpec stored = split_spec_from_json(read_json(ctx.paths.split()));
    spec.ood_classes = stored.ood_classes;
  }
  spec.seed = ctx.cfg.seed;
  return spec;
}

Matrix embed(const Context& ctx, const AugmentedGraph& aug, const TextEncoder& encoder) {
  const EmbeddingCacheKey key{aug.graph.content_hash(), encoder.id(), encoder.dim(), ctx.cfg.encoder.seed};
  fs::create_directories(ctx.paths.cache());
  return cached_encode(aug.graph.texts(), encoder, key, ctx.paths.cache(), ctx.jobs);
}

struct Loaded {
  TextAttributedGraph graph;
  NodeSplit split;
  AugmentedGraph aug;
  std::string generator_id = "none";
};

/// Graph, split and (unless no_contrastive) the pseudo-node batch.
Loaded load_inputs(const Context& ctx, bool with_pseudo) {
  require(ctx.paths.graph(), "ingest");
  Loaded in;
  in.graph = load_graph(ctx.paths.graph());
  in.split = build_split(in.graph, resolve_split(ctx));
  if (!with_pseudo) {
    in.aug = unaugmented(in.graph);
    return in;
  }
  require(ctx.paths.batch(), "generate");
  const PseudoOodBatch batch = load_batch(ctx.paths.batch());
  if (batch.seed != ctx.cfg.seed) {
    throw Error(ctx.paths.batch().string() + " was generated with seed " + std::to_string(batch.seed) +
                ", this run uses seed " + std::to_string(ctx.cfg.seed) + ": rerun `lect generate`");
  }
  in.aug = augment_graph(in.graph, in.split, batch);
  in.generator_id = batch.generator_id;
  return in;
}

void print_report(std::ostream& out, const EvalReport& r) {
  auto pct = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * *v);
    return std::string(buf);
  };
  out << "IND-Acc " << pct(r.ind_acc) << "  AUROC " << pct(r.auroc) << "  AUPR " << pct(r.aupr) << "  FPR95 "
      << pct(r.fpr95) << "  tau " << r.tau << "\n";
}

// ---- ingest / synth --------------------------------------------------------

int cmd_ingest(Context& ctx, const std::string& input) {
  const nlohmann::json doc = read_json(input);
  const TextAttributedGraph graph = graph_from_json(doc);
  std::size_t raw_edges = doc.contains("edges") && doc.at("edges").is_array() ? doc.at("edges").size() : 0;
  fs::create_directories(ctx.paths.dir);
  save_graph(graph, ctx.paths.graph());
  ctx.out << "nodes: " << graph.node_count() << "\n"
          << "edges: " << graph.edges().size() << " (" << raw_edges - graph.edges().size()
          << " duplicate or self-loop records collapsed)\n"
          << "classes: " << graph.num_classes() << "\n"
          << "homophily: " << graph.homophily() << "\n"
          << "wrote " << ctx.paths.graph().string() << "\n";
  return 0;
}

int cmd_synth(Context& ctx) {
  const SynthBenchmark bench = synth_benchmark(ctx.cfg.seed);
  fs::create_directories(ctx.paths.dir);
  save_graph(bench.graph, ctx.paths.graph());
  write_text(ctx.paths.split(), split_spec_to_json(bench.split).dump(1) + "\n");
  ctx.out << "nodes: " << bench.graph.node_count() << "\nedges: " << bench.graph.edges().size()
          << "\nhomophily: " << bench.graph.homophily() << "\nwrote " << ctx.paths.graph().string() << " and "
          << ctx.paths.split().string() << "\n";
  return 0;
}

// ---- generate --------------------------------------------------------------

int cmd_generate(Context& ctx) {
  require(ctx.paths.graph(), "ingest");
  const TextAttributedGraph graph = load_graph(ctx.paths.graph());
  const SplitSpec spec = resolve_split(ctx);
  const NodeSplit split = build_split(graph, spec);
  OodGenConfig og = ctx.cfg.oodgen;
  og.seed = ctx.cfg.seed;
  const auto generator = make_generator(og.generator, ctx.cfg.llm);
  const unsigned concurrency = og.generator == GeneratorKind::RemoteLlm ? ctx.cfg.llm.concurrency : ctx.jobs;
  const PseudoOodBatch batch = generate_pseudo_ood(graph, split, og, *generator, concurrency);

  save_batch(batch, ctx.paths.batch());
  write_text(ctx.paths.split(), split_spec_to_json(spec).dump(1) + "\n");
  if (!batch.transcripts.empty() && !batch.transcripts.front().empty()) {
    std::string lines;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      nlohmann::json msgs = nlohmann::json::array();
      for (const auto& m : batch.transcripts[i]) msgs.push_back({{"role", m.role}, {"content", m.content}});
      lines += nlohmann::json{{"node", batch.node_ids[i]}, {"messages", msgs}}.dump() + "\n";
    }
    write_text(ctx.paths.transcripts(), lines);
  }
  std::size_t near = 0;
  for (const auto& m : batch.meta) near += m.mode == OodMode::Near ? 1 : 0;
  ctx.out << "pseudo nodes: " << batch.size() << " (" << near << " near, " << batch.size() - near << " far)\n"
          << "pseudo edges: " << batch.edges.size() << "\ngenerator: " << batch.generator_id << "\nwrote "
          << ctx.paths.batch().string() << "\n";
  return 0;
}

// ---- train / eval ----------------------------------------------------------

int cmd_train(Context& ctx) {
  TrainConfig tc = ctx.cfg.train.normalized();
  tc.seed = ctx.cfg.seed;
  tc.validate();
  const Loaded in = load_inputs(ctx, !tc.no_contrastive);
  if (tc.random_text_ood && in.generator_id.rfind("random-text", 0) != 0) {
    throw Error("random_text_ood is set but " + ctx.paths.batch().string() + " came from " + in.generator_id +
                ": rerun `lect generate` with oodgen.generator = random-text");
  }
  const auto encoder = make_encoder(ctx.cfg.encoder);
  const Matrix emb = embed(ctx, in.aug, *encoder);

  std::ofstream log(ctx.paths.losses(), std::ios::binary);
  if (!log) throw Error("cannot write " + ctx.paths.losses().string());
  RunManifest manifest{config_hash(config_to_json(ctx.cfg)), hex64(in.aug.graph.content_hash()), in.generator_id,
                       ctx.paths.losses().filename().string(), ctx.paths.checkpoint().filename().string(), {}};
  TrainResult result;
  try {
    result = train(in.aug, in.split, emb, tc,
                   [&](std::size_t epoch, const LossBreakdown& p) { log << loss_log_line(epoch, p) << "\n"; });
  } catch (const DivergenceError& e) {
    log.flush();
    save_checkpoint(e.last_good(), ctx.paths.checkpoint());
    write_text(ctx.paths.manifest(), manifest_to_json(manifest).dump(1) + "\n");
    ctx.err << "error: " << e.what() << "\nlast good state saved to " << ctx.paths.checkpoint().string() << "\n";
    return kExitDiverged;
  }
  log.close();
  save_checkpoint(result.checkpoint, ctx.paths.checkpoint());

  Evaluation ev = evaluate(result.checkpoint.params, in.aug, in.split, emb);
  ev.report.epoch = result.checkpoint.epoch;
  ev.report.config_hash = manifest.config_hash;
  manifest.report = ev.report;
  write_text(ctx.paths.report(), report_to_json(ev.report).dump(1) + "\n");
  write_text(ctx.paths.manifest(), manifest_to_json(manifest).dump(1) + "\n");
  write_energy_dump(ctx.paths.energies(), in.aug, in.split, ev.energies, ev.report.tau);
  print_report(ctx.out, ev.report);
  return 0;
}

void print_csv_row(std::ostream& out, const std::string& label, const std::vector<EvalReport>& runs);

int cmd_eval(Context& ctx, bool csv) {
  if (!fs::exists(ctx.paths.checkpoint()) || !fs::exists(ctx.paths.manifest())) {
    throw Error("no checkpoint in " + ctx.paths.dir.string() + ": run train first");
  }
  const RunManifest manifest = manifest_from_json(read_json(ctx.paths.manifest()));
  const Checkpoint ck = load_checkpoint(ctx.paths.checkpoint());
  const Loaded in = load_inputs(ctx, manifest.generator_id != "none");
  const auto encoder = make_encoder(ctx.cfg.encoder);
  const Matrix emb = embed(ctx, in.aug, *encoder);

  Evaluation ev = evaluate(ck.params, in.aug, in.split, emb);
  ev.report.epoch = ck.epoch;
  ev.report.config_hash = manifest.config_hash;
  write_text(ctx.paths.report(), report_to_json(ev.report).dump(1) + "\n");
  write_energy_dump(ctx.paths.energies(), in.aug, in.split, ev.energies, ev.report.tau);
  if (csv) {
    print_csv_row(ctx.out, "", {});
    print_csv_row(ctx.out, "lect", {ev.report});
  } else {
    print_report(ctx.out, ev.report);
  }
  return 0;
}

// ---- ablate / sweep ---------------------------------------------------------

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the failure
/// with the lowest index.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string cell(const std::vector<double>& values) {
  if (values.empty()) return "n/a";
  return format_percent(mean_std(values));
}

void print_csv_row(std::ostream& out, const std::string& label, const std::vector<EvalReport>& runs) {
  if (label.empty()) {
    out << "arm,ind_acc,auroc,aupr,fpr95\n";
    return;
  }
  std::vector<double> acc, roc, pr, fpr;
  for (const auto& r : runs) {
    acc.push_back(r.ind_acc);
    if (r.auroc) roc.push_back(*r.auroc);
    if (r.aupr) pr.push_back(*r.aupr);
    if (r.fpr95) fpr.push_back(*r.fpr95);
  }
  out << label << ',' << cell(acc) << ',' << cell(roc) << ',' << cell(pr) << ',' << cell(fpr) << '\n';
}

PipelineSpec pipeline_spec(const Context& ctx) {
  return PipelineSpec{resolve_split(ctx), ctx.cfg.oodgen, ctx.cfg.train};
}

int cmd_ablate(Context& ctx) {
  require(ctx.paths.graph(), "ingest");
  const TextAttributedGraph graph = load_graph(ctx.paths.graph());
  const PipelineSpec spec = pipeline_spec(ctx);
  const auto encoder = make_encoder(ctx.cfg.encoder);
  const auto generator = make_generator(ctx.cfg.oodgen.generator, ctx.cfg.llm);

  std::vector<Arm> arms = {Arm::Full};
  arms.insert(arms.end(), ablation_arms().begin(), ablation_arms().end());
  const auto& seeds = ctx.cfg.experiment.seeds;
  std::vector<PipelineOutcome> runs(arms.size() * seeds.size());
  parallel_for(runs.size(), ctx.jobs, [&](std::size_t i) {
    PipelineOutcome o = run_pipeline(graph, spec, arms[i / seeds.size()], seeds[i % seeds.size()], *encoder, *generator);
    o.training.losses.clear();
    runs[i] = std::move(o);
  });

  std::ostringstream raw, table;
  raw << "arm,seed,ind_acc,auroc,aupr,fpr95,tau,mean_pseudo_energy,mean_train_energy\n";
  print_csv_row(table, "", {});
  for (std::size_t a = 0; a < arms.size(); ++a) {
    std::vector<EvalReport> reports;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const PipelineOutcome& o = runs[a * seeds.size() + s];
      const EvalReport& r = o.evaluation.report;
      reports.push_back(r);
      nlohmann::json row = {r.ind_acc, r.auroc.value_or(-1), r.aupr.value_or(-1), r.fpr95.value_or(-1), r.tau,
                            o.mean_pseudo_energy, o.mean_train_energy};
      raw << to_string(arms[a]) << ',' << seeds[s];
      for (const auto& v : row) raw << ',' << v.dump();
      raw << '\n';
    }
    print_csv_row(table, to_string(arms[a]), reports);
  }
  fs::create_directories(ctx.paths.dir);
  write_text(ctx.paths.dir / "ablation_runs.csv", raw.str());
  write_text(ctx.paths.dir / "ablation.csv", table.str());
  ctx.out << table.str();
  return 0;
}

int cmd_sweep(Context& ctx) {
  require(ctx.paths.graph(), "ingest");
  const TextAttributedGraph graph = load_graph(ctx.paths.graph());
  const auto encoder = make_encoder(ctx.cfg.encoder);
  const auto generator = make_generator(ctx.cfg.oodgen.generator, ctx.cfg.llm);
  const auto& pairs = ctx.cfg.experiment.pair_grid;
  const auto& triplets = ctx.cfg.experiment.triplet_grid;
  const auto& seeds = ctx.cfg.experiment.seeds;
  if (pairs.empty() || triplets.empty()) throw Error("sweep: experiment.pair_grid and triplet_grid must not be empty");

  const std::size_t cells = pairs.size() * triplets.size();
  std::vector<EvalReport> reports(cells * seeds.size());
  parallel_for(reports.size(), ctx.jobs, [&](std::size_t i) {
    const std::size_t c = i / seeds.size();
    PipelineSpec spec = pipeline_spec(ctx);
    spec.train.num_pairs = pairs[c / triplets.size()];
    spec.train.num_triplets = triplets[c % triplets.size()];
    reports[i] = run_pipeline(graph, spec, Arm::Full, seeds[i % seeds.size()], *encoder, *generator).evaluation.report;
  });

  std::ostringstream csv;
  csv << "num_pairs,num_triplets,ind_acc,auroc,aupr,fpr95\n";
  for (std::size_t c = 0; c < cells; ++c) {
    std::vector<double> acc, roc, pr, fpr;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const EvalReport& r = reports[c * seeds.size() + s];
      acc.push_back(r.ind_acc);
      if (r.auroc) roc.push_back(*r.auroc);
      if (r.aupr) pr.push_back(*r.aupr);
      if (r.fpr95) fpr.push_back(*r.fpr95);
    }
    csv << pairs[c / triplets.size()] << ',' << triplets[c % triplets.size()] << ',' << cell(acc) << ','
        << cell(roc) << ',' << cell(pr) << ',' << cell(fpr) << '\n';
  }
  fs::create_directories(ctx.paths.dir);
  write_text(ctx.paths.dir / "sweep.csv", csv.str());
  ctx.out << csv.str();
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pseudo-OOD contrastive training and energy-based OOD detection on text-attributed graphs"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string out_dir = "lect-out";
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Run seed (overrides the config)");
  app.add_option("--jobs", jobs, "Parallel workers for seeds and grid cells")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", out_dir, "Directory for every artifact");

  std::string ingest_input;
  auto* ingest = app.add_subcommand("ingest", "Validate a graph file and store it normalized");
  ingest->add_option("input", ingest_input, "Graph JSON")->required();
  auto* synth = app.add_subcommand("synth", "Write the built-in synthetic benchmark graph");
  auto* generate = app.add_subcommand("generate", "Create pseudo-OOD nodes for the stored graph");
  std::optional<std::size_t> num_pseudo;
  std::optional<std::string> mode, generator;
  generate->add_option("--num-pseudo", num_pseudo, "Number of pseudo nodes");
  generate->add_option("--mode", mode, "near | far | mixed");
  generate->add_option("--generator", generator, "template | random-text | remote-llm");
  auto* train_cmd = app.add_subcommand("train", "Train on the stored graph and pseudo nodes");
  std::optional<std::size_t> epochs;
  bool no_contrastive = false, no_ind_ood = false, no_triplet = false;
  train_cmd->add_option("--epochs", epochs, "Training epochs");
  train_cmd->add_flag("--no-contrastive", no_contrastive, "Plain GCN without pseudo nodes");
  train_cmd->add_flag("--no-ind-ood", no_ind_ood, "Drop the linked-pair loss and mean constraint");
  train_cmd->add_flag("--no-triplet", no_triplet, "Drop the triplet loss");
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate the stored checkpoint");
  bool csv = false;
  eval_cmd->add_flag("--csv", csv, "Print a CSV row instead of the summary");
  auto* ablate = app.add_subcommand("ablate", "Full model and the four ablation arms over the seed list");
  auto* sweep = app.add_subcommand("sweep", "Grid over linked-pair and triplet counts");
  for (auto* sub : {ablate, sweep}) sub->add_option("--epochs", epochs, "Training epochs");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    Context ctx{config_path.empty() ? AppConfig{} : load_config(config_path), Paths{out_dir}, jobs, out, err};
    if (seed) ctx.cfg.seed = *seed;
    if (num_pseudo) ctx.cfg.oodgen.num_pseudo = *num_pseudo;
    if (mode) ctx.cfg.oodgen.mode = parse_mode_mix(*mode);
    if (generator) ctx.cfg.oodgen.generator = parse_generator_kind(*generator);
    if (epochs) ctx.cfg.train.epochs = *epochs;
    if (no_contrastive) ctx.cfg.train.no_contrastive = true;
    if (no_ind_ood) ctx.cfg.train.no_ind_ood = true;
    if (no_triplet) ctx.cfg.train.no_triplet = true;
    ctx.cfg.validate();

    if (*ingest) return cmd_ingest(ctx, ingest_input);
    if (*synth) return cmd_synth(ctx);
    if (*generate) return cmd_generate(ctx);
    if (*train_cmd) return cmd_train(ctx);
    if (*eval_cmd) return cmd_eval(ctx, csv);
    if (*ablate) return cmd_ablate(ctx);
    if (*sweep) return cmd_sweep(ctx);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace lect::cli
