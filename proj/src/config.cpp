#include "lect/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace lect {

namespace {

void reject_unknown(const nlohmann::json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw Error("config: " + where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) throw Error("config: unknown key \"" + where + "." + key + "\"");
  }
}

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& field) {
  if (obj.contains(key)) field = obj.at(key).get<T>();
}

RetryPolicy read_retry(const nlohmann::json& obj, const std::string& where) {
  RetryPolicy p;
  reject_unknown(obj, where, {"max_retries", "base_delay_ms", "max_delay_ms"});
  read(obj, "max_retries", p.max_retries);
  if (obj.contains("base_delay_ms")) p.base_delay = std::chrono::milliseconds(obj.at("base_delay_ms").get<long>());
  if (obj.contains("max_delay_ms")) p.max_delay = std::chrono::milliseconds(obj.at("max_delay_ms").get<long>());
  return p;
}

nlohmann::json retry_json(const RetryPolicy& p) {
  return {{"max_retries", p.max_retries},
          {"base_delay_ms", p.base_delay.count()},
          {"max_delay_ms", p.max_delay.count()}};
}

}  // namespace

void AppConfig::validate() const {
  if (!(split.train_fraction > 0.0 && split.val_fraction > 0.0 && split.train_fraction + split.val_fraction < 1.0)) {
    throw Error("config: split fractions must be positive and leave room for a test set");
  }
  if (encoder.kind != "hash" && encoder.kind != "remote") {
    throw Error("config: encoder.kind must be \"hash\" or \"remote\"");
  }
  if (encoder.dim == 0) throw Error("config: encoder.dim must be >= 1");
  if (encoder.kind == "remote" && encoder.remote.endpoint.empty()) {
    throw Error("config: encoder.endpoint is required for a remote encoder");
  }
  if (encoder.kind == "remote" && encoder.remote.batch_size == 0) throw Error("config: encoder.batch_size must be >= 1");
  if (oodgen.generator == GeneratorKind::RemoteLlm && llm.remote.endpoint.empty()) {
    throw Error("config: llm.endpoint is required for the remote-llm generator");
  }
  if (experiment.seeds.empty()) throw Error("config: experiment.seeds must not be empty");
  train.validate();
}

AppConfig config_from_json(const nlohmann::json& doc) {
  reject_unknown(doc, "<root>", {"seed", "split", "oodgen", "encoder", "llm", "train", "experiment"});
  AppConfig c;
  read(doc, "seed", c.seed);
  if (doc.contains("split")) {
    const auto& s = doc.at("split");
    reject_unknown(s, "split", {"ood_classes", "train_fraction", "val_fraction"});
    if (s.contains("ood_classes")) {
      const auto v = s.at("ood_classes").get<std::vector<int>>();
      c.split.ood_classes = std::set<int>(v.begin(), v.end());
    }
    read(s, "train_fraction", c.split.train_fraction);
    read(s, "val_fraction", c.split.val_fraction);
  }
  if (doc.contains("oodgen")) {
    const auto& o = doc.at("oodgen");
    reject_unknown(o, "oodgen", {"num_pseudo", "c_max", "mode", "generator"});
    read(o, "num_pseudo", c.oodgen.num_pseudo);
    read(o, "c_max", c.oodgen.c_max);
    if (o.contains("mode")) c.oodgen.mode = parse_mode_mix(o.at("mode").get<std::string>());
    if (o.contains("generator")) c.oodgen.generator = parse_generator_kind(o.at("generator").get<std::string>());
  }
  if (doc.contains("encoder")) {
    const auto& e = doc.at("encoder");
    reject_unknown(e, "encoder", {"kind", "dim", "seed", "endpoint", "model", "batch_size", "concurrency", "retry"});
    read(e, "kind", c.encoder.kind);
    read(e, "dim", c.encoder.dim);
    read(e, "seed", c.encoder.seed);
    read(e, "endpoint", c.encoder.remote.endpoint);
    read(e, "model", c.encoder.remote.model);
    read(e, "batch_size", c.encoder.remote.batch_size);
    read(e, "concurrency", c.encoder.remote.concurrency);
    if (e.contains("retry")) c.encoder.remote.retry = read_retry(e.at("retry"), "encoder.retry");
  }
  c.encoder.remote.dim = c.encoder.dim;
  if (doc.contains("llm")) {
    const auto& l = doc.at("llm");
    reject_unknown(l, "llm", {"endpoint", "model", "concurrency", "retry"});
    read(l, "endpoint", c.llm.remote.endpoint);
    read(l, "model", c.llm.remote.model);
    read(l, "concurrency", c.llm.concurrency);
    if (l.contains("retry")) c.llm.remote.retry = read_retry(l.at("retry"), "llm.retry");
  }
  if (doc.contains("train")) {
    nlohmann::json t = doc.at("train");
    if (t.is_object() && t.contains("seed")) throw Error("config: unknown key \"train.seed\" (use the top-level seed)");
    if (t.is_object()) {
      for (const auto& [key, _] : t.items()) {
        if (!train_config_to_json(TrainConfig{}).contains(key)) throw Error("config: unknown key \"train." + key + "\"");
      }
    }
    try {
      c.train = train_config_from_json(t);
    } catch (const Error& err) {
      throw Error(std::string("config: ") + err.what());
    }
  }
  if (doc.contains("experiment")) {
    const auto& x = doc.at("experiment");
    reject_unknown(x, "experiment", {"seeds", "pair_grid", "triplet_grid"});
    read(x, "seeds", c.experiment.seeds);
    read(x, "pair_grid", c.experiment.pair_grid);
    read(x, "triplet_grid", c.experiment.triplet_grid);
  }
  c.validate();
  return c;
}

nlohmann::json config_to_json(const AppConfig& c) {
  nlohmann::json train = train_config_to_json(c.train);
  train.erase("seed");
  return {{"seed", c.seed},
          {"split",
           {{"ood_classes", std::vector<int>(c.split.ood_classes.begin(), c.split.ood_classes.end())},
            {"train_fraction", c.split.train_fraction},
            {"val_fraction", c.split.val_fraction}}},
          {"oodgen",
           {{"num_pseudo", c.oodgen.num_pseudo},
            {"c_max", c.oodgen.c_max},
            {"mode", to_string(c.oodgen.mode)},
            {"generator", to_string(c.oodgen.generator)}}},
          {"encoder",
           {{"kind", c.encoder.kind},
            {"dim", c.encoder.dim},
            {"seed", c.encoder.seed},
            {"endpoint", c.encoder.remote.endpoint},
            {"model", c.encoder.remote.model},
            {"batch_size", c.encoder.remote.batch_size},
            {"concurrency", c.encoder.remote.concurrency},
            {"retry", retry_json(c.encoder.remote.retry)}}},
          {"llm",
           {{"endpoint", c.llm.remote.endpoint},
            {"model", c.llm.remote.model},
            {"concurrency", c.llm.concurrency},
            {"retry", retry_json(c.llm.remote.retry)}}},
          {"train", train},
          {"experiment",
           {{"seeds", c.experiment.seeds},
            {"pair_grid", c.experiment.pair_grid},
            {"triplet_grid", c.experiment.triplet_grid}}}};
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

std::unique_ptr<TextEncoder> make_encoder(const EncoderSettings& s) {
  if (s.kind == "hash") return std::make_unique<HashEncoder>(s.dim, s.seed);
  RemoteEncoderConfig cfg = s.remote;
  cfg.dim = s.dim;
  return std::make_unique<RemoteEncoder>(cfg, make_http_transport({}));
}

std::unique_ptr<TextGenerator> make_generator(GeneratorKind kind, const LlmSettings& s) {
  switch (kind) {
    case GeneratorKind::Template: return std::make_unique<TemplateGenerator>();
    case GeneratorKind::RandomText: return std::make_unique<RandomTextGenerator>();
    case GeneratorKind::RemoteLlm: {
      auto client = std::make_shared<RemoteChatClient>(s.remote, make_http_transport({}));
      return std::make_unique<ChatGenerator>(client, s.remote.model.empty() ? "remote" : s.remote.model);
    }
  }
  throw Error("unknown generator kind");
}

}  // namespace lect
