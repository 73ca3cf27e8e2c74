#include "lect/oodgen.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "lect/lexicon.hpp"

namespace lect {

std::string to_string(OodMode mode) { return mode == OodMode::Near ? "near" : "far"; }

std::string to_string(ModeMix mix) {
  switch (mix) {
    case ModeMix::Near: return "near";
    case ModeMix::Far: return "far";
    case ModeMix::Mixed: return "mixed";
  }
  return "mixed";
}

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::RemoteLlm: return "remote-llm";
    case GeneratorKind::Template: return "template";
    case GeneratorKind::RandomText: return "random-text";
  }
  return "template";
}

OodMode parse_ood_mode(const std::string& s) {
  if (s == "near") return OodMode::Near;
  if (s == "far") return OodMode::Far;
  throw Error("unknown OOD mode \"" + s + "\" (expected near|far)");
}

ModeMix parse_mode_mix(const std::string& s) {
  if (s == "near") return ModeMix::Near;
  if (s == "far") return ModeMix::Far;
  if (s == "mixed") return ModeMix::Mixed;
  throw Error("unknown generation mode \"" + s + "\" (expected near|far|mixed)");
}

GeneratorKind parse_generator_kind(const std::string& s) {
  if (s == "remote-llm") return GeneratorKind::RemoteLlm;
  if (s == "template") return GeneratorKind::Template;
  if (s == "random-text") return GeneratorKind::RandomText;
  throw Error("unknown generator \"" + s + "\" (expected remote-llm|template|random-text)");
}

std::size_t default_num_pseudo(std::size_t train_count) {
  return std::max<std::size_t>(8, train_count / 10);
}

OodGenConfig resolve_defaults(OodGenConfig cfg, const NodeSplit& split) {
  if (cfg.num_pseudo == 0) cfg.num_pseudo = default_num_pseudo(split.train_idx.size());
  if (cfg.c_max == 0) cfg.c_max = static_cast<std::size_t>(split.num_ind_classes);
  if (cfg.num_pseudo < 1) throw Error("oodgen: num_pseudo must be at least 1");
  if (cfg.c_max < 1) throw Error("oodgen: c_max must be at least 1");
  return cfg;
}

std::vector<OodMode> assign_modes(std::size_t count, ModeMix mix) {
  std::vector<OodMode> modes(count);
  const std::size_t near_count = mix == ModeMix::Near   ? count
                                 : mix == ModeMix::Far  ? 0
                                                        : (count + 1) / 2;
  for (std::size_t i = 0; i < count; ++i) modes[i] = i < near_count ? OodMode::Near : OodMode::Far;
  return modes;
}

std::vector<Edge> PseudoSkeleton::edges() const {
  std::vector<Edge> out;
  for (std::size_t p = 0; p < neighbors.size(); ++p) {
    for (NodeId ind : neighbors[p]) out.push_back({ind, base_node_count + p});
  }
  return out;
}

PseudoSkeleton init_pseudo_edges(const NodeSplit& split, std::size_t base_node_count,
                                 const OodGenConfig& cfg, Rng& rng) {
  if (split.train_idx.empty()) throw Error("oodgen: empty training set, cannot attach pseudo nodes");
  if (cfg.num_pseudo < 1 || cfg.c_max < 1) throw Error("oodgen: num_pseudo and c_max must be >= 1");
  PseudoSkeleton skel;
  skel.base_node_count = base_node_count;
  skel.modes = assign_modes(cfg.num_pseudo, cfg.mode);
  skel.neighbors.resize(cfg.num_pseudo);

  std::vector<NodeId> pool = split.train_idx;
  for (auto& neighbors : skel.neighbors) {
    const std::size_t k = std::min(1 + rng.uniform_index(cfg.c_max), pool.size());
    // Partial Fisher-Yates: the first k slots become a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(pool[i], pool[i + rng.uniform_index(pool.size() - i)]);
    }
    neighbors.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(neighbors.begin(), neighbors.end());
  }
  return skel;
}

std::vector<std::string> neighbor_label_names(const std::vector<NodeId>& neighbors,
                                              const NodeSplit& split,
                                              const std::vector<std::string>& ind_class_names) {
  std::set<int> classes;
  for (NodeId n : neighbors) {
    const int label = n < split.ind_labels.size() ? split.ind_labels[n] : -1;
    if (label < 0) throw Error("oodgen: neighbor " + std::to_string(n) + " is not an IND node");
    classes.insert(label);
  }
  std::vector<std::string> names;
  for (int c : classes) names.push_back(ind_class_names.at(static_cast<std::size_t>(c)));
  return names;
}

namespace {

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lowered(const std::string& s) {
  std::string out;
  for (unsigned char c : s) out.push_back(static_cast<char>(std::tolower(c)));
  return out;
}

}  // namespace

CotPrompt build_cot_prompt(const std::vector<std::string>& ind_class_names,
                           const std::vector<std::string>& neighbor_labels, OodMode mode) {
  if (ind_class_names.empty()) throw Error("prompt: IND class names must not be empty");
  if (neighbor_labels.empty()) throw Error("prompt: a pseudo node needs at least one neighbor label");
  for (const auto& label : neighbor_labels) {
    if (std::find(ind_class_names.begin(), ind_class_names.end(), label) == ind_class_names.end()) {
      throw Error("prompt: neighbor label \"" + label + "\" is not an IND class name");
    }
  }
  const std::string distance =
      mode == OodMode::Near
          ? "close to the main domain you identified, so that it reflects a subtle shift away from the known classes"
          : "far from the main domain you identified, so that it is only loosely related to the known classes";

  CotPrompt prompt;
  prompt.system =
      "You help build out-of-distribution nodes for a text-attributed graph. Reason step by "
      "step and always put your final answer for each step on its own last line.";
  prompt.steps[0] =
      "Step 1 - Main domain classification. The in-distribution nodes of the graph carry these "
      "class labels: " + join(ind_class_names, "; ") +
      ". Which main domain do these labels belong to? Give the domain name on the last line.";
  prompt.steps[1] =
      "Step 2 - Selection of OOD categories. Choose one category that is " + distance +
      ". It must not be any of the in-distribution labels (" + join(ind_class_names, "; ") +
      "). Give the category name on the last line.";
  prompt.steps[2] =
      "Step 3 - Analysis of connected sample labels. The new node is linked to nodes labeled: " +
      join(neighbor_labels, "; ") +
      ". Considering only these connected labels, pick an out-of-distribution label, consistent "
      "with your previous choice, that would plausibly be correlated with them. Give the label on "
      "the last line.";
  prompt.steps[3] =
      "Step 4 - Sample generation. Write the text attribute of a node belonging to the label you "
      "selected: two or three sentences in the style of the graph's node texts. Reply with the "
      "text only.";
  return prompt;
}

std::string last_nonempty_line(const std::string& answer) {
  std::string last;
  std::size_t start = 0;
  while (start <= answer.size()) {
    const auto end = answer.find('\n', start);
    const std::string line = trim(answer.substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (!line.empty()) last = line;
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return last;
}

GeneratedText TemplateGenerator::generate(const GenerationRequest& request) const {
  const auto& lexicon = domain_lexicon();
  const std::size_t home = classify_domain(request.ind_class_names);

  std::set<std::string> excluded;
  for (const auto& name : request.ind_class_names) excluded.insert(lowered(name));

  struct Candidate {
    const Category* category;
    const Domain* domain;
  };
  std::vector<Candidate> pool;
  for (std::size_t d = 0; d < lexicon.size(); ++d) {
    const bool same = d == home;
    if ((request.mode == OodMode::Near) != same) continue;
    for (const auto& cat : lexicon[d].adjacent) {
      if (!excluded.contains(lowered(cat.name))) pool.push_back({&cat, &lexicon[d]});
    }
  }
  if (pool.empty()) throw Error("template generator: no candidate OOD categories");

  std::uint64_t state = splitmix64(request.seed ^ (request.mode == OodMode::Near ? 0x6e6561ull : 0x666172ull));
  for (const auto& label : request.neighbor_labels) state = fnv1a64(label + '\x1f', state);
  Rng rng(splitmix64(state));

  const Candidate pick = pool[rng.uniform_index(pool.size())];
  auto draw = [&rng](const std::vector<std::string>& words, std::size_t k) {
    std::vector<std::string> w = words;
    k = std::min(k, w.size());
    for (std::size_t i = 0; i < k; ++i) std::swap(w[i], w[i + rng.uniform_index(w.size() - i)]);
    w.resize(k);
    return w;
  };
  const auto kw = draw(pick.category->keywords, 4);
  const auto reg = draw(pick.domain->register_words, 3);
  const std::string& name = pick.category->name;
  const std::string links = join(request.neighbor_labels, " and ");

  // Plain function words around the content, so the scaffolding itself is
  // not a giveaway token.
  std::string text;
  switch (rng.uniform_index(3)) {
    case 0:
      text = "We report " + reg[0] + " on " + kw[0] + " and " + kw[1] + " in " + name + ", with " + reg[1] +
             " of " + kw[2] + " " + kw[3] + " " + reg[2] + ", related to " + links + ".";
      break;
    case 1:
      text = "A " + name + " " + reg[0] + " of " + kw[0] + " " + kw[1] + " with the " + kw[2] + " and " + kw[3] +
             " " + reg[1] + " " + reg[2] + " for " + links + ".";
      break;
    default:
      text = kw[0] + " " + kw[1] + " " + reg[0] + ": " + reg[1] + " of the " + kw[2] + " in " + name + " and " +
             links + " with " + kw[3] + " " + reg[2] + ".";
      break;
  }
  return {pick.category->name, text, {}};
}

GeneratedText RandomTextGenerator::generate(const GenerationRequest& request) const {
  const auto& vocab = random_text_vocabulary();
  Rng rng(splitmix64(request.seed ^ 0x72616e646f6dull));
  std::string text;
  const std::size_t words = 9 + rng.uniform_index(5);
  for (std::size_t i = 0; i < words; ++i) {
    text += (i ? " " : "") + vocab[rng.uniform_index(vocab.size())];
  }
  return {"random", text + ".", {}};
}

RemoteChatClient::RemoteChatClient(RemoteChatConfig config, std::shared_ptr<HttpTransport> transport,
                                   JsonPostClient::Sleeper sleeper)
    : config_(std::move(config)),
      client_(std::move(transport), config_.endpoint,
              [&]() -> std::string {
                if (!config_.token.empty()) return config_.token;
                const char* env = std::getenv("LECT_LLM_TOKEN");
                return env ? env : "";
              }(),
              config_.retry, std::move(sleeper)) {}

std::string RemoteChatClient::complete(const std::vector<ChatMessage>& messages) const {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  const nlohmann::json response = client_.post({{"model", config_.model}, {"messages", msgs}});
  try {
    const auto& content = response.at("choices").at(0).at("message").at("content");
    return content.is_string() ? content.get<std::string>() : std::string{};
  } catch (const nlohmann::json::exception&) {
    throw Error("chat completion response lacks choices[0].message.content");
  }
}

ChatGenerator::ChatGenerator(std::shared_ptr<const ChatClient> client, std::string model_id)
    : client_(std::move(client)), model_id_(std::move(model_id)) {
  if (!client_) throw Error("ChatGenerator: null client");
}

GeneratedText ChatGenerator::generate(const GenerationRequest& request) const {
  const CotPrompt prompt = build_cot_prompt(request.ind_class_names, request.neighbor_labels, request.mode);
  std::vector<ChatMessage> messages{{"system", prompt.system}};
  std::array<std::string, 4> answers;
  for (std::size_t step = 0; step < prompt.steps.size(); ++step) {
    messages.push_back({"user", prompt.steps[step]});
    answers[step] = client_->complete(messages);
    if (trim(answers[step]).empty()) {
      throw Error("empty completion at step " + std::to_string(step + 1));
    }
    messages.push_back({"assistant", answers[step]});
  }
  std::string category = last_nonempty_line(answers[2]);
  if (category.empty()) category = last_nonempty_line(answers[1]);
  return {category, trim(answers[3]), messages};
}

PseudoOodBatch generate_texts(const PseudoSkeleton& skeleton, const OodGenConfig& cfg,
                              const NodeSplit& split,
                              const std::vector<std::string>& ind_class_names,
                              const TextGenerator& generator, unsigned concurrency) {
  const std::size_t n = skeleton.size();
  if (skeleton.modes.size() != n) throw Error("oodgen: skeleton modes/neighbors size mismatch");

  std::vector<GenerationRequest> requests(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (skeleton.neighbors[i].empty()) {
      throw GenerationError("has no IND neighbors", skeleton.base_node_count + i);
    }
    requests[i] = {ind_class_names, neighbor_label_names(skeleton.neighbors[i], split, ind_class_names),
                   skeleton.modes[i], derive_seed(cfg.seed, "oodgen-text", i)};
  }

  std::vector<std::optional<GeneratedText>> results(n);
  std::mutex mu;
  std::size_t next = 0;
  std::optional<std::pair<std::size_t, std::string>> failure;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= n || failure) return;
        i = next++;
      }
      try {
        GeneratedText out = generator.generate(requests[i]);
        if (trim(out.text).empty()) throw Error("generator returned an empty text");
        std::lock_guard lock(mu);
        results[i] = std::move(out);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        if (!failure || failure->first > i) failure.emplace(i, e.what());
        return;
      }
    }
  };
  const unsigned workers = static_cast<unsigned>(std::clamp<std::size_t>(concurrency, 1, std::max<std::size_t>(n, 1)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) throw GenerationError(failure->second, skeleton.base_node_count + failure->first);

  PseudoOodBatch batch;
  batch.base_node_count = skeleton.base_node_count;
  batch.edges = skeleton.edges();
  batch.generator_id = generator.id();
  batch.seed = cfg.seed;
  for (std::size_t i = 0; i < n; ++i) {
    batch.node_ids.push_back(skeleton.base_node_count + i);
    batch.texts.push_back(results[i]->text);
    batch.meta.push_back({requests[i].mode, results[i]->category, requests[i].neighbor_labels});
    batch.transcripts.push_back(std::move(results[i]->transcript));
  }
  return batch;
}

PseudoOodBatch generate_pseudo_ood(const TextAttributedGraph& graph, const NodeSplit& split,
                                   const OodGenConfig& cfg_in, const TextGenerator& generator,
                                   unsigned concurrency) {
  const OodGenConfig cfg = resolve_defaults(cfg_in, split);
  Rng rng(derive_seed(cfg.seed, "oodgen-edges"));
  const PseudoSkeleton skel = init_pseudo_edges(split, graph.node_count(), cfg, rng);
  return generate_texts(skel, cfg, split, split.ind_class_names(graph), generator, concurrency);
}

AugmentedGraph augment_graph(const TextAttributedGraph& graph, const NodeSplit& split,
                             const PseudoOodBatch& batch) {
  const std::size_t base = graph.node_count();
  if (batch.size() > 0 && batch.base_node_count != base) {
    throw Error("augment: pseudo node ids start at " + std::to_string(batch.base_node_count) +
                " but the graph has " + std::to_string(base) + " nodes (id collision)");
  }
  if (batch.texts.size() != batch.size() || batch.meta.size() != batch.size()) {
    throw Error("augment: batch texts/meta do not match node ids");
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.node_ids[i] != base + i) {
      throw Error("augment: pseudo node ids must be contiguous after the original nodes (id collision at " +
                  std::to_string(batch.node_ids[i]) + ")");
    }
  }
  std::set<NodeId> train(split.train_idx.begin(), split.train_idx.end());
  for (const Edge& e : batch.edges) {
    if (e.v < base || e.v >= base + batch.size()) {
      throw Error("augment: pseudo edge endpoint " + std::to_string(e.v) + " is not a pseudo node");
    }
    if (!train.contains(e.u)) {
      throw Error("augment: pseudo edge attaches to non-training node " + std::to_string(e.u));
    }
  }

  std::vector<std::string> texts = graph.texts();
  std::vector<std::optional<int>> labels = graph.labels();
  texts.insert(texts.end(), batch.texts.begin(), batch.texts.end());
  labels.resize(base + batch.size(), std::nullopt);
  std::vector<Edge> edges = graph.edges();
  edges.insert(edges.end(), batch.edges.begin(), batch.edges.end());

  AugmentedGraph out{TextAttributedGraph(std::move(texts), std::move(labels), std::move(edges),
                                         graph.num_classes(), graph.class_names()),
                     base, std::vector<bool>(base + batch.size(), false), batch.edges};
  for (std::size_t i = base; i < base + batch.size(); ++i) out.is_pseudo[i] = true;
  return out;
}

nlohmann::json batch_to_json(const PseudoOodBatch& batch) {
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    nodes.push_back({{"id", batch.node_ids[i]},
                     {"text", batch.texts[i]},
                     {"mode", to_string(batch.meta[i].mode)},
                     {"category", batch.meta[i].chosen_category},
                     {"neighbor_labels", batch.meta[i].neighbor_labels}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : batch.edges) edges.push_back({e.u, e.v});
  return {{"format", "lect-pseudo-ood-v1"},
          {"base_node_count", batch.base_node_count},
          {"generator", batch.generator_id},
          {"seed", batch.seed},
          {"nodes", std::move(nodes)},
          {"edges", std::move(edges)}};
}

PseudoOodBatch batch_from_json(const nlohmann::json& doc) {
  try {
    PseudoOodBatch batch;
    batch.base_node_count = doc.at("base_node_count").get<std::size_t>();
    batch.generator_id = doc.at("generator").get<std::string>();
    batch.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& node : doc.at("nodes")) {
      batch.node_ids.push_back(node.at("id").get<NodeId>());
      batch.texts.push_back(node.at("text").get<std::string>());
      batch.meta.push_back({parse_ood_mode(node.at("mode").get<std::string>()),
                            node.at("category").get<std::string>(),
                            node.at("neighbor_labels").get<std::vector<std::string>>()});
    }
    for (const auto& e : doc.at("edges")) {
      batch.edges.push_back({e.at(0).get<NodeId>(), e.at(1).get<NodeId>()});
    }
    batch.transcripts.resize(batch.size());
    return batch;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("pseudo-OOD batch file: ") + e.what());
  }
}

void save_batch(const PseudoOodBatch& batch, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write batch file " + path.string());
  out << batch_to_json(batch).dump(1) << '\n';
}

PseudoOodBatch load_batch(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open batch file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("batch file " + path.string() + ": " + e.what());
  }
  return batch_from_json(doc);
}

}  // namespace lect
