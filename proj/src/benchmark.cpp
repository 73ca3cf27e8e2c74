#include "lect/benchmark.hpp"

#include <array>
#include <string>
#include <vector>

#include "lect/lexicon.hpp"
#include "lect/rng.hpp"

namespace lect {

namespace {

// Class vocabularies share no word with each other and never contain a class
// name. The held-out astronomy class overlaps the generator's astronomy
// category, which the generator may pick since only IND names are excluded.
const std::array<std::vector<std::string>, 4>& class_vocab() {
  static const std::array<std::vector<std::string>, 4> vocab = {{
      {"quantum", "momentum", "relativity", "particle", "photon", "entropy", "magnetism", "electron",
       "superconductivity", "boson", "lepton", "inertia", "torque", "wavelength", "oscillation", "plasma",
       "friction", "kinetic", "laser", "quark", "fermion", "collider", "accelerator", "acoustics"},
      {"molecule", "reagent", "catalyst", "isomer", "titration", "oxidation", "covalent", "ionic",
       "solvent", "precipitate", "electrolysis", "alkane", "ester", "stoichiometry", "chromatography",
       "spectroscopy", "valence", "alkene", "aromatic", "hydrolysis", "acidity", "buffer", "compound", "reactant"},
      {"cell", "gene", "protein", "mitochondria", "ribosome", "chromosome", "mutation", "evolution",
       "ecosystem", "organism", "photosynthesis", "membrane", "tissue", "enzyme", "genome", "species",
       "neuron", "bacteria", "embryo", "allele", "phenotype", "hormone", "metabolism", "symbiosis"},
      {"galaxy", "nebula", "telescope", "supernova", "quasar", "exoplanet", "comet", "asteroid",
       "orbit", "planet", "stellar", "cosmology", "pulsar", "redshift", "constellation", "eclipse",
       "meteor", "solar", "lunar", "interstellar", "spectrograph", "parallax", "celestial", "blackhole"},
  }};
  return vocab;
}

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {"the", "of", "we", "study", "results", "new", "analysis",
                                                 "report", "on", "and", "a", "with"};
  return words;
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[rng.uniform_index(v.size())];
}

std::string node_text(int cls, const SynthConfig& cfg, Rng& rng) {
  const auto& vocab = class_vocab();
  const auto& reg = domain_lexicon().front().register_words;
  std::vector<std::string> words;
  const std::size_t n_kw = cfg.min_keywords + rng.uniform_index(cfg.extra_keywords + 1);
  for (std::size_t i = 0; i < n_kw; ++i) words.push_back(pick(vocab[cls], rng));
  const std::size_t n_reg = 2 + rng.uniform_index(2);
  for (std::size_t i = 0; i < n_reg; ++i) words.push_back(pick(reg, rng));
  if (rng.bernoulli(cfg.noise_rate)) {
    const std::size_t other = (static_cast<std::size_t>(cls) + 1 + rng.uniform_index(3)) % 4;
    words.push_back(pick(vocab[other], rng));
  }
  const std::size_t n_fill = 2 + rng.uniform_index(3);
  for (std::size_t i = 0; i < n_fill; ++i) words.push_back(pick(filler_words(), rng));
  for (std::size_t i = words.size(); i > 1; --i) std::swap(words[i - 1], words[rng.uniform_index(i)]);

  std::string text;
  for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
  text[0] = static_cast<char>(text[0] - 'a' + 'A');
  return text + ".";
}

}  // namespace

SynthBenchmark synth_benchmark(std::uint64_t seed, const SynthConfig& cfg) {
  constexpr int kClasses = 4;
  const std::size_t n = cfg.nodes_per_class * kClasses;

  Rng text_rng(derive_seed(seed, "synth-text"));
  std::vector<std::string> texts;
  std::vector<std::optional<int>> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const int cls = static_cast<int>(i / cfg.nodes_per_class);
    labels.emplace_back(cls);
    texts.push_back(node_text(cls, cfg, text_rng));
  }

  Rng edge_rng(derive_seed(seed, "synth-edges"));
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      const bool same = u / cfg.nodes_per_class == v / cfg.nodes_per_class;
      if (edge_rng.bernoulli(same ? cfg.p_in : cfg.p_out)) edges.push_back({u, v});
    }
  }

  const double m = static_cast<double>(cfg.nodes_per_class);
  SynthBenchmark out{TextAttributedGraph(std::move(texts), std::move(labels), std::move(edges), kClasses,
                                         {"physics", "chemistry", "biology", "astronomy"}),
                     SplitSpec{{3}, 0.6, 0.2, seed},
                     cfg.p_in * m * (m - 1.0) / 2.0 * kClasses,
                     cfg.p_out * m * m * kClasses * (kClasses - 1) / 2.0};
  return out;
}

}  // namespace lect
