#pragma once

#include <cstdint>

#include "lect/graph.hpp"

namespace lect {

struct SynthConfig {
  std::size_t nodes_per_class = 150;
  double p_in = 0.05;
  double p_out = 0.005;
  /// Probability that a node's text borrows one keyword from another class.
  double noise_rate = 0.3;
  std::size_t min_keywords = 2;
  std::size_t extra_keywords = 2;  // plus U{0..extra}
};

/// Stochastic-block-model text graph with four science classes; the last
/// one (astronomy) is held out as OOD.
struct SynthBenchmark {
  TextAttributedGraph graph;
  SplitSpec split;
  double expected_intra_edges = 0.0;
  double expected_inter_edges = 0.0;
};

SynthBenchmark synth_benchmark(std::uint64_t seed, const SynthConfig& cfg = {});

}  // namespace lect
