#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lect/common.hpp"

namespace lect {

/// Scores where higher means "more OOD" (energies), with OOD as the positive
/// class for AUROC/AUPR.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<bool> is_ood;

  std::size_t positives() const;
  std::size_t negatives() const;
};

/// Mann-Whitney AUROC with midranks: P(ood > ind) + 0.5 P(ood == ind).
double auroc(const ScoredSet& s);

/// Average precision over distinct thresholds, descending; tied scores form
/// one threshold group.
double aupr(const ScoredSet& s);

/// Operating point fixed on the IND side: tau is the smallest IND score
/// accepting at least `tpr` of IND nodes (score <= tau); returns the
/// fraction of OOD scores <= tau.
double fpr_at_tpr(const ScoredSet& s, double tpr = 0.95);

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double ind_accuracy(const Matrix& logits, std::span<const NodeId> nodes, std::span<const int> labels);

struct EvalReport {
  double ind_acc = 0.0;
  std::optional<double> auroc;
  std::optional<double> aupr;
  std::optional<double> fpr95;
  double tau = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::string config_hash;

  bool operator==(const EvalReport&) const = default;
};

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& doc);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Sample standard deviation (n - 1); zero for a single value.
MeanStd mean_std(std::span<const double> values);

/// "mean ± std" with values scaled to percent, as in result tables.
std::string format_percent(const MeanStd& ms);

}  // namespace lect
