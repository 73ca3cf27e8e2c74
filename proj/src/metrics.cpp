#include "lect/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "lect/energy.hpp"

namespace lect {

std::size_t ScoredSet::positives() const {
  return static_cast<std::size_t>(std::count(is_ood.begin(), is_ood.end(), true));
}

std::size_t ScoredSet::negatives() const { return is_ood.size() - positives(); }

namespace {

void require_both_classes(const ScoredSet& s, const char* who) {
  if (s.scores.size() != s.is_ood.size()) throw Error(std::string(who) + ": scores and labels differ in length");
  if (s.positives() == 0 || s.negatives() == 0) {
    throw Error(std::string(who) + ": needs at least one OOD and one IND score");
  }
  for (double x : s.scores) {
    if (std::isnan(x)) throw Error(std::string(who) + ": NaN score");
  }
}

std::vector<std::size_t> order_by_score(const ScoredSet& s, bool descending) {
  std::vector<std::size_t> idx(s.scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? s.scores[a] > s.scores[b] : s.scores[a] < s.scores[b];
  });
  return idx;
}

}  // namespace

double auroc(const ScoredSet& s) {
  require_both_classes(s, "auroc");
  const auto idx = order_by_score(s, false);
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && s.scores[idx[j + 1]] == s.scores[idx[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (s.is_ood[idx[k]]) rank_sum += midrank;
    }
    i = j + 1;
  }
  const auto pos = static_cast<double>(s.positives());
  const auto neg = static_cast<double>(s.negatives());
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double aupr(const ScoredSet& s) {
  require_both_classes(s, "aupr");
  const auto idx = order_by_score(s, true);
  const auto pos = static_cast<double>(s.positives());
  double tp = 0.0, fp = 0.0, prev_recall = 0.0, area = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && s.scores[idx[j]] == s.scores[idx[i]]) {
      (s.is_ood[idx[j]] ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / pos;
    const double precision = tp / (tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

double fpr_at_tpr(const ScoredSet& s, double tpr) {
  require_both_classes(s, "fpr_at_tpr");
  std::vector<double> ind, ood;
  for (std::size_t i = 0; i < s.scores.size(); ++i) (s.is_ood[i] ? ood : ind).push_back(s.scores[i]);
  const double tau = calibrate_tau(ind, tpr);
  const auto accepted = std::count_if(ood.begin(), ood.end(), [tau](double e) { return e <= tau; });
  return static_cast<double>(accepted) / static_cast<double>(ood.size());
}

double ind_accuracy(const Matrix& logits, std::span<const NodeId> nodes, std::span<const int> labels) {
  if (nodes.empty()) throw Error("ind_accuracy: empty node set");
  if (nodes.size() != labels.size()) throw Error("ind_accuracy: nodes and labels differ in length");
  std::size_t correct = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(nodes[k]);
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(i, c) > logits(i, best)) best = c;
    }
    if (best == labels[k]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

nlohmann::json report_to_json(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"ind_acc", r.ind_acc},
          {"auroc", opt(r.auroc)},
          {"aupr", opt(r.aupr)},
          {"fpr95", opt(r.fpr95)},
          {"tau", r.tau},
          {"seed", r.seed},
          {"epoch", r.epoch},
          {"config_hash", r.config_hash},
          {"conventions",
           {{"score", "energy, higher means more OOD"},
            {"auroc_aupr_positive_class", "OOD"},
            {"fpr95_operating_point", "95% of IND test nodes accepted (energy <= threshold)"},
            {"tau_source", "IND validation energies, 95% acceptance"}}}};
}

EvalReport report_from_json(const nlohmann::json& doc) {
  auto opt = [&](const char* key) -> std::optional<double> {
    if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
    return doc.at(key).get<double>();
  };
  EvalReport r;
  r.ind_acc = doc.at("ind_acc").get<double>();
  r.auroc = opt("auroc");
  r.aupr = opt("aupr");
  r.fpr95 = opt("fpr95");
  r.tau = doc.at("tau").get<double>();
  r.seed = doc.value("seed", std::uint64_t{0});
  r.epoch = doc.value("epoch", std::uint64_t{0});
  r.config_hash = doc.value("config_hash", std::string{});
  return r;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

std::string format_percent(const MeanStd& ms) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", 100.0 * ms.mean, 100.0 * ms.std);
  return buf;
}

}  // namespace lect
