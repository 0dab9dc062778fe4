#pragma once

// State-detection metrics: precision, recall and F1 from confusion counts,
// micro-pooled "overall" scores, and normalizer error rates.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nilm/detail/text.hpp"
#include "nilm/errors.hpp"
#include "nilm/normalizer.hpp"
#include "nilm/preprocess.hpp"

namespace nilm {

struct ConfusionCounts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // some ratio was 0/0 and was reported as 0
};

struct ErrorRates {
  double misaligned_rate = 0.0;
  double malformed_rate = 0.0;
};

inline ConfusionCounts confusion(const StateSeries& pred, const StateSeries& truth) {
  if (pred.size() != truth.size())
    throw LengthMismatch("prediction has " + std::to_string(pred.size()) + " slots, truth has " +
                         std::to_string(truth.size()));
  ConfusionCounts c;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const bool p = pred.states[k] != 0, t = truth.states[k] != 0;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

inline Scores scores(const ConfusionCounts& c) {
  Scores s;
  const auto ratio = [&s](double num, double den) {
    if (den == 0.0) {
      s.degenerate = true;
      return 0.0;
    }
    return num / den;
  };
  const auto tp = static_cast<double>(c.tp);
  s.precision = ratio(tp, tp + static_cast<double>(c.fp));
  s.recall = ratio(tp, tp + static_cast<double>(c.fn));
  s.f1 = ratio(2.0 * tp, 2.0 * tp + static_cast<double>(c.fp) + static_cast<double>(c.fn));
  return s;
}

// Harmonic mean of a reported precision/recall pair.
inline double f1_from_precision_recall(double precision, double recall) {
  const double den = precision + recall;
  return den == 0.0 ? 0.0 : 2.0 * precision * recall / den;
}

// Micro-average: pool the counts, then score.
inline Scores overall(const std::map<std::string, ConfusionCounts>& counts) {
  if (counts.empty()) throw EmptyRun("no appliances to pool");
  ConfusionCounts pooled;
  for (const auto& [name, c] : counts) pooled += c;
  return scores(pooled);
}

inline ErrorRates error_rates(std::span<const NormalizationOutcome> outcomes) {
  if (outcomes.empty()) throw EmptyRun("no windows were processed");
  std::size_t mis = 0, mal = 0;
  for (const auto& o : outcomes) {
    if (o.kind == OutcomeKind::misaligned) ++mis;
    if (o.kind == OutcomeKind::malformed) ++mal;
  }
  const auto n = static_cast<double>(outcomes.size());
  return {static_cast<double>(mis) / n, static_cast<double>(mal) / n};
}

struct ApplianceScore {
  std::string appliance;
  ConfusionCounts counts;
  Scores scores;
};

struct ScoreReport {
  std::vector<ApplianceScore> appliances;  // in configured order
  Scores overall;
  ErrorRates errors;
  std::size_t windows = 0;

  const ApplianceScore& at(std::string_view name) const {
    for (const auto& a : appliances)
      if (a.appliance == name) return a;
    throw InvalidConfig("no score for " + std::string(name));
  }
};

inline ScoreReport score_report(const std::vector<StateSeries>& predictions,
                                const std::vector<StateSeries>& truth,
                                std::span<const NormalizationOutcome> outcomes) {
  if (predictions.size() != truth.size()) throw LengthMismatch("prediction/truth appliance count");
  ScoreReport r;
  std::map<std::string, ConfusionCounts> pooled;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto c = confusion(predictions[i], truth[i]);
    r.appliances.push_back({predictions[i].appliance, c, scores(c)});
    pooled[predictions[i].appliance] = c;
  }
  r.overall = overall(pooled);
  r.errors = error_rates(outcomes);
  r.windows = outcomes.size();
  return r;
}

// appliance,precision,recall,f1,tp,fp,fn,tn,degenerate + an "overall" row.
inline std::string report_csv(const ScoreReport& r) {
  using detail::format_fixed;
  std::string out = "appliance,precision,recall,f1,tp,fp,fn,tn,degenerate\n";
  ConfusionCounts pooled;
  const auto row = [&](const std::string& name, const ConfusionCounts& c, const Scores& s) {
    out += name + ',' + format_fixed(s.precision, 4) + ',' + format_fixed(s.recall, 4) + ',' +
           format_fixed(s.f1, 4) + ',' + std::to_string(c.tp) + ',' + std::to_string(c.fp) + ',' +
           std::to_string(c.fn) + ',' + std::to_string(c.tn) + ',' + (s.degenerate ? "1" : "0") +
           '\n';
  };
  for (const auto& a : r.appliances) {
    row(a.appliance, a.counts, a.scores);
    pooled += a.counts;
  }
  row("overall", pooled, r.overall);
  return out;
}

inline nlohmann::json to_json(const Scores& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"degenerate", s.degenerate}};
}

inline nlohmann::json to_json(const ScoreReport& r) {
  nlohmann::json apps = nlohmann::json::array();
  for (const auto& a : r.appliances) {
    auto j = to_json(a.scores);
    j["appliance"] = a.appliance;
    j["tp"] = a.counts.tp;
    j["fp"] = a.counts.fp;
    j["fn"] = a.counts.fn;
    j["tn"] = a.counts.tn;
    apps.push_back(std::move(j));
  }
  return {{"appliances", apps},
          {"overall", to_json(r.overall)},
          {"misaligned_rate", r.errors.misaligned_rate},
          {"malformed_rate", r.errors.malformed_rate},
          {"windows", r.windows}};
}

}  // namespace nilm
