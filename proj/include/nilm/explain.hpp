#pragma once

// Explanation mode: one window, per-appliance rationales captured verbatim,
// plus a claim-vs-truth table for human review. Rationale prose is never
// scored automatically.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nilm/client.hpp"
#include "nilm/normalizer.hpp"
#include "nilm/preprocess.hpp"
#include "nilm/prompt.hpp"

namespace nilm {

struct ExplainedWindow {
  WindowPrediction prediction;
  std::map<std::string, std::string> rationales;
  NormalizationOutcome outcome;
  std::size_t missing_rationales = 0;
  std::string prompt;
};

inline ExplainedWindow explain_window(const WindowInput& window, const PromptConfig& cfg,
                                      Backend& backend, std::span<const ApplianceProfile> profiles,
                                      const std::optional<OneShotExample>& example,
                                      const std::optional<ContextBlock>& context = std::nullopt) {
  if (!cfg.explanation_mode) throw ConfigMismatch("explanation mode is not enabled");
  ExplainedWindow out;
  out.prompt = build_prompt(cfg, window, context,
                            cfg.include_knowledge ? profiles : std::span<const ApplianceProfile>{},
                            example);
  const RawResponse response = backend.complete(out.prompt);
  NormalizedWindow norm = normalize(response.text, cfg.appliance_names, cfg.window_size, true);
  out.prediction = std::move(norm.prediction);
  out.outcome = std::move(norm.outcome);
  out.rationales = out.prediction.explanations;
  for (const auto& name : cfg.appliance_names)
    if (!out.rationales.contains(name)) ++out.missing_rationales;
  return out;
}

// Per appliance: the window-level claim (ON if any slot ON) against the
// truth, slot agreement, and the rationale text.
struct AuditRow {
  std::string appliance;
  bool claimed_on = false;
  bool truly_on = false;
  bool agreement = false;
  std::size_t slot_agreement = 0;
  std::size_t slots = 0;
  std::string rationale;
};

inline std::vector<AuditRow> audit_rationales(const ExplainedWindow& explained,
                                              const std::vector<StateSeries>& truth,
                                              const WindowInput& window) {
  std::vector<AuditRow> rows;
  for (const auto& t : truth) {
    if (t.size() != window.aggregate_values.size())
      throw LengthMismatch("truth for " + t.appliance + " is not aligned to the window");
    AuditRow row;
    row.appliance = t.appliance;
    row.slots = t.size();
    const auto it = explained.prediction.states.find(t.appliance);
    const std::vector<std::uint8_t> none(t.size(), 0);
    const auto& claimed = it == explained.prediction.states.end() ? none : it->second;
    for (std::size_t k = 0; k < t.size(); ++k) {
      row.claimed_on = row.claimed_on || claimed[k];
      row.truly_on = row.truly_on || t.states[k];
      row.slot_agreement += claimed[k] == t.states[k];
    }
    row.agreement = row.claimed_on == row.truly_on;
    if (auto r = explained.rationales.find(t.appliance); r != explained.rationales.end())
      row.rationale = r->second;
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace detail {

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace detail

inline std::string audit_csv(const std::vector<AuditRow>& rows) {
  std::string out = "appliance,claimed,truth,agreement,slot_agreement,slots,rationale\n";
  for (const auto& r : rows)
    out += r.appliance + ',' + (r.claimed_on ? "ON" : "OFF") + ',' + (r.truly_on ? "ON" : "OFF") +
           ',' + (r.agreement ? "yes" : "NO") + ',' + std::to_string(r.slot_agreement) + ',' +
           std::to_string(r.slots) + ',' + detail::csv_quote(r.rationale) + '\n';
  return out;
}

inline std::string audit_markdown(const std::vector<AuditRow>& rows) {
  std::string out = "| appliance | claimed | truth | agrees | slots agreeing | rationale |\n"
                    "|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    std::string text = r.rationale;
    for (auto& c : text)
      if (c == '|' || c == '\n') c = ' ';
    out += "| " + r.appliance + " | " + (r.claimed_on ? "ON" : "OFF") + " | " +
           (r.truly_on ? "ON" : "OFF") + " | " + (r.agreement ? "yes" : "**no**") + " | " +
           std::to_string(r.slot_agreement) + "/" + std::to_string(r.slots) + " | " + text + " |\n";
  }
  return out;
}

}  // namespace nilm
