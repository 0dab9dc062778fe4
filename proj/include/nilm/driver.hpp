#pragma once

// Sliding-window inference with context carry-over. Windows are disjoint
// (stride W) and issued strictly in temporal order because window k's prompt
// embeds the tail of window k-1's normalized prediction.

#include <chrono>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nilm/client.hpp"
#include "nilm/detail/text.hpp"
#include "nilm/errors.hpp"
#include "nilm/knowledge.hpp"
#include "nilm/normalizer.hpp"
#include "nilm/preprocess.hpp"
#include "nilm/prompt.hpp"

namespace nilm {

struct RunConfig {
  PromptConfig prompt;
  std::size_t stride = 0;  // 0 means "same as window size"

  void validate() const {
    prompt.validate();
    if (stride != 0 && stride != prompt.window_size)
      throw InvalidConfig("window stride must equal the window size");
    if (prompt.include_context && prompt.context_length > prompt.window_size)
      throw ContextLongerThanWindow(prompt.context_length, prompt.window_size);
  }
};

struct TraceEntry {
  std::size_t window = 0;
  std::size_t offset = 0;
  std::int64_t start_timestamp = 0;
  std::string prompt_hash;
  OutcomeKind kind = OutcomeKind::ok;
  std::string detail;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  double latency_ms = 0.0;
  int retries = 0;
};

inline nlohmann::json to_json(const TraceEntry& e) {
  return {{"window", e.window},
          {"offset", e.offset},
          {"start_timestamp", e.start_timestamp},
          {"prompt_hash", e.prompt_hash},
          {"outcome", to_string(e.kind)},
          {"detail", e.detail},
          {"prompt_tokens", e.prompt_tokens},
          {"completion_tokens", e.completion_tokens},
          {"latency_ms", e.latency_ms},
          {"retries", e.retries}};
}

struct SeriesResult {
  std::vector<StateSeries> predictions;  // processed windows, concatenated
  std::vector<StateSeries> truth;        // ground truth on the same slots
  std::vector<NormalizationOutcome> outcomes;
  std::vector<std::size_t> window_offsets;
  std::vector<TraceEntry> trace;
  std::size_t skipped_gap_windows = 0;
  std::size_t skipped_tail_slots = 0;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  std::size_t prompt_characters = 0;
  double wall_ms = 0.0;
};

inline std::string traces_jsonl(const std::vector<TraceEntry>& trace) {
  std::string out;
  for (const auto& e : trace) out += to_json(e).dump() + '\n';
  return out;
}

inline ContextBlock context_tail(const WindowPrediction& prev,
                                 const std::vector<std::string>& appliances,
                                 std::size_t context_length, std::size_t window) {
  if (context_length > window) throw ContextLongerThanWindow(context_length, window);
  ContextBlock block;
  if (context_length == 0) return block;
  for (const auto& name : appliances) {
    const auto& states = prev.states.at(name);
    if (states.size() < context_length) throw LengthMismatch("previous window shorter than context");
    block.tails.push_back(
        {name, std::vector<std::uint8_t>(states.end() - static_cast<std::ptrdiff_t>(context_length),
                                         states.end())});
  }
  return block;
}

// Runs every full, gap-free window of `aggregate`. A window that touches a gap
// is skipped and the next window starts without context; the trailing partial
// window is skipped. Backend exceptions propagate; malformed responses don't.
inline SeriesResult run_series(const UniformSeries& aggregate, const std::vector<StateSeries>& truth,
                               const RunConfig& cfg, Backend& backend,
                               std::span<const ApplianceProfile> profiles,
                               const std::optional<OneShotExample>& example) {
  cfg.validate();
  const auto& pc = cfg.prompt;
  const std::size_t w = pc.window_size;
  if (aggregate.size() < w) throw EmptyRun("series shorter than one window");
  if (truth.size() != pc.appliance_names.size()) throw ConfigMismatch("truth does not cover the appliance list");
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i].appliance != pc.appliance_names[i] || truth[i].size() != aggregate.size())
      throw ConfigMismatch("truth series not aligned with aggregate / appliance order");

  const auto started = std::chrono::steady_clock::now();
  SeriesResult result;
  for (const auto& name : pc.appliance_names) {
    result.predictions.push_back({name, {}});
    result.truth.push_back({name, {}});
  }
  const std::span<const ApplianceProfile> used_profiles =
      pc.include_knowledge ? profiles : std::span<const ApplianceProfile>{};

  std::optional<WindowPrediction> previous;
  const std::size_t windows = aggregate.size() / w;
  result.skipped_tail_slots = aggregate.size() - windows * w;

  for (std::size_t idx = 0; idx < windows; ++idx) {
    const std::size_t off = idx * w;
    bool gap = false;
    for (std::size_t k = off; k < off + w && !gap; ++k) gap = aggregate.gap_mask[k];
    if (gap) {
      ++result.skipped_gap_windows;
      previous.reset();
      continue;
    }

    std::optional<ContextBlock> context;
    if (pc.include_context && previous)
      context = context_tail(*previous, pc.appliance_names, pc.context_length, w);

    const WindowInput input = make_window_input(aggregate, off, w, pc.include_timestamps);
    const std::string prompt = build_prompt(pc, input, context, used_profiles, example);
    const RawResponse response = backend.complete(prompt);
    NormalizedWindow norm = normalize(response.text, pc.appliance_names, w, pc.explanation_mode);

    for (std::size_t i = 0; i < pc.appliance_names.size(); ++i) {
      const auto& states = norm.prediction.states.at(pc.appliance_names[i]);
      auto& pred = result.predictions[i].states;
      pred.insert(pred.end(), states.begin(), states.end());
      const auto& t = truth[i].states;
      auto& tr = result.truth[i].states;
      tr.insert(tr.end(), t.begin() + static_cast<std::ptrdiff_t>(off),
                t.begin() + static_cast<std::ptrdiff_t>(off + w));
    }

    TraceEntry entry;
    entry.window = idx;
    entry.offset = off;
    entry.start_timestamp = aggregate.timestamp(off);
    entry.prompt_hash = detail::hex64(detail::fnv1a(prompt));
    entry.kind = norm.outcome.kind;
    entry.detail = norm.outcome.detail;
    entry.prompt_tokens = response.prompt_tokens;
    entry.completion_tokens = response.completion_tokens;
    entry.latency_ms = response.latency_ms;
    entry.retries = response.retries;
    result.trace.push_back(std::move(entry));

    result.prompt_tokens += response.prompt_tokens;
    result.completion_tokens += response.completion_tokens;
    result.prompt_characters += prompt.size();
    result.outcomes.push_back(std::move(norm.outcome));
    result.window_offsets.push_back(off);
    previous = std::move(norm.prediction);
  }
  result.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace nilm
