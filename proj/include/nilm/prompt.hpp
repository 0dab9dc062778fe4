#pragma once

// Prompt assembly. Sections always appear in this order, optional ones only
// when enabled:
//
//   Role -> Task -> Output Format -> [Prior Knowledge]
//        -> [Example Input / Example Output] -> [Context] -> Input Data
//
// parse_prompt() reads back the machine-relevant parts of a rendered prompt
// (window size, appliance list, aggregate values, knowledge power ranges,
// context tails); the mock backend and the tests rely on it.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nilm/detail/text.hpp"
#include "nilm/errors.hpp"
#include "nilm/knowledge.hpp"
#include "nilm/preprocess.hpp"

namespace nilm {

struct PromptConfig {
  std::size_t window_size = 100;    // W, slots per inference call
  std::size_t context_length = 10;  // C, previous states carried forward
  bool include_one_shot = true;
  bool include_knowledge = true;
  KnowledgeToggle knowledge_toggle{};
  bool include_timestamps = false;
  bool include_context = true;
  bool explanation_mode = false;
  std::vector<std::string> appliance_names;

  void validate() const {
    if (window_size < 1) throw InvalidConfig("window size must be at least 1");
    if (include_context && context_length < 1)
      throw InvalidConfig("context enabled with zero context length");
    if (appliance_names.empty()) throw InvalidConfig("no appliances configured");
    std::set<std::string> seen(appliance_names.begin(), appliance_names.end());
    if (seen.size() != appliance_names.size()) throw InvalidConfig("duplicate appliance names");
  }

  // Component label in ablation notation: Base+OE+KI+TS+CT.
  std::string components_label() const {
    std::string out = "Base";
    if (include_one_shot) out += "+OE";
    if (include_knowledge) out += "+KI";
    if (include_timestamps) out += "+TS";
    if (include_context) out += "+CT";
    return out;
  }
};

struct WindowInput {
  std::vector<double> aggregate_values;
  std::optional<std::vector<std::string>> timestamps;  // HH:mm:ss, 6 s apart
};

// Last C predicted states per appliance, in configured appliance order.
struct ContextBlock {
  std::vector<StateSeries> tails;

  std::size_t length() const { return tails.empty() ? 0 : tails.front().size(); }
  bool empty() const { return length() == 0; }
};

struct OneShotExample {
  std::vector<double> aggregate;
  std::vector<StateSeries> outputs;
  std::int64_t start_timestamp = 0;  // used for timestamp rendering only
};

inline WindowInput make_window_input(const UniformSeries& series, std::size_t offset,
                                     std::size_t width, bool with_timestamps) {
  if (offset + width > series.size()) throw LengthMismatch("window exceeds series length");
  WindowInput in;
  in.aggregate_values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(offset),
                             series.values.begin() + static_cast<std::ptrdiff_t>(offset + width));
  if (with_timestamps) {
    std::vector<std::string> ts;
    for (std::size_t k = 0; k < width; ++k) ts.push_back(detail::clock_string(series.timestamp(offset + k)));
    in.timestamps = std::move(ts);
  }
  return in;
}

namespace detail {

inline std::string join_quoted(const std::vector<std::string>& names, std::string_view suffix) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ", ";
    out += '"' + names[i] + std::string(suffix) + '"';
  }
  return out;
}

inline std::string join_plain(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ", ";
    out += names[i];
  }
  return out;
}

inline int parse_clock(std::string_view s) {
  int h = 0, m = 0, sec = 0;
  if (s.size() != 8 || s[2] != ':' || s[5] != ':' || !parse_number(s.substr(0, 2), h) ||
      !parse_number(s.substr(3, 2), m) || !parse_number(s.substr(6, 2), sec))
    return -1;
  return h * 3600 + m * 60 + sec;
}

inline std::string render_series_line(std::span<const double> values,
                                      const std::vector<std::string>* timestamps) {
  std::string out = "Aggregate Power: ";
  if (!timestamps) return out + format_list(values, 3);
  out += '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += "[\"" + (*timestamps)[i] + "\", " + format_fixed(values[i], 3) + "]";
  }
  return out + ']';
}

}  // namespace detail

inline constexpr std::string_view kRoleSentence =
    "You are an expert system specializing in Non-intrusive Load Monitoring (NILM). Your job "
    "is to analyze a sequence of aggregate active power readings and determine the ON (1) or "
    "OFF (0) status for each of the following appliances at every time step: ";

inline std::string render_example(const OneShotExample& example, bool with_timestamps = false) {
  for (const auto& o : example.outputs)
    if (o.size() != example.aggregate.size())
      throw LengthMismatch("example output for " + o.appliance + " has " +
                           std::to_string(o.size()) + " states, input has " +
                           std::to_string(example.aggregate.size()));
  std::vector<std::string> ts;
  if (with_timestamps)
    for (std::size_t k = 0; k < example.aggregate.size(); ++k)
      ts.push_back(detail::clock_string(example.start_timestamp +
                                        kSlotSeconds * static_cast<std::int64_t>(k)));
  std::string out = "Example Input.\n";
  out += detail::render_series_line(example.aggregate, with_timestamps ? &ts : nullptr);
  out += "\n\nExample Output.\n{\n";
  for (std::size_t i = 0; i < example.outputs.size(); ++i) {
    const auto& o = example.outputs[i];
    out += '"' + o.appliance + "_status\": " + detail::format_states(o.states);
    out += i + 1 < example.outputs.size() ? ",\n" : "\n";
  }
  out += '}';
  return out;
}

inline std::string render_context(const ContextBlock& context) {
  std::string out = "Context.\nThe states predicted in the previous " +
                    std::to_string(context.length()) + " steps:";
  for (const auto& t : context.tails) out += "\n" + t.appliance + ": " + detail::format_states(t.states);
  return out;
}

inline std::string build_prompt(const PromptConfig& config, const WindowInput& input,
                                const std::optional<ContextBlock>& context,
                                std::span<const ApplianceProfile> profiles,
                                const std::optional<OneShotExample>& example) {
  config.validate();
  const std::size_t w = config.window_size;
  const auto& names = config.appliance_names;

  if (input.aggregate_values.size() != w)
    throw ConfigMismatch("input has " + std::to_string(input.aggregate_values.size()) +
                         " readings, window size is " + std::to_string(w));
  if (config.include_timestamps != input.timestamps.has_value())
    throw ConfigMismatch("timestamps must be present exactly when enabled");
  if (input.timestamps) {
    const auto& ts = *input.timestamps;
    if (ts.size() != w) throw ConfigMismatch("timestamp count differs from window size");
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const int t = detail::parse_clock(ts[k]);
      if (t < 0) throw ConfigMismatch("bad timestamp '" + ts[k] + "'");
      if (k > 0 && (t - detail::parse_clock(ts[k - 1]) + 86400) % 86400 != kSlotSeconds)
        throw ConfigMismatch("timestamps must be 6 s apart");
    }
  }
  if (context && !context->empty()) {
    if (!config.include_context) throw ConfigMismatch("context given but disabled");
    if (context->length() != config.context_length || context->tails.size() != names.size())
      throw ConfigMismatch("context block does not match the configuration");
    for (std::size_t i = 0; i < names.size(); ++i)
      if (context->tails[i].appliance != names[i] ||
          context->tails[i].size() != config.context_length)
        throw ConfigMismatch("context block does not match the configuration");
  }
  if (config.include_knowledge) {
    if (profiles.size() != names.size()) throw ConfigMismatch("one knowledge profile per appliance required");
    for (std::size_t i = 0; i < names.size(); ++i)
      if (profiles[i].name != names[i]) throw ConfigMismatch("profiles not in appliance order");
  }
  if (config.include_one_shot) {
    if (!example) throw ConfigMismatch("one-shot example enabled but missing");
    if (example->outputs.size() != names.size()) throw ConfigMismatch("example appliances differ");
    for (std::size_t i = 0; i < names.size(); ++i)
      if (example->outputs[i].appliance != names[i]) throw ConfigMismatch("example appliances differ");
  }

  const std::string ws = std::to_string(w);
  std::string out;
  out += "Role. " + std::string(kRoleSentence) + detail::join_plain(names) + ".\n\n";

  out += "Task. Given an input sequence of exactly " + ws +
         " aggregate power readings, use the prior knowledge and context below to infer the ON "
         "or OFF status for each appliance at each time step. Sampling cycle is 6 s.";
  if (config.include_timestamps)
    out += " Each reading is paired with its timestamp (HH:mm:ss); appliance usage often "
           "depends on the time of day.";
  out += "\n\n";

  out += "Output Format.\n";
  out += "- Respond ONLY with a single JSON object.\n";
  if (config.explanation_mode) {
    out += "- Keys must be exactly: " + detail::join_quoted(names, "_status") + ", " +
           detail::join_quoted(names, "_explanation") + ".\n";
    out += "- Each \"_status\" value is a list of exactly " + ws + " integers (0 or 1).\n";
    out += "- Each \"_explanation\" value is a short string explaining the ON/OFF states "
           "assigned to that appliance with reference to the aggregate power signal and the "
           "prior knowledge.\n";
    out += "- Do NOT output any extra text, markdown, or code block outside the JSON object.\n";
  } else {
    out += "- Keys must be exactly: " + detail::join_quoted(names, "_status") + ".\n";
    out += "- Each value is a list of exactly " + ws + " integers (0 or 1).\n";
    out += "- Do NOT output any explanation, extra text, markdown, or code block, ONLY the JSON "
           "object.\n";
  }
  out += "- If uncertain, make the best guess, but do NOT use any value other than 0 or 1.\n";
  out += "- The output list for each appliance MUST have exactly " + ws + " elements.";

  if (config.include_knowledge)
    out += "\n\nPrior Knowledge.\n" + render_knowledge(profiles, config.knowledge_toggle);
  if (config.include_one_shot)
    out += "\n\n" + render_example(*example, config.include_timestamps);
  if (context && !context->empty()) out += "\n\n" + render_context(*context);

  out += "\n\nInput Data.\n";
  out += detail::render_series_line(input.aggregate_values,
                                    input.timestamps ? &*input.timestamps : nullptr);
  out += '\n';
  return out;
}

// Chat split: the Role paragraph goes to the system message.
struct PromptMessages {
  std::string system;
  std::string user;
};

inline PromptMessages split_messages(const std::string& prompt) {
  const auto cut = prompt.find("\n\n");
  if (cut == std::string::npos || !detail::starts_with(prompt, "Role. ")) return {"", prompt};
  return {prompt.substr(6, cut - 6), prompt.substr(cut + 2)};
}

struct PromptStats {
  std::size_t characters = 0;
  std::size_t approx_tokens = 0;
};

inline PromptStats prompt_stats(std::string_view prompt) {
  return {prompt.size(), detail::approx_tokens(prompt)};
}

// Machine-readable content recovered from a rendered prompt.
struct ParsedPrompt {
  std::size_t window_size = 0;
  std::vector<std::string> appliances;
  std::vector<double> aggregate;
  std::vector<std::string> timestamps;
  bool has_knowledge = false;
  std::map<std::string, double> power_min;  // only appliances with a rendered range
  std::map<std::string, double> power_max;
  std::map<std::string, std::vector<std::uint8_t>> context;
  bool explanation_mode = false;
};

namespace detail {

inline std::vector<std::string> quoted_tokens(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = line.find('"', pos)) != std::string_view::npos) {
    const auto end = line.find('"', pos + 1);
    if (end == std::string_view::npos) break;
    out.emplace_back(line.substr(pos + 1, end - pos - 1));
    pos = end + 1;
  }
  return out;
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace detail

inline ParsedPrompt parse_prompt(std::string_view prompt) {
  ParsedPrompt out;
  enum class Section { other, knowledge, context, input };
  Section section = Section::other;
  std::string knowledge_owner;
  bool have_window = false, have_keys = false, have_input = false;

  std::istringstream in{std::string(prompt)};
  std::string raw;
  while (std::getline(in, raw)) {
    const std::string_view line = raw;
    if (line == "Prior Knowledge.") {
      section = Section::knowledge;
      out.has_knowledge = true;
      continue;
    }
    if (line == "Context.") { section = Section::context; continue; }
    if (line == "Input Data.") { section = Section::input; continue; }
    if (line == "Output Format." || line == "Example Input." || line == "Example Output." ||
        detail::starts_with(line, "Role. ") || detail::starts_with(line, "Task. ")) {
      section = Section::other;
    }

    constexpr std::string_view kLength = "- The output list for each appliance MUST have exactly ";
    constexpr std::string_view kKeys = "- Keys must be exactly: ";
    if (detail::starts_with(line, kLength)) {
      auto rest = line.substr(kLength.size());
      rest = rest.substr(0, rest.find(' '));
      have_window = detail::parse_number(rest, out.window_size);
      continue;
    }
    if (detail::starts_with(line, kKeys)) {
      for (const auto& key : detail::quoted_tokens(line.substr(kKeys.size()))) {
        if (detail::ends_with(key, "_status"))
          out.appliances.push_back(key.substr(0, key.size() - 7));
        else if (detail::ends_with(key, "_explanation"))
          out.explanation_mode = true;
      }
      have_keys = !out.appliances.empty();
      continue;
    }

    switch (section) {
      case Section::knowledge: {
        constexpr std::string_view kRange = "- Power Range: ";
        if (!detail::starts_with(line, "- ") && detail::ends_with(line, ":")) {
          knowledge_owner = std::string(line.substr(0, line.size() - 1));
        } else if (detail::starts_with(line, kRange)) {
          auto body = line.substr(kRange.size());
          if (detail::ends_with(body, " W")) body.remove_suffix(2);
          const auto dash = body.find('-');
          double lo = 0.0, hi = 0.0;
          if (dash == std::string_view::npos || !detail::parse_number(body.substr(0, dash), lo) ||
              !detail::parse_number(body.substr(dash + 1), hi))
            throw UnparseablePrompt("bad power range line: " + raw);
          out.power_min[knowledge_owner] = lo;
          out.power_max[knowledge_owner] = hi;
        }
        break;
      }
      case Section::context: {
        const auto colon = line.find(": [");
        if (colon == std::string_view::npos) break;
        auto j = nlohmann::json::parse(line.substr(colon + 2), nullptr, false);
        if (!j.is_array()) throw UnparseablePrompt("bad context line: " + raw);
        std::vector<std::uint8_t> states;
        for (const auto& v : j) {
          if (!v.is_number_integer()) throw UnparseablePrompt("bad context entry: " + raw);
          states.push_back(v.get<int>() ? 1 : 0);
        }
        out.context[std::string(line.substr(0, colon))] = std::move(states);
        break;
      }
      case Section::input: {
        constexpr std::string_view kAgg = "Aggregate Power: ";
        if (!detail::starts_with(line, kAgg)) break;
        auto j = nlohmann::json::parse(line.substr(kAgg.size()), nullptr, false);
        if (!j.is_array()) throw UnparseablePrompt("bad aggregate line");
        for (const auto& v : j) {
          if (v.is_number()) {
            out.aggregate.push_back(v.get<double>());
          } else if (v.is_array() && v.size() == 2 && v[0].is_string() && v[1].is_number()) {
            out.timestamps.push_back(v[0].get<std::string>());
            out.aggregate.push_back(v[1].get<double>());
          } else {
            throw UnparseablePrompt("bad aggregate entry");
          }
        }
        have_input = true;
        break;
      }
      case Section::other:
        break;
    }
  }
  if (!have_window) throw UnparseablePrompt("window size not found");
  if (!have_keys) throw UnparseablePrompt("appliance keys not found");
  if (!have_input) throw UnparseablePrompt("input data not found");
  if (out.aggregate.size() != out.window_size)
    throw UnparseablePrompt("input length differs from stated window size");
  return out;
}

// The worked example shown in the reference prompt template: ten readings,
// the second appliance ON for the first five slots.
inline OneShotExample reference_example(const std::vector<std::string>& appliances) {
  OneShotExample ex;
  ex.aggregate = {597.540, 597.397, 597.752, 597.462, 437.508,
                  169.120, 169.324, 169.130, 169.112, 169.404};
  for (std::size_t i = 0; i < appliances.size(); ++i) {
    StateSeries s{appliances[i], std::vector<std::uint8_t>(10, 0)};
    if (i == 1) std::fill_n(s.states.begin(), 5, 1);
    ex.outputs.push_back(std::move(s));
  }
  return ex;
}

namespace detail {

inline std::size_t count_transitions(const std::vector<StateSeries>& truth, std::size_t begin,
                                     std::size_t end) {
  std::size_t n = 0;
  for (const auto& t : truth)
    for (std::size_t k = begin + 1; k < end; ++k) n += t.states[k] != t.states[k - 1];
  return n;
}

}  // namespace detail

// One-shot example from training data: among gap-free W-slot windows (stride
// W) pick the one with the most state transitions, then take its
// `example_length`-slot sub-window with the most transitions. Ties are broken
// by `seed`. Windows shorter than the example are padded by repeating the
// final slot.
inline OneShotExample select_example(const UniformSeries& aggregate,
                                     const std::vector<StateSeries>& truth, std::size_t window,
                                     std::size_t example_length, std::uint64_t seed) {
  if (window == 0 || example_length == 0) throw InvalidConfig("example lengths must be positive");
  for (const auto& t : truth)
    if (t.size() != aggregate.size()) throw LengthMismatch("truth not aligned to aggregate");
  std::mt19937_64 rng(seed);
  const auto pick = [&rng](const std::vector<std::size_t>& ties) {
    return ties.size() == 1 ? ties.front() : ties[rng() % ties.size()];
  };

  std::vector<std::size_t> best;
  std::size_t best_count = 0;
  for (std::size_t off = 0; off + window <= aggregate.size(); off += window) {
    bool gap = false;
    for (std::size_t k = off; k < off + window && !gap; ++k) gap = aggregate.gap_mask[k];
    if (gap) continue;
    const std::size_t n = detail::count_transitions(truth, off, off + window);
    if (best.empty() || n > best_count) {
      best = {off};
      best_count = n;
    } else if (n == best_count) {
      best.push_back(off);
    }
  }
  if (best.empty()) throw InvalidConfig("no gap-free window available for the one-shot example");
  const std::size_t chosen = pick(best);

  std::size_t sub = chosen;
  const std::size_t span_len = std::min(window, example_length);
  if (window > example_length) {
    std::vector<std::size_t> sub_best;
    std::size_t sub_count = 0;
    for (std::size_t off = chosen; off + example_length <= chosen + window; ++off) {
      const std::size_t n = detail::count_transitions(truth, off, off + example_length);
      if (sub_best.empty() || n > sub_count) {
        sub_best = {off};
        sub_count = n;
      } else if (n == sub_count) {
        sub_best.push_back(off);
      }
    }
    sub = pick(sub_best);
  }

  OneShotExample ex;
  ex.start_timestamp = aggregate.timestamp(sub);
  for (std::size_t k = 0; k < example_length; ++k)
    ex.aggregate.push_back(aggregate.values[sub + std::min(k, span_len - 1)]);
  for (const auto& t : truth) {
    StateSeries s{t.appliance, {}};
    for (std::size_t k = 0; k < example_length; ++k)
      s.states.push_back(t.states[sub + std::min(k, span_len - 1)]);
    ex.outputs.push_back(std::move(s));
  }
  return ex;
}

}  // namespace nilm
