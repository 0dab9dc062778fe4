#pragma once

// Turns raw model text into a validated WindowPrediction.
//
//   ok          every "<name>_status" array present, binary, exactly W long
//   misaligned  structure fine but some array length != W; repaired by
//               repeating the final value (or 0) or truncating
//   malformed   anything else; prediction falls back to all OFF
//
// normalize() never throws on model output.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nilm/detail/text.hpp"

namespace nilm {

struct WindowPrediction {
  std::map<std::string, std::vector<std::uint8_t>> states;
  std::map<std::string, std::string> explanations;

  friend bool operator==(const WindowPrediction&, const WindowPrediction&) = default;
};

enum class OutcomeKind { ok, misaligned, malformed };

inline std::string to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::ok: return "ok";
    case OutcomeKind::misaligned: return "misaligned";
    case OutcomeKind::malformed: return "malformed";
  }
  return "unknown";
}

struct NormalizationOutcome {
  OutcomeKind kind = OutcomeKind::ok;
  std::string detail;
  bool repaired = false;
};

struct NormalizedWindow {
  WindowPrediction prediction;
  NormalizationOutcome outcome;
};

inline std::vector<std::uint8_t> fix_length(std::vector<std::uint8_t> values, std::size_t window) {
  const std::uint8_t pad = values.empty() ? 0 : values.back();
  values.resize(window, pad);
  return values;
}

inline WindowPrediction all_off(const std::vector<std::string>& appliances, std::size_t window) {
  WindowPrediction p;
  for (const auto& name : appliances) p.states[name] = std::vector<std::uint8_t>(window, 0);
  return p;
}

// Drops a surrounding ``` / ```json fence if present.
inline std::string_view strip_code_fences(std::string_view text) {
  text = detail::trim(text);
  if (!detail::starts_with(text, "```")) return text;
  text.remove_prefix(3);
  // language tag, e.g. ```json
  while (!text.empty() && std::isalpha(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  text = detail::trim(text);
  if (text.size() >= 3 && text.substr(text.size() - 3) == "```") text.remove_suffix(3);
  return detail::trim(text);
}

namespace detail {

// 0/1 from integers, integral floats and booleans; anything else is rejected.
inline std::optional<std::uint8_t> coerce_state(const nlohmann::json& v) {
  if (v.is_boolean()) return v.get<bool>() ? 1 : 0;
  if (v.is_number_integer() || v.is_number_unsigned()) {
    if (v.is_number_unsigned()) {
      const auto u = v.get<std::uint64_t>();
      if (u <= 1) return static_cast<std::uint8_t>(u);
      return std::nullopt;
    }
    const auto i = v.get<std::int64_t>();
    if (i == 0 || i == 1) return static_cast<std::uint8_t>(i);
    return std::nullopt;
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == 0.0) return 0;
    if (d == 1.0) return 1;
  }
  return std::nullopt;
}

}  // namespace detail

inline NormalizedWindow normalize(std::string_view raw, const std::vector<std::string>& appliances,
                                  std::size_t window, bool explanation_mode) {
  const auto malformed = [&](std::string why) {
    return NormalizedWindow{all_off(appliances, window),
                            {OutcomeKind::malformed, std::move(why), false}};
  };

  const auto body = strip_code_fences(raw);
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) return malformed("response is not valid JSON");
  if (!j.is_object()) return malformed("response is not a JSON object");

  WindowPrediction pred;
  std::string detail;
  bool misaligned = false;
  for (const auto& name : appliances) {
    const std::string key = name + "_status";
    auto it = j.find(key);
    if (it == j.end()) return malformed("missing key " + key);
    if (!it->is_array()) return malformed(key + " is not an array");
    std::vector<std::uint8_t> states;
    states.reserve(it->size());
    for (const auto& v : *it) {
      auto s = detail::coerce_state(v);
      if (!s) return malformed(key + " has a value outside {0,1}: " + v.dump());
      states.push_back(*s);
    }
    if (states.size() != window) {
      if (!detail.empty()) detail += "; ";
      detail += key + " length " + std::to_string(states.size()) + " != " + std::to_string(window);
      misaligned = true;
      states = fix_length(std::move(states), window);
    }
    pred.states[name] = std::move(states);
  }

  if (explanation_mode) {
    for (const auto& name : appliances) {
      auto it = j.find(name + "_explanation");
      if (it != j.end() && it->is_string()) pred.explanations[name] = it->get<std::string>();
    }
  }

  NormalizationOutcome outcome;
  if (misaligned) outcome = {OutcomeKind::misaligned, std::move(detail), true};
  return NormalizedWindow{std::move(pred), std::move(outcome)};
}

}  // namespace nilm
