#pragma once

// Appliance knowledge profiles: statistical extraction from training houses
// and the "Prior Knowledge" prompt rendering.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nilm/detail/text.hpp"
#include "nilm/errors.hpp"
#include "nilm/preprocess.hpp"

namespace nilm {

struct ApplianceProfile {
  std::string name;
  double standby_power = 0.0;           // W
  double on_power_min = 0.0;            // W
  double on_power_max = 0.0;            // W
  double avg_on_duration = 0.0;         // s
  double typical_cycle_duration = 0.0;  // s
  std::string usage_pattern;

  void validate() const {
    if (!(on_power_min <= on_power_max))
      throw InvalidConfig(name + ": on_power_min exceeds on_power_max");
    if (!(standby_power < on_power_min))
      throw InvalidConfig(name + ": standby power must be below the ON range");
    if (!(avg_on_duration > 0.0) || !(typical_cycle_duration > 0.0))
      throw InvalidConfig(name + ": durations must be positive");
  }

  friend bool operator==(const ApplianceProfile&, const ApplianceProfile&) = default;
};

// Which knowledge categories appear in the prompt. Stand-by power travels
// with the power-range category.
struct KnowledgeToggle {
  bool include_power_range = true;
  bool include_duration = true;
  bool include_pattern = true;

  std::string label() const {
    std::string out;
    const auto add = [&](bool on, const char* tag) {
      if (!on) return;
      if (!out.empty()) out += '+';
      out += tag;
    };
    add(include_power_range, "power");
    add(include_duration, "duration");
    add(include_pattern, "pattern");
    return out.empty() ? "none" : out;
  }

  friend bool operator==(const KnowledgeToggle&, const KnowledgeToggle&) = default;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

// Linear interpolation between closest ranks (numpy's default).
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + (v[hi] - v[lo]) * frac;
}

// Two histogram modes (10 bins over the ON range) at least two bin widths
// apart, each holding at least 5% of the samples.
inline bool is_bimodal(const std::vector<double>& values) {
  constexpr std::size_t bins = 10;
  if (values.size() < 2) return false;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) return false;
  std::vector<std::size_t> hist(bins, 0);
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * bins);
    ++hist[std::min(b, bins - 1)];
  }
  const double min_share = 0.05 * static_cast<double>(values.size());
  // A mode is a plateau of equal counts strictly above both neighbours.
  std::vector<double> modes;
  std::size_t i = 0;
  while (i < bins) {
    std::size_t j = i;
    while (j + 1 < bins && hist[j + 1] == hist[i]) ++j;
    const std::size_t left = i == 0 ? 0 : hist[i - 1];
    const std::size_t right = j + 1 == bins ? 0 : hist[j + 1];
    if (hist[i] > left && hist[i] > right && static_cast<double>(hist[i]) >= min_share)
      modes.push_back(0.5 * static_cast<double>(i + j));
    i = j + 1;
  }
  for (std::size_t a = 0; a < modes.size(); ++a)
    for (std::size_t b = a + 1; b < modes.size(); ++b)
      if (modes[b] - modes[a] >= 2.0) return true;
  return false;
}

}  // namespace detail

inline constexpr double kBurstyBelowSeconds = 120.0;
inline constexpr double kPeriodicMaxCv = 0.5;

inline std::string classify_usage_pattern(double avg_on_duration,
                                          const std::vector<double>& cycle_gaps,
                                          const std::vector<double>& on_values) {
  if (avg_on_duration < kBurstyBelowSeconds) return "bursty: short high-power bursts";
  if (cycle_gaps.size() >= 2) {
    const double mean =
        std::accumulate(cycle_gaps.begin(), cycle_gaps.end(), 0.0) /
        static_cast<double>(cycle_gaps.size());
    double var = 0.0;
    for (double g : cycle_gaps) var += (g - mean) * (g - mean);
    var /= static_cast<double>(cycle_gaps.size());
    if (mean > 0.0 && std::sqrt(var) / mean < kPeriodicMaxCv)
      return "periodic: regular ON/OFF cycling";
  }
  if (detail::is_bimodal(on_values)) return "multi-stage: several distinct power levels while ON";
  return "intermittent: irregular ON periods";
}

// One contiguous gap-free stretch of training data for one appliance.
struct ProfileSegment {
  const UniformSeries* power;
  const StateSeries* states;
};

// Pools statistics over several segments; ON runs never span segments.
inline ApplianceProfile extract_profile(std::span<const ProfileSegment> segments,
                                        std::string name) {
  std::vector<double> on_values, off_values, run_lengths, cycle_gaps;
  for (const auto& seg : segments) {
    if (seg.power->size() != seg.states->size())
      throw LengthMismatch("states are not aligned to the power series");
    std::size_t run = 0;
    std::optional<std::size_t> last_start;
    for (std::size_t k = 0; k <= seg.states->size(); ++k) {
      const bool in_range = k < seg.states->size();
      const bool gap = in_range && seg.power->gap_mask[k];
      const bool on = in_range && !gap && seg.states->states[k] == 1;
      if (in_range && !gap) (on ? on_values : off_values).push_back(seg.power->values[k]);
      if (on) {
        if (run == 0) {
          if (last_start) cycle_gaps.push_back(static_cast<double>(k - *last_start) * kSlotSeconds);
          last_start = k;
        }
        ++run;
      } else if (run > 0) {
        run_lengths.push_back(static_cast<double>(run));
        run = 0;
      }
    }
  }
  if (run_lengths.empty()) throw NoOnEvents(name);

  ApplianceProfile p;
  p.name = std::move(name);
  p.standby_power = detail::median(off_values);
  p.on_power_min = detail::percentile(on_values, 5.0);
  p.on_power_max = detail::percentile(on_values, 95.0);
  p.avg_on_duration = std::accumulate(run_lengths.begin(), run_lengths.end(), 0.0) /
                      static_cast<double>(run_lengths.size()) * kSlotSeconds;
  // A single activation has no inter-start gap; its cycle is the activation.
  p.typical_cycle_duration =
      cycle_gaps.empty() ? p.avg_on_duration : detail::median(cycle_gaps);
  p.usage_pattern = classify_usage_pattern(p.avg_on_duration, cycle_gaps, on_values);
  return p;
}

inline ApplianceProfile extract_profile(const UniformSeries& series, const StateSeries& states) {
  const ProfileSegment seg{&series, &states};
  return extract_profile(std::span<const ProfileSegment>(&seg, 1), states.appliance);
}

inline std::string render_profile(const ApplianceProfile& p, const KnowledgeToggle& toggle) {
  using detail::format_fixed;
  std::string out = p.name + ":\n";
  if (toggle.include_power_range) {
    out += "- Stand-by Power: " + format_fixed(p.standby_power, 3) + " W\n";
    out += "- Power Range: " + format_fixed(p.on_power_min, 3) + "-" +
           format_fixed(p.on_power_max, 3) + " W\n";
  }
  if (toggle.include_duration)
    out += "- Duration: average ON duration " + format_fixed(p.avg_on_duration, 0) +
           " s, typical cycle duration " + format_fixed(p.typical_cycle_duration, 0) + " s\n";
  if (toggle.include_pattern) out += "- Usage Pattern: " + p.usage_pattern + "\n";
  return out;
}

// One block per appliance, in the given order; no trailing newline.
inline std::string render_knowledge(std::span<const ApplianceProfile> profiles,
                                    const KnowledgeToggle& toggle) {
  std::string out;
  for (const auto& p : profiles) out += render_profile(p, toggle);
  if (!out.empty()) out.pop_back();
  return out;
}

inline nlohmann::json profiles_to_json(std::span<const ApplianceProfile> profiles) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& p : profiles) {
    j[p.name] = {{"standby_power", p.standby_power},
                 {"on_power_min", p.on_power_min},
                 {"on_power_max", p.on_power_max},
                 {"avg_on_duration", p.avg_on_duration},
                 {"typical_cycle_duration", p.typical_cycle_duration},
                 {"usage_pattern", p.usage_pattern}};
  }
  return j;
}

inline std::vector<ApplianceProfile> profiles_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidConfig("profile file must be a JSON object");
  std::vector<ApplianceProfile> out;
  for (const auto& [name, v] : j.items()) {
    ApplianceProfile p;
    p.name = name;
    try {
      p.standby_power = v.at("standby_power").get<double>();
      p.on_power_min = v.at("on_power_min").get<double>();
      p.on_power_max = v.at("on_power_max").get<double>();
      p.avg_on_duration = v.at("avg_on_duration").get<double>();
      p.typical_cycle_duration = v.at("typical_cycle_duration").get<double>();
      p.usage_pattern = v.value("usage_pattern", std::string{});
    } catch (const nlohmann::json::exception& e) {
      throw InvalidConfig("profile " + name + ": " + e.what());
    }
    p.validate();
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<ApplianceProfile> load_profiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileUnreadable(path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw InvalidConfig("profile file is not valid JSON: " + path.string());
  return profiles_from_json(j);
}

// Reorders `profiles` to follow `names`; throws if one is missing.
inline std::vector<ApplianceProfile> order_profiles(const std::vector<ApplianceProfile>& profiles,
                                                    const std::vector<std::string>& names) {
  std::vector<ApplianceProfile> out;
  for (const auto& n : names) {
    auto it = std::find_if(profiles.begin(), profiles.end(),
                           [&](const ApplianceProfile& p) { return p.name == n; });
    if (it == profiles.end()) throw InvalidConfig("no knowledge profile for " + n);
    out.push_back(*it);
  }
  return out;
}

}  // namespace nilm
