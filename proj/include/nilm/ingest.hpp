#pragma once

// Readers for REDD / UK-DALE style low-frequency channel files.
//
// Channel file: one "unix_timestamp watts" pair per line.
// Labels file:  one "channel_number appliance name..." entry per line.
// House layout: JSON object {house_id, region, mains_channels, appliance_channels}.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nilm/detail/text.hpp"
#include "nilm/errors.hpp"

namespace nilm {

struct RawReading {
  std::int64_t timestamp = 0;  // seconds since Unix epoch
  double power = 0.0;          // watts

  friend bool operator==(const RawReading&, const RawReading&) = default;
};

struct PowerSeries {
  std::string channel_id;
  std::vector<RawReading> readings;  // strictly increasing timestamps

  friend bool operator==(const PowerSeries&, const PowerSeries&) = default;
};

// US-style houses (REDD) sum two mains legs; UK-style (UK-DALE) have one.
enum class Region { us, uk };

inline std::string to_string(Region r) { return r == Region::us ? "US" : "UK"; }

inline Region region_from_string(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "us" || lower == "us-style" || lower == "redd") return Region::us;
  if (lower == "uk" || lower == "uk-style" || lower == "ukdale" || lower == "uk-dale")
    return Region::uk;
  throw InvalidConfig("unknown region: " + std::string(s));
}

inline std::size_t expected_mains(Region r) { return r == Region::us ? 2 : 1; }

struct HouseLayout {
  std::string house_id;
  std::vector<int> mains_channels;
  std::map<std::string, int> appliance_channels;  // appliance name -> channel
  Region region = Region::us;

  void validate() const {
    if (mains_channels.empty())
      throw InvalidConfig("house " + house_id + ": no mains channels");
    if (mains_channels.size() != expected_mains(region))
      throw InvalidConfig("house " + house_id + ": " + to_string(region) +
                          "-style layout needs " +
                          std::to_string(expected_mains(region)) + " mains channel(s)");
  }

  // Every channel referenced by the layout, mains first.
  std::vector<int> channels() const {
    std::vector<int> out = mains_channels;
    for (const auto& [name, id] : appliance_channels) out.push_back(id);
    return out;
  }
};

inline HouseLayout layout_from_json(const nlohmann::json& j) {
  HouseLayout layout;
  try {
    const auto& id = j.at("house_id");
    layout.house_id = id.is_string() ? id.get<std::string>() : id.dump();
    layout.region = region_from_string(j.at("region").get<std::string>());
    layout.mains_channels = j.at("mains_channels").get<std::vector<int>>();
    for (const auto& [name, ch] : j.at("appliance_channels").items())
      layout.appliance_channels[name] = ch.get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("bad house layout: ") + e.what());
  }
  layout.validate();
  return layout;
}

inline nlohmann::json layout_to_json(const HouseLayout& layout) {
  nlohmann::json j;
  j["house_id"] = layout.house_id;
  j["region"] = to_string(layout.region);
  j["mains_channels"] = layout.mains_channels;
  j["appliance_channels"] = layout.appliance_channels;
  return j;
}

inline HouseLayout load_layout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileUnreadable(path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw InvalidConfig("layout is not valid JSON: " + path.string());
  return layout_from_json(j);
}

// Parses channel text. Lines with extra numeric columns (UK-DALE mains carry
// apparent power and voltage) keep only the first two.
inline PowerSeries parse_channel(std::istream& in, std::string channel_id,
                                 const std::string& source) {
  std::vector<RawReading> readings;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = detail::split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() < 2) throw ParseError(line_no, "expected timestamp and power");

    RawReading r;
    if (!detail::parse_number(tokens[0], r.timestamp)) {
      double ts = 0.0;
      if (!detail::parse_number(tokens[0], ts) || !std::isfinite(ts))
        throw ParseError(line_no, "bad timestamp '" + std::string(tokens[0]) + "'");
      r.timestamp = static_cast<std::int64_t>(std::floor(ts));
    }
    if (!detail::parse_number(tokens[1], r.power) || !std::isfinite(r.power))
      throw ParseError(line_no, "bad power '" + std::string(tokens[1]) + "'");
    for (std::size_t k = 2; k < tokens.size(); ++k) {
      double ignored = 0.0;
      if (!detail::parse_number(tokens[k], ignored))
        throw ParseError(line_no, "non-numeric column '" + std::string(tokens[k]) + "'");
    }
    if (r.timestamp <= 0) throw ParseError(line_no, "timestamp must be positive");
    if (r.power < 0.0) throw ParseError(line_no, "negative power reading");
    readings.push_back(r);
  }
  if (readings.empty()) throw EmptySeries(source);

  // Stable sort keeps file order among equal timestamps, so the last
  // occurrence of a duplicate is the last element of its run.
  std::stable_sort(readings.begin(), readings.end(),
                   [](const RawReading& a, const RawReading& b) {
                     return a.timestamp < b.timestamp;
                   });
  std::vector<RawReading> unique;
  unique.reserve(readings.size());
  for (const auto& r : readings) {
    if (!unique.empty() && unique.back().timestamp == r.timestamp)
      unique.back() = r;
    else
      unique.push_back(r);
  }
  return PowerSeries{std::move(channel_id), std::move(unique)};
}

inline PowerSeries load_channel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileUnreadable(path.string());
  return parse_channel(in, path.stem().string(), path.string());
}

// "Washer Dryer" -> "washer_dryer"
inline std::string normalize_label(std::string_view raw) {
  std::string out;
  for (auto token : detail::split_ws(raw)) {
    if (!out.empty()) out += '_';
    for (char c : token) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

inline std::map<int, std::string> parse_labels(std::istream& in) {
  std::map<int, std::string> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto split = body.find_first_of(" \t");
    if (split == std::string_view::npos) throw ParseError(line_no, "expected channel and name");
    int id = 0;
    if (!detail::parse_number(body.substr(0, split), id))
      throw ParseError(line_no, "bad channel number");
    const std::string name = normalize_label(body.substr(split + 1));
    if (name.empty()) throw ParseError(line_no, "missing appliance name");
    if (!labels.emplace(id, name).second) throw DuplicateChannel(id);
  }
  return labels;
}

inline std::map<int, std::string> parse_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileUnreadable(path.string());
  return parse_labels(in);
}

inline std::string serialize_labels(const std::map<int, std::string>& labels) {
  std::string out;
  for (const auto& [id, name] : labels) out += std::to_string(id) + ' ' + name + '\n';
  return out;
}

inline std::filesystem::path channel_path(const std::filesystem::path& dir, int id) {
  return dir / ("channel_" + std::to_string(id) + ".dat");
}

// Loads every channel referenced by `layout`; channels load concurrently.
inline std::map<int, PowerSeries> load_house(const std::filesystem::path& dir,
                                             const HouseLayout& layout) {
  std::set<int> ids;
  for (int id : layout.channels()) ids.insert(id);
  for (int id : ids)
    if (!std::filesystem::exists(channel_path(dir, id))) throw MissingChannel(id);

  std::vector<std::pair<int, std::future<PowerSeries>>> pending;
  for (int id : ids)
    pending.emplace_back(id, std::async(std::launch::async, [path = channel_path(dir, id)] {
                           return load_channel(path);
                         }));
  std::map<int, PowerSeries> out;
  for (auto& [id, fut] : pending) out.emplace(id, fut.get());
  return out;
}

}  // namespace nilm
