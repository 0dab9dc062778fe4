#pragma once

// Alignment, 6 s mean resampling, short-gap backfill, mains aggregation and
// threshold-derived ground truth.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nilm/detail/text.hpp"
#include "nilm/errors.hpp"
#include "nilm/ingest.hpp"

namespace nilm {

inline constexpr std::int64_t kSlotSeconds = 6;

struct UniformSeries {
  std::int64_t start_timestamp = 0;
  std::vector<double> values;
  std::vector<bool> gap_mask;  // true where the slot has no data

  static constexpr std::int64_t step = kSlotSeconds;

  std::size_t size() const noexcept { return values.size(); }
  bool is_gap(std::size_t k) const { return gap_mask[k]; }
  bool has_gaps() const {
    return std::find(gap_mask.begin(), gap_mask.end(), true) != gap_mask.end();
  }
  std::int64_t timestamp(std::size_t k) const {
    return start_timestamp + step * static_cast<std::int64_t>(k);
  }

  friend bool operator==(const UniformSeries&, const UniformSeries&) = default;
};

struct StateSeries {
  std::string appliance;
  std::vector<std::uint8_t> states;  // 0 = OFF, 1 = ON

  std::size_t size() const noexcept { return states.size(); }
  friend bool operator==(const StateSeries&, const StateSeries&) = default;
};

struct ApplianceSpec {
  std::string name;
  double on_threshold = 0.0;  // watts, inclusive
};

// ON thresholds used to derive ground truth on REDD and UK-DALE.
inline std::optional<double> default_threshold(std::string_view appliance) {
  static const std::map<std::string, double, std::less<>> table{
      {"microwave", 200.0},      {"fridge", 50.0}, {"dishwasher", 10.0},
      {"washing_machine", 20.0}, {"kettle", 2000.0},
  };
  if (auto it = table.find(appliance); it != table.end()) return it->second;
  return std::nullopt;
}

// Slot k covers [grid_start + 6k, grid_start + 6(k+1)) and holds the mean of
// the readings falling inside it; empty slots are gaps.
inline UniformSeries resample_mean(const PowerSeries& series, std::int64_t grid_start,
                                   std::int64_t grid_end) {
  if (grid_end <= grid_start) throw EmptyGrid();
  if ((grid_end - grid_start) % kSlotSeconds != 0)
    throw GridMismatch("grid span is not a multiple of 6 s");

  const auto slots = static_cast<std::size_t>((grid_end - grid_start) / kSlotSeconds);
  std::vector<double> sums(slots, 0.0);
  std::vector<std::size_t> counts(slots, 0);

  auto it = std::lower_bound(
      series.readings.begin(), series.readings.end(), grid_start,
      [](const RawReading& r, std::int64_t t) { return r.timestamp < t; });
  for (; it != series.readings.end() && it->timestamp < grid_end; ++it) {
    const auto k = static_cast<std::size_t>((it->timestamp - grid_start) / kSlotSeconds);
    sums[k] += it->power;
    ++counts[k];
  }

  UniformSeries out{grid_start, std::vector<double>(slots, 0.0), std::vector<bool>(slots, true)};
  for (std::size_t k = 0; k < slots; ++k) {
    if (counts[k] == 0) continue;
    out.values[k] = sums[k] / static_cast<double>(counts[k]);
    out.gap_mask[k] = false;
  }
  return out;
}

// Each gap takes the value of the next observed slot when that slot lies at
// most `limit` positions ahead. Gaps at the tail of the series stay gaps.
inline UniformSeries backfill(UniformSeries series, std::size_t limit = 1) {
  if (limit == 0) return series;
  const std::size_t n = series.size();
  std::size_t k = 0;
  while (k < n) {
    if (!series.gap_mask[k]) {
      ++k;
      continue;
    }
    std::size_t end = k;
    while (end < n && series.gap_mask[end]) ++end;
    if (end < n) {
      const std::size_t from = end - std::min(limit, end - k);
      for (std::size_t j = from; j < end; ++j) {
        series.values[j] = series.values[end];
        series.gap_mask[j] = false;
      }
    }
    k = end;
  }
  return series;
}

inline UniformSeries aggregate_mains(std::span<const UniformSeries> mains, Region region) {
  if (mains.size() != expected_mains(region))
    throw ArityMismatch(to_string(region) + "-style aggregation expects " +
                        std::to_string(expected_mains(region)) + " mains series, got " +
                        std::to_string(mains.size()));
  const UniformSeries& first = mains.front();
  for (const auto& m : mains)
    if (m.start_timestamp != first.start_timestamp || m.size() != first.size())
      throw GridMismatch("mains series are not on the same grid");

  UniformSeries out{first.start_timestamp, std::vector<double>(first.size(), 0.0),
                    std::vector<bool>(first.size(), false)};
  for (std::size_t k = 0; k < first.size(); ++k) {
    bool gap = false;
    double sum = 0.0;
    for (const auto& m : mains) {
      gap = gap || m.gap_mask[k];
      sum += m.values[k];
    }
    out.gap_mask[k] = gap;
    out.values[k] = gap ? 0.0 : sum;
  }
  return out;
}

inline StateSeries threshold_states(const UniformSeries& series, const ApplianceSpec& spec) {
  if (series.has_gaps())
    throw UnfilledGaps("cannot threshold " + spec.name + ": series still has gaps");
  StateSeries out{spec.name, std::vector<std::uint8_t>(series.size(), 0)};
  for (std::size_t k = 0; k < series.size(); ++k)
    out.states[k] = series.values[k] >= spec.on_threshold ? 1 : 0;
  return out;
}

// Grid covering the span common to every channel: origin is the latest first
// timestamp rounded down to a multiple of 6 s, and the grid extends far enough
// to include the earliest last timestamp.
inline std::pair<std::int64_t, std::int64_t> common_grid(
    const std::vector<const PowerSeries*>& channels) {
  if (channels.empty()) throw EmptyGrid();
  std::int64_t first = channels.front()->readings.front().timestamp;
  std::int64_t last = channels.front()->readings.back().timestamp;
  for (const auto* c : channels) {
    first = std::max(first, c->readings.front().timestamp);
    last = std::min(last, c->readings.back().timestamp);
  }
  if (last < first) throw EmptyGrid();
  const std::int64_t start = first - first % kSlotSeconds;
  const std::int64_t slots = (last - start) / kSlotSeconds + 1;
  return {start, start + slots * kSlotSeconds};
}

inline UniformSeries slice(const UniformSeries& s, std::size_t offset, std::size_t count) {
  offset = std::min(offset, s.size());
  count = std::min(count, s.size() - offset);
  const auto b = static_cast<std::ptrdiff_t>(offset);
  const auto e = static_cast<std::ptrdiff_t>(offset + count);
  return UniformSeries{s.timestamp(offset),
                       std::vector<double>(s.values.begin() + b, s.values.begin() + e),
                       std::vector<bool>(s.gap_mask.begin() + b, s.gap_mask.begin() + e)};
}

inline StateSeries slice(const StateSeries& s, std::size_t offset, std::size_t count) {
  offset = std::min(offset, s.size());
  count = std::min(count, s.size() - offset);
  const auto b = static_cast<std::ptrdiff_t>(offset);
  return StateSeries{s.appliance, std::vector<std::uint8_t>(
                                      s.states.begin() + b,
                                      s.states.begin() + b + static_cast<std::ptrdiff_t>(count))};
}

// A house on the uniform grid. `aggregate.gap_mask` marks every slot where the
// aggregate or any appliance channel is still missing after backfill; `truth`
// is zero on those slots and must not be scored there.
struct PreprocessedHouse {
  std::string house_id;
  UniformSeries aggregate;
  std::vector<UniformSeries> appliance_power;  // same order as truth
  std::vector<StateSeries> truth;

  std::vector<std::string> appliance_names() const {
    std::vector<std::string> names;
    for (const auto& t : truth) names.push_back(t.appliance);
    return names;
  }

  const StateSeries& truth_for(std::string_view name) const {
    for (const auto& t : truth)
      if (t.appliance == name) return t;
    throw InvalidConfig("house " + house_id + " has no appliance " + std::string(name));
  }

  PreprocessedHouse slice(std::size_t offset, std::size_t count) const {
    PreprocessedHouse out{house_id, nilm::slice(aggregate, offset, count), {}, {}};
    for (const auto& p : appliance_power) out.appliance_power.push_back(nilm::slice(p, offset, count));
    for (const auto& t : truth) out.truth.push_back(nilm::slice(t, offset, count));
    return out;
  }
};

inline PreprocessedHouse preprocess_house(const std::map<int, PowerSeries>& channels,
                                          const HouseLayout& layout,
                                          std::span<const ApplianceSpec> appliances,
                                          std::size_t backfill_limit = 1) {
  layout.validate();
  std::vector<int> ids = layout.mains_channels;
  for (const auto& spec : appliances) {
    auto it = layout.appliance_channels.find(spec.name);
    if (it == layout.appliance_channels.end())
      throw InvalidConfig("house " + layout.house_id + " has no channel for " + spec.name);
    ids.push_back(it->second);
  }
  std::vector<const PowerSeries*> used;
  for (int id : ids) {
    auto it = channels.find(id);
    if (it == channels.end()) throw MissingChannel(id);
    used.push_back(&it->second);
  }
  const auto [grid_start, grid_end] = common_grid(used);
  const auto resample = [&, gs = grid_start, ge = grid_end](int id) {
    return backfill(resample_mean(channels.at(id), gs, ge), backfill_limit);
  };

  std::vector<UniformSeries> mains;
  for (int id : layout.mains_channels) mains.push_back(resample(id));

  PreprocessedHouse house;
  house.house_id = layout.house_id;
  house.aggregate = aggregate_mains(mains, layout.region);
  for (const auto& spec : appliances) {
    UniformSeries power = resample(layout.appliance_channels.at(spec.name));
    for (std::size_t k = 0; k < power.size(); ++k)
      if (power.gap_mask[k]) house.aggregate.gap_mask[k] = true;

    UniformSeries filled = power;
    for (std::size_t k = 0; k < filled.size(); ++k) {
      if (filled.gap_mask[k]) {
        filled.values[k] = 0.0;
        filled.gap_mask[k] = false;
      }
    }
    house.truth.push_back(threshold_states(filled, spec));
    house.appliance_power.push_back(std::move(power));
  }
  for (std::size_t k = 0; k < house.aggregate.size(); ++k)
    if (house.aggregate.gap_mask[k]) house.aggregate.values[k] = 0.0;
  return house;
}

// Inspection export: timestamp,aggregate,<name>_state...; gap slots have
// empty fields.
inline std::string export_csv(const PreprocessedHouse& house) {
  std::string out = "timestamp,aggregate";
  for (const auto& t : house.truth) out += "," + t.appliance + "_state";
  out += '\n';
  for (std::size_t k = 0; k < house.aggregate.size(); ++k) {
    out += std::to_string(house.aggregate.timestamp(k));
    const bool gap = house.aggregate.gap_mask[k];
    out += ',';
    if (!gap) out += detail::format_fixed(house.aggregate.values[k], 3);
    for (const auto& t : house.truth) {
      out += ',';
      if (!gap) out += t.states[k] ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

}  // namespace nilm
