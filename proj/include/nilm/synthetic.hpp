#pragma once

// Deterministic REDD-style synthetic houses for tests, demos and the
// acceptance suite.
//
// Two appliances: a fridge cycling as a square wave (150 W ON, 2 W standby)
// and a microwave (1200 W, 3 W standby) whose short bursts always fall inside
// a fridge ON period. Mains carry 1 s readings, appliances 3 s readings, and
// every state change lands on a 6 s boundary, so resampled slots are never
// mixed. Mains legs add 15-25 W of uniform base-load noise.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "nilm/detail/text.hpp"
#include "nilm/errors.hpp"
#include "nilm/ingest.hpp"

namespace nilm::synthetic {

struct HouseOptions {
  std::string house_id = "1";
  Region region = Region::us;
  std::int64_t start_timestamp = 1303084800;  // 2011-04-18 00:00:00 UTC, multiple of 6
  std::int64_t duration_seconds = 86400;
  std::uint64_t seed = 1;
  double fridge_on_watts = 150.0;
  double fridge_standby_watts = 2.0;
  std::int64_t fridge_cycle_seconds = 3600;
  std::int64_t fridge_on_seconds = 1200;
  double microwave_on_watts = 1200.0;
  double microwave_standby_watts = 3.0;
  std::int64_t microwave_burst_seconds = 60;
  // Offsets [from, to) in seconds from start where no channel logged anything.
  std::vector<std::pair<std::int64_t, std::int64_t>> outages;
};

struct Schedule {
  std::int64_t start = 0;
  std::int64_t phase = 0;  // first fridge ON offset within its cycle
  std::vector<std::pair<std::int64_t, std::int64_t>> microwave_bursts;  // absolute [from, to)
  const HouseOptions* opts = nullptr;

  bool fridge_on(std::int64_t t) const {
    std::int64_t rel = (t - start - phase) % opts->fridge_cycle_seconds;
    if (rel < 0) rel += opts->fridge_cycle_seconds;
    return rel < opts->fridge_on_seconds;
  }
  bool microwave_on(std::int64_t t) const {
    for (const auto& [a, b] : microwave_bursts)
      if (t >= a && t < b) return true;
    return false;
  }
};

inline Schedule make_schedule(const HouseOptions& o) {
  if (o.start_timestamp % 6 != 0 || o.fridge_cycle_seconds % 6 != 0 || o.fridge_on_seconds % 6 != 0 ||
      o.microwave_burst_seconds % 6 != 0)
    throw InvalidConfig("synthetic timings must be multiples of 6 s");
  std::mt19937_64 rng(o.seed);
  Schedule s;
  s.opts = &o;
  s.start = o.start_timestamp;
  s.phase = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(o.fridge_cycle_seconds / 6)) * 6;
  // Microwave bursts in roughly one of four fridge ON periods, 300 s in.
  for (std::int64_t cycle_start = o.start_timestamp + s.phase - o.fridge_cycle_seconds;
       cycle_start < o.start_timestamp + o.duration_seconds; cycle_start += o.fridge_cycle_seconds) {
    if (rng() % 4 != 0) continue;
    const std::int64_t a = cycle_start + 300;
    const std::int64_t b = a + o.microwave_burst_seconds;
    if (a >= o.start_timestamp && b <= o.start_timestamp + o.duration_seconds &&
        300 + o.microwave_burst_seconds <= o.fridge_on_seconds)
      s.microwave_bursts.emplace_back(a, b);
  }
  return s;
}

namespace detail {

inline bool in_outage(const HouseOptions& o, std::int64_t t) {
  for (const auto& [a, b] : o.outages)
    if (t - o.start_timestamp >= a && t - o.start_timestamp < b) return true;
  return false;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileUnreadable(path.string());
  out << content;
}

inline void append_line(std::string& buf, std::int64_t t, double watts) {
  buf += std::to_string(t);
  buf += ' ';
  buf += nilm::detail::format_fixed(watts, 2);
  buf += '\n';
}

}  // namespace detail

// Channels: US-style 1,2 = mains legs (fridge on leg 1, microwave on leg 2),
// 3 = fridge, 4 = microwave. UK-style: 1 = mains, 3 = fridge, 4 = microwave.
inline HouseLayout write_house(const std::filesystem::path& dir, const HouseOptions& opts) {
  std::filesystem::create_directories(dir);
  const Schedule sched = make_schedule(opts);
  std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ull);
  const auto noise = [&rng] {
    return 15.0 + 10.0 * static_cast<double>(rng() >> 11) / static_cast<double>(1ull << 53);
  };

  std::string leg1, leg2, fridge, microwave;
  const std::int64_t end = opts.start_timestamp + opts.duration_seconds;
  for (std::int64_t t = opts.start_timestamp; t < end; ++t) {
    const double f = sched.fridge_on(t) ? opts.fridge_on_watts : opts.fridge_standby_watts;
    const double m = sched.microwave_on(t) ? opts.microwave_on_watts : opts.microwave_standby_watts;
    const double n1 = noise(), n2 = noise();  // drawn even in outages to keep streams aligned
    if (detail::in_outage(opts, t)) continue;
    if (opts.region == Region::us) {
      detail::append_line(leg1, t, n1 + f);
      detail::append_line(leg2, t, n2 + m);
    } else {
      detail::append_line(leg1, t, n1 + n2 + f + m);
    }
    if ((t - opts.start_timestamp) % 3 == 0) {
      detail::append_line(fridge, t, f);
      detail::append_line(microwave, t, m);
    }
  }

  HouseLayout layout;
  layout.house_id = opts.house_id;
  layout.region = opts.region;
  layout.mains_channels = opts.region == Region::us ? std::vector<int>{1, 2} : std::vector<int>{1};
  layout.appliance_channels = {{"fridge", 3}, {"microwave", 4}};

  detail::write_file(channel_path(dir, 1), leg1);
  if (opts.region == Region::us) detail::write_file(channel_path(dir, 2), leg2);
  detail::write_file(channel_path(dir, 3), fridge);
  detail::write_file(channel_path(dir, 4), microwave);
  std::map<int, std::string> labels{{1, "mains"}, {3, "refrigerator"}, {4, "microwave"}};
  if (opts.region == Region::us) labels[2] = "mains";
  detail::write_file(dir / "labels.dat", serialize_labels(labels));
  detail::write_file(dir / "layout.json", layout_to_json(layout).dump(2) + "\n");
  return layout;
}

}  // namespace nilm::synthetic
