#pragma once

// Test-only reference implementations. They are written from the rule
// statements directly and share no code with the library paths they check.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nilm/ingest.hpp"

namespace oracle {

// Per-slot mean by scanning every reading for every slot.
struct SlotResult {
  std::vector<double> values;
  std::vector<bool> gaps;
};

inline SlotResult brute_force_resample(const std::vector<nilm::RawReading>& readings, std::int64_t start,
                                       std::int64_t end) {
  SlotResult out;
  for (std::int64_t lo = start; lo < end; lo += 6) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : readings) {
      if (r.timestamp >= lo && r.timestamp < lo + 6) {
        sum += r.power;
        ++n;
      }
    }
    out.values.push_back(n ? sum / static_cast<double>(n) : 0.0);
    out.gaps.push_back(n == 0);
  }
  return out;
}

// Gap slot i is filled iff the nearest following observed slot j has j - i <= limit.
inline std::vector<std::optional<double>> simulate_backfill(const std::vector<std::optional<double>>& slots,
                                                            std::size_t limit) {
  std::vector<std::optional<double>> out = slots;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) continue;
    for (std::size_t j = i + 1; j < slots.size(); ++j) {
      if (slots[j]) {
        if (j - i <= limit) out[i] = slots[j];
        break;
      }
    }
  }
  return out;
}

// Lengths of maximal runs of 1s.
inline std::vector<std::size_t> on_runs(const std::vector<std::uint8_t>& states) {
  std::vector<std::size_t> runs;
  std::size_t cur = 0;
  for (auto s : states) {
    if (s) {
      ++cur;
    } else if (cur) {
      runs.push_back(cur);
      cur = 0;
    }
  }
  if (cur) runs.push_back(cur);
  return runs;
}

// Last-wins map from timestamp to power over the lines of a channel file.
inline std::vector<nilm::RawReading> last_wins(const std::vector<std::pair<std::int64_t, double>>& lines) {
  std::vector<nilm::RawReading> out;
  for (const auto& [t, p] : lines) {
    bool replaced = false;
    for (auto& r : out) {
      if (r.timestamp == t) {
        r.power = p;
        replaced = true;
      }
    }
    if (!replaced) out.push_back({t, p});
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = i + 1; j < out.size(); ++j)
      if (out[j].timestamp < out[i].timestamp) std::swap(out[i], out[j]);
  return out;
}

}  // namespace oracle

namespace testutil {

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("nilm_test_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
