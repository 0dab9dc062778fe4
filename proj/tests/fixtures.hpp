#pragma once

// Synthetic two-house experiment shared by the harness tests and the
// acceptance gate.

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "nilm/harness.hpp"
#include "nilm/synthetic.hpp"

namespace fixtures {

// House "1" (US-style) trains knowledge, house "2" (UK-style) is tested.
inline nilm::ExperimentSpec synthetic_spec(const std::filesystem::path& root, std::int64_t seconds = 86400) {
  nilm::synthetic::HouseOptions train;
  train.house_id = "1";
  train.seed = 11;
  train.duration_seconds = seconds;
  nilm::synthetic::HouseOptions test = train;
  test.house_id = "2";
  test.region = nilm::Region::uk;
  test.seed = 12;

  nilm::ExperimentSpec spec;
  spec.houses.push_back({root / "house_1", nilm::synthetic::write_house(root / "house_1", train)});
  spec.houses.push_back({root / "house_2", nilm::synthetic::write_house(root / "house_2", test)});
  spec.knowledge_houses = {"1"};
  spec.test_houses = {"2"};
  spec.appliances = {{"fridge", 50.0}, {"microwave", 200.0}};
  spec.prompt.appliance_names = spec.appliance_names();
  spec.segment_slots = 0;
  spec.output_dir = root / "out";
  spec.validate();
  return spec;
}

// Thread-safe pass-through that keeps every prompt it sees.
class RecordingBackend final : public nilm::Backend {
 public:
  nilm::RawResponse complete(const std::string& prompt) override {
    std::size_t index = 0;
    {
      std::lock_guard lock(mu_);
      index = prompts_.size();
      prompts_.push_back(prompt);
    }
    auto r = nilm::mock_complete(prompt);
    if (transform_) r.text = transform_(r.text, index);
    return r;
  }

  std::vector<std::string> prompts() const {
    std::lock_guard lock(mu_);
    return prompts_;
  }

  // Optional rewrite of the mock's answer, e.g. to vary predicted states.
  std::function<std::string(const std::string&, std::size_t)> transform_;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> prompts_;
};

}  // namespace fixtures
