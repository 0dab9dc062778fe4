#pragma once

// Experiment harness: configuration file, knowledge extraction from training
// houses, ablation and sensitivity sweeps, full evaluation, report emission.
//
// Reports are CSV with a JSON mirror. With the mock backend every report is
// byte-for-byte reproducible; wall-clock timings are kept out of the files.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "nilm/client.hpp"
#include "nilm/detail/text.hpp"
#include "nilm/driver.hpp"
#include "nilm/errors.hpp"
#include "nilm/ingest.hpp"
#include "nilm/knowledge.hpp"
#include "nilm/metrics.hpp"
#include "nilm/preprocess.hpp"
#include "nilm/prompt.hpp"

namespace nilm {

class CostNotConfirmed : public Error {
 public:
  using Error::Error;
};

struct HouseSource {
  std::filesystem::path dir;
  HouseLayout layout;
};

struct ExperimentSpec {
  std::vector<HouseSource> houses;
  std::vector<std::string> knowledge_houses;
  std::vector<std::string> test_houses;
  bool require_disjoint = true;
  std::vector<ApplianceSpec> appliances;
  std::optional<std::filesystem::path> profiles_file;  // overrides extraction
  std::size_t segment_offset = 0;                       // slots into each test house
  std::size_t segment_slots = 14400;                    // one day; 0 = whole house
  PromptConfig prompt;
  std::vector<std::size_t> window_values{20, 40, 60, 80, 100};
  std::vector<std::size_t> context_values{10, 30, 50, 70, 90};
  std::size_t example_length = 10;
  std::string backend_kind = "mock";  // mock | http
  BackendConfig backend;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  std::size_t cost_guard_tokens = 200000;  // live runs above this need confirmation
  std::size_t parallelism = 4;

  const HouseSource& house(const std::string& id) const {
    for (const auto& h : houses)
      if (h.layout.house_id == id) return h;
    throw InvalidConfig("unknown house " + id);
  }

  std::vector<std::string> appliance_names() const {
    std::vector<std::string> names;
    for (const auto& a : appliances) names.push_back(a.name);
    return names;
  }

  void validate() const {
    if (appliances.empty()) throw InvalidConfig("no appliances configured");
    for (const auto& a : appliances)
      if (!(a.on_threshold > 0.0)) throw InvalidConfig("appliance " + a.name + " needs a positive threshold");
    prompt.validate();
    if (prompt.appliance_names != appliance_names())
      throw InvalidConfig("prompt appliance list differs from the appliance specs");
    if (test_houses.empty()) throw InvalidConfig("no test houses");
    for (const auto& id : test_houses) house(id);
    for (const auto& id : knowledge_houses) house(id);
    if (require_disjoint)
      for (const auto& id : test_houses)
        if (std::find(knowledge_houses.begin(), knowledge_houses.end(), id) != knowledge_houses.end())
          throw InvalidConfig("house " + id + " is both a knowledge house and a test house");
    if (knowledge_houses.empty() && !profiles_file)
      throw InvalidConfig("need knowledge houses or a profile file");
    for (auto w : window_values)
      if (w < 1) throw InvalidConfig("window sizes must be >= 1");
    if (backend_kind != "mock" && backend_kind != "http")
      throw InvalidConfig("backend must be mock or http");
    backend.validate();
  }
};

namespace detail {

inline KnowledgeToggle toggle_from_json(const nlohmann::json& j) {
  KnowledgeToggle t;
  t.include_power_range = j.value("power", true);
  t.include_duration = j.value("duration", true);
  t.include_pattern = j.value("pattern", true);
  return t;
}

}  // namespace detail

// Relative paths resolve against `base_dir` (the config file's directory).
inline ExperimentSpec spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  ExperimentSpec s;
  const auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  try {
    for (const auto& h : j.at("houses")) {
      HouseSource src;
      src.dir = resolve(h.at("dir").get<std::string>());
      const auto& layout = h.at("layout");
      src.layout = layout.is_string() ? load_layout(resolve(layout.get<std::string>()))
                                      : layout_from_json(layout);
      s.houses.push_back(std::move(src));
    }
    const auto ids = [](const nlohmann::json& arr) {
      std::vector<std::string> out;
      for (const auto& v : arr) out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      return out;
    };
    s.knowledge_houses = ids(j.value("knowledge_houses", nlohmann::json::array()));
    s.test_houses = ids(j.at("test_houses"));
    s.require_disjoint = j.value("require_disjoint", true);
    for (const auto& a : j.at("appliances")) {
      ApplianceSpec spec;
      spec.name = a.is_string() ? a.get<std::string>() : a.at("name").get<std::string>();
      std::optional<double> thr;
      if (a.is_object() && a.contains("on_threshold")) thr = a.at("on_threshold").get<double>();
      if (!thr) thr = default_threshold(spec.name);
      if (!thr) throw InvalidConfig("appliance " + spec.name + " has no threshold");
      spec.on_threshold = *thr;
      s.appliances.push_back(std::move(spec));
    }
    if (j.contains("profiles_file")) s.profiles_file = resolve(j.at("profiles_file").get<std::string>());
    if (j.contains("segment")) {
      const auto& seg = j.at("segment");
      s.segment_offset = seg.value("offset_slots", std::size_t{0});
      s.segment_slots = seg.value("slots", s.segment_slots);
    }
    if (j.contains("prompt")) {
      const auto& p = j.at("prompt");
      s.prompt.window_size = p.value("window_size", s.prompt.window_size);
      s.prompt.context_length = p.value("context_length", s.prompt.context_length);
      s.prompt.include_one_shot = p.value("one_shot", s.prompt.include_one_shot);
      s.prompt.include_knowledge = p.value("knowledge", s.prompt.include_knowledge);
      s.prompt.include_timestamps = p.value("timestamps", s.prompt.include_timestamps);
      s.prompt.include_context = p.value("context", s.prompt.include_context);
      if (p.contains("knowledge_toggle")) s.prompt.knowledge_toggle = detail::toggle_from_json(p.at("knowledge_toggle"));
    }
    if (j.contains("sweep")) {
      const auto& sw = j.at("sweep");
      s.window_values = sw.value("window_values", s.window_values);
      s.context_values = sw.value("context_values", s.context_values);
    }
    s.example_length = j.value("example_length", s.example_length);
    if (j.contains("backend")) {
      const auto& b = j.at("backend");
      s.backend_kind = b.value("kind", s.backend_kind);
      s.backend.endpoint = b.value("endpoint", s.backend.endpoint);
      s.backend.model = b.value("model", s.backend.model);
      s.backend.api_key_env = b.value("api_key_env", s.backend.api_key_env);
      s.backend.temperature = b.value("temperature", s.backend.temperature);
      s.backend.json_mode = b.value("json_mode", s.backend.json_mode);
      s.backend.max_retries = b.value("max_retries", s.backend.max_retries);
      s.backend.timeout_seconds = b.value("timeout_seconds", s.backend.timeout_seconds);
      s.backend.initial_backoff_ms = b.value("initial_backoff_ms", s.backend.initial_backoff_ms);
    }
    s.output_dir = resolve(j.value("output_dir", std::string("out")));
    s.seed = j.value("seed", std::uint64_t{0});
    s.cost_guard_tokens = j.value("cost_guard_tokens", s.cost_guard_tokens);
    s.parallelism = std::max<std::size_t>(1, j.value("parallelism", s.parallelism));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("bad experiment config: ") + e.what());
  }
  s.prompt.appliance_names = s.appliance_names();
  s.validate();
  return s;
}

inline ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileUnreadable(path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw InvalidConfig("config is not valid JSON: " + path.string());
  return spec_from_json(j, path.parent_path());
}

inline std::unique_ptr<Backend> make_backend(const ExperimentSpec& spec) {
  if (spec.backend_kind == "http") return std::make_unique<HttpBackend>(spec.backend);
  return std::make_unique<MockBackend>();
}

// Preprocessed data shared by every configuration of one experiment.
struct PreparedData {
  std::vector<PreprocessedHouse> knowledge;  // full houses
  std::vector<PreprocessedHouse> test;       // evaluation segments
  std::vector<ApplianceProfile> profiles;    // in appliance order
};

inline PreprocessedHouse load_and_preprocess(const HouseSource& src,
                                             const std::vector<ApplianceSpec>& appliances) {
  return preprocess_house(load_house(src.dir, src.layout), src.layout, appliances);
}

inline std::vector<ApplianceProfile> extract_profiles(const std::vector<PreprocessedHouse>& houses,
                                                      const std::vector<std::string>& names) {
  std::vector<ApplianceProfile> out;
  for (const auto& name : names) {
    std::vector<ProfileSegment> segments;
    for (const auto& h : houses) {
      for (std::size_t i = 0; i < h.truth.size(); ++i)
        if (h.truth[i].appliance == name) segments.push_back({&h.appliance_power[i], &h.truth[i]});
    }
    out.push_back(extract_profile(segments, name));
  }
  return out;
}

inline PreparedData prepare(const ExperimentSpec& spec) {
  spec.validate();
  PreparedData data;
  for (const auto& id : spec.knowledge_houses)
    data.knowledge.push_back(load_and_preprocess(spec.house(id), spec.appliances));
  for (const auto& id : spec.test_houses) {
    auto house = load_and_preprocess(spec.house(id), spec.appliances);
    const std::size_t count = spec.segment_slots == 0 ? house.aggregate.size() : spec.segment_slots;
    data.test.push_back(house.slice(spec.segment_offset, count));
  }
  if (spec.profiles_file)
    data.profiles = order_profiles(load_profiles(*spec.profiles_file), spec.appliance_names());
  else
    data.profiles = extract_profiles(data.knowledge, spec.appliance_names());
  return data;
}

inline std::optional<OneShotExample> example_for(const ExperimentSpec& spec, const PreparedData& data,
                                                 const PromptConfig& cfg) {
  if (!cfg.include_one_shot) return std::nullopt;
  if (data.knowledge.empty())
    throw InvalidConfig("one-shot example needs a knowledge house");
  const auto& h = data.knowledge.front();
  return select_example(h.aggregate, h.truth, cfg.window_size, spec.example_length, spec.seed);
}

struct ConfigResult {
  PromptConfig config;
  std::optional<ScoreReport> report;
  std::string status = "ok";  // or the error message
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  std::size_t prompt_characters = 0;
  std::size_t skipped_gap_windows = 0;
  std::vector<TraceEntry> trace;
  double wall_ms = 0.0;
};

struct SweepResult {
  std::string name;
  std::vector<std::string> appliances;
  std::vector<ConfigResult> rows;
};

inline ConfigResult evaluate_config(const ExperimentSpec& spec, const PreparedData& data,
                                    const PromptConfig& cfg, Backend& backend) {
  ConfigResult out;
  out.config = cfg;
  try {
    if (data.test.empty()) throw EmptyRun("no test segment");
    const auto example = example_for(spec, data, cfg);
    RunConfig run{cfg, cfg.window_size};
    std::vector<StateSeries> preds, truth;
    std::vector<NormalizationOutcome> outcomes;
    for (const auto& house : data.test) {
      if (house.aggregate.size() < cfg.window_size) continue;
      SeriesResult r = run_series(house.aggregate, house.truth, run, backend, data.profiles, example);
      if (preds.empty()) {
        preds = r.predictions;
        truth = r.truth;
      } else {
        for (std::size_t i = 0; i < preds.size(); ++i) {
          preds[i].states.insert(preds[i].states.end(), r.predictions[i].states.begin(),
                                 r.predictions[i].states.end());
          truth[i].states.insert(truth[i].states.end(), r.truth[i].states.begin(), r.truth[i].states.end());
        }
      }
      outcomes.insert(outcomes.end(), r.outcomes.begin(), r.outcomes.end());
      out.prompt_tokens += r.prompt_tokens;
      out.completion_tokens += r.completion_tokens;
      out.prompt_characters += r.prompt_characters;
      out.skipped_gap_windows += r.skipped_gap_windows;
      out.wall_ms += r.wall_ms;
      out.trace.insert(out.trace.end(), r.trace.begin(), r.trace.end());
    }
    if (outcomes.empty()) throw EmptyRun("no window could be processed");
    out.report = score_report(preds, truth, outcomes);
  } catch (const std::exception& e) {
    out.report.reset();
    out.status = std::string("error: ") + e.what();
  }
  return out;
}

// Projected prompt tokens for running `configs` against the test segments.
inline std::size_t projected_tokens(const ExperimentSpec& spec, const PreparedData& data,
                                    const std::vector<PromptConfig>& configs) {
  std::size_t total = 0;
  for (const auto& cfg : configs) {
    for (const auto& house : data.test) {
      const std::size_t windows = house.aggregate.size() / cfg.window_size;
      if (windows == 0) continue;
      std::optional<ContextBlock> ctx;
      if (cfg.include_context) {
        ContextBlock block;
        for (const auto& n : cfg.appliance_names)
          block.tails.push_back({n, std::vector<std::uint8_t>(cfg.context_length, 0)});
        ctx = block;
      }
      const std::string sample = build_prompt(
          cfg, make_window_input(house.aggregate, 0, cfg.window_size, cfg.include_timestamps), ctx,
          cfg.include_knowledge ? std::span<const ApplianceProfile>(data.profiles)
                                : std::span<const ApplianceProfile>{},
          example_for(spec, data, cfg));
      total += windows * detail::approx_tokens(sample);
    }
  }
  return total;
}

inline void check_cost(const ExperimentSpec& spec, const PreparedData& data,
                       const std::vector<PromptConfig>& configs, bool confirmed) {
  if (spec.backend_kind != "http" || confirmed) return;
  const std::size_t tokens = projected_tokens(spec, data, configs);
  if (tokens > spec.cost_guard_tokens)
    throw CostNotConfirmed("projected " + std::to_string(tokens) +
                           " prompt tokens exceed the guard of " + std::to_string(spec.cost_guard_tokens) +
                           "; rerun with --confirm-cost");
}

// Configurations run as parallel tasks, each strictly sequential inside.
inline SweepResult run_configs(const ExperimentSpec& spec, const PreparedData& data,
                               const std::vector<PromptConfig>& configs, Backend& backend,
                               std::string name, bool confirmed) {
  check_cost(spec, data, configs, confirmed);
  SweepResult result{std::move(name), spec.appliance_names(), {}};
  result.rows.resize(configs.size());
  std::size_t next = 0;
  while (next < configs.size()) {
    std::vector<std::future<ConfigResult>> batch;
    const std::size_t end = std::min(configs.size(), next + spec.parallelism);
    for (std::size_t i = next; i < end; ++i)
      batch.push_back(std::async(std::launch::async, [&, i] {
        return evaluate_config(spec, data, configs[i], backend);
      }));
    for (std::size_t i = next; i < end; ++i) result.rows[i] = batch[i - next].get();
    next = end;
  }
  return result;
}

// The six prompt-component combinations, in table order.
inline std::vector<PromptConfig> ablation_configs(const PromptConfig& base) {
  struct Combo { bool oe, ki, ts, ct; };
  constexpr Combo combos[] = {{false, false, false, false}, {true, false, false, false},
                              {true, true, false, false},   {true, true, true, false},
                              {true, true, false, true},    {true, true, true, true}};
  std::vector<PromptConfig> out;
  for (const auto& c : combos) {
    PromptConfig p = base;
    p.include_one_shot = c.oe;
    p.include_knowledge = c.ki;
    p.include_timestamps = c.ts;
    p.include_context = c.ct;
    p.knowledge_toggle = KnowledgeToggle{};
    p.explanation_mode = false;
    out.push_back(std::move(p));
  }
  return out;
}

// The seven knowledge-category combinations on top of Base+OE+KI+CT.
inline std::vector<PromptConfig> knowledge_configs(const PromptConfig& base) {
  constexpr KnowledgeToggle toggles[] = {{false, true, true}, {true, false, true}, {true, true, false},
                                         {true, false, false}, {false, true, false}, {false, false, true},
                                         {true, true, true}};
  std::vector<PromptConfig> out;
  for (const auto& t : toggles) {
    PromptConfig p = base;
    p.include_one_shot = true;
    p.include_knowledge = true;
    p.include_timestamps = false;
    p.include_context = true;
    p.knowledge_toggle = t;
    p.explanation_mode = false;
    out.push_back(std::move(p));
  }
  return out;
}

enum class SweepAxis { window, context };

inline std::vector<PromptConfig> sweep_configs(const ExperimentSpec& spec, SweepAxis axis) {
  std::vector<PromptConfig> out;
  if (axis == SweepAxis::window) {
    for (auto w : spec.window_values) {
      PromptConfig p = spec.prompt;
      p.window_size = w;
      out.push_back(std::move(p));
    }
  } else {
    if (!spec.prompt.include_context) throw InvalidConfig("context sweep requires context to be enabled");
    for (auto c : spec.context_values) {
      if (c < 1) throw InvalidConfig("context lengths must be positive");
      PromptConfig p = spec.prompt;
      p.context_length = c;
      out.push_back(std::move(p));
    }
  }
  return out;
}

inline SweepResult run_ablation(const ExperimentSpec& spec, const PreparedData& data, Backend& backend,
                                bool confirmed = false) {
  return run_configs(spec, data, ablation_configs(spec.prompt), backend, "ablation", confirmed);
}

inline SweepResult run_knowledge_ablation(const ExperimentSpec& spec, const PreparedData& data,
                                          Backend& backend, bool confirmed = false) {
  return run_configs(spec, data, knowledge_configs(spec.prompt), backend, "knowledge_ablation", confirmed);
}

inline SweepResult run_sweep(const ExperimentSpec& spec, const PreparedData& data, SweepAxis axis,
                             Backend& backend, bool confirmed = false) {
  return run_configs(spec, data, sweep_configs(spec, axis), backend,
                     axis == SweepAxis::window ? "sweep_window" : "sweep_context", confirmed);
}

inline ConfigResult run_eval(const ExperimentSpec& spec, const PreparedData& data, Backend& backend,
                             bool confirmed = false) {
  for (const auto& h : data.test)
    if (h.aggregate.size() == 0) throw EmptyRun("empty test segment for house " + h.house_id);
  if (data.test.empty()) throw EmptyRun("no test segment");
  check_cost(spec, data, {spec.prompt}, confirmed);
  ConfigResult r = evaluate_config(spec, data, spec.prompt, backend);
  if (!r.report) throw EmptyRun(r.status);
  return r;
}

inline std::string sweep_csv(const SweepResult& s) {
  using detail::format_fixed;
  std::string out = "components,window_size,context_length,knowledge,windows,precision,recall,f1";
  for (const auto& a : s.appliances) out += "," + a + "_f1";
  out += ",misaligned_rate,malformed_rate,prompt_tokens,completion_tokens,prompt_characters,status\n";
  for (const auto& row : s.rows) {
    const auto& c = row.config;
    out += c.components_label() + ',' + std::to_string(c.window_size) + ',' +
           (c.include_context ? std::to_string(c.context_length) : std::string("0")) + ',' +
           (c.include_knowledge ? c.knowledge_toggle.label() : std::string("none")) + ',';
    if (row.report) {
      const auto& r = *row.report;
      out += std::to_string(r.windows) + ',' + format_fixed(r.overall.precision, 4) + ',' +
             format_fixed(r.overall.recall, 4) + ',' + format_fixed(r.overall.f1, 4);
      for (const auto& a : s.appliances) out += ',' + format_fixed(r.at(a).scores.f1, 4);
      out += ',' + format_fixed(r.errors.misaligned_rate, 4) + ',' + format_fixed(r.errors.malformed_rate, 4);
    } else {
      out += "0,,,";
      for (std::size_t i = 0; i < s.appliances.size(); ++i) out += ',';
      out += ",,";
    }
    out += ',' + std::to_string(row.prompt_tokens) + ',' + std::to_string(row.completion_tokens) + ',' +
           std::to_string(row.prompt_characters) + ',';
    std::string status = row.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out += status + '\n';
  }
  return out;
}

inline nlohmann::json sweep_json(const SweepResult& s) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : s.rows) {
    const auto& c = row.config;
    nlohmann::json j = {{"components", c.components_label()},
                        {"window_size", c.window_size},
                        {"context_length", c.include_context ? c.context_length : 0},
                        {"knowledge", c.include_knowledge ? c.knowledge_toggle.label() : "none"},
                        {"prompt_tokens", row.prompt_tokens},
                        {"completion_tokens", row.completion_tokens},
                        {"prompt_characters", row.prompt_characters},
                        {"status", row.status}};
    if (row.report) j["report"] = to_json(*row.report);
    rows.push_back(std::move(j));
  }
  return {{"name", s.name}, {"appliances", s.appliances}, {"rows", rows}};
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileUnreadable(path.string());
  out << content;
}

// <dir>/<name>.csv, <dir>/<name>.json and one trace file per row.
inline void write_sweep(const SweepResult& s, const std::filesystem::path& dir) {
  write_text(dir / (s.name + ".csv"), sweep_csv(s));
  write_text(dir / (s.name + ".json"), sweep_json(s).dump(2) + "\n");
  for (std::size_t i = 0; i < s.rows.size(); ++i)
    write_text(dir / "traces" / (s.name + "_" + std::to_string(i) + ".jsonl"), traces_jsonl(s.rows[i].trace));
}

}  // namespace nilm
