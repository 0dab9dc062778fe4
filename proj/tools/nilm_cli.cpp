// nilm: preprocessing, knowledge extraction, ablations, sweeps, evaluation
// and explanation audits driven by one JSON experiment config.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>

#include "nilm/nilm.hpp"
#include "nilm/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string backend;
  std::string out;
  bool confirm_cost = false;
};

nilm::ExperimentSpec load(const Options& o) {
  if (o.config.empty()) throw nilm::InvalidConfig("--config is required");
  auto spec = nilm::load_spec(o.config);
  if (!o.backend.empty()) spec.backend_kind = o.backend;
  if (!o.out.empty()) spec.output_dir = o.out;
  spec.validate();
  return spec;
}

void print_sweep(const nilm::SweepResult& r, const fs::path& dir) {
  nilm::write_sweep(r, dir);
  std::cout << nilm::sweep_csv(r);
  std::cerr << "wrote " << (dir / (r.name + ".csv")).string() << "\n";
}

int cmd_preprocess(const Options& o) {
  const auto spec = load(o);
  for (const auto& h : spec.houses) {
    const auto house = nilm::load_and_preprocess(h, spec.appliances);
    const auto path = spec.output_dir / ("house_" + h.layout.house_id + "_preprocessed.csv");
    nilm::write_text(path, nilm::export_csv(house));
    std::size_t gaps = 0;
    for (bool g : house.aggregate.gap_mask) gaps += g;
    std::cout << "house " << h.layout.house_id << ": " << house.aggregate.size() << " slots, " << gaps
              << " gap slots -> " << path.string() << "\n";
  }
  return 0;
}

int cmd_extract(const Options& o) {
  auto spec = load(o);
  spec.profiles_file.reset();  // always re-extract here
  std::vector<nilm::PreprocessedHouse> houses;
  for (const auto& id : spec.knowledge_houses)
    houses.push_back(nilm::load_and_preprocess(spec.house(id), spec.appliances));
  const auto profiles = nilm::extract_profiles(houses, spec.appliance_names());
  const auto path = spec.output_dir / "profiles.json";
  nilm::write_text(path, nilm::profiles_to_json(profiles).dump(2) + "\n");
  std::cout << nilm::render_knowledge(profiles, {}) << "\n";
  std::cerr << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_ablate(const Options& o, bool knowledge) {
  const auto spec = load(o);
  const auto data = nilm::prepare(spec);
  auto backend = nilm::make_backend(spec);
  const auto r = knowledge ? nilm::run_knowledge_ablation(spec, data, *backend, o.confirm_cost)
                           : nilm::run_ablation(spec, data, *backend, o.confirm_cost);
  print_sweep(r, spec.output_dir);
  return 0;
}

int cmd_sweep(const Options& o, const std::string& axis) {
  const auto spec = load(o);
  const auto data = nilm::prepare(spec);
  auto backend = nilm::make_backend(spec);
  const auto r = nilm::run_sweep(spec, data, axis == "window" ? nilm::SweepAxis::window : nilm::SweepAxis::context,
                                 *backend, o.confirm_cost);
  print_sweep(r, spec.output_dir);
  return 0;
}

int cmd_eval(const Options& o) {
  const auto spec = load(o);
  const auto data = nilm::prepare(spec);
  auto backend = nilm::make_backend(spec);
  const auto r = nilm::run_eval(spec, data, *backend, o.confirm_cost);
  nilm::write_text(spec.output_dir / "eval.csv", nilm::report_csv(*r.report));
  nlohmann::json j = nilm::to_json(*r.report);
  j["components"] = r.config.components_label();
  j["prompt_tokens"] = r.prompt_tokens;
  j["completion_tokens"] = r.completion_tokens;
  j["skipped_gap_windows"] = r.skipped_gap_windows;
  nilm::write_text(spec.output_dir / "eval.json", j.dump(2) + "\n");
  nilm::write_text(spec.output_dir / "eval_trace.jsonl", nilm::traces_jsonl(r.trace));
  std::cout << nilm::report_csv(*r.report);
  std::cerr << "wrote " << (spec.output_dir / "eval.csv").string() << "\n";
  return 0;
}

int cmd_explain(const Options& o, std::size_t window) {
  const auto spec = load(o);
  const auto data = nilm::prepare(spec);
  if (data.test.empty()) throw nilm::EmptyRun("no test segment");
  const auto& house = data.test.front();
  auto cfg = spec.prompt;
  cfg.explanation_mode = true;
  cfg.include_context = false;  // a single window has no predecessor
  const std::size_t w = cfg.window_size;
  const std::size_t off = window * w;
  if (off + w > house.aggregate.size())
    throw nilm::InvalidConfig("window " + std::to_string(window) + " lies beyond the test segment");
  for (std::size_t k = off; k < off + w; ++k)
    if (house.aggregate.gap_mask[k]) throw nilm::InvalidConfig("window " + std::to_string(window) + " contains gaps");

  auto backend = nilm::make_backend(spec);
  const auto input = nilm::make_window_input(house.aggregate, off, w, cfg.include_timestamps);
  const auto example = nilm::example_for(spec, data, cfg);
  const auto explained = nilm::explain_window(input, cfg, *backend, data.profiles, example);
  std::vector<nilm::StateSeries> truth;
  for (const auto& t : house.truth) truth.push_back(nilm::slice(t, off, w));
  const auto rows = nilm::audit_rationales(explained, truth, input);

  nilm::write_text(spec.output_dir / "explain.csv", nilm::audit_csv(rows));
  nilm::write_text(spec.output_dir / "explain.md", nilm::audit_markdown(rows));
  std::cout << "house " << house.house_id << ", window " << window << " (outcome "
            << nilm::to_string(explained.outcome.kind) << ", missing rationales " << explained.missing_rationales
            << ")\n\n";
  for (const auto& [name, text] : explained.rationales)
    std::cout << name << "_explanation: \"" << text << "\"\n";
  std::cout << "\n" << nilm::audit_markdown(rows);
  return 0;
}

// Writes two synthetic one-appliance-pair houses plus a ready config.
int cmd_synth(const std::string& dir, double days, std::uint64_t seed) {
  const fs::path root(dir);
  nilm::synthetic::HouseOptions a;
  a.house_id = "1";
  a.seed = seed;
  a.duration_seconds = static_cast<std::int64_t>(days * 86400.0) / 6 * 6;
  nilm::synthetic::HouseOptions b = a;
  b.house_id = "2";
  b.region = nilm::Region::uk;
  b.seed = seed + 1;
  nilm::synthetic::write_house(root / "house_1", a);
  nilm::synthetic::write_house(root / "house_2", b);
  const nlohmann::json cfg = {
      {"houses",
       {{{"dir", "house_1"}, {"layout", "house_1/layout.json"}}, {{"dir", "house_2"}, {"layout", "house_2/layout.json"}}}},
      {"knowledge_houses", {"1"}},
      {"test_houses", {"2"}},
      {"appliances", {"fridge", "microwave"}},
      {"segment", {{"offset_slots", 0}, {"slots", 0}}},
      {"prompt", {{"window_size", 100}, {"context_length", 10}}},
      {"backend", {{"kind", "mock"}}},
      {"output_dir", "out"},
      {"seed", seed}};
  nilm::write_text(root / "config.json", cfg.dump(2) + "\n");
  std::cout << "wrote " << (root / "config.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM-prompted appliance state detection: experiments and reports"};
  app.require_subcommand(1);
  Options opts;
  const auto common = [&opts](CLI::App* sub) {
    sub->add_option("--config", opts.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--backend", opts.backend, "override the config's backend")->check(CLI::IsMember({"mock", "http"}));
    sub->add_option("--out", opts.out, "output directory");
    sub->add_flag("--confirm-cost", opts.confirm_cost, "allow live runs above the token guard");
  };

  auto* pre = app.add_subcommand("preprocess", "resample, backfill and threshold every house; export CSV");
  common(pre);
  auto* ext = app.add_subcommand("extract-knowledge", "derive appliance profiles from the knowledge houses");
  common(ext);
  auto* abl = app.add_subcommand("ablate", "prompt-component ablation (or knowledge categories)");
  common(abl);
  bool knowledge = false;
  abl->add_flag("--knowledge", knowledge, "ablate knowledge categories instead of prompt components");
  auto* sw = app.add_subcommand("sweep", "sensitivity sweep over window size or context length");
  common(sw);
  std::string axis;
  sw->add_option("--axis", axis, "window | context")->required()->check(CLI::IsMember({"window", "context"}));
  auto* ev = app.add_subcommand("eval", "full evaluation at the configured prompt");
  common(ev);
  auto* ex = app.add_subcommand("explain", "single window with rationales and an audit table");
  common(ex);
  std::size_t window = 0;
  ex->add_option("--window", window, "window index within the first test segment");

  auto* syn = app.add_subcommand("synth", "write a synthetic two-house dataset and config");
  std::string synth_dir;
  double days = 1.0;
  std::uint64_t seed = 7;
  syn->add_option("--out", synth_dir, "target directory")->required();
  syn->add_option("--days", days, "days of data per house")->check(CLI::PositiveNumber);
  syn->add_option("--seed", seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pre) return cmd_preprocess(opts);
    if (*ext) return cmd_extract(opts);
    if (*abl) return cmd_ablate(opts, knowledge);
    if (*sw) return cmd_sweep(opts, axis);
    if (*ev) return cmd_eval(opts);
    if (*ex) return cmd_explain(opts, window);
    if (*syn) return cmd_synth(synth_dir, days, seed);
  } catch (const nilm::CostNotConfirmed& e) {
    std::cerr << "cost guard: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
