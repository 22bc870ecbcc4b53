#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bisimlab/harness.hpp"

namespace {

using nlohmann::json;

// Dotted-key override: "env.noise_std=0.5" descends/creates nested objects.
void apply_override(json& cfg, const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos) throw std::runtime_error("--set expects key=value: " + spec);
  std::string key = spec.substr(0, eq);
  std::string value = spec.substr(eq + 1);
  json* node = &cfg;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &((*node)[parts[i]]);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (...) {
    parsed = value;  // plain string
  }
  (*node)[parts.back()] = parsed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bisimlab: exact bisimulation metrics, bound verification, and "
               "on-policy metric-learning experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, preset, variant, task;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double perturb_metric = -1.0;
  std::vector<std::string> overrides;

  for (const char* name :
       {"verify-bounds", "exact-metric", "train", "ratio-study", "gen-mdp"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "master seed")->each([&](const std::string&) {
      seed_set = true;
    });
    sub->add_option("--preset", preset, "metric preset (def1, def2)");
    sub->add_option("--variant", variant,
                    "training variant (dbc-plain, dbc-orig, dbc-matched, dbc-alt, normed, "
                    "normed-ir, normed-ir-id)");
    sub->add_option("--task", task, "task (sparse_cartpole, mountain_car, sparse_pendulum)");
    sub->add_option("--perturb-metric", perturb_metric,
                    "self-test: corrupt the metric before the Thm-1 check");
    sub->add_option("--set", overrides, "dotted-key config overrides (key=value)");
  }

  CLI11_PARSE(app, argc, argv);

  json cfg = json::object();
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) {
        std::fprintf(stderr, "config error: cannot open %s\n", config_path.c_str());
        return 2;
      }
      in >> cfg;
    }
    if (seed_set) cfg["seed"] = seed;
    if (!preset.empty()) cfg["preset"] = preset;
    if (!variant.empty()) cfg["variant"] = variant;
    if (!task.empty()) cfg["task"] = task;
    if (perturb_metric >= 0.0) cfg["perturb_metric"] = perturb_metric;
    for (const auto& o : overrides) apply_override(cfg, o);
    if (cfg.contains("out") && out_dir.empty()) out_dir = cfg.at("out").get<std::string>();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  const std::string config_text = cfg.dump();
  try {
    if (app.got_subcommand("verify-bounds"))
      return bisimlab::cmd_verify_bounds(config_text, out_dir);
    if (app.got_subcommand("exact-metric")) return bisimlab::cmd_exact_metric(config_text, out_dir);
    if (app.got_subcommand("train")) return bisimlab::cmd_train(config_text, out_dir);
    if (app.got_subcommand("ratio-study")) return bisimlab::cmd_ratio_study(config_text, out_dir);
    if (app.got_subcommand("gen-mdp")) return bisimlab::cmd_gen_mdp(config_text, out_dir);
  } catch (const bisimlab::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
