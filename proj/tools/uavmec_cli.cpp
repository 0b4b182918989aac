#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uavmec/errors.hpp"
#include "uavmec/run/config.hpp"
#include "uavmec/run/trainer.hpp"

namespace fs = std::filesystem;
using namespace uavmec;

namespace {

run::RunConfig build_config(const std::string& path, const std::vector<std::string>& overrides) {
  run::RunConfig config = path.empty() ? run::RunConfig{} : run::load_config(path);
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + item + "'");
    run::set_key(config, item.substr(0, eq), item.substr(eq + 1));
  }
  config.finalize();
  return config;
}

void print_summary(const run::EvalResult& r) {
  std::cout << "task_pct " << r.task_pct.mean << " +- " << r.task_pct.std << "\n"
            << "collisions " << r.collisions.mean << " +- " << r.collisions.std << "\n"
            << "energy_per_task_J " << r.energy_per_task_j.mean << " +- " << r.energy_per_task_j.std << "\n";
}

void write_jsonl(const fs::path& path, const std::vector<nlohmann::json>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  for (const auto& rec : records) out << rec.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized multi-UAV edge computing simulator and learner"};
  app.require_subcommand(1);
  const std::string keys = "\nConfiguration keys (JSON config file or --set key=value):\n" + run::describe_keys();
  app.footer(keys);

  std::string config_path, checkpoint_path, param, values;
  std::string train_out = "runs/train", eval_out, sweep_out = "runs/sweep", trace_out = "trace.jsonl";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> episodes;

  auto* train = app.add_subcommand("train", "train a fleet and write metrics and checkpoints");
  train->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "master seed (overrides the config)");
  train->add_option("--out", train_out, "output directory")->capture_default_str();
  train->add_option("--set", overrides, "override a config key, key=value");
  train->footer(keys);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint with greedy actions");
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes, "number of evaluation episodes");
  eval->add_option("--seed", seed, "master seed (overrides the config)");
  eval->add_option("--out", eval_out, "directory for eval_metrics.csv and eval_summary.csv");
  eval->add_option("--set", overrides, "override a config key, key=value");
  eval->footer(keys);

  auto* sweep = app.add_subcommand("sweep", "evaluate a checkpoint across values of one config key");
  sweep->add_option("--param", param, "config key to vary")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  sweep->add_option("--episodes", episodes, "evaluation episodes per value");
  sweep->add_option("--out", sweep_out, "output directory")->capture_default_str();
  sweep->add_option("--set", overrides, "override a config key, key=value");
  sweep->footer(keys);

  auto* trace = app.add_subcommand("trace", "run one episode without learning and write a JSONL trace");
  trace->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  trace->add_option("--seed", seed, "master seed")->required();
  trace->add_option("--checkpoint", checkpoint_path, "act greedily with this checkpoint")->check(CLI::ExistingFile);
  trace->add_option("--out", trace_out, "trace file; a coverage CSV is written beside it")->capture_default_str();
  trace->add_option("--set", overrides, "override a config key, key=value");
  trace->footer(keys);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train) {
      run::RunConfig config = build_config(config_path, overrides);
      if (seed) config.seed = *seed;
      const auto result = run::train(config, train_out, &std::cout);
      std::cout << "final checkpoint " << result.final_checkpoint.string() << "\n";
    } else if (*eval) {
      run::RunConfig config = build_config(config_path, overrides);
      if (seed) config.seed = *seed;
      const auto result = run::evaluate(nn::read_checkpoint(checkpoint_path), config,
                                        episodes.value_or(config.eval_episodes));
      if (!eval_out.empty()) {
        fs::create_directories(eval_out);
        run::write_metrics(fs::path(eval_out) / "eval_metrics.csv", result.episodes, config.env.num_uavs);
        run::write_eval_summary(fs::path(eval_out) / "eval_summary.csv", result);
      }
      print_summary(result);
    } else if (*sweep) {
      const nn::Checkpoint ck = nn::read_checkpoint(checkpoint_path);
      const run::RunConfig base = build_config(config_path, overrides);
      fs::create_directories(sweep_out);
      std::stringstream list(values);
      std::string value;
      while (std::getline(list, value, ',')) {
        if (value.empty()) continue;
        run::RunConfig config = base;
        run::set_key(config, param, value);
        config.finalize();
        const auto result = run::evaluate(ck, config, episodes.value_or(config.eval_episodes));
        const fs::path file = fs::path(sweep_out) / ("sweep_" + param + "_" + value + ".csv");
        run::write_metrics(file, result.episodes, config.env.num_uavs);
        std::cout << param << "=" << value << " task_pct " << result.task_pct.mean << " +- "
                  << result.task_pct.std << " -> " << file.string() << "\n";
      }
    } else if (*trace) {
      const run::RunConfig config = build_config(config_path, overrides);
      std::optional<nn::Checkpoint> ck;
      if (!checkpoint_path.empty()) ck = nn::read_checkpoint(checkpoint_path);
      const auto records = run::trace_episode(config, *seed, ck);
      const fs::path path(trace_out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      write_jsonl(path, records);
      fs::path grid = path;
      grid.replace_extension(".coverage.csv");
      run::write_coverage_csv(grid, run::emit_coverage_grid(records, config.env.grid_size()));
      std::cout << "wrote " << path.string() << " and " << grid.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
