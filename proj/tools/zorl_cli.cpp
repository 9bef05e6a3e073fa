#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "zorl/agent.hpp"
#include "zorl/harness.hpp"
#include "zorl/model_io.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  zorl::RunConfig cfg = zorl::load_run_config(config_path);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  const auto outcome = zorl::run_matrix(cfg);
  zorl::print_summary(std::cout, outcome.summary);
  for (std::size_t i = 0; i < cfg.runs.size(); ++i) {
    if (outcome.results[i].failed) {
      std::cerr << "run " << cfg.runs[i].run_id()
                << " failed: " << outcome.results[i].error << '\n';
    }
  }
  std::cout << "wrote " << cfg.out_dir << "/merged.csv and "
            << cfg.out_dir << "/summary.csv\n";
  return outcome.failed_runs.empty() ? 0 : 1;
}

int cmd_solve(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw zorl::ConfigError("cannot open model file " + path);
  const zorl::ModelFile mf = zorl::parse_model(in);
  const auto policy =
      zorl::scopt_solve(mf.model, mf.epsilon, mf.reference, {mf.rule, 0, {}});
  zorl::print_policy(std::cout, policy);
  return 0;
}

int cmd_dump_tree(const std::string& env_name, std::uint64_t steps,
                  std::uint64_t seed, const std::string& config_path) {
  zorl::AgentConfig agent;
  zorl::EnvSpec env = zorl::make_env(env_name);
  if (!config_path.empty()) {
    const zorl::RunConfig cfg = zorl::load_run_config(config_path);
    agent = cfg.zorl;
    if (cfg.envs.count(env_name)) env = cfg.envs.at(env_name);
  }
  agent.horizon = steps;
  agent.seed = seed;
  zorl::ZorlHooks hooks;
  hooks.on_finish = [](const zorl::PartitionTree& tree) { tree.dump(std::cout); };
  const auto result = zorl::run_zorl(env, agent, hooks);
  if (result.failed) {
    std::cerr << "run failed: " << result.error << '\n';
    return 1;
  }
  return 0;
}

int cmd_summarize(const std::string& dir) {
  zorl::print_summary(std::cout, zorl::summarize_dir(dir));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive-discretization average-reward RL experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* run = app.add_subcommand("run", "Execute every (env, algo, seed) run of a config");
  run->add_option("--config", config_path, "Run configuration file")->required();
  run->add_option("--out", out_dir, "Output directory (overrides run.out)");

  std::string model_path;
  auto* solve = app.add_subcommand("solve", "Solve an extended model file and print the policy");
  solve->add_option("--model", model_path, "Extended model text file")->required();

  std::string env_name = "riverswim", tree_config;
  std::uint64_t steps = 2000, seed = 1;
  auto* dump = app.add_subcommand("dump-tree", "Run the agent and print its active cells");
  dump->add_option("--env", env_name, "Environment name")->capture_default_str();
  dump->add_option("--steps", steps, "Number of steps T")->capture_default_str();
  dump->add_option("--seed", seed, "Seed")->capture_default_str();
  dump->add_option("--config", tree_config, "Optional config for agent and env settings");

  std::string summary_dir;
  auto* summarize = app.add_subcommand("summarize", "Print the summary table of an output directory");
  summarize->add_option("--in", summary_dir, "Directory written by `run`")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, out_dir);
    if (*solve) return cmd_solve(model_path);
    if (*dump) return cmd_dump_tree(env_name, steps, seed, tree_config);
    if (*summarize) return cmd_summarize(summary_dir);
  } catch (const zorl::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
