#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "hindsight/config.hpp"
#include "hindsight/harness.hpp"
#include "hindsight/plot.hpp"
#include "hindsight/server.hpp"

using namespace hindsight;

namespace {

int run_train(const std::string& config_file, const std::vector<std::pair<std::string, std::string>>& overrides,
              const std::string& out) {
  ExperimentConfig cfg = config_file.empty() ? ExperimentConfig{} : load_config(config_file);
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  cfg.validate();
  std::cerr << "training " << to_string(cfg.method) << " on " << to_string(cfg.mode) << " for "
            << cfg.total_env_steps << " steps, writing to " << out << "\n";
  RunOptions opts;
  opts.out_dir = out;
  opts.on_row = [](const MetricsRow& r) { std::cerr << format_metrics_row(r) << "\n"; };
  const auto result = run_experiment(cfg, opts);
  const auto& c = result.counters;
  std::cerr << "episodes " << c.episodes << ", successes " << c.successes << ", events " << c.events
            << ", relabels " << c.relabels << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hindsight instruction learning: training, evaluation, plotting and the environment server"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train an agent and write metrics.csv, checkpoints and config");
  std::string mode, method, strategy, repr, config_file, out = "runs/train";
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> sets;
  train->add_option("--mode", mode, "default, color, shape or color_shape");
  train->add_option("--method", method, "lcsac, heir or hipss");
  train->add_option("--strategy", strategy, "episode, future or final");
  train->add_option("--repr", repr, "one_hot or learned_embedding");
  train->add_option("--steps", steps, "Total environment steps");
  train->add_option("--seed", seed, "Master seed");
  train->add_option("--config", config_file, "key = value file")->check(CLI::ExistingFile);
  train->add_option("--set", sets, "Extra key=value overrides, applied last");
  train->add_option("--out", out, "Output directory");

  // eval
  auto* eval = app.add_subcommand("eval", "Deterministic-action success rate of a checkpoint or baseline policy");
  std::string checkpoint, eval_mode, policy = "checkpoint";
  std::size_t episodes = 50;
  std::uint64_t eval_seed = 0;
  eval->add_option("--checkpoint", checkpoint, "agent.ckpt written by train");
  eval->add_option("--episodes", episodes, "Number of episodes")->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "Evaluation seed");
  eval->add_option("--mode", eval_mode, "Expected task mode (must match the checkpoint)");
  eval->add_option("--policy", policy, "checkpoint, random or expert")
      ->check(CLI::IsMember({"checkpoint", "random", "expert"}));

  // plot
  auto* plot = app.add_subcommand("plot", "Success and word-accuracy curves with standard-error bands");
  std::vector<std::string> inputs;
  std::string plot_out = "figures";
  plot->add_option("--inputs", inputs, "metrics.csv files")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "Output directory");

  // serve
  auto* serve = app.add_subcommand("serve", "Newline-delimited JSON environment server");
  ServerConfig server_cfg;
  std::string serve_mode = "default";
  serve->add_option("--port", server_cfg.port, "TCP port, 0 picks a free one");
  serve->add_option("--host", server_cfg.host, "Bind address");
  serve->add_option("--mode", serve_mode, "Default task mode for reset");
  serve->add_option("--max-sessions", server_cfg.max_sessions, "Concurrent connections")->check(CLI::PositiveNumber);

  // corpus
  auto* corpus = app.add_subcommand("corpus", "Scripted-expert hindsight instruction dataset as JSON lines");
  std::string corpus_mode = "default", corpus_out = "corpus.jsonl";
  std::size_t corpus_episodes = 1200;
  std::uint64_t corpus_seed = 0;
  corpus->add_option("--mode", corpus_mode, "Task mode");
  corpus->add_option("--episodes", corpus_episodes, "Scripted episodes to roll out");
  corpus->add_option("--seed", corpus_seed, "Seed");
  corpus->add_option("--out", corpus_out, "Output file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      std::vector<std::pair<std::string, std::string>> overrides;
      if (!mode.empty()) overrides.emplace_back("mode", mode);
      if (!method.empty()) overrides.emplace_back("method", method);
      if (!strategy.empty()) overrides.emplace_back("strategy", strategy);
      if (!repr.empty()) overrides.emplace_back("repr", repr);
      if (train->count("--steps")) overrides.emplace_back("total_env_steps", std::to_string(steps));
      if (train->count("--seed")) overrides.emplace_back("seed", std::to_string(seed));
      for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
      }
      return run_train(config_file, overrides, out);
    }
    if (*eval) {
      const std::optional<TaskMode> m = eval_mode.empty() ? std::nullopt : std::optional(parse_task_mode(eval_mode));
      EvalResult r;
      if (policy == "checkpoint") {
        if (checkpoint.empty()) throw std::invalid_argument("--checkpoint is required for the checkpoint policy");
        r = evaluate_checkpoint(checkpoint, m, episodes, eval_seed);
      } else {
        const TaskMode tm = m.value_or(TaskMode::Default);
        r = evaluate_policy(tm, EpisodeConfig{}, episodes, eval_seed,
                            policy == "random" ? random_policy(eval_seed) : expert_policy());
      }
      std::printf("success_rate %.6f (%zu/%zu)\n", r.success_rate(), r.successes, r.episodes);
      return 0;
    }
    if (*plot) {
      std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
      for (const auto& p : plot_metrics(paths, plot_out)) std::printf("%s\n", p.string().c_str());
      return 0;
    }
    if (*serve) {
      server_cfg.mode = parse_task_mode(serve_mode);
      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);
      EnvServer server(server_cfg);
      server.start();
      std::printf("listening on %s:%u\n", server_cfg.host.c_str(), static_cast<unsigned>(server.port()));
      std::fflush(stdout);
      int sig = 0;
      sigwait(&signals, &sig);
      server.stop();
      return 0;
    }
    if (*corpus) {
      const TaskMode tm = parse_task_mode(corpus_mode);
      const auto data = generate_corpus(tm, EpisodeConfig{}, HipssConfig{}, corpus_episodes, corpus_seed);
      std::ofstream f(corpus_out);
      if (!f) throw std::runtime_error("cannot write " + corpus_out);
      data.write(f);
      std::printf("%zu train, %zu validation samples written to %s\n", data.train().size(), data.validation().size(),
                  corpus_out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
