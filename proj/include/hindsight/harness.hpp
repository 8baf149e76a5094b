#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hindsight/agent.hpp"
#include "hindsight/config.hpp"
#include "hindsight/env.hpp"
#include "hindsight/hipss.hpp"

namespace hindsight {

inline constexpr std::string_view kMetricsHeader =
    "env_steps,success_rate,hipss_train_acc,hipss_val_acc,buffer_size,relabel_fraction";

struct MetricsRow {
  std::size_t env_steps = 0;
  double success_rate = 0.0;
  std::optional<double> hipss_train_acc;  // empty when no HIPSS model or split is empty
  std::optional<double> hipss_val_acc;
  std::size_t buffer_size = 0;
  double relabel_fraction = 0.0;
};

std::string format_metrics_row(const MetricsRow& row);
std::vector<MetricsRow> read_metrics(const std::filesystem::path& csv);

struct RunCounters {
  std::size_t episodes = 0;
  std::size_t successes = 0;
  std::size_t hipss_samples = 0;      // successful episodes stored to the HIPSS dataset
  std::size_t events = 0;             // hindsight events detected in failed episodes
  std::size_t relabels = 0;           // events that produced relabeled transitions
  std::size_t malformed_predictions = 0;
  std::size_t agent_updates = 0;
  std::size_t hipss_updates = 0;
};

struct RunResult {
  std::vector<MetricsRow> rows;
  RunCounters counters;
  BufferStats buffer;
};

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;     // no files are written when empty
  std::function<void(const MetricsRow&)> on_row;    // progress callback
};

// Trains from scratch. Metrics rows are taken at env step 0 and then every
// eval_every steps up to total_env_steps.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

// Actions for a batch of live environments stepped in lockstep.
using BatchPolicy = std::function<std::vector<Action>(std::span<const Environment* const> envs)>;

struct EvalResult {
  std::size_t episodes = 0;
  std::size_t successes = 0;
  double success_rate() const { return episodes ? static_cast<double>(successes) / static_cast<double>(episodes) : 0.0; }
};

// Episode j is reset with derive_seed(seed, j).
EvalResult evaluate_policy(TaskMode mode, const EpisodeConfig& episode, std::size_t episodes, std::uint64_t seed,
                           const BatchPolicy& policy);

BatchPolicy agent_policy(const SacAgent& agent, const FeatureScaler& scaler);
BatchPolicy random_policy(std::uint64_t seed);
BatchPolicy expert_policy();

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Loads an agent checkpoint written by run_experiment and runs
// deterministic-action episodes. Throws EvaluationError when `mode` differs
// from the checkpoint's mode or vocabulary.
EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint, std::optional<TaskMode> mode,
                               std::size_t episodes, std::uint64_t seed);

// Scaled state sequence and instruction of scripted-expert episodes; failed
// episodes are skipped. Samples pass through the dataset's split.
HipssDataset generate_corpus(TaskMode mode, const EpisodeConfig& episode, const HipssConfig& hipss,
                             std::size_t episodes, std::uint64_t seed);

}  // namespace hindsight
