#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "hindsight/agent.hpp"
#include "hindsight/env.hpp"
#include "hindsight/hipss.hpp"
#include "hindsight/replay.hpp"

namespace hindsight {

enum class Method { LCSAC, HEIR, HIPSS };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  TaskMode mode = TaskMode::Default;
  Method method = Method::HEIR;
  std::uint64_t seed = 0;
  std::size_t total_env_steps = 150000;
  std::size_t eval_every = 5000;
  std::size_t eval_episodes = 50;
  std::size_t random_steps = 2000;    // uniform random actions before the policy acts
  std::size_t update_after = 1000;    // env steps before the first gradient update
  double updates_per_step = 1.0;
  std::size_t buffer_capacity = 1000000;
  std::size_t hipss_updates_per_episode = 2;
  bool save_trace = false;            // write episode traces as JSON lines
  // Leading episodes driven by the scripted expert toward the distractor,
  // so they fail with a hindsight event.
  std::size_t warmstart_episodes = 0;

  EpisodeConfig episode{};
  HeirConfig heir{};
  SacConfig sac{};
  HipssConfig hipss{};

  void validate() const;
  // Every key accepted by set(), in file order, with its current value.
  std::map<std::string, std::string> to_map() const;
  // key = value assignment; throws ConfigError for unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
};

// Parses "key = value" lines; '#' starts a comment.
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
void apply_config_text(ExperimentConfig& cfg, std::string_view text);
std::string config_text(const ExperimentConfig& cfg);

}  // namespace hindsight
