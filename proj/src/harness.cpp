#include "hindsight/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hindsight/checkpoint.hpp"
#include "hindsight/trace.hpp"
#include "json.hpp"

namespace hindsight {
namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

Action uniform_action(Rng& rng) {
  Action a;
  for (auto& v : a) v = uniform(rng, -1.0, 1.0);
  return a;
}

Tensor feature_rows(std::span<const Environment* const> envs, const FeatureScaler& scaler,
                    std::vector<std::vector<Token>>& tokens) {
  Tensor f = Tensor::zeros(envs.size(), scaler.dim());
  tokens.clear();
  for (std::size_t i = 0; i < envs.size(); ++i) {
    auto obs = envs[i]->observation();
    auto scaled = scaler(obs.features);
    std::copy(scaled.begin(), scaled.end(), f.row_span(i).begin());
    tokens.push_back(std::move(obs.tokens));
  }
  return f;
}

std::optional<double> accuracy_or_empty(const Seq2Seq* model, std::span<const HipssSample> samples) {
  if (!model || samples.empty()) return std::nullopt;
  return word_accuracy(*model, samples);
}

std::map<std::string, std::string> run_metadata(const ExperimentConfig& cfg) {
  return {{"mode", std::string(to_string(cfg.mode))},
          {"method", std::string(to_string(cfg.method))},
          {"config", config_text(cfg)}};
}

}  // namespace

std::string format_metrics_row(const MetricsRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? fixed(*v) : std::string(); };
  return std::to_string(r.env_steps) + "," + fixed(r.success_rate) + "," + opt(r.hipss_train_acc) + "," +
         opt(r.hipss_val_acc) + "," + std::to_string(r.buffer_size) + "," + fixed(r.relabel_fraction);
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw std::runtime_error(csv.string() + ": unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 6) throw std::runtime_error(csv.string() + ": expected 6 columns in '" + line + "'");
    MetricsRow r;
    try {
      r.env_steps = std::stoull(cells[0]);
      r.success_rate = std::stod(cells[1]);
      if (!cells[2].empty()) r.hipss_train_acc = std::stod(cells[2]);
      if (!cells[3].empty()) r.hipss_val_acc = std::stod(cells[3]);
      r.buffer_size = std::stoull(cells[4]);
      r.relabel_fraction = std::stod(cells[5]);
    } catch (const std::logic_error&) {
      throw std::runtime_error(csv.string() + ": malformed row '" + line + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

EvalResult evaluate_policy(TaskMode mode, const EpisodeConfig& episode, std::size_t episodes, std::uint64_t seed,
                           const BatchPolicy& policy) {
  std::vector<Environment> envs(episodes, Environment(mode, episode));
  for (std::size_t j = 0; j < episodes; ++j) envs[j].reset(derive_seed(seed, j));
  EvalResult result;
  result.episodes = episodes;
  std::vector<Environment*> live;
  for (auto& e : envs) live.push_back(&e);
  while (!live.empty()) {
    std::vector<const Environment*> view(live.begin(), live.end());
    const auto actions = policy(view);
    if (actions.size() != live.size()) throw std::logic_error("policy returned the wrong number of actions");
    std::vector<Environment*> next;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const auto r = live[i]->step(actions[i]);
      if (r.success) ++result.successes;
      if (!r.done) next.push_back(live[i]);
    }
    live = std::move(next);
  }
  return result;
}

BatchPolicy agent_policy(const SacAgent& agent, const FeatureScaler& scaler) {
  return [&agent, &scaler](std::span<const Environment* const> envs) {
    std::vector<std::vector<Token>> tokens;
    const Tensor f = feature_rows(envs, scaler, tokens);
    Rng unused(0);
    return agent.select_actions(f, tokens, false, unused);
  };
}

BatchPolicy random_policy(std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng](std::span<const Environment* const> envs) {
    std::vector<Action> out;
    for (std::size_t i = 0; i < envs.size(); ++i) out.push_back(uniform_action(*rng));
    return out;
  };
}

BatchPolicy expert_policy() {
  return [](std::span<const Environment* const> envs) {
    std::vector<Action> out;
    for (const auto* e : envs) out.push_back(scripted_expert_action(e->state(), e->goal_object(), e->config()));
    return out;
  };
}

EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint, std::optional<TaskMode> mode,
                               std::size_t episodes, std::uint64_t seed) {
  const auto ckpt = read_checkpoint(checkpoint);
  auto meta = [&](const std::string& key) {
    auto it = ckpt.metadata.find(key);
    if (it == ckpt.metadata.end()) throw EvaluationError("checkpoint lacks '" + key + "' metadata");
    return it->second;
  };
  ExperimentConfig cfg;
  apply_config_text(cfg, meta("config"));
  const TaskMode trained = parse_task_mode(meta("mode"));
  if (mode && *mode != trained) {
    throw EvaluationError("checkpoint was trained in mode '" + std::string(to_string(trained)) +
                          "', not '" + std::string(to_string(*mode)) + "'");
  }
  const Vocabulary vocab(trained);
  if (meta("vocab_size") != std::to_string(vocab.size())) {
    throw EvaluationError("checkpoint vocabulary size " + meta("vocab_size") + " does not match mode '" +
                          std::string(to_string(trained)) + "' (" + std::to_string(vocab.size()) + ")");
  }
  Rng init(0);
  SacAgent agent(feature_dim(trained), vocab.size(), cfg.sac, init);
  agent.load(ckpt);
  const FeatureScaler scaler(trained, cfg.episode);
  return evaluate_policy(trained, cfg.episode, episodes, seed, agent_policy(agent, scaler));
}

HipssDataset generate_corpus(TaskMode mode, const EpisodeConfig& episode, const HipssConfig& hipss,
                             std::size_t episodes, std::uint64_t seed) {
  Rng split = make_rng(seed, Stream::kDatasetSplit);
  HipssDataset data(hipss.validation_period, split);
  Environment env(mode, episode);
  const FeatureScaler scaler(mode, episode);
  for (std::size_t j = 0; j < episodes; ++j) {
    env.reset(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(Stream::kEnvironment)), j));
    std::vector<std::vector<double>> states{scaler(env.observation().features)};
    bool success = false;
    while (!env.done()) {
      const auto r = env.step(scripted_expert_action(env.state(), env.goal_object(), env.config()));
      states.push_back(scaler(env.observation().features));
      success = r.success;
    }
    if (!success) continue;
    data.add({subsample_states(states, hipss.state_stride, hipss.max_states), env.instruction().tokens});
  }
  return data;
}

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const auto wall_start = std::chrono::steady_clock::now();

  Rng env_rng = make_rng(cfg.seed, Stream::kEnvironment);
  Rng init_rng = make_rng(cfg.seed, Stream::kInit);
  Rng explore_rng = make_rng(cfg.seed, Stream::kExploration);
  Rng relabel_rng = make_rng(cfg.seed, Stream::kRelabel);
  Rng split_rng = make_rng(cfg.seed, Stream::kDatasetSplit);
  Rng replay_rng = make_rng(cfg.seed, Stream::kReplaySampling);
  Rng hipss_rng = make_rng(cfg.seed, Stream::kHipss);
  Rng noise_rng = make_rng(cfg.seed, Stream::kUpdateNoise);
  const std::uint64_t eval_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(Stream::kEvaluation));

  Environment env(cfg.mode, cfg.episode);
  const Vocabulary& vocab = env.vocabulary();
  const FeatureScaler scaler(cfg.mode, cfg.episode);
  SacAgent agent(scaler.dim(), vocab.size(), cfg.sac, init_rng);
  ReplayBuffer buffer(cfg.buffer_capacity);
  HipssDataset dataset(cfg.hipss.validation_period, split_rng);
  std::optional<Seq2Seq> model;
  std::optional<Adam> model_opt;
  if (cfg.method == Method::HIPSS) {
    model.emplace(scaler.dim(), vocab.size(), cfg.hipss, hipss_rng);
    model_opt.emplace(model->params(), AdamConfig{.lr = cfg.hipss.lr});
  }

  std::ofstream csv, traces;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    std::ofstream(*options.out_dir / "config.txt") << config_text(cfg);
    std::ofstream(*options.out_dir / "vocab.txt") << vocab.dump();
    csv.open(*options.out_dir / "metrics.csv");
    csv << kMetricsHeader << '\n';
    if (cfg.save_trace) traces.open(*options.out_dir / "traces.jsonl");
  }

  RunResult result;
  auto& counters = result.counters;
  std::size_t eval_index = 0;
  auto record_row = [&](std::size_t steps) {
    const auto eval = evaluate_policy(cfg.mode, cfg.episode, cfg.eval_episodes, derive_seed(eval_seed, eval_index++),
                                      agent_policy(agent, scaler));
    MetricsRow row;
    row.env_steps = steps;
    row.success_rate = eval.success_rate();
    row.hipss_train_acc = accuracy_or_empty(model ? &*model : nullptr, dataset.train());
    row.hipss_val_acc = accuracy_or_empty(model ? &*model : nullptr, dataset.validation());
    const auto stats = buffer.stats();
    row.buffer_size = stats.size;
    row.relabel_fraction = stats.relabel_fraction();
    result.rows.push_back(row);
    if (csv.is_open()) csv << format_metrics_row(row) << '\n' << std::flush;
    if (options.on_row) options.on_row(row);
  };

  std::size_t steps = 0;
  record_row(0);
  while (steps < cfg.total_env_steps) {
    env.reset(env_rng());
    const bool warmstart = counters.episodes < cfg.warmstart_episodes;
    Episode episode;
    std::vector<std::vector<double>> states{scaler(env.observation().features)};
    std::vector<HindsightEvent> events;
    bool success = false;
    const auto tokens = pad_tokens(env.instruction().tokens);

    while (!env.done() && steps < cfg.total_env_steps) {
      Action action;
      if (warmstart) {
        action = scripted_expert_action(env.state(), 1 - env.goal_object(), env.config());
      } else if (steps < cfg.random_steps) {
        action = uniform_action(explore_rng);
      } else {
        action = agent.select_action(states.back(), tokens, true, explore_rng);
      }
      const auto r = env.step(action);
      ++steps;
      states.push_back(scaler(env.observation().features));
      Transition tr;
      tr.obs = states[states.size() - 2];
      tr.action = action;
      tr.reward = r.reward;
      tr.next_obs = states.back();
      tr.tokens = tokens;
      tr.done = r.success;
      tr.t = episode.size();
      if (traces.is_open()) traces << trace_line(tr.t, r.state, action, r.reward, tokens, r.event) << '\n';
      episode.push_back(std::move(tr));
      if (r.event) events.push_back(*r.event);
      success = r.success;
      if (steps % cfg.eval_every == 0) record_row(steps);
    }
    if (!env.done()) break;  // step budget ran out mid-episode
    ++counters.episodes;
    if (success) ++counters.successes;

    if (success && model) {
      dataset.add({subsample_states(states, cfg.hipss.state_stride, cfg.hipss.max_states), env.instruction().tokens});
      ++counters.hipss_samples;
    }

    std::vector<RelabelEvent> relabels;
    if (!success) {
      counters.events += events.size();
      for (const auto& ev : events) {
        if (cfg.method == Method::HEIR) {
          relabels.push_back({ev.t, pad_tokens(ev.instruction.tokens)});
        } else if (cfg.method == Method::HIPSS) {
          const std::span<const std::vector<double>> prefix(states.data(), ev.t + 2);
          const auto pred = maybe_relabel(*model, dataset, false, true,
                                          subsample_states(prefix, cfg.hipss.state_stride, cfg.hipss.max_states),
                                          vocab);
          if (!pred) continue;
          if (pred->malformed()) {
            ++counters.malformed_predictions;
            continue;
          }
          relabels.push_back({ev.t, pad_tokens(pred->tokens)});
        }
      }
    }
    counters.relabels += relabels.size();
    store_episode(buffer, episode, relabels, cfg.heir, relabel_rng);

    if (steps >= cfg.update_after && buffer.size() >= cfg.sac.batch) {
      const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(episode.size()) * cfg.updates_per_step));
      for (std::size_t u = 0; u < n; ++u) {
        const auto idx = buffer.sample_indices(cfg.sac.batch, replay_rng);
        agent.update(make_batch(buffer, idx), noise_rng);
        ++counters.agent_updates;
      }
    }
    if (model && !dataset.train().empty() && cfg.hipss_updates_per_episode > 0) {
      train_steps(*model, dataset.train(), *model_opt, hipss_rng, cfg.hipss_updates_per_episode);
      counters.hipss_updates += cfg.hipss_updates_per_episode;
    }
  }
  result.buffer = buffer.stats();

  if (options.out_dir) {
    const auto& dir = *options.out_dir;
    write_checkpoint(dir / "agent.ckpt", agent.to_checkpoint(run_metadata(cfg)));
    if (model) {
      Checkpoint ck{run_metadata(cfg), {}};
      ck.metadata["vocab_size"] = std::to_string(vocab.size());
      append_parameters(ck.params, model->params(), "hipss/");
      write_checkpoint(dir / "hipss.ckpt", ck);
      std::ofstream ds(dir / "hipss_dataset.jsonl");
      dataset.write(ds);
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    nlohmann::json summary = {
        {"episodes", counters.episodes},
        {"successes", counters.successes},
        {"hipss_samples", counters.hipss_samples},
        {"events", counters.events},
        {"relabels", counters.relabels},
        {"malformed_predictions", counters.malformed_predictions},
        {"agent_updates", counters.agent_updates},
        {"hipss_updates", counters.hipss_updates},
        {"buffer_size", result.buffer.size},
        {"buffer_relabeled", result.buffer.relabeled},
        {"reward_histogram",
         {{"0.0", result.buffer.reward_success}, {"-0.9", result.buffer.reward_reduced},
          {"-1.0", result.buffer.reward_failure}}},
        {"wall_clock_seconds", wall},
    };
    std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
  }
  return result;
}

}  // namespace hindsight
