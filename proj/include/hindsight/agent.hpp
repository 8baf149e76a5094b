#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hindsight/checkpoint.hpp"
#include "hindsight/env.hpp"
#include "hindsight/graph.hpp"
#include "hindsight/layers.hpp"
#include "hindsight/optim.hpp"
#include "hindsight/replay.hpp"

namespace hindsight {

enum class WordRepresentation { OneHot, LearnedEmbedding };

std::string_view to_string(WordRepresentation r);
WordRepresentation parse_word_representation(std::string_view text);

struct InstructionEncoderConfig {
  WordRepresentation representation = WordRepresentation::OneHot;
  std::size_t embedding_dim = 16;
  std::size_t hidden = 32;
  std::size_t layers = 1;
};

// GRU over per-token vectors (one-hot rows or a learned embedding table);
// PAD positions are skipped. Returns the top layer's final hidden state.
struct InstructionEncoder {
  WordRepresentation representation = WordRepresentation::OneHot;
  std::size_t vocab = 0;
  Embedding embedding;  // learned representation only
  Gru gru;

  static InstructionEncoder create(ParameterSet& params, const std::string& prefix, std::size_t vocab,
                                   const InstructionEncoderConfig& cfg, Rng& rng);
  std::size_t dim() const noexcept { return gru.hidden_dim; }

  // Features for each row of `tokens` ([rows, dim]). Duplicate rows are
  // encoded once and gathered.
  Var encode(Binding& bind, std::span<const std::vector<Token>> tokens) const;
};

// Unique token rows plus, for every input row, its index among them.
struct TokenGroups {
  std::vector<std::vector<Token>> unique;
  std::vector<std::size_t> index;
};
TokenGroups group_tokens(std::span<const std::vector<Token>> tokens);

// One-hot row for each token, [tokens, vocab].
Tensor one_hot_rows(std::span<const Token> tokens, std::size_t vocab);

struct PolicyNet {
  InstructionEncoder encoder;
  Mlp trunk;  // outputs mean and pre-activation log-std per action dimension
  double log_std_min = -5.0;
  double log_std_max = 2.0;

  // Returns (mean, log_std), each [rows, kActionDim].
  std::pair<Var, Var> forward(Binding& bind, const Var& features, std::span<const std::vector<Token>> tokens) const;
};

struct CriticNet {
  InstructionEncoder encoder;
  Mlp trunk;
  Var forward(Binding& bind, const Var& features, std::span<const std::vector<Token>> tokens,
              const Var& action) const;
};

struct SacConfig {
  double gamma = 0.99;
  double tau = 0.005;
  std::size_t batch = 256;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double alpha_lr = 3e-4;
  double initial_alpha = 1.0;
  bool auto_alpha = true;
  double target_entropy = -static_cast<double>(kActionDim);
  std::vector<std::size_t> hidden{256, 256};
  InstructionEncoderConfig encoder{};

  void validate() const;
};

struct Batch {
  Tensor obs;       // [B, F]
  Tensor actions;   // [B, A]
  Tensor rewards;   // [B, 1]
  Tensor next_obs;  // [B, F]
  Tensor not_done;  // [B, 1]
  std::vector<std::vector<Token>> tokens;
};

Batch make_batch(const ReplayBuffer& buffer, std::span<const std::size_t> indices);

struct SacLosses {
  double critic = 0.0;
  double actor = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  double entropy = 0.0;  // mean of -log pi over the batch
};

// Squashed-Gaussian sample and its log-density for given pre-squash
// statistics and standard-normal noise (all [rows, A]).
struct SquashedSample {
  Var action;
  Var log_prob;  // [rows, 1]
};
SquashedSample squashed_gaussian(Graph& g, const Var& mean, const Var& log_std, Tensor noise);

class SacAgent {
 public:
  SacAgent(std::size_t feature_dim, std::size_t vocab_size, const SacConfig& cfg, Rng& init_rng);

  const SacConfig& config() const noexcept { return cfg_; }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  std::size_t vocab_size() const noexcept { return vocab_; }
  double alpha() const;

  // Features must already be scaled. Stochastic actions draw noise from rng.
  Action select_action(std::span<const double> features, std::span<const Token> tokens, bool stochastic,
                       Rng& rng) const;
  std::vector<Action> select_actions(const Tensor& features, std::span<const std::vector<Token>> tokens,
                                     bool stochastic, Rng& rng) const;

  // r + gamma * (1 - done) * (min target Q(s', a') - alpha * log pi(a'|s')).
  // With `deterministic` the backup uses the squashed mean action and no
  // entropy term.
  Tensor critic_targets(const Batch& batch, Rng& rng, bool deterministic = false) const;
  // Mean over both critics of Q(s, a) for the batch, [B, 2].
  Tensor q_values(const Batch& batch) const;

  SacLosses update(const Batch& batch, Rng& rng);
  // Critic step only, toward the given targets (used by tests).
  double critic_step(const Batch& batch, const Tensor& targets);

  ParameterSet& actor_params() noexcept { return actor_params_; }
  ParameterSet& critic_params() noexcept { return critic_params_; }
  ParameterSet& target_params() noexcept { return target_params_; }
  const ParameterSet& actor_params() const noexcept { return actor_params_; }
  const ParameterSet& critic_params() const noexcept { return critic_params_; }
  const ParameterSet& target_params() const noexcept { return target_params_; }
  const PolicyNet& policy() const noexcept { return actor_; }

  Checkpoint to_checkpoint(const std::map<std::string, std::string>& metadata) const;
  // Restores parameters from a checkpoint written by an agent of identical
  // shape.
  void load(const Checkpoint& ckpt);

 private:
  SacConfig cfg_;
  std::size_t feature_dim_;
  std::size_t vocab_;
  ParameterSet actor_params_, critic_params_, target_params_, alpha_params_;
  PolicyNet actor_;
  CriticNet q1_, q2_;  // indices valid for both critic and target sets
  Adam actor_opt_, critic_opt_, alpha_opt_;
};

}  // namespace hindsight
