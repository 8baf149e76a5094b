#include "hindsight/agent.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace hindsight {

std::string_view to_string(WordRepresentation r) {
  return r == WordRepresentation::OneHot ? "one_hot" : "learned_embedding";
}

WordRepresentation parse_word_representation(std::string_view text) {
  if (text == "one_hot" || text == "onehot") return WordRepresentation::OneHot;
  if (text == "learned_embedding" || text == "learned" || text == "embedding") {
    return WordRepresentation::LearnedEmbedding;
  }
  throw std::invalid_argument("unknown word representation: " + std::string(text));
}

TokenGroups group_tokens(std::span<const std::vector<Token>> tokens) {
  TokenGroups g;
  std::map<std::vector<Token>, std::size_t> seen;
  g.index.reserve(tokens.size());
  for (const auto& row : tokens) {
    auto [it, inserted] = seen.emplace(row, g.unique.size());
    if (inserted) g.unique.push_back(row);
    g.index.push_back(it->second);
  }
  return g;
}

Tensor one_hot_rows(std::span<const Token> tokens, std::size_t vocab) {
  Tensor t = Tensor::zeros(tokens.size(), vocab);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= vocab) throw std::out_of_range("token " + std::to_string(tokens[i]) + " outside vocabulary");
    t.at(i, tokens[i]) = 1.0;
  }
  return t;
}

InstructionEncoder InstructionEncoder::create(ParameterSet& params, const std::string& prefix, std::size_t vocab,
                                              const InstructionEncoderConfig& cfg, Rng& rng) {
  InstructionEncoder e;
  e.representation = cfg.representation;
  e.vocab = vocab;
  std::size_t input = vocab;
  if (cfg.representation == WordRepresentation::LearnedEmbedding) {
    e.embedding = Embedding::create(params, prefix + ".words", vocab, cfg.embedding_dim, rng);
    input = cfg.embedding_dim;
  }
  e.gru = Gru::create(params, prefix + ".gru", input, cfg.hidden, cfg.layers, rng);
  return e;
}

Var InstructionEncoder::encode(Binding& bind, std::span<const std::vector<Token>> tokens) const {
  if (tokens.empty()) throw std::invalid_argument("encode_instruction: empty batch");
  for (const auto& row : tokens)
    for (auto t : row)
      if (t >= vocab) throw std::out_of_range("token " + std::to_string(t) + " outside vocabulary");
  const auto groups = group_tokens(tokens);
  const auto U = groups.unique.size();
  std::size_t longest = 0;
  for (const auto& row : groups.unique) longest = std::max(longest, row.size());

  Graph& g = bind.graph();
  std::vector<Var> inputs;
  std::vector<std::vector<std::uint8_t>> valid;
  for (std::size_t t = 0; t < longest; ++t) {
    std::vector<Token> column(U, kPad);
    std::vector<std::uint8_t> mask(U, 0);
    for (std::size_t u = 0; u < U; ++u) {
      if (t < groups.unique[u].size() && groups.unique[u][t] != kPad) {
        column[u] = groups.unique[u][t];
        mask[u] = 1;
      }
    }
    if (representation == WordRepresentation::OneHot) {
      inputs.push_back(g.constant(one_hot_rows(column, vocab)));
    } else {
      inputs.push_back(embedding.lookup(bind, column));
    }
    valid.push_back(std::move(mask));
  }
  auto h = gru.run(bind, inputs, valid, gru.zero_state(g, U));
  bool identity = U == tokens.size();
  for (std::size_t i = 0; identity && i < groups.index.size(); ++i) identity = groups.index[i] == i;
  return identity ? h.back() : op::gather_rows(h.back(), groups.index);
}

std::pair<Var, Var> PolicyNet::forward(Binding& bind, const Var& features,
                                       std::span<const std::vector<Token>> tokens) const {
  Var parts[] = {features, encoder.encode(bind, tokens)};
  Var out = trunk.forward(bind, op::concat_cols(parts));
  Var mean = op::slice_cols(out, 0, kActionDim);
  Var raw = op::slice_cols(out, kActionDim, 2 * kActionDim);
  const double half_range = 0.5 * (log_std_max - log_std_min);
  Var log_std = op::add_scalar(op::scale(op::tanh(raw), half_range), log_std_min + half_range);
  return {mean, log_std};
}

Var CriticNet::forward(Binding& bind, const Var& features, std::span<const std::vector<Token>> tokens,
                       const Var& action) const {
  Var parts[] = {features, encoder.encode(bind, tokens), action};
  return trunk.forward(bind, op::concat_cols(parts));
}

void SacConfig::validate() const {
  if (!(gamma > 0 && gamma < 1)) throw std::invalid_argument("gamma must be in (0, 1)");
  if (!(tau > 0 && tau <= 1)) throw std::invalid_argument("tau must be in (0, 1]");
  if (batch == 0) throw std::invalid_argument("batch size must be positive");
  if (!(actor_lr > 0 && critic_lr > 0 && alpha_lr > 0)) throw std::invalid_argument("learning rates must be positive");
  if (initial_alpha < 0 || (auto_alpha && !(initial_alpha > 0))) {
    throw std::invalid_argument("initial alpha must be positive when tuned, non-negative when fixed");
  }
  if (hidden.empty()) throw std::invalid_argument("at least one hidden layer required");
}

Batch make_batch(const ReplayBuffer& buffer, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("empty batch");
  const auto B = indices.size();
  const auto F = buffer[indices[0]].obs.size();
  Batch b;
  b.obs = Tensor::zeros(B, F);
  b.next_obs = Tensor::zeros(B, F);
  b.actions = Tensor::zeros(B, kActionDim);
  b.rewards = Tensor::zeros(B, 1);
  b.not_done = Tensor::zeros(B, 1);
  b.tokens.reserve(B);
  for (std::size_t i = 0; i < B; ++i) {
    const auto& tr = buffer[indices[i]];
    if (tr.obs.size() != F || tr.next_obs.size() != F) throw DimensionError("transition feature width mismatch");
    std::copy(tr.obs.begin(), tr.obs.end(), b.obs.row_span(i).begin());
    std::copy(tr.next_obs.begin(), tr.next_obs.end(), b.next_obs.row_span(i).begin());
    std::copy(tr.action.begin(), tr.action.end(), b.actions.row_span(i).begin());
    b.rewards[i] = tr.reward;
    b.not_done[i] = tr.done ? 0.0 : 1.0;
    b.tokens.push_back(tr.tokens);
  }
  return b;
}

SquashedSample squashed_gaussian(Graph& g, const Var& mean, const Var& log_std, Tensor noise) {
  const auto rows = noise.rows(), cols = noise.cols();
  // Gaussian part that does not depend on the parameters.
  Tensor base = Tensor::zeros(rows, 1);
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += -0.5 * noise.at(r, c) * noise.at(r, c) - 0.5 * log_two_pi;
    base[r] = acc;
  }
  Var u = op::add(mean, op::mul(op::exp(log_std), g.constant(std::move(noise))));
  // log(1 - tanh(u)^2) = 2 * (log 2 - u - softplus(-2u))
  Var log_jacobian =
      op::scale(op::add_scalar(op::neg(op::add(u, op::softplus(op::scale(u, -2.0)))), std::numbers::ln2), 2.0);
  Var log_prob = op::sub(op::sub(g.constant(std::move(base)), op::row_sum(log_std)), op::row_sum(log_jacobian));
  return {op::tanh(u), log_prob};
}

namespace {

Tensor normal_noise(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t = Tensor::zeros(rows, cols);
  for (auto& v : t.storage()) v = standard_normal(rng);
  return t;
}

CriticNet make_critic(ParameterSet& params, const std::string& prefix, std::size_t feature_dim, std::size_t vocab,
                      const SacConfig& cfg, Rng& rng) {
  CriticNet q;
  q.encoder = InstructionEncoder::create(params, prefix + ".instruction", vocab, cfg.encoder, rng);
  std::vector<std::size_t> widths{feature_dim + q.encoder.dim() + kActionDim};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(1);
  q.trunk = Mlp::create(params, prefix + ".trunk", widths, rng);
  return q;
}

}  // namespace

SacAgent::SacAgent(std::size_t feature_dim, std::size_t vocab_size, const SacConfig& cfg, Rng& init_rng)
    : cfg_(cfg), feature_dim_(feature_dim), vocab_(vocab_size) {
  cfg_.validate();
  actor_.encoder = InstructionEncoder::create(actor_params_, "actor.instruction", vocab_size, cfg_.encoder, init_rng);
  std::vector<std::size_t> widths{feature_dim + actor_.encoder.dim()};
  widths.insert(widths.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  widths.push_back(2 * kActionDim);
  actor_.trunk = Mlp::create(actor_params_, "actor.trunk", widths, init_rng);
  q1_ = make_critic(critic_params_, "q1", feature_dim, vocab_size, cfg_, init_rng);
  q2_ = make_critic(critic_params_, "q2", feature_dim, vocab_size, cfg_, init_rng);
  target_params_ = critic_params_;
  alpha_params_.add("log_alpha", Tensor::scalar(cfg_.auto_alpha ? std::log(cfg_.initial_alpha) : 0.0));
  actor_opt_ = Adam(actor_params_, {.lr = cfg_.actor_lr});
  critic_opt_ = Adam(critic_params_, {.lr = cfg_.critic_lr});
  alpha_opt_ = Adam(alpha_params_, {.lr = cfg_.alpha_lr});
}

double SacAgent::alpha() const {
  return cfg_.auto_alpha ? std::exp(alpha_params_[0].value[0]) : cfg_.initial_alpha;
}

std::vector<Action> SacAgent::select_actions(const Tensor& features, std::span<const std::vector<Token>> tokens,
                                             bool stochastic, Rng& rng) const {
  if (features.cols() != feature_dim_) throw DimensionError("select_action: feature width mismatch");
  if (features.rows() != tokens.size()) throw DimensionError("select_action: one token row per observation");
  Graph g;
  Binding bind(g, actor_params_);
  auto [mean, log_std] = actor_.forward(bind, g.constant_ref(features), tokens);
  const auto rows = features.rows();
  Tensor u = mean.value();
  if (stochastic) {
    const Tensor& ls = log_std.value();
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += std::exp(ls[i]) * standard_normal(rng);
  }
  std::vector<Action> out(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < kActionDim; ++c) out[r][c] = std::tanh(u.at(r, c));
  return out;
}

Action SacAgent::select_action(std::span<const double> features, std::span<const Token> tokens, bool stochastic,
                               Rng& rng) const {
  Tensor f = Tensor::row({features.begin(), features.end()});
  const std::vector<std::vector<Token>> t{{tokens.begin(), tokens.end()}};
  return select_actions(f, t, stochastic, rng)[0];
}

Tensor SacAgent::critic_targets(const Batch& batch, Rng& rng, bool deterministic) const {
  const auto B = batch.obs.rows();
  Graph g;
  Binding actor(g, actor_params_);
  Binding target(g, target_params_);
  Var next = g.constant_ref(batch.next_obs);
  auto [mean, log_std] = actor_.forward(actor, next, batch.tokens);
  Var action, log_prob;
  if (deterministic) {
    action = op::tanh(mean);
  } else {
    auto s = squashed_gaussian(g, mean, log_std, normal_noise(B, kActionDim, rng));
    action = s.action;
    log_prob = s.log_prob;
  }
  const Tensor& t1 = q1_.forward(target, next, batch.tokens, action).value();
  const Tensor& t2 = q2_.forward(target, next, batch.tokens, action).value();
  const double a = alpha();
  Tensor y = Tensor::zeros(B, 1);
  for (std::size_t i = 0; i < B; ++i) {
    double v = std::min(t1[i], t2[i]);
    if (!deterministic) v -= a * log_prob.value()[i];
    y[i] = batch.rewards[i] + cfg_.gamma * batch.not_done[i] * v;
  }
  return y;
}

Tensor SacAgent::q_values(const Batch& batch) const {
  Graph g;
  Binding bind(g, critic_params_);
  Var obs = g.constant_ref(batch.obs), act = g.constant_ref(batch.actions);
  Var parts[] = {q1_.forward(bind, obs, batch.tokens, act), q2_.forward(bind, obs, batch.tokens, act)};
  return op::concat_cols(parts).value();
}

double SacAgent::critic_step(const Batch& batch, const Tensor& targets) {
  Graph g;
  Binding bind(g, critic_params_);
  Var obs = g.constant_ref(batch.obs), act = g.constant_ref(batch.actions), y = g.constant_ref(targets);
  Var l1 = op::mean(op::square(op::sub(q1_.forward(bind, obs, batch.tokens, act), y)));
  Var l2 = op::mean(op::square(op::sub(q2_.forward(bind, obs, batch.tokens, act), y)));
  Var loss = op::add(l1, l2);
  const double value = loss.value().item();
  g.backward(loss);
  critic_opt_.step(critic_params_);
  return value;
}

SacLosses SacAgent::update(const Batch& batch, Rng& rng) {
  const auto B = batch.obs.rows();
  if (B == 0) throw std::invalid_argument("sac_update: empty batch");
  SacLosses out;
  out.critic = critic_step(batch, critic_targets(batch, rng));

  // Actor: reparameterized sample through frozen critics.
  Tensor log_prob_values;
  {
    Graph g;
    Binding actor(g, actor_params_);
    Binding critics(g, static_cast<const ParameterSet&>(critic_params_));
    Var obs = g.constant_ref(batch.obs);
    auto [mean, log_std] = actor_.forward(actor, obs, batch.tokens);
    auto s = squashed_gaussian(g, mean, log_std, normal_noise(B, kActionDim, rng));
    Var q = op::minimum(q1_.forward(critics, obs, batch.tokens, s.action),
                        q2_.forward(critics, obs, batch.tokens, s.action));
    Var loss = op::mean(op::sub(op::scale(s.log_prob, alpha()), q));
    out.actor = loss.value().item();
    log_prob_values = s.log_prob.value();
    g.backward(loss);
    actor_opt_.step(actor_params_);
  }
  double mean_log_prob = 0.0;
  for (double v : log_prob_values.values()) mean_log_prob += v;
  mean_log_prob /= static_cast<double>(B);
  out.entropy = -mean_log_prob;

  if (cfg_.auto_alpha) {
    // d/d(log alpha) of -log_alpha * (log pi + target), averaged.
    Graph g;
    Binding bind(g, alpha_params_);
    Var log_alpha = bind(0);
    Var loss = op::scale(log_alpha, -(mean_log_prob + cfg_.target_entropy));
    out.alpha_loss = loss.value().item();
    g.backward(loss);
    alpha_opt_.step(alpha_params_);
  }
  out.alpha = alpha();
  target_params_.polyak_update(critic_params_, cfg_.tau);
  return out;
}

Checkpoint SacAgent::to_checkpoint(const std::map<std::string, std::string>& metadata) const {
  Checkpoint ck;
  ck.metadata = metadata;
  ck.metadata["feature_dim"] = std::to_string(feature_dim_);
  ck.metadata["vocab_size"] = std::to_string(vocab_);
  ck.metadata["representation"] = std::string(to_string(cfg_.encoder.representation));
  append_parameters(ck.params, actor_params_, "actor/");
  append_parameters(ck.params, critic_params_, "critic/");
  append_parameters(ck.params, target_params_, "target/");
  append_parameters(ck.params, alpha_params_, "alpha/");
  return ck;
}

void SacAgent::load(const Checkpoint& ckpt) {
  auto meta = [&](const std::string& key) {
    auto it = ckpt.metadata.find(key);
    return it == ckpt.metadata.end() ? std::string() : it->second;
  };
  if (meta("feature_dim") != std::to_string(feature_dim_) || meta("vocab_size") != std::to_string(vocab_)) {
    throw CheckpointError("checkpoint was written for a different observation or vocabulary size");
  }
  load_parameters(actor_params_, ckpt.params, "actor/");
  load_parameters(critic_params_, ckpt.params, "critic/");
  load_parameters(target_params_, ckpt.params, "target/");
  load_parameters(alpha_params_, ckpt.params, "alpha/");
}

}  // namespace hindsight
