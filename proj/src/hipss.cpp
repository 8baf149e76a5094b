#include "hindsight/hipss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace hindsight {

void HipssConfig::validate() const {
  if (hidden == 0 || layers == 0 || embedding_dim == 0) throw std::invalid_argument("hipss sizes must be positive");
  if (batch == 0) throw std::invalid_argument("hipss batch must be positive");
  if (state_stride == 0 || max_states == 0) throw std::invalid_argument("hipss subsampling must be positive");
  if (validation_period < 2) throw std::invalid_argument("hipss validation period must be >= 2");
  if (!(lr > 0)) throw std::invalid_argument("hipss learning rate must be positive");
}

StateSequence subsample_states(std::span<const std::vector<double>> states, std::size_t stride,
                               std::size_t max_states) {
  if (states.empty()) throw std::invalid_argument("cannot subsample an empty state sequence");
  StateSequence out;
  for (std::size_t i = 0; i < states.size(); i += stride) out.push_back(states[i]);
  if ((states.size() - 1) % stride != 0) out.push_back(states.back());
  if (out.size() > max_states) out.erase(out.begin(), out.end() - static_cast<std::ptrdiff_t>(max_states));
  return out;
}

HipssDataset::HipssDataset(std::size_t period, Rng& split_rng) : period_(period) {
  if (period < 2) throw std::invalid_argument("validation period must be >= 2");
  phase_ = uniform_index(split_rng, 0, period - 1);
}

bool HipssDataset::add(HipssSample sample) {
  const bool held_out = seen_ % period_ == phase_;
  ++seen_;
  (held_out ? validation_ : train_).push_back(std::move(sample));
  return held_out;
}

void HipssDataset::write(std::ostream& out) const {
  auto emit = [&out](const std::vector<HipssSample>& split, const char* name) {
    for (const auto& s : split) {
      nlohmann::json j;
      j["split"] = name;
      j["states"] = s.states;
      j["tokens"] = s.tokens;
      out << j.dump() << '\n';
    }
  };
  emit(train_, "train");
  emit(validation_, "validation");
}

Seq2Seq::Seq2Seq(std::size_t state_dim, std::size_t vocab_size, const HipssConfig& cfg, Rng& rng)
    : cfg_(cfg), vocab_(vocab_size) {
  cfg_.validate();
  encoder_ = Gru::create(params_, "encoder", state_dim, cfg_.hidden, cfg_.layers, rng);
  embedding_ = Embedding::create(params_, "words", vocab_size, cfg_.embedding_dim, rng);
  decoder_ = Gru::create(params_, "decoder", cfg_.embedding_dim, cfg_.hidden, cfg_.layers, rng);
  head_ = Affine::create(params_, "head", cfg_.hidden, vocab_size, rng);
}

void Seq2Seq::check_tokens(std::span<const Token> tokens) const {
  for (auto t : tokens)
    if (t >= vocab_) throw std::out_of_range("token " + std::to_string(t) + " outside vocabulary");
}

std::vector<Var> Seq2Seq::encode(Binding& bind, std::span<const StateSequence* const> batch) const {
  if (batch.empty()) throw std::invalid_argument("encode: empty batch");
  std::size_t longest = 0;
  for (const auto* seq : batch) {
    if (seq->empty()) throw std::invalid_argument("encode: empty state sequence");
    for (const auto& s : *seq)
      if (s.size() != state_dim()) throw DimensionError("encode: state has wrong width");
    longest = std::max(longest, seq->size());
  }
  const auto B = batch.size(), D = state_dim();
  Graph& g = bind.graph();
  std::vector<Var> inputs;
  std::vector<std::vector<std::uint8_t>> valid;
  for (std::size_t t = 0; t < longest; ++t) {
    Tensor x = Tensor::zeros(B, D);
    std::vector<std::uint8_t> mask(B, 0);
    for (std::size_t b = 0; b < B; ++b) {
      if (t >= batch[b]->size()) continue;
      std::copy((*batch[b])[t].begin(), (*batch[b])[t].end(), x.data() + b * D);
      mask[b] = 1;
    }
    inputs.push_back(g.constant(std::move(x)));
    valid.push_back(std::move(mask));
  }
  return encoder_.run(bind, inputs, valid, encoder_.zero_state(g, B));
}

std::vector<Var> Seq2Seq::decode_logits(Binding& bind, std::vector<Var> context,
                                        std::span<const std::vector<Token>* const> targets) const {
  std::size_t longest = 0;
  for (const auto* t : targets) {
    if (t->empty()) throw std::invalid_argument("decode: empty target");
    check_tokens(*t);
    longest = std::max(longest, t->size());
  }
  const auto B = targets.size();
  std::vector<Var> logits;
  std::vector<Var> hidden = std::move(context);
  std::vector<Token> prev(B, kBos);
  for (std::size_t i = 0; i < longest; ++i) {
    hidden = decoder_.step(bind, embedding_.lookup(bind, prev), hidden);
    logits.push_back(head_.forward(bind, hidden.back()));
    for (std::size_t b = 0; b < B; ++b) prev[b] = i < targets[b]->size() ? (*targets[b])[i] : kPad;
  }
  return logits;
}

Var Seq2Seq::loss(Binding& bind, std::span<const HipssSample* const> batch) const {
  std::vector<const StateSequence*> states;
  std::vector<const std::vector<Token>*> targets;
  for (const auto* s : batch) {
    states.push_back(&s->states);
    targets.push_back(&s->tokens);
  }
  auto logits = decode_logits(bind, encode(bind, states), targets);
  Graph& g = bind.graph();
  const auto B = batch.size();
  Var total;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    std::vector<std::size_t> target(B, kPad);
    Tensor mask = Tensor::zeros(B, 1);
    bool partial = false;
    for (std::size_t b = 0; b < B; ++b) {
      if (i < targets[b]->size()) {
        target[b] = (*targets[b])[i];
        mask[b] = 1.0;
      } else {
        partial = true;
      }
    }
    Var ce = op::softmax_cross_entropy(logits[i], target);
    if (partial) ce = op::mul_column(ce, g.constant(std::move(mask)));
    Var s = op::sum(ce);
    total = total.valid() ? op::add(total, s) : s;
  }
  return op::scale(total, 1.0 / static_cast<double>(B));
}

Tensor Seq2Seq::context(const StateSequence& states) const {
  Graph g;
  Binding bind(g, static_cast<const ParameterSet&>(params_));
  const StateSequence* one[] = {&states};
  auto h = encode(bind, one);
  Tensor out = Tensor::zeros(cfg_.layers, cfg_.hidden);
  for (std::size_t l = 0; l < h.size(); ++l) std::copy_n(h[l].value().data(), cfg_.hidden, out.row_span(l).begin());
  return out;
}

TeacherForcedResult Seq2Seq::teacher_forced(const StateSequence& states, std::span<const Token> target) const {
  Graph g;
  Binding bind(g, static_cast<const ParameterSet&>(params_));
  const StateSequence* one[] = {&states};
  const std::vector<Token> tokens(target.begin(), target.end());
  const std::vector<Token>* tg[] = {&tokens};
  auto logits = decode_logits(bind, encode(bind, one), tg);
  TeacherForcedResult r;
  r.probabilities = Tensor::zeros(logits.size(), vocab_);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    Tensor p = softmax_rows(logits[i].value());
    std::copy_n(p.data(), vocab_, r.probabilities.row_span(i).begin());
    r.target_probability.push_back(p[tokens[i]]);
    const std::size_t t[] = {tokens[i]};
    r.loss += op::softmax_cross_entropy(logits[i], t).value().item();
  }
  return r;
}

Prediction Seq2Seq::predict(const StateSequence& states, const Vocabulary& vocab) const {
  if (vocab.size() != vocab_) throw DimensionError("predict: vocabulary size does not match the model");
  Graph g;
  Binding bind(g, static_cast<const ParameterSet&>(params_));
  const StateSequence* one[] = {&states};
  auto hidden = encode(bind, one);
  Prediction p;
  Token prev = kBos;
  while (p.tokens.size() < kMaxInstructionTokens) {
    const Token in[] = {prev};
    hidden = decoder_.step(bind, embedding_.lookup(bind, in), hidden);
    const Tensor& logits = head_.forward(bind, hidden.back()).value();
    const auto best = static_cast<Token>(std::max_element(logits.data(), logits.data() + vocab_) - logits.data());
    p.tokens.push_back(best);
    if (best == kEos) break;
    prev = best;
  }
  p.instruction = parse_instruction(vocab, p.tokens);
  if (p.instruction && p.tokens.size() != kInstructionTokens) p.instruction.reset();
  return p;
}

namespace {

double update(Seq2Seq& model, std::span<const HipssSample* const> batch, Adam& optimizer) {
  Graph g;
  Binding bind(g, model.params());
  Var l = model.loss(bind, batch);
  const double value = l.value().item();
  g.backward(l);
  optimizer.step(model.params());
  return value;
}

}  // namespace

double train_epoch(Seq2Seq& model, std::span<const HipssSample> samples, Adam& optimizer, Rng& rng) {
  if (samples.empty()) throw std::invalid_argument("train_epoch: empty dataset");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, 0, i - 1)]);
  const auto B = model.config().batch;
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += B) {
    std::vector<const HipssSample*> batch;
    for (std::size_t i = start; i < std::min(order.size(), start + B); ++i) batch.push_back(&samples[order[i]]);
    total += update(model, batch, optimizer);
    ++batches;
  }
  return total / static_cast<double>(batches);
}

double train_steps(Seq2Seq& model, std::span<const HipssSample> samples, Adam& optimizer, Rng& rng,
                   std::size_t steps) {
  if (samples.empty()) throw std::invalid_argument("train_steps: empty dataset");
  const auto B = std::min(model.config().batch, samples.size());
  double total = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    std::vector<const HipssSample*> batch;
    for (std::size_t i = 0; i < B; ++i) batch.push_back(&samples[uniform_index(rng, 0, samples.size() - 1)]);
    total += update(model, batch, optimizer);
  }
  return steps ? total / static_cast<double>(steps) : 0.0;
}

double word_accuracy(const Seq2Seq& model, std::span<const HipssSample> samples) {
  if (samples.empty()) throw std::invalid_argument("word_accuracy: empty dataset");
  std::size_t correct = 0, total = 0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    Graph g;
    Binding bind(g, static_cast<const ParameterSet&>(model.params()));
    std::vector<const StateSequence*> states;
    std::vector<const std::vector<Token>*> targets;
    for (std::size_t i = start; i < std::min(samples.size(), start + kChunk); ++i) {
      states.push_back(&samples[i].states);
      targets.push_back(&samples[i].tokens);
    }
    auto logits = model.decode_logits(bind, model.encode(bind, states), targets);
    for (std::size_t pos = 0; pos < logits.size(); ++pos) {
      const Tensor& l = logits[pos].value();
      for (std::size_t b = 0; b < targets.size(); ++b) {
        const auto& tg = *targets[b];
        if (pos >= tg.size() || tg[pos] == kPad) continue;
        auto row = l.row_span(b);
        const auto best = static_cast<Token>(std::max_element(row.begin(), row.end()) - row.begin());
        correct += best == tg[pos];
        ++total;
      }
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

std::optional<Prediction> maybe_relabel(const Seq2Seq& model, const HipssDataset& dataset, bool episode_succeeded,
                                        bool has_event, const StateSequence& states, const Vocabulary& vocab) {
  if (episode_succeeded || !has_event) return std::nullopt;
  if (dataset.train().size() < model.config().warmup) return std::nullopt;
  return model.predict(states, vocab);
}

}  // namespace hindsight
