#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "hindsight/graph.hpp"
#include "hindsight/language.hpp"
#include "hindsight/layers.hpp"
#include "hindsight/optim.hpp"
#include "hindsight/random.hpp"

namespace hindsight {

using StateSequence = std::vector<std::vector<double>>;

struct HipssConfig {
  std::size_t hidden = 64;
  std::size_t layers = 1;
  std::size_t embedding_dim = 16;
  double lr = 1e-3;
  std::size_t batch = 32;
  std::size_t warmup = 50;           // training samples needed before predictions are used
  std::size_t state_stride = 2;
  std::size_t max_states = 32;
  std::size_t validation_period = 6; // one in every `period` successful episodes is held out

  void validate() const;
};

struct HipssSample {
  StateSequence states;       // scaled non-linguistic features, subsampled
  std::vector<Token> tokens;  // target words ending with EOS, no padding
};

// Keeps every `stride`-th state starting at s_0, always the final state,
// then the last `max_states` of those.
StateSequence subsample_states(std::span<const std::vector<double>> states, std::size_t stride,
                               std::size_t max_states);

// Training/validation split decided per episode as it is stored: one in
// every `period` samples goes to validation, starting at a random phase.
class HipssDataset {
 public:
  HipssDataset(std::size_t period, Rng& split_rng);

  // Returns true when the sample went to the validation split.
  bool add(HipssSample sample);
  const std::vector<HipssSample>& train() const noexcept { return train_; }
  const std::vector<HipssSample>& validation() const noexcept { return validation_; }

  // One JSON object per line: {"split", "states", "tokens"}.
  void write(std::ostream& out) const;

 private:
  std::size_t period_;
  std::size_t phase_;
  std::size_t seen_ = 0;
  std::vector<HipssSample> train_, validation_;
};

struct TeacherForcedResult {
  Tensor probabilities;           // [positions, vocab] for a single sample
  std::vector<double> target_probability;
  double loss = 0.0;              // sum of position-wise cross-entropies
};

struct Prediction {
  std::vector<Token> tokens;      // up to and including EOS, at most kMaxInstructionTokens
  std::optional<Instruction> instruction;
  bool malformed() const noexcept { return !instruction.has_value(); }
};

// GRU encoder over state vectors; GRU decoder over word embeddings that
// starts from the encoder's final hidden state; affine head over words.
class Seq2Seq {
 public:
  Seq2Seq(std::size_t state_dim, std::size_t vocab_size, const HipssConfig& cfg, Rng& rng);

  std::size_t state_dim() const noexcept { return encoder_.input_dim; }
  std::size_t vocab_size() const noexcept { return vocab_; }
  const HipssConfig& config() const noexcept { return cfg_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  // Per-layer final hidden states for a batch of sequences of any length.
  std::vector<Var> encode(Binding& bind, std::span<const StateSequence* const> batch) const;
  // Logits per target position, each [batch, vocab], under teacher forcing.
  std::vector<Var> decode_logits(Binding& bind, std::vector<Var> context,
                                 std::span<const std::vector<Token>* const> targets) const;
  // Mean over the batch of the summed position-wise cross-entropy.
  Var loss(Binding& bind, std::span<const HipssSample* const> batch) const;

  // Context of a single sequence, [layers, hidden].
  Tensor context(const StateSequence& states) const;
  TeacherForcedResult teacher_forced(const StateSequence& states, std::span<const Token> target) const;
  Prediction predict(const StateSequence& states, const Vocabulary& vocab) const;

 private:
  void check_tokens(std::span<const Token> tokens) const;

  HipssConfig cfg_;
  std::size_t vocab_;
  ParameterSet params_;
  Gru encoder_;
  Embedding embedding_;
  Gru decoder_;
  Affine head_;
};

// One pass over the samples in shuffled minibatches. Returns the mean loss.
double train_epoch(Seq2Seq& model, std::span<const HipssSample> samples, Adam& optimizer, Rng& rng);
// Minibatch updates on uniformly drawn samples. Returns the mean loss.
double train_steps(Seq2Seq& model, std::span<const HipssSample> samples, Adam& optimizer, Rng& rng,
                   std::size_t steps);

// Fraction of target positions (EOS included) where the teacher-forced
// argmax equals the target.
double word_accuracy(const Seq2Seq& model, std::span<const HipssSample> samples);

// Predicted instruction for the state prefix of a failed episode with a
// wrong-object event, once the training split has reached the warmup size.
// Successful episodes and failures without an event are never relabeled.
std::optional<Prediction> maybe_relabel(const Seq2Seq& model, const HipssDataset& dataset, bool episode_succeeded,
                                        bool has_event, const StateSequence& states, const Vocabulary& vocab);

}  // namespace hindsight
