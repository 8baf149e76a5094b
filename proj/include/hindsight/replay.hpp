#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "hindsight/env.hpp"
#include "hindsight/language.hpp"
#include "hindsight/random.hpp"

namespace hindsight {

struct Transition {
  std::vector<double> obs;       // non-linguistic features of s_t
  Action action{};
  double reward = -1.0;          // {0, -1}, or {0, -0.9} for relabeled copies
  std::vector<double> next_obs;  // non-linguistic features of s_{t+1}
  std::vector<Token> tokens;     // instruction, padded
  bool done = false;
  bool relabeled = false;
  std::size_t t = 0;             // index within its episode
};

using Episode = std::vector<Transition>;

enum class ReplayStrategy { Episode, Future, Final };

std::string_view to_string(ReplayStrategy s);
ReplayStrategy parse_replay_strategy(std::string_view text);

struct HeirConfig {
  ReplayStrategy strategy = ReplayStrategy::Future;
  std::size_t k = 4;
  double success_reward = 0.0;
  double reduced_penalty = -0.9;

  void validate() const;
};

// A hindsight signal at transition index t together with the instruction
// (expert-provided or predicted) that it licenses.
struct RelabelEvent {
  std::size_t t = 0;
  std::vector<Token> tokens;
};

// k indices drawn with replacement from [0, t].
std::vector<Transition> relabel_episode_strategy(std::span<const Transition> episode, const RelabelEvent& event,
                                                 const HeirConfig& cfg, Rng& rng);
// k indices drawn with replacement from [t, T).
std::vector<Transition> relabel_future_strategy(std::span<const Transition> episode, const RelabelEvent& event,
                                                const HeirConfig& cfg, Rng& rng);
// Every index in [max(0, t - k), t].
std::vector<Transition> relabel_final_strategy(std::span<const Transition> episode, const RelabelEvent& event,
                                               const HeirConfig& cfg);
std::vector<Transition> relabel(std::span<const Transition> episode, const RelabelEvent& event, const HeirConfig& cfg,
                                Rng& rng);

struct BufferStats {
  std::size_t size = 0;
  std::size_t relabeled = 0;
  std::size_t reward_success = 0;   // 0.0
  std::size_t reward_reduced = 0;   // -0.9
  std::size_t reward_failure = 0;   // -1.0

  double relabel_fraction() const { return size ? static_cast<double>(relabeled) / static_cast<double>(size) : 0.0; }
};

// Fixed-capacity ring buffer with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition tr);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }

  // Indices drawn uniformly with replacement.
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;
  BufferStats stats() const;

 private:
  void count(const Transition& tr, int sign);

  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
  BufferStats stats_;
};

// Stores the episode verbatim, then the relabeled copies for every event.
// Returns the number of relabeled copies added.
std::size_t store_episode(ReplayBuffer& buffer, std::span<const Transition> episode,
                          std::span<const RelabelEvent> events, const HeirConfig& cfg, Rng& rng);

}  // namespace hindsight
