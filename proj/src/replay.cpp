#include "hindsight/replay.hpp"

#include <stdexcept>
#include <string>

namespace hindsight {
namespace {

Transition relabeled_copy(const Transition& original, std::size_t index, const RelabelEvent& event,
                          const HeirConfig& cfg) {
  Transition copy = original;
  copy.tokens = pad_tokens(event.tokens);
  const bool at_event = index == event.t;
  copy.reward = at_event ? cfg.success_reward : cfg.reduced_penalty;
  copy.done = at_event;
  copy.relabeled = true;
  return copy;
}

void check_event(std::span<const Transition> episode, const RelabelEvent& event) {
  if (episode.empty()) throw std::invalid_argument("cannot relabel an empty episode");
  if (event.t >= episode.size()) {
    throw std::out_of_range("hindsight event at " + std::to_string(event.t) + " outside episode of length " +
                            std::to_string(episode.size()));
  }
}

}  // namespace

std::string_view to_string(ReplayStrategy s) {
  switch (s) {
    case ReplayStrategy::Episode: return "episode";
    case ReplayStrategy::Future: return "future";
    case ReplayStrategy::Final: return "final";
  }
  return "?";
}

ReplayStrategy parse_replay_strategy(std::string_view text) {
  for (auto s : {ReplayStrategy::Episode, ReplayStrategy::Future, ReplayStrategy::Final})
    if (to_string(s) == text) return s;
  throw std::invalid_argument("unknown replay strategy: " + std::string(text));
}

void HeirConfig::validate() const {
  if (k < 1) throw std::invalid_argument("relabel count k must be >= 1");
}

std::vector<Transition> relabel_episode_strategy(std::span<const Transition> episode, const RelabelEvent& event,
                                                 const HeirConfig& cfg, Rng& rng) {
  check_event(episode, event);
  cfg.validate();
  std::vector<Transition> out;
  out.reserve(cfg.k);
  for (std::size_t n = 0; n < cfg.k; ++n) {
    const auto i = uniform_index(rng, 0, event.t);
    out.push_back(relabeled_copy(episode[i], i, event, cfg));
  }
  return out;
}

std::vector<Transition> relabel_future_strategy(std::span<const Transition> episode, const RelabelEvent& event,
                                                const HeirConfig& cfg, Rng& rng) {
  check_event(episode, event);
  cfg.validate();
  std::vector<Transition> out;
  out.reserve(cfg.k);
  for (std::size_t n = 0; n < cfg.k; ++n) {
    const auto i = uniform_index(rng, event.t, episode.size() - 1);
    out.push_back(relabeled_copy(episode[i], i, event, cfg));
  }
  return out;
}

std::vector<Transition> relabel_final_strategy(std::span<const Transition> episode, const RelabelEvent& event,
                                               const HeirConfig& cfg) {
  check_event(episode, event);
  cfg.validate();
  const auto first = event.t >= cfg.k ? event.t - cfg.k : 0;
  std::vector<Transition> out;
  for (auto i = first; i <= event.t; ++i) out.push_back(relabeled_copy(episode[i], i, event, cfg));
  return out;
}

std::vector<Transition> relabel(std::span<const Transition> episode, const RelabelEvent& event, const HeirConfig& cfg,
                                Rng& rng) {
  switch (cfg.strategy) {
    case ReplayStrategy::Episode: return relabel_episode_strategy(episode, event, cfg, rng);
    case ReplayStrategy::Future: return relabel_future_strategy(episode, event, cfg, rng);
    case ReplayStrategy::Final: return relabel_final_strategy(episode, event, cfg);
  }
  return {};
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::count(const Transition& tr, int sign) {
  auto bump = [sign](std::size_t& c) { c = sign > 0 ? c + 1 : c - 1; };
  bump(stats_.size);
  if (tr.relabeled) bump(stats_.relabeled);
  if (tr.reward == 0.0) {
    bump(stats_.reward_success);
  } else if (tr.reward == -1.0) {
    bump(stats_.reward_failure);
  } else {
    bump(stats_.reward_reduced);
  }
}

void ReplayBuffer::push(Transition tr) {
  count(tr, +1);
  if (items_.size() < capacity_) {
    items_.push_back(std::move(tr));
    return;
  }
  count(items_[next_], -1);
  items_[next_] = std::move(tr);
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
  if (items_.empty()) throw std::logic_error("sampling from an empty replay buffer");
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = uniform_index(rng, 0, items_.size() - 1);
  return idx;
}

BufferStats ReplayBuffer::stats() const { return stats_; }

std::size_t store_episode(ReplayBuffer& buffer, std::span<const Transition> episode,
                          std::span<const RelabelEvent> events, const HeirConfig& cfg, Rng& rng) {
  for (const auto& tr : episode) buffer.push(tr);
  std::size_t added = 0;
  for (const auto& ev : events) {
    for (auto& copy : relabel(episode, ev, cfg, rng)) {
      buffer.push(std::move(copy));
      ++added;
    }
  }
  return added;
}

}  // namespace hindsight
