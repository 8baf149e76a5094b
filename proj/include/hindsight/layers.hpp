#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hindsight/graph.hpp"
#include "hindsight/random.hpp"

namespace hindsight {

// y = x W + b. Weights are [in, out], bias [1, out].
struct Affine {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t in = 0;
  std::size_t out = 0;

  static Affine create(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);
  Var forward(Binding& bind, const Var& x) const;
};

// Affine layers with ReLU between them (none after the last).
struct Mlp {
  std::vector<Affine> layers;

  static Mlp create(ParameterSet& params, const std::string& prefix, std::span<const std::size_t> widths, Rng& rng);
  Var forward(Binding& bind, const Var& x) const;
};

struct Embedding {
  std::size_t table = 0;
  std::size_t vocab = 0;
  std::size_t dim = 0;

  static Embedding create(ParameterSet& params, const std::string& prefix, std::size_t vocab, std::size_t dim,
                          Rng& rng);
  Var lookup(Binding& bind, std::span<const std::size_t> tokens) const;
};

// Stacked GRU cells:
//   r = sigmoid(x W_ir + b_ir + h W_hr + b_hr)
//   z = sigmoid(x W_iz + b_iz + h W_hz + b_hz)
//   n = tanh(x W_in + b_in + r * (h W_hn + b_hn))
//   h' = (1 - z) * n + z * h
// Gate weights are fused column-wise in (r, z, n) order.
struct Gru {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::vector<std::size_t> w_input, w_hidden, b_input, b_hidden;

  static Gru create(ParameterSet& params, const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim,
                    std::size_t layers, Rng& rng);

  std::size_t layers() const noexcept { return w_input.size(); }

  std::vector<Var> zero_state(Graph& g, std::size_t batch) const;
  // One time step for every layer; returns the new per-layer hidden states.
  std::vector<Var> step(Binding& bind, const Var& x, std::span<const Var> hidden) const;
  // Runs a padded batch. inputs[t] is [batch, input_dim]; rows whose
  // valid[t][row] is 0 keep their previous hidden state at step t.
  std::vector<Var> run(Binding& bind, std::span<const Var> inputs, std::span<const std::vector<std::uint8_t>> valid,
                       std::vector<Var> hidden) const;
};

struct GruState {
  Tensor hidden;  // [layers, hidden_dim]

  static GruState zeros(const Gru& gru) { return {Tensor::zeros(gru.layers(), gru.hidden_dim)}; }
};

// Single-sequence step outside any training graph: returns the top-layer
// output and the updated state.
std::pair<Tensor, GruState> gru_step(const Gru& gru, const ParameterSet& params, const Tensor& x,
                                     const GruState& state);

}  // namespace hindsight
