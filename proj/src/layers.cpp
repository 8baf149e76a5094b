#include "hindsight/layers.hpp"

#include <cmath>

namespace hindsight {
namespace {

Tensor fan_in_uniform(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Tensor w = Tensor::zeros(in, out);
  for (auto& v : w.storage()) v = uniform(rng, -bound, bound);
  return w;
}

}  // namespace

Affine Affine::create(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  Affine a;
  a.in = in;
  a.out = out;
  a.weight = params.add(prefix + ".weight", fan_in_uniform(in, out, rng));
  a.bias = params.add(prefix + ".bias", Tensor::zeros(1, out));
  return a;
}

Var Affine::forward(Binding& bind, const Var& x) const {
  if (x.cols() != in) {
    throw DimensionError("affine expects " + std::to_string(in) + " input columns, got " + std::to_string(x.cols()));
  }
  return op::add_bias(op::matmul(x, bind(weight)), bind(bias));
}

Mlp Mlp::create(ParameterSet& params, const std::string& prefix, std::span<const std::size_t> widths, Rng& rng) {
  if (widths.size() < 2) throw DimensionError("mlp needs at least input and output widths");
  Mlp m;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    m.layers.push_back(Affine::create(params, prefix + "." + std::to_string(i), widths[i], widths[i + 1], rng));
  }
  return m;
}

Var Mlp::forward(Binding& bind, const Var& x) const {
  Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(bind, h);
    if (i + 1 < layers.size()) h = op::relu(h);
  }
  return h;
}

Embedding Embedding::create(ParameterSet& params, const std::string& prefix, std::size_t vocab, std::size_t dim,
                            Rng& rng) {
  Embedding e;
  e.vocab = vocab;
  e.dim = dim;
  Tensor t = Tensor::zeros(vocab, dim);
  for (auto& v : t.storage()) v = uniform(rng, -0.1, 0.1);
  e.table = params.add(prefix + ".table", std::move(t));
  return e;
}

Var Embedding::lookup(Binding& bind, std::span<const std::size_t> tokens) const {
  for (auto t : tokens) {
    if (t >= vocab) throw std::out_of_range("token " + std::to_string(t) + " outside vocabulary");
  }
  return op::gather_rows(bind(table), tokens);
}

Gru Gru::create(ParameterSet& params, const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim,
                std::size_t layers, Rng& rng) {
  if (layers == 0 || hidden_dim == 0 || input_dim == 0) throw DimensionError("gru sizes must be positive");
  Gru g;
  g.input_dim = input_dim;
  g.hidden_dim = hidden_dim;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto in = l == 0 ? input_dim : hidden_dim;
    const auto p = prefix + ".l" + std::to_string(l);
    g.w_input.push_back(params.add(p + ".w_input", fan_in_uniform(in, 3 * hidden_dim, rng)));
    g.w_hidden.push_back(params.add(p + ".w_hidden", fan_in_uniform(hidden_dim, 3 * hidden_dim, rng)));
    g.b_input.push_back(params.add(p + ".b_input", Tensor::zeros(1, 3 * hidden_dim)));
    g.b_hidden.push_back(params.add(p + ".b_hidden", Tensor::zeros(1, 3 * hidden_dim)));
  }
  return g;
}

std::vector<Var> Gru::zero_state(Graph& g, std::size_t batch) const {
  std::vector<Var> h;
  for (std::size_t l = 0; l < layers(); ++l) h.push_back(g.constant(Tensor::zeros(batch, hidden_dim)));
  return h;
}

std::vector<Var> Gru::step(Binding& bind, const Var& x, std::span<const Var> hidden) const {
  if (hidden.size() != layers()) throw DimensionError("gru state has wrong layer count");
  if (x.cols() != input_dim) {
    throw DimensionError("gru expects input width " + std::to_string(input_dim) + ", got " +
                         std::to_string(x.cols()));
  }
  const auto H = hidden_dim;
  std::vector<Var> next;
  Var input = x;
  for (std::size_t l = 0; l < layers(); ++l) {
    const Var& h = hidden[l];
    if (h.cols() != H || h.rows() != x.rows()) throw DimensionError("gru hidden state shape mismatch");
    Var gi = op::add_bias(op::matmul(input, bind(w_input[l])), bind(b_input[l]));
    Var gh = op::add_bias(op::matmul(h, bind(w_hidden[l])), bind(b_hidden[l]));
    Var r = op::sigmoid(op::add(op::slice_cols(gi, 0, H), op::slice_cols(gh, 0, H)));
    Var z = op::sigmoid(op::add(op::slice_cols(gi, H, 2 * H), op::slice_cols(gh, H, 2 * H)));
    Var n = op::tanh(op::add(op::slice_cols(gi, 2 * H, 3 * H), op::mul(r, op::slice_cols(gh, 2 * H, 3 * H))));
    // (1 - z) * n + z * h  ==  n + z * (h - n)
    Var h_new = op::add(n, op::mul(z, op::sub(h, n)));
    next.push_back(h_new);
    input = h_new;
  }
  return next;
}

std::vector<Var> Gru::run(Binding& bind, std::span<const Var> inputs, std::span<const std::vector<std::uint8_t>> valid,
                          std::vector<Var> hidden) const {
  if (!valid.empty() && valid.size() != inputs.size()) throw DimensionError("gru mask length mismatch");
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto stepped = step(bind, inputs[t], hidden);
    if (valid.empty()) {
      hidden = std::move(stepped);
      continue;
    }
    const auto& mask = valid[t];
    bool all = true, none = true;
    for (auto m : mask) {
      all = all && m;
      none = none && !m;
    }
    if (none) continue;
    for (std::size_t l = 0; l < layers(); ++l) {
      hidden[l] = all ? stepped[l] : op::blend_rows(stepped[l], hidden[l], mask);
    }
  }
  return hidden;
}

std::pair<Tensor, GruState> gru_step(const Gru& gru, const ParameterSet& params, const Tensor& x,
                                     const GruState& state) {
  if (state.hidden.rows() != gru.layers() || state.hidden.cols() != gru.hidden_dim) {
    throw DimensionError("gru state has shape " + shape_string(state.hidden.shape()));
  }
  Graph g;
  Binding bind(g, params);
  std::vector<Var> h;
  for (std::size_t l = 0; l < gru.layers(); ++l) {
    auto row = state.hidden.row_span(l);
    h.push_back(g.constant(Tensor::row({row.begin(), row.end()})));
  }
  Var xv = g.constant(x.rank() == 2 ? x : Tensor::row(x.storage()));
  auto next = gru.step(bind, xv, h);
  GruState out{Tensor::zeros(gru.layers(), gru.hidden_dim)};
  for (std::size_t l = 0; l < gru.layers(); ++l) {
    const auto& v = next[l].value();
    std::copy(v.data(), v.data() + gru.hidden_dim, out.hidden.row_span(l).begin());
  }
  Tensor top = next.back().value();
  return {std::move(top), std::move(out)};
}

}  // namespace hindsight
