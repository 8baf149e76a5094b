#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hindsight/tensor.hpp"

namespace hindsight {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool has_grad = false;
};

// Named, insertion-ordered collection of trainable tensors. Shapes are fixed
// once a parameter is added; only values, gradients and the step counter
// change afterwards.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor init);

  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;
  Parameter& at(std::string_view name) { return params_[index_of(name)]; }
  const Parameter& at(std::string_view name) const { return params_[index_of(name)]; }

  auto begin() noexcept { return params_.begin(); }
  auto end() noexcept { return params_.end(); }
  auto begin() const noexcept { return params_.begin(); }
  auto end() const noexcept { return params_.end(); }

  std::uint64_t step_count = 0;

  void zero_grad();
  bool all_finite() const;
  std::size_t scalar_count() const;

  // this <- this + tau * (source - this), parameter by parameter.
  void polyak_update(const ParameterSet& source, double tau);
  void copy_values_from(const ParameterSet& source);

 private:
  void check_compatible(const ParameterSet& other) const;

  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Graph;

// Handle to a value recorded on a Graph. Handles go stale when the graph is
// cleared (after backward or an explicit clear()).
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
  Graph& graph() const;
  std::uint32_t id() const { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::uint32_t id, std::uint64_t generation) : graph_(g), id_(id), generation_(generation) {}

  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
  std::uint64_t generation_ = 0;
};

// Reverse-mode tape. Operations append nodes in evaluation order; backward
// walks them in reverse and accumulates into parameter gradients.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::uint32_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaf that reads `value` in place. The tensor must outlive the graph's
  // current generation.
  Var constant_ref(const Tensor& value);
  Var parameter(Parameter& p);

  Var record(Tensor value, std::span<const Var> parents, BackwardFn backward);

  const Tensor& value(const Var& v) const;
  bool requires_grad(const Var& v) const;
  // Gradient buffer of a node, zero-allocated on first access.
  Tensor& grad(std::uint32_t id);
  const Tensor& value(std::uint32_t id) const;
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }

  void backward(const Var& loss);
  void clear();
  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  friend class Var;
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  void check(const Var& v) const;

  std::vector<Node> nodes_;
  std::uint64_t generation_ = 1;
};

// Binds a ParameterSet into a graph: trainable bindings produce parameter
// leaves, frozen bindings read the same values as constants.
class Binding {
 public:
  Binding(Graph& g, ParameterSet& params) : graph_(&g), params_(&params), trainable_(true) {}
  Binding(Graph& g, const ParameterSet& params) : graph_(&g), cparams_(&params), trainable_(false) {}

  Var operator()(std::size_t index);
  Graph& graph() const noexcept { return *graph_; }

 private:
  Graph* graph_;
  ParameterSet* params_ = nullptr;
  const ParameterSet* cparams_ = nullptr;
  bool trainable_;
  std::unordered_map<std::size_t, Var> cache_;
};

namespace op {

Var matmul(const Var& a, const Var& b);
Var add_bias(const Var& x, const Var& bias);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
// a * s where s is a 1x1 node.
Var mul_scalar(const Var& a, const Var& s);
// a[r, c] * col[r, 0]
Var mul_column(const Var& a, const Var& col);
Var neg(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var softplus(const Var& a);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
Var gather_rows(const Var& a, std::span<const std::size_t> rows);
// Row r of the result is a[r] where mask[r] is set, b[r] otherwise.
Var blend_rows(const Var& a, const Var& b, std::span<const std::uint8_t> mask);
Var row_sum(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
// Per-row -log softmax(logits[r])[targets[r]], shape [rows, 1].
Var softmax_cross_entropy(const Var& logits, std::span<const std::size_t> targets);

}  // namespace op

// Row-wise softmax of a plain tensor.
Tensor softmax_rows(const Tensor& logits);

}  // namespace hindsight
