#include "hindsight/graph.hpp"

#include <algorithm>
#include <cmath>

#include "hindsight/kernels.hpp"

namespace hindsight {

// ---------------------------------------------------------------- params

std::size_t ParameterSet::add(std::string name, Tensor init) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  const auto idx = params_.size();
  index_.emplace(name, idx);
  Parameter p;
  p.name = std::move(name);
  p.grad = Tensor(init.shape());
  p.value = std::move(init);
  params_.push_back(std::move(p));
  return idx;
}

std::size_t ParameterSet::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("no parameter named " + std::string(name));
  return it->second;
}

bool ParameterSet::contains(std::string_view name) const { return index_.contains(std::string(name)); }

void ParameterSet::zero_grad() {
  for (auto& p : params_) {
    p.grad.fill(0.0);
    p.has_grad = false;
  }
}

bool ParameterSet::all_finite() const {
  return std::all_of(params_.begin(), params_.end(), [](const Parameter& p) { return p.value.all_finite(); });
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterSet::check_compatible(const ParameterSet& other) const {
  if (other.size() != size()) throw DimensionError("parameter sets differ in size");
  for (std::size_t i = 0; i < size(); ++i) {
    if (!params_[i].value.same_shape(other.params_[i].value) || params_[i].name != other.params_[i].name) {
      throw DimensionError("parameter mismatch at " + params_[i].name);
    }
  }
}

void ParameterSet::polyak_update(const ParameterSet& source, double tau) {
  check_compatible(source);
  for (std::size_t i = 0; i < size(); ++i) {
    auto dst = params_[i].value.values();
    auto src = source.params_[i].value.values();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += tau * (src[j] - dst[j]);
  }
}

void ParameterSet::copy_values_from(const ParameterSet& source) {
  check_compatible(source);
  for (std::size_t i = 0; i < size(); ++i) params_[i].value = source.params_[i].value;
}

// ---------------------------------------------------------------- graph

const Tensor& Var::value() const {
  if (!graph_) throw GraphError("use of an empty Var");
  return graph_->value(*this);
}

bool Var::requires_grad() const {
  if (!graph_) throw GraphError("use of an empty Var");
  return graph_->requires_grad(*this);
}

Graph& Var::graph() const {
  if (!graph_) throw GraphError("use of an empty Var");
  return *graph_;
}

void Graph::check(const Var& v) const {
  if (v.graph_ != this) throw GraphError("Var belongs to a different graph");
  if (v.generation_ != generation_ || v.id_ >= nodes_.size()) {
    throw GraphError("Var refers to a detached graph (already back-propagated or cleared)");
  }
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), generation_);
}

Var Graph::constant_ref(const Tensor& value) {
  Node n;
  n.external = &value;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), generation_);
}

Var Graph::parameter(Parameter& p) {
  Node n;
  n.external = &p.value;
  n.requires_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), generation_);
}

Var Graph::record(Tensor value, std::span<const Var> parents, BackwardFn backward) {
  bool needs = false;
  for (const auto& p : parents) {
    check(p);
    needs = needs || nodes_[p.id_].requires_grad;
  }
  if (!value.all_finite()) throw NumericError("non-finite value produced in forward pass");
  Node n;
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), generation_);
}

const Tensor& Graph::value(const Var& v) const {
  check(v);
  return value(v.id_);
}

const Tensor& Graph::value(std::uint32_t id) const {
  const auto& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

bool Graph::requires_grad(const Var& v) const {
  check(v);
  return nodes_[v.id_].requires_grad;
}

Tensor& Graph::grad(std::uint32_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(value(id).shape());
  return n.grad;
}

void Graph::backward(const Var& loss) {
  check(loss);
  if (value(loss.id_).size() != 1) throw DimensionError("backward needs a scalar loss");
  if (!nodes_[loss.id_].requires_grad) throw GraphError("loss does not depend on any trainable parameter");
  grad(loss.id_)[0] = 1.0;
  for (std::int64_t i = loss.id_; i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, static_cast<std::uint32_t>(i));
  }
  for (auto& n : nodes_) {
    if (n.param && !n.grad.empty()) {
      auto dst = n.param->grad.values();
      auto src = n.grad.values();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      n.param->has_grad = true;
    }
  }
  clear();
}

void Graph::clear() {
  nodes_.clear();
  ++generation_;
}

Var Binding::operator()(std::size_t index) {
  if (auto it = cache_.find(index); it != cache_.end()) return it->second;
  Var v = trainable_ ? graph_->parameter((*params_)[index]) : graph_->constant_ref((*cparams_)[index].value);
  cache_.emplace(index, v);
  return v;
}

// ---------------------------------------------------------------- ops

namespace op {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

Tensor matrix_like(const Tensor& t) { return Tensor::zeros(t.rows(), t.cols()); }

void accumulate(Tensor& dst, const Tensor& src) {
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// Elementwise unary op: forward f(x), backward dy * df(x, y).
template <class F, class D>
Var unary(const Var& a, F f, D df) {
  Graph& g = a.graph();
  const Tensor& x = a.value();
  Tensor y = matrix_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const auto aid = a.id();
  Var parents[] = {a};
  return g.record(std::move(y), parents, [aid, df](Graph& gr, std::uint32_t self) {
    const Tensor& x = gr.value(aid);
    const Tensor& y = gr.value(self);
    const Tensor& gy = gr.grad(self);
    Tensor& gx = gr.grad(aid);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += gy[i] * df(x[i], y[i]);
  });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Graph& g = a.graph();
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const auto m = A.rows(), k = A.cols(), n = B.cols();
  if (B.rows() != k) {
    throw DimensionError("matmul: " + shape_string(A.shape()) + " x " + shape_string(B.shape()));
  }
  Tensor y = Tensor::zeros(m, n);
  kernels::gemm_nn(m, n, k, A.data(), B.data(), y.data());
  const auto aid = a.id(), bid = b.id();
  Var parents[] = {a, b};
  return g.record(std::move(y), parents, [aid, bid, m, n, k](Graph& gr, std::uint32_t self) {
    const Tensor& gy = gr.grad(self);
    if (gr.requires_grad(aid)) {
      kernels::gemm_nt(m, k, n, gy.data(), gr.value(bid).data(), gr.grad(aid).data());
    }
    if (gr.requires_grad(bid)) {
      kernels::gemm_tn(k, n, m, gr.value(aid).data(), gy.data(), gr.grad(bid).data());
    }
  });
}

Var add_bias(const Var& x, const Var& bias) {
  Graph& g = x.graph();
  const Tensor& X = x.value();
  const Tensor& b = bias.value();
  if (b.size() != X.cols()) {
    throw DimensionError("add_bias: " + shape_string(X.shape()) + " + " + shape_string(b.shape()));
  }
  Tensor y = X.rank() == 2 ? X : Tensor::row(X.storage());
  kernels::add_row_bias(y.rows(), y.cols(), b.data(), y.data());
  const auto xid = x.id(), bid = bias.id();
  Var parents[] = {x, bias};
  return g.record(std::move(y), parents, [xid, bid](Graph& gr, std::uint32_t self) {
    const Tensor& gy = gr.grad(self);
    if (gr.requires_grad(xid)) accumulate(gr.grad(xid), gy);
    if (gr.requires_grad(bid)) kernels::column_sums(gy.rows(), gy.cols(), gy.data(), gr.grad(bid).data());
  });
}

Var add(const Var& a, const Var& b) {
  Graph& g = a.graph();
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  accumulate(y, b.value());
  const auto aid = a.id(), bid = b.id();
  Var parents[] = {a, b};
  return g.record(std::move(y), parents, [aid, bid](Graph& gr, std::uint32_t self) {
    const Tensor& gy = gr.grad(self);
    if (gr.requires_grad(aid)) accumulate(gr.grad(aid), gy);
    if (gr.requires_grad(bid)) accumulate(gr.grad(bid), gy);
  });
}

Var sub(const Var& a, const Var& b) {
  Graph& g = a.graph();
  require_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= B[i];
  const auto aid = a.id(), bid = b.id();
  Var parents[] = {a, b};
  return g.record(std::move(y), parents, [aid, bid](Graph& gr, std::uint32_t self) {
    const Tensor& gy = gr.grad(self);
    if (gr.requires_grad(aid)) accumulate(gr.grad(aid), gy);
    if (gr.requires_grad(bid)) {
      Tensor& gb = gr.grad(bid);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  Graph& g = a.graph();
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= B[i];
  const auto aid = a.id(), bid = b.id();
  Var parents[] = {a, b};
  return g.record(std::move(y), parents, [aid, bid](Graph& gr, std::uint32_t self) {
    const Tensor& gy = gr.grad(self);
    if (gr.requires_grad(aid)) {
      Tensor& ga = gr.grad(aid);
      const Tensor& B = gr.value(bid);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * B[i];
    }
    if (gr.requires_grad(bid)) {
      Tensor& gb = gr.grad(bid);
      const Tensor& A = gr.value(aid);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * A[i];
    }
  });
}

Var minimum(const Var& a, const Var& b) {
  Graph& g = a.graph();
  require_same_shape(a.value(), b.value(), "minimum");
  Tensor y = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::min(y[i], B[i]);
  const auto aid = a.id(), bid = b.id();
  Var parents[] = {a, b};
  return g.record(std::move(y), parents, [aid, bid](Graph& gr, std::uint32_t self) {
    const Tensor& gy = gr.grad(self);
    const Tensor& A = gr.value(aid);
    const Tensor& B = gr.value(bid);
    // Ties route the gradient to the first operand.
    if (gr.requires_grad(aid)) {
      Tensor& ga = gr.grad(aid);
      for (std::size_t i = 0; i < gy.size(); ++i)
        if (A[i] <= B[i]) ga[i] += gy[i];
    }
    if (gr.requires_grad(bid)) {
      Tensor& gb = gr.grad(bid);
      for (std::size_t i = 0; i < gy.size(); ++i)
        if (A[i] > B[i]) gb[i] += gy[i];
    }
  });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var mul_scalar(const Var& a, const Var& s) {
  Graph& g = a.graph();
  if (s.value().size() != 1) throw DimensionError("mul_scalar needs a 1x1 factor");
  const double sv = s.value()[0];
  Tensor y = a.value();
  for (auto& v : y.storage()) v *= sv;
  const auto aid = a.id(), sid = s.id();
  Var parents[] = {a, s};
  return g.record(std::move(y), parents, [aid, sid](Graph& gr, std::uint32_t self) {
    const Tensor& gy = gr.grad(self);
    const double sv = gr.value(sid)[0];
    if (gr.requires_grad(aid)) {
      Tensor& ga = gr.grad(aid);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * sv;
    }
    if (gr.requires_grad(sid)) {
      const Tensor& A = gr.value(aid);
      double acc = 0.0;
      for (std::size_t i = 0; i < gy.size(); ++i) acc += gy[i] * A[i];
      gr.grad(sid)[0] += acc;
    }
  });
}

Var mul_column(const Var& a, const Var& col) {
  Graph& g = a.graph();
  const Tensor& A = a.value();
  const Tensor& C = col.value();
  if (C.cols() != 1 || C.rows() != A.rows()) {
    throw DimensionError("mul_column: " + shape_string(A.shape()) + " * " + shape_string(C.shape()));
  }
  Tensor y = A;
  const auto rows = A.rows(), cols = A.cols();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] *= C[r];
  const auto aid = a.id(), cid = col.id();
  Var parents[] = {a, col};
  return g.record(std::move(y), parents, [aid, cid, rows, cols](Graph& gr, std::uint32_t self) {
    const Tensor& gy = gr.grad(self);
    if (gr.requires_grad(aid)) {
      Tensor& ga = gr.grad(aid);
      const Tensor& C = gr.value(cid);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += gy[r * cols + c] * C[r];
    }
    if (gr.requires_grad(cid)) {
      Tensor& gc = gr.grad(cid);
      const Tensor& A = gr.value(aid);
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += gy[r * cols + c] * A[r * cols + c];
        gc[r] += acc;
      }
    }
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var sigmoid(const Var& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  for (double v : a.value().values()) {
    if (!(v > 0.0)) throw NumericError("log of a non-positive value");
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var softplus(const Var& a) {
  return unary(
      a, [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  Graph& g = parts.front().graph();
  const auto rows = parts.front().value().rows();
  std::vector<std::size_t> widths;
  std::vector<std::uint32_t> ids;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.value().rows() != rows) throw DimensionError("concat_cols: row count mismatch");
    widths.push_back(p.value().cols());
    ids.push_back(p.id());
    total += widths.back();
  }
  Tensor y = Tensor::zeros(rows, total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& src = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(src.data() + r * widths[k], widths[k], y.data() + r * total + offset);
    offset += widths[k];
  }
  return g.record(std::move(y), parts, [ids, widths, rows, total](Graph& gr, std::uint32_t self) {
    const Tensor& gy = gr.grad(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (gr.requires_grad(ids[k])) {
        Tensor& gx = gr.grad(ids[k]);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < widths[k]; ++c) gx[r * widths[k] + c] += gy[r * total + offset + c];
      }
      offset += widths[k];
    }
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  Graph& g = a.graph();
  const Tensor& A = a.value();
  const auto rows = A.rows(), cols = A.cols();
  if (begin >= end || end > cols) throw DimensionError("slice_cols: bad range");
  const auto width = end - begin;
  Tensor y = Tensor::zeros(rows, width);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(A.data() + r * cols + begin, width, y.data() + r * width);
  const auto aid = a.id();
  Var parents[] = {a};
  return g.record(std::move(y), parents, [aid, rows, cols, begin, width](Graph& gr, std::uint32_t self) {
    const Tensor& gy = gr.grad(self);
    Tensor& ga = gr.grad(aid);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < width; ++c) ga[r * cols + begin + c] += gy[r * width + c];
  });
}

Var gather_rows(const Var& a, std::span<const std::size_t> rows) {
  Graph& g = a.graph();
  const Tensor& A = a.value();
  const auto cols = A.cols();
  if (rows.empty()) throw DimensionError("gather_rows: empty index list");
  for (auto r : rows) {
    if (r >= A.rows()) throw DimensionError("gather_rows: index " + std::to_string(r) + " out of range");
  }
  Tensor y = Tensor::zeros(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(A.data() + rows[i] * cols, cols, y.data() + i * cols);
  const auto aid = a.id();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Var parents[] = {a};
  return g.record(std::move(y), parents, [aid, idx = std::move(idx), cols](Graph& gr, std::uint32_t self) {
    const Tensor& gy = gr.grad(self);
    Tensor& ga = gr.grad(aid);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < cols; ++c) ga[idx[i] * cols + c] += gy[i * cols + c];
  });
}

Var blend_rows(const Var& a, const Var& b, std::span<const std::uint8_t> mask) {
  Graph& g = a.graph();
  require_same_shape(a.value(), b.value(), "blend_rows");
  const auto rows = a.value().rows(), cols = a.value().cols();
  if (mask.size() != rows) throw DimensionError("blend_rows: mask length mismatch");
  Tensor y = b.value();
  for (std::size_t r = 0; r < rows; ++r)
    if (mask[r]) std::copy_n(a.value().data() + r * cols, cols, y.data() + r * cols);
  const auto aid = a.id(), bid = b.id();
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  Var parents[] = {a, b};
  return g.record(std::move(y), parents, [aid, bid, m = std::move(m), cols](Graph& gr, std::uint32_t self) {
    const Tensor& gy = gr.grad(self);
    const bool ga_needed = gr.requires_grad(aid), gb_needed = gr.requires_grad(bid);
    for (std::size_t r = 0; r < m.size(); ++r) {
      const auto target = m[r] ? aid : bid;
      if (!(m[r] ? ga_needed : gb_needed)) continue;
      Tensor& gt = gr.grad(target);
      for (std::size_t c = 0; c < cols; ++c) gt[r * cols + c] += gy[r * cols + c];
    }
  });
}

Var row_sum(const Var& a) {
  Graph& g = a.graph();
  const Tensor& A = a.value();
  const auto rows = A.rows(), cols = A.cols();
  Tensor y = Tensor::zeros(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += A[r * cols + c];
    y[r] = acc;
  }
  const auto aid = a.id();
  Var parents[] = {a};
  return g.record(std::move(y), parents, [aid, rows, cols](Graph& gr, std::uint32_t self) {
    const Tensor& gy = gr.grad(self);
    Tensor& ga = gr.grad(aid);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += gy[r];
  });
}

Var sum(const Var& a) {
  Graph& g = a.graph();
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  const auto aid = a.id();
  Var parents[] = {a};
  return g.record(Tensor::scalar(acc), parents, [aid](Graph& gr, std::uint32_t self) {
    const double gy = gr.grad(self)[0];
    for (auto& v : gr.grad(aid).storage()) v += gy;
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var softmax_cross_entropy(const Var& logits, std::span<const std::size_t> targets) {
  Graph& g = logits.graph();
  const Tensor& L = logits.value();
  const auto rows = L.rows(), cols = L.cols();
  if (targets.size() != rows) throw DimensionError("softmax_cross_entropy: one target per row required");
  for (auto t : targets) {
    if (t >= cols) throw std::out_of_range("softmax_cross_entropy: target index " + std::to_string(t) +
                                           " out of range for " + std::to_string(cols) + " classes");
  }
  Tensor probs = softmax_rows(L);
  Tensor y = Tensor::zeros(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* lr = L.data() + r * cols;
    const double mx = *std::max_element(lr, lr + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(lr[c] - mx);
    y[r] = std::log(z) + mx - lr[targets[r]];
  }
  const auto lid = logits.id();
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  Var parents[] = {logits};
  return g.record(std::move(y), parents,
                  [lid, tg = std::move(tg), probs = std::move(probs), cols](Graph& gr, std::uint32_t self) {
                    const Tensor& gy = gr.grad(self);
                    Tensor& gl = gr.grad(lid);
                    for (std::size_t r = 0; r < tg.size(); ++r) {
                      for (std::size_t c = 0; c < cols; ++c) gl[r * cols + c] += gy[r] * probs[r * cols + c];
                      gl[r * cols + tg[r]] -= gy[r];
                    }
                  });
}

}  // namespace op

Tensor softmax_rows(const Tensor& logits) {
  const auto rows = logits.rows(), cols = logits.cols();
  Tensor p = Tensor::zeros(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* lr = logits.data() + r * cols;
    double* pr = p.data() + r * cols;
    const double mx = *std::max_element(lr, lr + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (pr[c] = std::exp(lr[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) pr[c] /= z;
  }
  return p;
}

}  // namespace hindsight
