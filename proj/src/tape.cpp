#include "mnmt/tape.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

#include "mnmt/common.hpp"

namespace mnmt::num {

// ---- ParameterSet / Gradients ---------------------------------------------

std::size_t ParameterSet::add(std::string name, Tensor init) {
  params_.push_back(Parameter{std::move(name), std::move(init)});
  return params_.size() - 1;
}

std::size_t ParameterSet::add_uniform(std::string name, Shape shape, double scale,
                                      std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& v : t.values()) v = dist(rng);
  return add(std::move(name), std::move(t));
}

std::size_t ParameterSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw Error(ErrorCode::Format, "missing parameter '" + name + "'");
}

bool ParameterSet::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

std::uint64_t ParameterSet::checksum() const {
  std::uint64_t h = fnv1a("");
  for (const auto& p : params_) {
    h = fnv1a(p.name, h);
    h = fnv1a(shape_string(p.value.shape()), h);
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(p.value.data()),
                               p.value.size() * sizeof(double)),
              h);
  }
  return h;
}

Gradients::Gradients(const ParameterSet& params) {
  grads_.reserve(params.size());
  for (const auto& p : params) grads_.emplace_back(p.value.shape());
}

void Gradients::zero() {
  for (auto& g : grads_) g.fill(0.0);
}

void Gradients::add(const Gradients& other) {
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    double* dst = grads_[i].data();
    const double* src = other.grads_[i].data();
    for (std::size_t k = 0; k < grads_[i].size(); ++k) dst[k] += src[k];
  }
}

void Gradients::scale(double factor) {
  for (auto& g : grads_) {
    for (double& v : g.values()) v *= factor;
  }
}

double Gradients::norm() const {
  double s = 0.0;
  for (const auto& g : grads_) {
    for (double v : g.values()) s += v * v;
  }
  return std::sqrt(s);
}

bool Gradients::all_finite() const {
  return std::all_of(grads_.begin(), grads_.end(), [](const Tensor& g) { return g.all_finite(); });
}

double clip_global_norm(Gradients& grads, double max_norm) {
  const double n = grads.norm();
  if (max_norm > 0.0 && n > max_norm) grads.scale(max_norm / n);
  return n;
}

// ---- Tape -------------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }

const Tensor& Tape::value(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.ref != nullptr ? *n.ref : n.owned;
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw Error(ErrorCode::NonFiniteValue, "constant contains NaN/Inf");
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant_ref(const Tensor& value) {
  Node n;
  n.ref = &value;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::freeze(const ParameterSet& set) { frozen_.push_back(&set); }

Var Tape::param(const ParameterSet& set, std::size_t index) {
  const ParamKey key{&set, index};
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.ref = &set[index].value;
  n.set = &set;
  n.param_index = index;
  n.requires_grad =
      record_ && std::find(frozen_.begin(), frozen_.end(), &set) == frozen_.end();
  nodes_.push_back(std::move(n));
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  param_nodes_.emplace(key, id);
  return Var(this, id);
}

bool Tape::any_requires_grad(std::initializer_list<Var> parents) const {
  return any_requires_grad(std::span<const Var>(parents.begin(), parents.size()));
}

bool Tape::any_requires_grad(std::span<const Var> parents) const {
  if (!record_) return false;
  return std::any_of(parents.begin(), parents.end(),
                     [&](const Var& v) { return nodes_[v.id()].requires_grad; });
}

Var Tape::push(Tensor value, bool requires_grad, BackwardFn backward) {
  if (!value.all_finite()) throw Error(ErrorCode::NonFiniteValue, "operation produced NaN/Inf");
  Node n;
  n.owned = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor& Tape::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(value(id).shape());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (value(loss).size() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "backward() needs a scalar loss, got " +
                                              shape_string(value(loss).shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id())[0] = 1.0;
  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
  for (const auto& n : nodes_) {
    if (n.set != nullptr && !n.grad.empty() && !n.grad.all_finite()) {
      throw Error(ErrorCode::NonFiniteGradient, "gradient of '" + (*n.set)[n.param_index].name +
                                                    "' is not finite");
    }
  }
}

void Tape::accumulate(const ParameterSet& set, Gradients& out) const {
  for (const auto& n : nodes_) {
    if (n.set != &set || n.grad.empty()) continue;
    Tensor& dst = out[n.param_index];
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
  }
}

// ---- primitive operations -------------------------------------------------

namespace {

Tape& tape_of(Var a) { return *a.tape(); }

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorCode::ShapeMismatch,
              std::string(op) + ": " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

// Applies f elementwise; df maps (input, output) to the local derivative.
template <typename F, typename DF>
Var unary(Var a, F f, DF df) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::uint32_t ia = a.id();
  return t.push(std::move(y), t.any_requires_grad({a}), [ia, df](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(Var(&tp, self));
    const Tensor& x = tp.value(ia);
    const Tensor& y = tp.value(self);
    Tensor& gx = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(x[i], y[i]);
  });
}

}  // namespace

Var matvec(Var w, Var x) {
  Tape& t = tape_of(w);
  const Tensor& W = w.value();
  const Tensor& X = x.value();
  if (W.rank() != 2 || X.rank() != 1 || W.cols() != X.size()) shape_error("matvec", W, X);
  const std::size_t m = W.rows(), n = W.cols();
  Tensor y(Shape{m});
  for (std::size_t r = 0; r < m; ++r) {
    const double* wr = W.data() + r * n;
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += wr[c] * X[c];
    y[r] = acc;
  }
  const std::uint32_t iw = w.id(), ix = x.id();
  return t.push(std::move(y), t.any_requires_grad({w, x}), [iw, ix, m, n](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(Var(&tp, self));
    const Tensor& W = tp.value(iw);
    const Tensor& X = tp.value(ix);
    if (tp.node_requires_grad(iw)) {
      Tensor& gw = tp.grad_buffer(iw);
      for (std::size_t r = 0; r < m; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        double* dst = gw.data() + r * n;
        for (std::size_t c = 0; c < n; ++c) dst[c] += gr * X[c];
      }
    }
    if (tp.node_requires_grad(ix)) {
      Tensor& gx = tp.grad_buffer(ix);
      for (std::size_t r = 0; r < m; ++r) {
        const double gr = g[r];
        const double* wr = W.data() + r * n;
        for (std::size_t c = 0; c < n; ++c) gx[c] += wr[c] * gr;
      }
    }
  });
}

Var matvec_t(Var mv, Var av) {
  Tape& t = tape_of(mv);
  const Tensor& M = mv.value();
  const Tensor& A = av.value();
  if (M.rank() != 2 || A.rank() != 1 || M.rows() != A.size()) shape_error("matvec_t", M, A);
  const std::size_t m = M.rows(), n = M.cols();
  Tensor y(Shape{n});
  for (std::size_t r = 0; r < m; ++r) {
    const double* mr = M.data() + r * n;
    for (std::size_t c = 0; c < n; ++c) y[c] += mr[c] * A[r];
  }
  const std::uint32_t im = mv.id(), ia = av.id();
  return t.push(std::move(y), t.any_requires_grad({mv, av}), [im, ia, m, n](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(Var(&tp, self));
    const Tensor& M = tp.value(im);
    const Tensor& A = tp.value(ia);
    if (tp.node_requires_grad(im)) {
      Tensor& gm = tp.grad_buffer(im);
      for (std::size_t r = 0; r < m; ++r) {
        double* dst = gm.data() + r * n;
        for (std::size_t c = 0; c < n; ++c) dst[c] += A[r] * g[c];
      }
    }
    if (tp.node_requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t r = 0; r < m; ++r) {
        const double* mr = M.data() + r * n;
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) acc += mr[c] * g[c];
        ga[r] += acc;
      }
    }
  });
}

Var matmul_nt(Var av, Var bv) {
  Tape& t = tape_of(av);
  const Tensor& A = av.value();
  const Tensor& B = bv.value();
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.cols()) shape_error("matmul_nt", A, B);
  const std::size_t m = A.rows(), n = B.rows(), k = A.cols();
  Tensor y(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* ar = A.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* br = B.data() + j * k;
      double acc = 0.0;
      for (std::size_t c = 0; c < k; ++c) acc += ar[c] * br[c];
      y.at(i, j) = acc;
    }
  }
  const std::uint32_t ia = av.id(), ib = bv.id();
  return t.push(std::move(y), t.any_requires_grad({av, bv}), [ia, ib, m, n, k](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(Var(&tp, self));
    const Tensor& A = tp.value(ia);
    const Tensor& B = tp.value(ib);
    if (tp.node_requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < m; ++i) {
        double* dst = ga.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = g.at(i, j);
          const double* br = B.data() + j * k;
          for (std::size_t c = 0; c < k; ++c) dst[c] += gij * br[c];
        }
      }
    }
    if (tp.node_requires_grad(ib)) {
      Tensor& gb = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < m; ++i) {
        const double* ar = A.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = g.at(i, j);
          double* dst = gb.data() + j * k;
          for (std::size_t c = 0; c < k; ++c) dst[c] += gij * ar[c];
        }
      }
    }
  });
}

Var add(Var a, Var b) {
  const std::array<Var, 2> terms{a, b};
  return add_n(terms);
}

Var add_n(std::span<const Var> terms) {
  if (terms.empty()) throw Error(ErrorCode::InvalidArgument, "add_n of nothing");
  Tape& t = tape_of(terms[0]);
  const Tensor& first = terms[0].value();
  Tensor y = first;
  for (std::size_t i = 1; i < terms.size(); ++i) {
    const Tensor& x = terms[i].value();
    if (!x.same_shape(first)) shape_error("add", first, x);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += x[k];
  }
  std::vector<std::uint32_t> ids;
  ids.reserve(terms.size());
  for (const Var& v : terms) ids.push_back(v.id());
  return t.push(std::move(y), t.any_requires_grad(terms), [ids = std::move(ids)](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(Var(&tp, self));
    for (std::uint32_t id : ids) {
      if (!tp.node_requires_grad(id)) continue;
      Tensor& gx = tp.grad_buffer(id);
      for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) shape_error("sub", A, B);
  Tensor y = A;
  for (std::size_t k = 0; k < y.size(); ++k) y[k] -= B[k];
  const std::uint32_t ia = a.id(), ib = b.id();
  return t.push(std::move(y), t.any_requires_grad({a, b}), [ia, ib](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(Var(&tp, self));
    if (tp.node_requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
    }
    if (tp.node_requires_grad(ib)) {
      Tensor& gb = tp.grad_buffer(ib);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] -= g[k];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) shape_error("mul", A, B);
  Tensor y = A;
  for (std::size_t k = 0; k < y.size(); ++k) y[k] *= B[k];
  const std::uint32_t ia = a.id(), ib = b.id();
  return t.push(std::move(y), t.any_requires_grad({a, b}), [ia, ib](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(Var(&tp, self));
    const Tensor& A = tp.value(ia);
    const Tensor& B = tp.value(ib);
    if (tp.node_requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * B[k];
    }
    if (tp.node_requires_grad(ib)) {
      Tensor& gb = tp.grad_buffer(ib);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * A[k];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Var one_minus(Var a) {
  return unary(
      a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Var add_row_bias(Var mv, Var bv) {
  Tape& t = tape_of(mv);
  const Tensor& M = mv.value();
  const Tensor& B = bv.value();
  if (M.rank() != 2 || B.rank() != 1 || M.cols() != B.size()) shape_error("add_row_bias", M, B);
  const std::size_t m = M.rows(), n = M.cols();
  Tensor y = M;
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) y.at(r, c) += B[c];
  }
  const std::uint32_t im = mv.id(), ib = bv.id();
  return t.push(std::move(y), t.any_requires_grad({mv, bv}), [im, ib, m, n](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(Var(&tp, self));
    if (tp.node_requires_grad(im)) {
      Tensor& gm = tp.grad_buffer(im);
      for (std::size_t k = 0; k < g.size(); ++k) gm[k] += g[k];
    }
    if (tp.node_requires_grad(ib)) {
      Tensor& gb = tp.grad_buffer(ib);
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) gb[c] += g.at(r, c);
      }
    }
  });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var log(Var a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor softmax_values(std::span<const double> logits) {
  Tensor y(Shape{logits.size()});
  if (logits.empty()) return y;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    y[i] = std::exp(logits[i] - mx);
    z += y[i];
  }
  for (double& v : y.values()) v /= z;
  return y;
}

Var softmax(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (x.rank() != 1) throw Error(ErrorCode::ShapeMismatch, "softmax expects a vector");
  Tensor y = softmax_values(x.values());
  const std::uint32_t ia = a.id();
  return t.push(std::move(y), t.any_requires_grad({a}), [ia](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(Var(&tp, self));
    const Tensor& y = tp.value(self);
    double gy = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) gy += g[i] * y[i];
    Tensor& gx = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += y[i] * (g[i] - gy);
  });
}

Var cross_entropy(Var logits, std::size_t target) {
  Tape& t = tape_of(logits);
  const Tensor& x = logits.value();
  if (x.rank() != 1 || target >= x.size()) {
    throw Error(ErrorCode::ShapeMismatch, "cross_entropy target " + std::to_string(target) +
                                              " outside " + shape_string(x.shape()));
  }
  const double mx = *std::max_element(x.values().begin(), x.values().end());
  double z = 0.0;
  for (double v : x.values()) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  Tensor y(Shape{1}, lse - x[target]);
  const std::uint32_t ia = logits.id();
  return t.push(std::move(y), t.any_requires_grad({logits}), [ia, target, lse](Tape& tp, std::uint32_t self) {
    const double g = tp.grad(Var(&tp, self))[0];
    const Tensor& x = tp.value(ia);
    Tensor& gx = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g * std::exp(x[i] - lse);
    gx[target] -= g;
  });
}

Var maxout(Var a, std::size_t pool) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (pool == 0 || x.rank() != 1 || x.size() % pool != 0) {
    throw Error(ErrorCode::ShapeMismatch,
                "maxout pool " + std::to_string(pool) + " does not divide " + shape_string(x.shape()));
  }
  const std::size_t n = x.size() / pool;
  Tensor y(Shape{n});
  std::vector<std::uint32_t> arg(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = i * pool;
    for (std::size_t k = 1; k < pool; ++k) {
      if (x[i * pool + k] > x[best]) best = i * pool + k;
    }
    y[i] = x[best];
    arg[i] = static_cast<std::uint32_t>(best);
  }
  const std::uint32_t ia = a.id();
  return t.push(std::move(y), t.any_requires_grad({a}), [ia, arg = std::move(arg)](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(Var(&tp, self));
    Tensor& gx = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += g[i];
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCode::InvalidArgument, "concat of nothing");
  Tape& t = tape_of(parts[0]);
  std::vector<double> data;
  std::vector<std::pair<std::uint32_t, std::size_t>> pieces;
  for (const Var& p : parts) {
    const Tensor& x = p.value();
    if (x.rank() != 1) throw Error(ErrorCode::ShapeMismatch, "concat expects vectors");
    pieces.emplace_back(p.id(), data.size());
    data.insert(data.end(), x.values().begin(), x.values().end());
  }
  return t.push(Tensor::vector(std::move(data)), t.any_requires_grad(parts),
                [pieces = std::move(pieces)](Tape& tp, std::uint32_t self) {
                  const Tensor& g = tp.grad(Var(&tp, self));
                  for (const auto& [id, off] : pieces) {
                    if (!tp.node_requires_grad(id)) continue;
                    Tensor& gx = tp.grad_buffer(id);
                    for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += g[off + k];
                  }
                });
}

Var slice(Var a, std::size_t offset, std::size_t length) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (x.rank() != 1 || offset + length > x.size()) {
    throw Error(ErrorCode::ShapeMismatch, "slice out of range of " + shape_string(x.shape()));
  }
  std::vector<double> data(x.data() + offset, x.data() + offset + length);
  const std::uint32_t ia = a.id();
  return t.push(Tensor::vector(std::move(data)), t.any_requires_grad({a}),
                [ia, offset](Tape& tp, std::uint32_t self) {
                  const Tensor& g = tp.grad(Var(&tp, self));
                  Tensor& gx = tp.grad_buffer(ia);
                  for (std::size_t k = 0; k < g.size(); ++k) gx[offset + k] += g[k];
                });
}

Var row(Var mv, std::size_t index) {
  Tape& t = tape_of(mv);
  const Tensor& M = mv.value();
  if (M.rank() != 2 || index >= M.rows()) {
    throw Error(ErrorCode::ShapeMismatch,
                "row " + std::to_string(index) + " outside " + shape_string(M.shape()));
  }
  auto r = M.row(index);
  const std::uint32_t im = mv.id();
  const std::size_t n = M.cols();
  return t.push(Tensor::vector(std::vector<double>(r.begin(), r.end())), t.any_requires_grad({mv}),
                [im, index, n](Tape& tp, std::uint32_t self) {
                  const Tensor& g = tp.grad(Var(&tp, self));
                  double* dst = tp.grad_buffer(im).data() + index * n;
                  for (std::size_t k = 0; k < n; ++k) dst[k] += g[k];
                });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "stack_rows of nothing");
  Tape& t = tape_of(rows[0]);
  const std::size_t n = rows[0].value().size();
  std::vector<double> data;
  data.reserve(rows.size() * n);
  std::vector<std::uint32_t> ids;
  for (const Var& r : rows) {
    const Tensor& x = r.value();
    if (x.rank() != 1 || x.size() != n) shape_error("stack_rows", rows[0].value(), x);
    data.insert(data.end(), x.values().begin(), x.values().end());
    ids.push_back(r.id());
  }
  return t.push(Tensor::matrix(rows.size(), n, std::move(data)), t.any_requires_grad(rows),
                [ids = std::move(ids), n](Tape& tp, std::uint32_t self) {
                  const Tensor& g = tp.grad(Var(&tp, self));
                  for (std::size_t r = 0; r < ids.size(); ++r) {
                    if (!tp.node_requires_grad(ids[r])) continue;
                    Tensor& gx = tp.grad_buffer(ids[r]);
                    for (std::size_t k = 0; k < n; ++k) gx[k] += g[r * n + k];
                  }
                });
}

Var dot(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.size() != B.size()) shape_error("dot", A, B);
  double acc = 0.0;
  for (std::size_t k = 0; k < A.size(); ++k) acc += A[k] * B[k];
  const std::uint32_t ia = a.id(), ib = b.id();
  return t.push(Tensor(Shape{1}, acc), t.any_requires_grad({a, b}), [ia, ib](Tape& tp, std::uint32_t self) {
    const double g = tp.grad(Var(&tp, self))[0];
    const Tensor& A = tp.value(ia);
    const Tensor& B = tp.value(ib);
    if (tp.node_requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t k = 0; k < A.size(); ++k) ga[k] += g * B[k];
    }
    if (tp.node_requires_grad(ib)) {
      Tensor& gb = tp.grad_buffer(ib);
      for (std::size_t k = 0; k < A.size(); ++k) gb[k] += g * A[k];
    }
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  const std::uint32_t ia = a.id();
  return t.push(Tensor(Shape{1}, acc), t.any_requires_grad({a}), [ia](Tape& tp, std::uint32_t self) {
    const double g = tp.grad(Var(&tp, self))[0];
    Tensor& gx = tp.grad_buffer(ia);
    for (double& v : gx.values()) v += g;
  });
}

Var pick(Var a, std::size_t index) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (index >= x.size()) {
    throw Error(ErrorCode::ShapeMismatch, "pick " + std::to_string(index) + " outside " +
                                              shape_string(x.shape()));
  }
  const std::uint32_t ia = a.id();
  return t.push(Tensor(Shape{1}, x[index]), t.any_requires_grad({a}), [ia, index](Tape& tp, std::uint32_t self) {
    tp.grad_buffer(ia)[index] += tp.grad(Var(&tp, self))[0];
  });
}

}  // namespace mnmt::num
