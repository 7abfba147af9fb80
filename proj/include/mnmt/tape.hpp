#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mnmt/tensor.hpp"

namespace mnmt::num {

struct Parameter {
  std::string name;
  Tensor value;
};

// Owns the trainable tensors of one model. Indices are stable handles.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor init);
  // Uniform in [-scale, scale].
  std::size_t add_uniform(std::string name, Shape shape, double scale, std::mt19937_64& rng);

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const noexcept;
  std::size_t index_of(const std::string& name) const;  // throws Format when absent
  bool contains(const std::string& name) const;

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  // FNV-1a over names, shapes and raw bytes of every value.
  std::uint64_t checksum() const;

 private:
  std::vector<Parameter> params_;
};

// Gradient buffers laid out parallel to a ParameterSet.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParameterSet& params);

  Tensor& operator[](std::size_t i) { return grads_[i]; }
  const Tensor& operator[](std::size_t i) const { return grads_[i]; }
  std::size_t size() const noexcept { return grads_.size(); }

  void zero();
  void add(const Gradients& other);
  void scale(double factor);
  double norm() const;
  bool all_finite() const;

 private:
  std::vector<Tensor> grads_;
};

// Scales gradients so their global L2 norm is at most max_norm. Returns the pre-clip norm.
double clip_global_norm(Gradients& grads, double max_norm);

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape() const noexcept { return tape_; }
  std::uint32_t id() const noexcept { return id_; }
  const Tensor& value() const;
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Records operations for reverse-mode differentiation. Nodes are appended in
// evaluation order, so reverse append order is a reverse topological order.
// A tape constructed with record=false only evaluates forward values.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf referring to external storage; the tensor must outlive the tape.
  Var constant_ref(const Tensor& value);
  // Leaf for a parameter; repeated calls return the same node.
  Var param(const ParameterSet& set, std::size_t index);
  // Parameters of a frozen set enter the tape as constants.
  void freeze(const ParameterSet& set);

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  const Tensor& value(Var v) const { return value(v.id()); }
  const Tensor& value(std::uint32_t id) const;
  // Gradient of the last backward() target w.r.t. v; empty if v did not contribute.
  const Tensor& grad(Var v) const { return nodes_[v.id()].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  // Seeds d(loss)/d(loss) = 1 and propagates. Throws NonFiniteGradient.
  void backward(Var loss);
  // Adds this tape's parameter gradients for `set` into `out`.
  void accumulate(const ParameterSet& set, Gradients& out) const;

  // Op construction interface.
  bool any_requires_grad(std::initializer_list<Var> parents) const;
  bool any_requires_grad(std::span<const Var> parents) const;
  Var push(Tensor value, bool requires_grad, BackwardFn backward);
  // Lazily zero-initialised gradient buffer of node id.
  Tensor& grad_buffer(std::uint32_t id);
  bool node_requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Tensor owned;
    const Tensor* ref = nullptr;
    Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;
    const ParameterSet* set = nullptr;
    std::size_t param_index = 0;
  };

  struct ParamKey {
    const ParameterSet* set;
    std::size_t index;
    bool operator==(const ParamKey&) const = default;
  };
  struct ParamKeyHash {
    std::size_t operator()(const ParamKey& k) const noexcept {
      return std::hash<const void*>()(k.set) ^ (k.index * 0x9e3779b97f4a7c15ULL);
    }
  };

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<ParamKey, std::uint32_t, ParamKeyHash> param_nodes_;
  std::vector<const ParameterSet*> frozen_;
};

// ---- primitive operations -------------------------------------------------

Var matvec(Var w, Var x);             // [m x n] * [n] -> [m]
Var matvec_t(Var m, Var a);           // [m x n]^T * [m] -> [n]
Var matmul_nt(Var a, Var b);          // [m x k] * [n x k]^T -> [m x n]
Var add(Var a, Var b);
Var add_n(std::span<const Var> terms);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                // elementwise
Var scale(Var a, double factor);
Var one_minus(Var a);                 // 1 - a
Var add_row_bias(Var m, Var bias);    // [m x n] + 1 * bias^T
Var tanh(Var a);
Var sigmoid(Var a);
Var log(Var a);
Var softmax(Var a);                   // rank-1
Var cross_entropy(Var logits, std::size_t target);  // -log softmax(logits)[target], scalar
Var maxout(Var a, std::size_t pool);  // rank-1, size must divide by pool
Var concat(std::span<const Var> parts);  // rank-1
Var slice(Var a, std::size_t offset, std::size_t length);
Var row(Var m, std::size_t index);    // embedding lookup
Var stack_rows(std::span<const Var> rows);
Var dot(Var a, Var b);                // scalar
Var sum(Var a);                       // scalar
Var pick(Var a, std::size_t index);   // scalar

// Value-level helpers shared by inference code and tests.
Tensor softmax_values(std::span<const double> logits);

}  // namespace mnmt::num
