#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mfm/common.hpp"

namespace mfm {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);
std::vector<int64_t> row_major_strides(const Shape& s);

struct Node;

struct TensorImpl {
  Shape shape;
  std::shared_ptr<std::vector<double>> data;
  bool requires_grad = false;
  std::shared_ptr<Node> producer;  // null for leaves
};

// Value-semantic handle to a shared immutable buffer. Ops produce fresh
// tensors; buffers of tensors already recorded on a graph are never written.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }
  static Tensor scalar(double value) { return full({}, value); }
  static Tensor from_data(Shape shape, std::vector<double> data);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int64_t dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return shape_numel(impl_->shape); }

  bool requires_grad() const { return impl_->requires_grad; }
  // Leaf-only; a recorded tensor's grad flag is fixed at creation.
  void set_requires_grad(bool v);
  Tensor requires_grad_(bool v = true) {
    set_requires_grad(v);
    return *this;
  }

  // Same buffer, no producer, no grad: a constant view of this value.
  Tensor detach() const;

  double item() const;
  const std::vector<double>& data() const { return *impl_->data; }
  // For filling leaves before they enter a graph.
  std::vector<double>& mutable_data();

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;

  friend Tensor make_op(const char* op, Shape out_shape,
                        std::vector<double> out_data, std::vector<Tensor> inputs,
                        std::function<std::vector<Tensor>(const Tensor&)> vjp);
  friend Tensor make_op_shared(const char* op, Shape out_shape,
                               std::shared_ptr<std::vector<double>> out_data,
                               std::vector<Tensor> inputs,
                               std::function<std::vector<Tensor>(const Tensor&)> vjp);
};

// Backward rule of one recorded operation. `vjp` receives the gradient of
// the node's output and returns gradients for each input, in order. The
// closure must only capture inputs and plain constants, never the output
// tensor (that would cycle the ownership graph); anything the rule needs
// from the forward value is recomputed from the inputs.
struct Node {
  const char* op;
  std::vector<Tensor> inputs;
  std::function<std::vector<Tensor>(const Tensor& grad_out)> vjp;
};

// Records a node when grad mode is on and any input requires grad.
Tensor make_op(const char* op, Shape out_shape, std::vector<double> out_data,
               std::vector<Tensor> inputs,
               std::function<std::vector<Tensor>(const Tensor&)> vjp);

// Same, but shares an existing buffer (for layout-only ops like reshape).
Tensor make_op_shared(const char* op, Shape out_shape,
                      std::shared_ptr<std::vector<double>> out_data,
                      std::vector<Tensor> inputs,
                      std::function<std::vector<Tensor>(const Tensor&)> vjp);

class GradMode {
 public:
  static bool enabled();
  static void set(bool v);
};

struct NoGradGuard {
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set(false); }
  ~NoGradGuard() { GradMode::set(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

struct GradGuard {
  explicit GradGuard(bool on) : prev_(GradMode::enabled()) { GradMode::set(on); }
  ~GradGuard() { GradMode::set(prev_); }
  GradGuard(const GradGuard&) = delete;
  GradGuard& operator=(const GradGuard&) = delete;

 private:
  bool prev_;
};

// Named parameters. std::map keeps iteration in lexicographic name order,
// which is the determinism contract for init, serialization and updates.
using ParamSet = std::map<std::string, Tensor>;

ParamSet detach_all(const ParamSet& params, bool requires_grad);
double l2_norm(const ParamSet& params);

}  // namespace mfm
