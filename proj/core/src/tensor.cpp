#include "mfm/tensor.hpp"

#include <cmath>
#include <sstream>

namespace mfm {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

std::vector<int64_t> row_major_strides(const Shape& s) {
  std::vector<int64_t> st(s.size());
  int64_t acc = 1;
  for (size_t i = s.size(); i-- > 0;) {
    st[i] = acc;
    acc *= s[i];
  }
  return st;
}

namespace {
thread_local bool g_grad_mode = true;

std::shared_ptr<TensorImpl> new_impl(Shape shape, std::vector<double> data) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::make_shared<std::vector<double>>(std::move(data));
  return impl;
}
}  // namespace

bool GradMode::enabled() { return g_grad_mode; }
void GradMode::set(bool v) { g_grad_mode = v; }

Tensor Tensor::zeros(Shape shape) {
  const auto n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
  const auto n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(static_cast<size_t>(n), value));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
    throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  Tensor t;
  t.impl_ = new_impl(std::move(shape), std::move(data));
  return t;
}

void Tensor::set_requires_grad(bool v) {
  if (impl_->producer) {
    throw Error("set_requires_grad: tensor is already recorded on a graph");
  }
  impl_->requires_grad = v;
}

Tensor Tensor::detach() const {
  Tensor t;
  t.impl_ = std::make_shared<TensorImpl>();
  t.impl_->shape = impl_->shape;
  t.impl_->data = impl_->data;  // shared buffer, no copy
  return t;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  }
  return (*impl_->data)[0];
}

std::vector<double>& Tensor::mutable_data() {
  if (impl_->producer) {
    throw Error("mutable_data: tensor is recorded on a graph and immutable");
  }
  return *impl_->data;
}

namespace {
void maybe_record(Tensor& out, const char* op, std::vector<Tensor>&& inputs,
                  std::function<std::vector<Tensor>(const Tensor&)>&& vjp) {
  if (!GradMode::enabled()) return;
  bool any = false;
  for (const auto& in : inputs) {
    if (in.requires_grad()) {
      any = true;
      break;
    }
  }
  if (!any) return;
  auto node = std::make_shared<Node>();
  node->op = op;
  node->inputs = std::move(inputs);
  node->vjp = std::move(vjp);
  out.impl()->producer = std::move(node);
  out.impl()->requires_grad = true;
}
}  // namespace

Tensor make_op(const char* op, Shape out_shape, std::vector<double> out_data,
               std::vector<Tensor> inputs,
               std::function<std::vector<Tensor>(const Tensor&)> vjp) {
  Tensor out = Tensor::from_data(std::move(out_shape), std::move(out_data));
  maybe_record(out, op, std::move(inputs), std::move(vjp));
  return out;
}

Tensor make_op_shared(const char* op, Shape out_shape,
                      std::shared_ptr<std::vector<double>> out_data,
                      std::vector<Tensor> inputs,
                      std::function<std::vector<Tensor>(const Tensor&)> vjp) {
  if (shape_numel(out_shape) != static_cast<int64_t>(out_data->size())) {
    throw ShapeError("tensor: shared buffer length does not match shape " +
                     shape_str(out_shape));
  }
  Tensor out;
  out.impl_ = std::make_shared<TensorImpl>();
  out.impl_->shape = std::move(out_shape);
  out.impl_->data = std::move(out_data);
  maybe_record(out, op, std::move(inputs), std::move(vjp));
  return out;
}

ParamSet detach_all(const ParamSet& params, bool requires_grad) {
  ParamSet out;
  for (const auto& [name, t] : params) {
    Tensor d = t.detach();
    if (requires_grad) d.set_requires_grad(true);
    out.emplace(name, std::move(d));
  }
  return out;
}

double l2_norm(const ParamSet& params) {
  double acc = 0.0;
  for (const auto& [name, t] : params) {
    for (double v : t.data()) acc += v * v;
  }
  return std::sqrt(acc);
}

}  // namespace mfm
