#pragma once

#include "mfm/tensor.hpp"

namespace mfm {

// Reverse-mode gradients of a scalar loss with respect to named parameters.
// Visits each recorded node exactly once in reverse topological order.
// Parameters unreachable from the loss get zero gradients (not an error).
// With create_graph=true the returned gradients are themselves recorded
// operations, so a further backward pass through them is valid.
//
// Gradients never accumulate across calls: every call returns fresh tensors.
ParamSet backward(const Tensor& loss, const ParamSet& wrt, bool create_graph = false);

// Same, keyed by position.
std::vector<Tensor> backward(const Tensor& loss, const std::vector<Tensor>& wrt,
                             bool create_graph = false);

// One differentiable gradient-descent step: returns w - lr * g per key.
// With grads recorded under create_graph=true, losses evaluated under the
// returned parameters differentiate back to whatever the grads depend on.
ParamSet virtual_sgd_step(const ParamSet& params, const ParamSet& grads, double lr);

}  // namespace mfm
