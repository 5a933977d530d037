#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mfm/tensor.hpp"

namespace mfm {

// Elementwise with NumPy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double s);
Tensor neg(const Tensor& x);

Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor pow_const(const Tensor& x, double p);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]
Tensor transpose(const Tensor& x);                // 2-D
Tensor permute(const Tensor& x, std::vector<int> perm);
Tensor reshape(const Tensor& x, Shape shape);     // one dim may be -1
Tensor broadcast_to(const Tensor& x, Shape shape);
Tensor sum_to(const Tensor& x, const Shape& shape);  // adjoint of broadcast_to

Tensor sum_axes(const Tensor& x, std::vector<int> axes, bool keepdims);
Tensor sum_all(const Tensor& x);   // scalar
Tensor mean_all(const Tensor& x);  // scalar

Tensor concat(const std::vector<Tensor>& xs, int axis);
Tensor slice(const Tensor& x, int axis, int64_t start, int64_t len);

Tensor softmax(const Tensor& x, int axis);

// Mean over the batch of softmax cross-entropy; rows of `onehot` are
// one-hot (or probability) targets. Numerically stabilized by a detached
// per-row max shift, which leaves all derivatives exact.
Tensor cross_entropy_with_softmax(const Tensor& logits, const Tensor& onehot);
Tensor make_onehot(std::span<const int32_t> labels, int64_t num_classes);

// Constant (non-differentiable) helpers.
Tensor relu_mask(const Tensor& x);              // 1 where x > 0
Tensor row_max_const(const Tensor& x, int axis);  // keepdims, detached

// Convolution stack; activations are [N,C,H,W].
Tensor im2col(const Tensor& x, int64_t kh, int64_t kw, int64_t stride, int64_t pad);
Tensor col2im(const Tensor& cols, Shape x_shape, int64_t kh, int64_t kw,
              int64_t stride, int64_t pad);
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int64_t stride,
              int64_t pad);
Tensor maxpool2d(const Tensor& x, int64_t k, int64_t stride);
Tensor avgpool2d(const Tensor& x, int64_t k, int64_t stride);
Tensor global_avg_pool(const Tensor& x);  // [N,C,H,W] -> [N,C]

// y = x @ w^T + b with w of shape [out,in], b of shape [out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Differentiable row selection from a [N,D] table (duplicate ids allowed;
// the adjoint scatter accumulates).
Tensor gather_rows(const Tensor& table, std::vector<int64_t> ids);
Tensor scatter_rows(const Tensor& rows, std::vector<int64_t> ids, int64_t num_rows);

int64_t argmax_row(std::span<const double> row);  // ties -> lowest index

}  // namespace mfm
