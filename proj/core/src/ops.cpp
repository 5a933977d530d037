#include "mfm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <numeric>

#include "mfm/parallel.hpp"

namespace mfm {

namespace {

Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
  const size_t nd = std::max(a.size(), b.size());
  Shape out(nd);
  for (size_t i = 0; i < nd; ++i) {
    const int64_t da = i < nd - a.size() ? 1 : a[i - (nd - a.size())];
    const int64_t db = i < nd - b.size() ? 1 : b[i - (nd - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) +
                       " with " + shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// Strides of `in` aligned to broadcast shape `out`: 0 on broadcast axes.
std::vector<int64_t> bcast_strides(const Shape& in, const Shape& out) {
  std::vector<int64_t> st(out.size(), 0);
  const auto in_st = row_major_strides(in);
  const size_t off = out.size() - in.size();
  for (size_t i = 0; i < in.size(); ++i) {
    st[off + i] = in[i] == 1 ? 0 : in_st[i];
  }
  return st;
}

template <class F>
std::vector<double> bcast_binary(const char* op, const Tensor& a, const Tensor& b,
                                 const Shape& out, F f) {
  const auto& av = a.data();
  const auto& bv = b.data();
  const int64_t total = shape_numel(out);
  std::vector<double> res(static_cast<size_t>(total));
  if (a.shape() == b.shape()) {
    parallel_for(total, [&](int64_t lo, int64_t hi) {
      for (int64_t i = lo; i < hi; ++i) res[i] = f(av[i], bv[i]);
    });
    return res;
  }
  const auto sa = bcast_strides(a.shape(), out);
  const auto sb = bcast_strides(b.shape(), out);
  const int nd = static_cast<int>(out.size());
  std::vector<int64_t> idx(nd, 0);
  int64_t ia = 0, ib = 0;
  for (int64_t t = 0; t < total; ++t) {
    res[static_cast<size_t>(t)] = f(av[static_cast<size_t>(ia)], bv[static_cast<size_t>(ib)]);
    for (int ax = nd - 1; ax >= 0; --ax) {
      ++idx[ax];
      ia += sa[ax];
      ib += sb[ax];
      if (idx[ax] < out[ax]) break;
      idx[ax] = 0;
      ia -= sa[ax] * out[ax];
      ib -= sb[ax] * out[ax];
    }
  }
  return res;
}

template <class F>
Tensor unary_elementwise(const char* op, const Tensor& x, F f,
                         std::function<std::vector<Tensor>(const Tensor&)> vjp) {
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  parallel_for(static_cast<int64_t>(xv.size()), [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) out[i] = f(xv[i]);
  });
  return make_op(op, x.shape(), std::move(out), {x}, std::move(vjp));
}

std::vector<int> normalize_axes(const char* op, std::vector<int> axes, int nd) {
  for (auto& a : axes) {
    if (a < 0) a += nd;
    if (a < 0 || a >= nd) {
      throw ShapeError(std::string(op) + ": axis " + std::to_string(a) +
                       " out of range for ndim " + std::to_string(nd));
    }
  }
  std::sort(axes.begin(), axes.end());
  return axes;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  Shape out = broadcast_shape("add", a.shape(), b.shape());
  auto data = bcast_binary("add", a, b, out, [](double x, double y) { return x + y; });
  Shape as = a.shape(), bs = b.shape();
  return make_op("add", std::move(out), std::move(data), {a, b},
                 [as, bs](const Tensor& g) -> std::vector<Tensor> {
                   return {sum_to(g, as), sum_to(g, bs)};
                 });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Shape out = broadcast_shape("sub", a.shape(), b.shape());
  auto data = bcast_binary("sub", a, b, out, [](double x, double y) { return x - y; });
  Shape as = a.shape(), bs = b.shape();
  return make_op("sub", std::move(out), std::move(data), {a, b},
                 [as, bs](const Tensor& g) -> std::vector<Tensor> {
                   return {sum_to(g, as), sum_to(neg(g), bs)};
                 });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Shape out = broadcast_shape("mul", a.shape(), b.shape());
  auto data = bcast_binary("mul", a, b, out, [](double x, double y) { return x * y; });
  Shape as = a.shape(), bs = b.shape();
  return make_op("mul", std::move(out), std::move(data), {a, b},
                 [a, b, as, bs](const Tensor& g) -> std::vector<Tensor> {
                   return {sum_to(mul(g, b), as), sum_to(mul(g, a), bs)};
                 });
}

Tensor scale(const Tensor& x, double s) {
  return unary_elementwise(
      "scale", x, [s](double v) { return v * s; },
      [s](const Tensor& g) -> std::vector<Tensor> { return {scale(g, s)}; });
}

Tensor add_scalar(const Tensor& x, double s) {
  return unary_elementwise(
      "add_scalar", x, [s](double v) { return v + s; },
      [](const Tensor& g) -> std::vector<Tensor> { return {g}; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor exp(const Tensor& x) {
  return unary_elementwise(
      "exp", x, [](double v) { return std::exp(v); },
      [x](const Tensor& g) -> std::vector<Tensor> { return {mul(g, exp(x))}; });
}

Tensor log(const Tensor& x) {
  return unary_elementwise(
      "log", x, [](double v) { return std::log(v); },
      [x](const Tensor& g) -> std::vector<Tensor> {
        return {mul(g, pow_const(x, -1.0))};
      });
}

Tensor pow_const(const Tensor& x, double p) {
  return unary_elementwise(
      "pow_const", x, [p](double v) { return std::pow(v, p); },
      [x, p](const Tensor& g) -> std::vector<Tensor> {
        return {mul(g, scale(pow_const(x, p - 1.0), p))};
      });
}

Tensor relu(const Tensor& x) {
  return unary_elementwise(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [x](const Tensor& g) -> std::vector<Tensor> {
        // Subgradient 0 at the kink; the mask is constant wrt x.
        return {mul(g, relu_mask(x))};
      });
}

Tensor sigmoid(const Tensor& x) {
  auto sig = [](double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                    : std::exp(v) / (1.0 + std::exp(v));
  };
  return unary_elementwise(
      "sigmoid", x, sig,
      [x](const Tensor& g) -> std::vector<Tensor> {
        Tensor s = sigmoid(x);  // recomputed so double backward sees the graph
        return {mul(g, mul(s, add_scalar(neg(s), 1.0)))};
      });
}

Tensor relu_mask(const Tensor& x) {
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? 1.0 : 0.0;
  return Tensor::from_data(x.shape(), std::move(out));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(static_cast<size_t>(m * n), 0.0);
  // Row-parallel ikj kernel; each output row is accumulated sequentially,
  // so the result is bitwise identical for any thread count.
  parallel_for(m, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      double* __restrict crow = out.data() + i * n;
      const double* arow = av.data() + i * k;
      for (int64_t kk = 0; kk < k; ++kk) {
        const double aik = arow[kk];
        if (aik == 0.0) continue;
        const double* __restrict brow = bv.data() + kk * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
      }
    }
  });
  return make_op("matmul", {m, n}, std::move(out), {a, b},
                 [a, b](const Tensor& g) -> std::vector<Tensor> {
                   return {matmul(g, transpose(b)), matmul(transpose(a), g)};
                 });
}

Tensor transpose(const Tensor& x) {
  if (x.ndim() != 2) {
    throw ShapeError("transpose: expected 2-D, got " + shape_str(x.shape()));
  }
  return permute(x, {1, 0});
}

Tensor permute(const Tensor& x, std::vector<int> perm) {
  const int nd = x.ndim();
  if (static_cast<int>(perm.size()) != nd) {
    throw ShapeError("permute: perm size " + std::to_string(perm.size()) +
                     " vs ndim " + std::to_string(nd));
  }
  Shape out_shape(nd);
  for (int i = 0; i < nd; ++i) out_shape[i] = x.dim(perm[i]);
  const auto in_st = row_major_strides(x.shape());
  std::vector<int64_t> st(nd);
  for (int i = 0; i < nd; ++i) st[i] = in_st[perm[i]];

  const auto& xv = x.data();
  const int64_t total = x.numel();
  std::vector<double> out(static_cast<size_t>(total));
  std::vector<int64_t> idx(nd, 0);
  int64_t src = 0;
  for (int64_t t = 0; t < total; ++t) {
    out[static_cast<size_t>(t)] = xv[static_cast<size_t>(src)];
    for (int ax = nd - 1; ax >= 0; --ax) {
      ++idx[ax];
      src += st[ax];
      if (idx[ax] < out_shape[ax]) break;
      idx[ax] = 0;
      src -= st[ax] * out_shape[ax];
    }
  }
  std::vector<int> inv(perm.size());
  for (int i = 0; i < nd; ++i) inv[perm[i]] = i;
  return make_op("permute", std::move(out_shape), std::move(out), {x},
                 [inv](const Tensor& g) -> std::vector<Tensor> {
                   return {permute(g, inv)};
                 });
}

Tensor reshape(const Tensor& x, Shape shape) {
  int64_t known = 1;
  int infer = -1;
  for (size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (infer >= 0) throw ShapeError("reshape: more than one -1 dim");
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0) {
    if (known == 0 || x.numel() % known != 0) {
      throw ShapeError("reshape: cannot infer dim for " + shape_str(x.shape()) +
                       " -> " + shape_str(shape));
    }
    shape[static_cast<size_t>(infer)] = x.numel() / known;
  }
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                     " changes element count");
  }
  Shape orig = x.shape();
  return make_op_shared("reshape", std::move(shape), x.impl()->data, {x},
                        [orig](const Tensor& g) -> std::vector<Tensor> {
                          return {reshape(g, orig)};
                        });
}

Tensor broadcast_to(const Tensor& x, Shape shape) {
  Shape check = broadcast_shape("broadcast_to", x.shape(), shape);
  if (check != shape) {
    throw ShapeError("broadcast_to: " + shape_str(x.shape()) + " -> " +
                     shape_str(shape) + " is not a pure broadcast");
  }
  Tensor one = Tensor::zeros(shape);
  auto data =
      bcast_binary("broadcast_to", x, one, shape, [](double a, double) { return a; });
  Shape orig = x.shape();
  return make_op("broadcast_to", std::move(shape), std::move(data), {x},
                 [orig](const Tensor& g) -> std::vector<Tensor> {
                   return {sum_to(g, orig)};
                 });
}

Tensor sum_to(const Tensor& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  const int nd = x.ndim();
  const int target_nd = static_cast<int>(shape.size());
  std::vector<int> axes;
  for (int i = 0; i < nd - target_nd; ++i) axes.push_back(i);
  for (int i = 0; i < target_nd; ++i) {
    if (shape[i] == 1 && x.dim(nd - target_nd + i) != 1) {
      axes.push_back(nd - target_nd + i);
    }
  }
  Tensor summed = axes.empty() ? x : sum_axes(x, axes, /*keepdims=*/true);
  if (summed.shape() == shape) return summed;
  return reshape(summed, shape);
}

Tensor sum_axes(const Tensor& x, std::vector<int> axes_in, bool keepdims) {
  const int nd = x.ndim();
  auto axes = normalize_axes("sum_axes", std::move(axes_in), nd);
  Shape keep_shape = x.shape();
  for (int a : axes) keep_shape[static_cast<size_t>(a)] = 1;

  const auto& xv = x.data();
  const int64_t out_n = shape_numel(keep_shape);
  std::vector<double> out(static_cast<size_t>(out_n), 0.0);
  const auto out_st = bcast_strides(keep_shape, x.shape());
  const int64_t total = x.numel();
  const Shape& xs = x.shape();
  // Sequential accumulation in input order: deterministic.
  std::vector<int64_t> idx(static_cast<size_t>(nd), 0);
  int64_t oi = 0;
  for (int64_t t = 0; t < total; ++t) {
    out[static_cast<size_t>(oi)] += xv[static_cast<size_t>(t)];
    for (int ax = nd - 1; ax >= 0; --ax) {
      ++idx[ax];
      oi += out_st[ax];
      if (idx[ax] < xs[ax]) break;
      idx[ax] = 0;
      oi -= out_st[ax] * xs[ax];
    }
  }

  Shape out_shape;
  if (keepdims) {
    out_shape = keep_shape;
  } else {
    for (int i = 0; i < nd; ++i) {
      if (!std::binary_search(axes.begin(), axes.end(), i)) {
        out_shape.push_back(x.dim(i));
      }
    }
  }
  Shape xshape = x.shape();
  return make_op("sum_axes", std::move(out_shape), std::move(out), {x},
                 [xshape, keep_shape](const Tensor& g) -> std::vector<Tensor> {
                   Tensor gk = g.shape() == keep_shape ? g : reshape(g, keep_shape);
                   return {broadcast_to(gk, xshape)};
                 });
}

Tensor sum_all(const Tensor& x) {
  std::vector<int> axes(static_cast<size_t>(x.ndim()));
  std::iota(axes.begin(), axes.end(), 0);
  if (axes.empty()) return x;
  return sum_axes(x, axes, /*keepdims=*/false);
}

Tensor mean_all(const Tensor& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  if (xs.empty()) throw ShapeError("concat: empty input list");
  const int nd = xs[0].ndim();
  if (axis < 0) axis += nd;
  int64_t cat_dim = 0;
  for (const auto& t : xs) {
    if (t.ndim() != nd) throw ShapeError("concat: rank mismatch");
    for (int i = 0; i < nd; ++i) {
      if (i != axis && t.dim(i) != xs[0].dim(i)) {
        throw ShapeError("concat: shape mismatch " + shape_str(t.shape()) + " vs " +
                         shape_str(xs[0].shape()));
      }
    }
    cat_dim += t.dim(axis);
  }
  Shape out_shape = xs[0].shape();
  out_shape[static_cast<size_t>(axis)] = cat_dim;

  const auto st = row_major_strides(out_shape);
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= out_shape[i];
  for (int i = axis + 1; i < nd; ++i) inner *= out_shape[i];

  std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
  int64_t off = 0;
  std::vector<int64_t> offsets;
  for (const auto& t : xs) {
    offsets.push_back(off);
    const auto& tv = t.data();
    const int64_t td = t.dim(axis);
    for (int64_t o = 0; o < outer; ++o) {
      std::memcpy(out.data() + (o * cat_dim + off) * inner,
                  tv.data() + o * td * inner,
                  static_cast<size_t>(td * inner) * sizeof(double));
    }
    off += td;
  }
  std::vector<int64_t> dims;
  for (const auto& t : xs) dims.push_back(t.dim(axis));
  return make_op("concat", std::move(out_shape), std::move(out), xs,
                 [axis, dims](const Tensor& g) -> std::vector<Tensor> {
                   std::vector<Tensor> grads;
                   int64_t start = 0;
                   for (int64_t d : dims) {
                     grads.push_back(slice(g, axis, start, d));
                     start += d;
                   }
                   return grads;
                 });
}

namespace {

// Embeds `g` into zeros of the pre-slice shape; adjoint of slice.
Tensor slice_adj(const Tensor& g, int axis, int64_t start, Shape full_shape);

Tensor slice_impl(const Tensor& x, int axis, int64_t start, int64_t len) {
  const int nd = x.ndim();
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd || start < 0 || len < 0 || start + len > x.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") invalid for axis " +
                     std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[static_cast<size_t>(axis)] = len;
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < nd; ++i) inner *= x.dim(i);
  const int64_t xd = x.dim(axis);

  const auto& xv = x.data();
  std::vector<double> out(static_cast<size_t>(outer * len * inner));
  for (int64_t o = 0; o < outer; ++o) {
    std::memcpy(out.data() + o * len * inner,
                xv.data() + (o * xd + start) * inner,
                static_cast<size_t>(len * inner) * sizeof(double));
  }
  Shape full = x.shape();
  return make_op("slice", std::move(out_shape), std::move(out), {x},
                 [axis, start, full](const Tensor& g) -> std::vector<Tensor> {
                   return {slice_adj(g, axis, start, full)};
                 });
}

Tensor slice_adj(const Tensor& g, int axis, int64_t start, Shape full_shape) {
  const int nd = static_cast<int>(full_shape.size());
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= full_shape[i];
  for (int i = axis + 1; i < nd; ++i) inner *= full_shape[i];
  const int64_t fd = full_shape[static_cast<size_t>(axis)];
  const int64_t len = g.dim(axis);

  const auto& gv = g.data();
  std::vector<double> out(static_cast<size_t>(shape_numel(full_shape)), 0.0);
  for (int64_t o = 0; o < outer; ++o) {
    std::memcpy(out.data() + (o * fd + start) * inner,
                gv.data() + o * len * inner,
                static_cast<size_t>(len * inner) * sizeof(double));
  }
  return make_op("slice_adj", std::move(full_shape), std::move(out), {g},
                 [axis, start, len](const Tensor& gg) -> std::vector<Tensor> {
                   return {slice_impl(gg, axis, start, len)};
                 });
}

}  // namespace

Tensor slice(const Tensor& x, int axis, int64_t start, int64_t len) {
  return slice_impl(x, axis, start, len);
}

Tensor row_max_const(const Tensor& x, int axis) {
  const int nd = x.ndim();
  if (axis < 0) axis += nd;
  Shape keep = x.shape();
  keep[static_cast<size_t>(axis)] = 1;
  const auto st = bcast_strides(keep, x.shape());
  const auto& xv = x.data();
  std::vector<double> out(static_cast<size_t>(shape_numel(keep)),
                          -std::numeric_limits<double>::infinity());
  std::vector<int64_t> idx(static_cast<size_t>(nd), 0);
  int64_t oi = 0;
  const Shape& xs = x.shape();
  for (int64_t t = 0; t < x.numel(); ++t) {
    out[static_cast<size_t>(oi)] = std::max(out[static_cast<size_t>(oi)], xv[static_cast<size_t>(t)]);
    for (int ax = nd - 1; ax >= 0; --ax) {
      ++idx[ax];
      oi += st[ax];
      if (idx[ax] < xs[ax]) break;
      idx[ax] = 0;
      oi -= st[ax] * xs[ax];
    }
  }
  return Tensor::from_data(std::move(keep), std::move(out));
}

Tensor softmax(const Tensor& x, int axis) {
  const int nd = x.ndim();
  if (axis < 0) axis += nd;
  // Stable forward; VJP recomputes softmax(x) so second-order is exact.
  const auto& xv = x.data();
  Shape keep = x.shape();
  keep[static_cast<size_t>(axis)] = 1;
  Tensor mx = row_max_const(x, axis);
  const auto st = bcast_strides(keep, x.shape());
  const auto& mv = mx.data();

  std::vector<double> out(xv.size());
  std::vector<double> denom(mv.size(), 0.0);
  const Shape& xs = x.shape();
  std::vector<int64_t> idx(static_cast<size_t>(nd), 0);
  int64_t oi = 0;
  for (int64_t t = 0; t < x.numel(); ++t) {
    const double e = std::exp(xv[static_cast<size_t>(t)] - mv[static_cast<size_t>(oi)]);
    out[static_cast<size_t>(t)] = e;
    denom[static_cast<size_t>(oi)] += e;
    for (int ax = nd - 1; ax >= 0; --ax) {
      ++idx[ax];
      oi += st[ax];
      if (idx[ax] < xs[ax]) break;
      idx[ax] = 0;
      oi -= st[ax] * xs[ax];
    }
  }
  std::fill(idx.begin(), idx.end(), 0);
  oi = 0;
  for (int64_t t = 0; t < x.numel(); ++t) {
    out[static_cast<size_t>(t)] /= denom[static_cast<size_t>(oi)];
    for (int ax = nd - 1; ax >= 0; --ax) {
      ++idx[ax];
      oi += st[ax];
      if (idx[ax] < xs[ax]) break;
      idx[ax] = 0;
      oi -= st[ax] * xs[ax];
    }
  }
  return make_op("softmax", x.shape(), std::move(out), {x},
                 [x, axis](const Tensor& g) -> std::vector<Tensor> {
                   Tensor y = softmax(x, axis);
                   Tensor gy = mul(g, y);
                   Tensor dot = sum_axes(gy, {axis}, /*keepdims=*/true);
                   return {sub(gy, mul(y, dot))};
                 });
}

Tensor make_onehot(std::span<const int32_t> labels, int64_t num_classes) {
  std::vector<double> out(labels.size() * static_cast<size_t>(num_classes), 0.0);
  for (size_t i = 0; i < labels.size(); ++i) {
    const int32_t y = labels[i];
    if (y < 0 || y >= num_classes) {
      throw DataError("make_onehot: label " + std::to_string(y) +
                      " outside [0," + std::to_string(num_classes) + ")");
    }
    out[i * static_cast<size_t>(num_classes) + static_cast<size_t>(y)] = 1.0;
  }
  return Tensor::from_data({static_cast<int64_t>(labels.size()), num_classes},
                           std::move(out));
}

Tensor cross_entropy_with_softmax(const Tensor& logits, const Tensor& onehot) {
  if (logits.ndim() != 2 || logits.shape() != onehot.shape()) {
    throw ShapeError("cross_entropy: logits " + shape_str(logits.shape()) +
                     " vs targets " + shape_str(onehot.shape()));
  }
  const int64_t batch = logits.dim(0);
  Tensor mx = row_max_const(logits, 1);                       // [B,1] constant
  Tensor shifted = sub(logits, mx);                           // exact derivative
  Tensor lse = add(log(sum_axes(exp(shifted), {1}, true)), mx);  // [B,1]
  Tensor picked = sum_axes(mul(logits, onehot), {1}, true);   // [B,1]
  Tensor losses = sub(lse, picked);
  return scale(sum_all(losses), 1.0 / static_cast<double>(batch));
}

namespace {

struct ConvDims {
  int64_t n, c, h, w, kh, kw, stride, pad, oh, ow;
};

ConvDims conv_dims(const char* op, const Shape& x_shape, int64_t kh, int64_t kw,
                   int64_t stride, int64_t pad) {
  if (x_shape.size() != 4) {
    throw ShapeError(std::string(op) + ": expected [N,C,H,W], got " + shape_str(x_shape));
  }
  ConvDims d;
  d.n = x_shape[0];
  d.c = x_shape[1];
  d.h = x_shape[2];
  d.w = x_shape[3];
  d.kh = kh;
  d.kw = kw;
  d.stride = stride;
  d.pad = pad;
  d.oh = (d.h + 2 * pad - kh) / stride + 1;
  d.ow = (d.w + 2 * pad - kw) / stride + 1;
  if (d.oh <= 0 || d.ow <= 0) {
    throw ShapeError(std::string(op) + ": kernel " + std::to_string(kh) + "x" +
                     std::to_string(kw) + " too large for input " + shape_str(x_shape));
  }
  return d;
}

}  // namespace

Tensor im2col(const Tensor& x, int64_t kh, int64_t kw, int64_t stride, int64_t pad) {
  const ConvDims d = conv_dims("im2col", x.shape(), kh, kw, stride, pad);
  const int64_t rows = d.n * d.oh * d.ow;
  const int64_t cols = d.c * kh * kw;
  const auto& xv = x.data();
  std::vector<double> out(static_cast<size_t>(rows * cols), 0.0);
  parallel_for(d.n, [&](int64_t lo, int64_t hi) {
    for (int64_t n = lo; n < hi; ++n) {
      for (int64_t oy = 0; oy < d.oh; ++oy) {
        for (int64_t ox = 0; ox < d.ow; ++ox) {
          double* row = out.data() + ((n * d.oh + oy) * d.ow + ox) * cols;
          for (int64_t c = 0; c < d.c; ++c) {
            for (int64_t ky = 0; ky < kh; ++ky) {
              const int64_t iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= d.h) continue;
              const double* src = xv.data() + ((n * d.c + c) * d.h + iy) * d.w;
              double* dst = row + (c * kh + ky) * kw;
              for (int64_t kx = 0; kx < kw; ++kx) {
                const int64_t ix = ox * stride - pad + kx;
                if (ix >= 0 && ix < d.w) dst[kx] = src[ix];
              }
            }
          }
        }
      }
    }
  });
  Shape x_shape = x.shape();
  return make_op("im2col", {rows, cols}, std::move(out), {x},
                 [x_shape, kh, kw, stride, pad](const Tensor& g) -> std::vector<Tensor> {
                   return {col2im(g, x_shape, kh, kw, stride, pad)};
                 });
}

Tensor col2im(const Tensor& cols_t, Shape x_shape, int64_t kh, int64_t kw,
              int64_t stride, int64_t pad) {
  const ConvDims d = conv_dims("col2im", x_shape, kh, kw, stride, pad);
  const int64_t cols = d.c * kh * kw;
  if (cols_t.ndim() != 2 || cols_t.dim(0) != d.n * d.oh * d.ow || cols_t.dim(1) != cols) {
    throw ShapeError("col2im: got " + shape_str(cols_t.shape()) + " for image " +
                     shape_str(x_shape));
  }
  const auto& gv = cols_t.data();
  std::vector<double> out(static_cast<size_t>(shape_numel(x_shape)), 0.0);
  // Scatter-add per image; images are disjoint so batch-parallel is safe.
  parallel_for(d.n, [&](int64_t lo, int64_t hi) {
    for (int64_t n = lo; n < hi; ++n) {
      for (int64_t oy = 0; oy < d.oh; ++oy) {
        for (int64_t ox = 0; ox < d.ow; ++ox) {
          const double* row = gv.data() + ((n * d.oh + oy) * d.ow + ox) * cols;
          for (int64_t c = 0; c < d.c; ++c) {
            for (int64_t ky = 0; ky < kh; ++ky) {
              const int64_t iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= d.h) continue;
              double* dst = out.data() + ((n * d.c + c) * d.h + iy) * d.w;
              const double* src = row + (c * kh + ky) * kw;
              for (int64_t kx = 0; kx < kw; ++kx) {
                const int64_t ix = ox * stride - pad + kx;
                if (ix >= 0 && ix < d.w) dst[ix] += src[kx];
              }
            }
          }
        }
      }
    }
  });
  return make_op("col2im", std::move(x_shape), std::move(out), {cols_t},
                 [kh, kw, stride, pad](const Tensor& g) -> std::vector<Tensor> {
                   return {im2col(g, kh, kw, stride, pad)};
                 });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int64_t stride,
              int64_t pad) {
  if (w.ndim() != 4) {
    throw ShapeError("conv2d: weight must be [F,C,kh,kw], got " + shape_str(w.shape()));
  }
  const int64_t f = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const ConvDims d = conv_dims("conv2d", x.shape(), kh, kw, stride, pad);
  if (w.dim(1) != d.c) {
    throw ShapeError("conv2d: input channels " + std::to_string(d.c) +
                     " vs weight channels " + std::to_string(w.dim(1)));
  }
  if (b.ndim() != 1 || b.dim(0) != f) {
    throw ShapeError("conv2d: bias must be [" + std::to_string(f) + "], got " +
                     shape_str(b.shape()));
  }
  Tensor colsm = im2col(x, kh, kw, stride, pad);          // [N*OH*OW, C*kh*kw]
  Tensor w2 = reshape(w, {f, d.c * kh * kw});
  Tensor y2 = matmul(colsm, transpose(w2));               // [N*OH*OW, F]
  Tensor y = permute(reshape(y2, {d.n, d.oh, d.ow, f}), {0, 3, 1, 2});
  return add(y, reshape(b, {1, f, 1, 1}));
}

namespace {

// Fixed argmax map of one maxpool application. Scatter and gather over it
// are adjoint linear maps, each other's VJP.
struct PoolMap {
  std::vector<int64_t> arg;  // winning flat input index per output element
  Shape x_shape, out_shape;
};

Tensor pool_gather(const Tensor& t, const std::shared_ptr<const PoolMap>& map);

Tensor pool_scatter(const Tensor& g, const std::shared_ptr<const PoolMap>& map) {
  const auto& gv = g.data();
  std::vector<double> dx(static_cast<size_t>(shape_numel(map->x_shape)), 0.0);
  for (size_t i = 0; i < map->arg.size(); ++i) {
    dx[static_cast<size_t>(map->arg[i])] += gv[i];
  }
  Shape xs = map->x_shape;
  return make_op("maxpool_scatter", std::move(xs), std::move(dx), {g},
                 [map](const Tensor& gg) -> std::vector<Tensor> {
                   return {pool_gather(gg, map)};
                 });
}

Tensor pool_gather(const Tensor& t, const std::shared_ptr<const PoolMap>& map) {
  const auto& tv = t.data();
  std::vector<double> o(map->arg.size());
  for (size_t i = 0; i < map->arg.size(); ++i) {
    o[i] = tv[static_cast<size_t>(map->arg[i])];
  }
  Shape os = map->out_shape;
  return make_op("maxpool_gather", std::move(os), std::move(o), {t},
                 [map](const Tensor& gg) -> std::vector<Tensor> {
                   return {pool_scatter(gg, map)};
                 });
}

}  // namespace

Tensor maxpool2d(const Tensor& x, int64_t k, int64_t stride) {
  const ConvDims d = conv_dims("maxpool2d", x.shape(), k, k, stride, /*pad=*/0);
  const auto& xv = x.data();
  const int64_t planes = d.n * d.c;
  const int64_t out_plane = d.oh * d.ow;
  std::vector<double> out(static_cast<size_t>(planes * out_plane));
  auto map = std::make_shared<PoolMap>();
  map->arg.resize(static_cast<size_t>(planes * out_plane));
  map->x_shape = x.shape();
  map->out_shape = {d.n, d.c, d.oh, d.ow};
  parallel_for(planes, [&](int64_t lo, int64_t hi) {
    for (int64_t p = lo; p < hi; ++p) {
      const double* plane = xv.data() + p * d.h * d.w;
      for (int64_t oy = 0; oy < d.oh; ++oy) {
        for (int64_t ox = 0; ox < d.ow; ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          int64_t best_i = 0;
          for (int64_t ky = 0; ky < k; ++ky) {
            for (int64_t kx = 0; kx < k; ++kx) {
              const int64_t i = (oy * stride + ky) * d.w + ox * stride + kx;
              if (plane[i] > best) {  // ties -> first position
                best = plane[i];
                best_i = i;
              }
            }
          }
          const int64_t o = p * out_plane + oy * d.ow + ox;
          out[static_cast<size_t>(o)] = best;
          map->arg[static_cast<size_t>(o)] = p * d.h * d.w + best_i;
        }
      }
    }
  });
  Shape out_shape = map->out_shape;
  std::shared_ptr<const PoolMap> cmap = map;
  return make_op("maxpool2d", std::move(out_shape), std::move(out), {x},
                 [cmap](const Tensor& g) -> std::vector<Tensor> {
                   return {pool_scatter(g, cmap)};
                 });
}

Tensor avgpool2d(const Tensor& x, int64_t k, int64_t stride) {
  // Composite: fold channels into the batch so im2col windows never mix
  // channels, then average each window.
  const ConvDims d = conv_dims("avgpool2d", x.shape(), k, k, stride, /*pad=*/0);
  Tensor xc = reshape(x, {d.n * d.c, 1, d.h, d.w});
  Tensor colsm = im2col(xc, k, k, stride, 0);      // [N*C*OH*OW, k*k]
  Tensor summed = sum_axes(colsm, {1}, false);     // [N*C*OH*OW]
  Tensor pooled = reshape(summed, {d.n, d.c, d.oh, d.ow});
  return scale(pooled, 1.0 / static_cast<double>(k * k));
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.ndim() != 4) {
    throw ShapeError("global_avg_pool: expected [N,C,H,W], got " + shape_str(x.shape()));
  }
  const double denom = static_cast<double>(x.dim(2) * x.dim(3));
  return scale(sum_axes(x, {2, 3}, /*keepdims=*/false), 1.0 / denom);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || x.dim(1) != w.dim(1)) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " vs weight " +
                     shape_str(w.shape()));
  }
  return add(matmul(x, transpose(w)), reshape(b, {1, w.dim(0)}));
}

Tensor gather_rows(const Tensor& table, std::vector<int64_t> ids) {
  if (table.ndim() != 2) {
    throw ShapeError("gather_rows: table must be 2-D, got " + shape_str(table.shape()));
  }
  const int64_t n = table.dim(0), dcols = table.dim(1);
  for (int64_t id : ids) {
    if (id < 0 || id >= n) {
      throw DataError("gather_rows: id " + std::to_string(id) + " outside [0," +
                      std::to_string(n) + ")");
    }
  }
  const auto& tv = table.data();
  std::vector<double> out(ids.size() * static_cast<size_t>(dcols));
  for (size_t i = 0; i < ids.size(); ++i) {
    std::memcpy(out.data() + i * static_cast<size_t>(dcols),
                tv.data() + static_cast<size_t>(ids[i] * dcols),
                static_cast<size_t>(dcols) * sizeof(double));
  }
  return make_op("gather_rows", {static_cast<int64_t>(ids.size()), dcols},
                 std::move(out), {table},
                 [ids, n](const Tensor& g) -> std::vector<Tensor> {
                   return {scatter_rows(g, ids, n)};
                 });
}

Tensor scatter_rows(const Tensor& rows, std::vector<int64_t> ids, int64_t num_rows) {
  if (rows.ndim() != 2 || rows.dim(0) != static_cast<int64_t>(ids.size())) {
    throw ShapeError("scatter_rows: rows " + shape_str(rows.shape()) + " vs " +
                     std::to_string(ids.size()) + " ids");
  }
  const int64_t dcols = rows.dim(1);
  const auto& rv = rows.data();
  std::vector<double> out(static_cast<size_t>(num_rows * dcols), 0.0);
  for (size_t i = 0; i < ids.size(); ++i) {
    double* dst = out.data() + static_cast<size_t>(ids[i] * dcols);
    const double* src = rv.data() + i * static_cast<size_t>(dcols);
    for (int64_t j = 0; j < dcols; ++j) dst[j] += src[j];
  }
  return make_op("scatter_rows", {num_rows, dcols}, std::move(out), {rows},
                 [ids](const Tensor& g) -> std::vector<Tensor> {
                   return {gather_rows(g, ids)};
                 });
}

int64_t argmax_row(std::span<const double> row) {
  int64_t best = 0;
  for (size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = static_cast<int64_t>(i);
  }
  return best;
}

}  // namespace mfm
