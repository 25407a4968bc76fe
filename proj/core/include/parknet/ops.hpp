#pragma once

#include <cstdint>
#include <vector>

#include "parknet/tensor.hpp"

namespace parknet {

// Elementwise with numpy-style right-aligned broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);

// Unary maps.
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log(const Tensor& x);  // domain-checked

// Matrix products over the two trailing axes; leading axes broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);
// a @ b^T with b stored row-major as (..., n, k); the attention score kernel.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

// Numerically stabilized softmax along `axis`. The masked form takes a 0/1
// tensor broadcastable to x; zero entries receive exactly zero output weight.
// A fully masked row is an error.
Tensor softmax(const Tensor& x, int64_t axis);
Tensor softmax_masked(const Tensor& x, const Tensor& mask, int64_t axis);

// softmax(q k^T / sqrt(d) [mask]) v. mask (optional) is 0/1, 1 = may attend,
// broadcastable to the score shape (..., Tq, Tk).
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 const Tensor& mask = Tensor());

// Mean negative log-likelihood over rows of (N, V) logits whose target does
// not equal ignore_index.
Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& targets,
                     int64_t ignore_index = -1);

// Row gather from a (V, d) table; gradients scatter-add back.
Tensor embedding(const Tensor& weight, const std::vector<int64_t>& indices);

// Normalization over the trailing axis with learnable gain/bias of that size.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// y = x W^T + b with W stored (out, in); b may be undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = Tensor());

// x (N, Cin, H, W), w (Cout, Cin, kh, kw), optional bias (Cout).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int64_t stride,
              int64_t padding);

// Mean pooling by an integer factor that must divide H and W; x (..., C, H, W).
Tensor avg_pool2d(const Tensor& x, int64_t factor);

// Reductions.
Tensor reduce_sum(const Tensor& x);
Tensor reduce_sum(const Tensor& x, int64_t axis, bool keepdims = false);
Tensor reduce_mean(const Tensor& x);
Tensor reduce_mean(const Tensor& x, int64_t axis, bool keepdims = false);

// Shape surgery (all copying; backward routes gradients to the source).
Tensor reshape(const Tensor& x, std::vector<int64_t> new_shape);
Tensor permute(const Tensor& x, const std::vector<int64_t>& dims);
Tensor slice(const Tensor& x, int64_t axis, int64_t start, int64_t length);
Tensor concat(const std::vector<Tensor>& parts, int64_t axis);

// Batch of normalized Gaussian attention maps over an h x w pixel grid.
// centers is (T, 2) rows of fractional (row, col) coordinates; output is
// (T, h*w) with every row summing to 1. Differentiable w.r.t. centers.
Tensor gaussian_maps(const Tensor& centers, double sigma, int64_t height, int64_t width);

}  // namespace parknet
