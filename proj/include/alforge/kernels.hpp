#pragma once

#include <cstddef>
#include <vector>

#include "alforge/tensor.hpp"

// Dense numeric kernels. The functions in `alforge::kernels` split their
// outer loop across OpenMP threads; `alforge::kernels::serial` holds the
// single-threaded reference used by tests and the benchmark. Both visit
// every reduction in the same fixed order, so their results are bitwise
// identical for any thread count.
namespace alforge::kernels {

struct PoolResult {
  Tensor output;
  /// Flat input index of each output element's maximum.
  std::vector<std::size_t> argmax;
};

struct ConvGradients {
  Tensor input;
  Tensor kernels;
  Tensor bias;
};

/// a[m x k] * b[k x n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// a^T * b for a[k x m], b[k x n].
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// a * b^T for a[m x k], b[n x k].
Tensor matmul_nt(const Tensor& a, const Tensor& b);

/// Valid 3x3 cross-correlation, stride 1, plus per-channel bias.
/// input [Cin x H x W], kernels [Cout x Cin x 3 x 3], bias [Cout].
Tensor conv2d_valid(const Tensor& input, const Tensor& kernels, const Tensor& bias);
ConvGradients conv2d_valid_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output);

/// 2x2 max pooling with stride 2; an odd trailing row/column is dropped.
PoolResult maxpool2d(const Tensor& input);
Tensor maxpool2d_backward(const Tensor& grad_output, const std::vector<std::size_t>& argmax, const Shape& input_shape);

/// Row-wise softmax with max subtraction.
Tensor softmax(const Tensor& logits);

namespace serial {
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor conv2d_valid(const Tensor& input, const Tensor& kernels, const Tensor& bias);
ConvGradients conv2d_valid_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output);
PoolResult maxpool2d(const Tensor& input);
Tensor softmax(const Tensor& logits);
}  // namespace serial

}  // namespace alforge::kernels
