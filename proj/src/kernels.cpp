#include "alforge/kernels.hpp"

#include <cmath>
#include <limits>

namespace alforge::kernels {

namespace {

using Index = std::ptrdiff_t;

void require_matrix(const Tensor& t, const char* name) {
  if (t.rank() != 2) throw DimensionError(std::string(name) + " must be 2-D, got " + shape_string(t.shape()));
}

Tensor matmul_impl(const Tensor& a, const Tensor& b, bool parallel) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul inner dimensions differ: " + shape_string(a.shape()) + " * " +
                         shape_string(b.shape()));
  }
  Tensor c({m, n});
  const double* pa = a.raw();
  const double* pb = b.raw();
  double* pc = c.raw();
#pragma omp parallel for schedule(static) if (parallel)
  for (Index i = 0; i < static_cast<Index>(m); ++i) {
    double* crow = pc + i * n;
    const double* arow = pa + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  require_finite(c, "matmul output");
  return c;
}

Tensor matmul_tn_impl(const Tensor& a, const Tensor& b, bool parallel) {
  require_matrix(a, "matmul_tn lhs");
  require_matrix(b, "matmul_tn rhs");
  const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul_tn leading dimensions differ: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  Tensor c({m, n});
  const double* pa = a.raw();
  const double* pb = b.raw();
  double* pc = c.raw();
#pragma omp parallel for schedule(static) if (parallel)
  for (Index i = 0; i < static_cast<Index>(m); ++i) {
    double* crow = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[p * m + i];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  require_finite(c, "matmul_tn output");
  return c;
}

Tensor matmul_nt_impl(const Tensor& a, const Tensor& b, bool parallel) {
  require_matrix(a, "matmul_nt lhs");
  require_matrix(b, "matmul_nt rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw DimensionError("matmul_nt inner dimensions differ: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  Tensor c({m, n});
  const double* pa = a.raw();
  const double* pb = b.raw();
  double* pc = c.raw();
#pragma omp parallel for schedule(static) if (parallel)
  for (Index i = 0; i < static_cast<Index>(m); ++i) {
    const double* arow = pa + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = pb + j * k;
      double sum = 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += arow[p] * brow[p];
      pc[i * n + j] = sum;
    }
  }
  require_finite(c, "matmul_nt output");
  return c;
}

void check_conv_shapes(const Tensor& input, const Tensor& kernels) {
  if (input.rank() != 3) throw DimensionError("conv2d input must be C x H x W, got " + shape_string(input.shape()));
  if (kernels.rank() != 4 || kernels.dim(2) != 3 || kernels.dim(3) != 3) {
    throw DimensionError("conv2d kernels must be Cout x Cin x 3 x 3, got " + shape_string(kernels.shape()));
  }
  if (kernels.dim(1) != input.dim(0)) {
    throw DimensionError("conv2d channel mismatch: input " + shape_string(input.shape()) + ", kernels " +
                         shape_string(kernels.shape()));
  }
  if (input.dim(1) < 3 || input.dim(2) < 3) {
    throw DimensionError("conv2d input smaller than 3x3: " + shape_string(input.shape()));
  }
}

Tensor conv2d_impl(const Tensor& input, const Tensor& kernels, const Tensor& bias, bool parallel) {
  check_conv_shapes(input, kernels);
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = kernels.dim(0);
  if (bias.size() != cout) throw DimensionError("conv2d bias length must equal output channels");
  const std::size_t oh = h - 2, ow = w - 2;
  Tensor out({cout, oh, ow});
  const double* in = input.raw();
  const double* ker = kernels.raw();
  double* po = out.raw();
#pragma omp parallel for schedule(static) if (parallel)
  for (Index o = 0; o < static_cast<Index>(cout); ++o) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double sum = bias[o];
        for (std::size_t c = 0; c < cin; ++c) {
          const double* kc = ker + (o * cin + c) * 9;
          const double* ic = in + c * h * w;
          for (std::size_t ky = 0; ky < 3; ++ky) {
            for (std::size_t kx = 0; kx < 3; ++kx) sum += kc[ky * 3 + kx] * ic[(y + ky) * w + x + kx];
          }
        }
        po[(o * oh + y) * ow + x] = sum;
      }
    }
  }
  require_finite(out, "conv2d output");
  return out;
}

ConvGradients conv2d_backward_impl(const Tensor& input, const Tensor& kernels, const Tensor& grad_output,
                                   bool parallel) {
  check_conv_shapes(input, kernels);
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = kernels.dim(0);
  const std::size_t oh = h - 2, ow = w - 2;
  if (grad_output.shape() != Shape{cout, oh, ow}) {
    throw DimensionError("conv2d backward: gradient shape " + shape_string(grad_output.shape()) +
                         " does not match output");
  }
  ConvGradients g{Tensor(input.shape()), Tensor(kernels.shape()), Tensor({cout})};
  const double* in = input.raw();
  const double* ker = kernels.raw();
  const double* go = grad_output.raw();
  double* gk = g.kernels.raw();
  double* gb = g.bias.raw();
  double* gi = g.input.raw();

#pragma omp parallel for schedule(static) if (parallel)
  for (Index o = 0; o < static_cast<Index>(cout); ++o) {
    const double* gplane = go + o * oh * ow;
    double bsum = 0.0;
    for (std::size_t i = 0; i < oh * ow; ++i) bsum += gplane[i];
    gb[o] = bsum;
    for (std::size_t c = 0; c < cin; ++c) {
      const double* ic = in + c * h * w;
      double* gkc = gk + (o * cin + c) * 9;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          double sum = 0.0;
          for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) sum += gplane[y * ow + x] * ic[(y + ky) * w + x + kx];
          }
          gkc[ky * 3 + kx] = sum;
        }
      }
    }
  }

#pragma omp parallel for schedule(static) if (parallel)
  for (Index c = 0; c < static_cast<Index>(cin); ++c) {
    double* gic = gi + c * h * w;
    for (std::size_t o = 0; o < cout; ++o) {
      const double* kc = ker + (o * cin + c) * 9;
      const double* gplane = go + o * oh * ow;
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          const double gv = gplane[y * ow + x];
          for (std::size_t ky = 0; ky < 3; ++ky) {
            for (std::size_t kx = 0; kx < 3; ++kx) gic[(y + ky) * w + x + kx] += gv * kc[ky * 3 + kx];
          }
        }
      }
    }
  }
  return g;
}

PoolResult maxpool_impl(const Tensor& input, bool parallel) {
  if (input.rank() != 3) throw DimensionError("maxpool2d input must be C x H x W, got " + shape_string(input.shape()));
  const std::size_t ch = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h < 2 || w < 2) throw DimensionError("maxpool2d input smaller than 2x2: " + shape_string(input.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  PoolResult r{Tensor({ch, oh, ow}), std::vector<std::size_t>(ch * oh * ow)};
  const double* in = input.raw();
  double* out = r.output.raw();
  std::size_t* arg = r.argmax.data();
#pragma omp parallel for schedule(static) if (parallel)
  for (Index c = 0; c < static_cast<Index>(ch); ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = (c * h + 2 * y) * w + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (c * h + 2 * y + dy) * w + 2 * x + dx;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (c * oh + y) * ow + x;
        out[o] = in[best];
        arg[o] = best;
      }
    }
  }
  require_finite(r.output, "maxpool2d output");
  return r;
}

Tensor softmax_impl(const Tensor& logits, bool parallel) {
  require_matrix(logits, "softmax logits");
  require_finite(logits, "softmax logits");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  Tensor out(logits.shape());
  const double* in = logits.raw();
  double* po = out.raw();
#pragma omp parallel for schedule(static) if (parallel)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    const double* row = in + i * c;
    double* orow = po + i * c;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = row[j] > mx ? row[j] : mx;
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (std::size_t j = 0; j < c; ++j) orow[j] /= sum;
  }
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) { return matmul_impl(a, b, true); }
Tensor matmul_tn(const Tensor& a, const Tensor& b) { return matmul_tn_impl(a, b, true); }
Tensor matmul_nt(const Tensor& a, const Tensor& b) { return matmul_nt_impl(a, b, true); }
Tensor conv2d_valid(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  return conv2d_impl(input, kernels, bias, true);
}
ConvGradients conv2d_valid_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output) {
  return conv2d_backward_impl(input, kernels, grad_output, true);
}
PoolResult maxpool2d(const Tensor& input) { return maxpool_impl(input, true); }
Tensor softmax(const Tensor& logits) { return softmax_impl(logits, true); }

Tensor maxpool2d_backward(const Tensor& grad_output, const std::vector<std::size_t>& argmax, const Shape& input_shape) {
  if (grad_output.size() != argmax.size()) throw DimensionError("maxpool2d backward: argmax size mismatch");
  Tensor g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_output[i];
  return g;
}

namespace serial {
Tensor matmul(const Tensor& a, const Tensor& b) { return matmul_impl(a, b, false); }
Tensor matmul_tn(const Tensor& a, const Tensor& b) { return matmul_tn_impl(a, b, false); }
Tensor matmul_nt(const Tensor& a, const Tensor& b) { return matmul_nt_impl(a, b, false); }
Tensor conv2d_valid(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  return conv2d_impl(input, kernels, bias, false);
}
ConvGradients conv2d_valid_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output) {
  return conv2d_backward_impl(input, kernels, grad_output, false);
}
PoolResult maxpool2d(const Tensor& input) { return maxpool_impl(input, false); }
Tensor softmax(const Tensor& logits) { return softmax_impl(logits, false); }
}  // namespace serial

}  // namespace alforge::kernels
