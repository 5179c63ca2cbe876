#pragma once

#include <cstddef>

#include "svrnn/autodiff.hpp"

namespace svrnn::ad {

enum class Activation { none, tanh, relu };

/// activation(w * x + b) for a vector x of length n, w of shape (m, n), b of length m.
Variable dense(const Variable& x, const Variable& w, const Variable& b, Activation activation);

struct ConvGeometry {
    std::size_t kernel = 3;
    std::size_t stride = 2;
    std::size_t padding = 1;
    std::size_t output_padding = 0;  // transposed convolution only
};

/// floor((n + 2p - k) / s) + 1; throws ShapeError when the result is not positive.
std::size_t conv_output_extent(std::size_t n, const ConvGeometry& g);
/// (n - 1) s - 2p + k + output_padding; throws ShapeError on invalid geometry.
std::size_t conv_transpose_output_extent(std::size_t n, const ConvGeometry& g);

/// Zero-padded cross-correlation. x: (C, H, W), kernels: (F, C, k, k) -> (F, H', W').
Variable conv2d(const Variable& x, const Variable& kernels, const ConvGeometry& g);

/// Adjoint of conv2d. x: (Cin, H, W), kernels: (Cin, Cout, k, k) -> (Cout, H', W').
Variable conv_transpose2d(const Variable& x, const Variable& kernels, const ConvGeometry& g);

/// Adds b[c] to every element of channel c of x: (C, H, W).
Variable channel_bias(const Variable& x, const Variable& b);

/// Central (h, w) window of x: (C, H, W). Odd margins put the extra row/column at the end.
Variable center_crop(const Variable& x, std::size_t h, std::size_t w);

Variable layer_norm(const Variable& x, const Variable& gain, const Variable& bias, double eps = 1e-5);

/// Diagonal Gaussian q = N(mu, diag(exp(log_var))).
struct GaussianLatent {
    Variable mu;
    Variable log_var;
};

/// KL(q || N(0, I)) = 1/2 sum_j (mu_j^2 + exp(lv_j) - lv_j - 1).
Variable kl_to_standard_normal(const GaussianLatent& q);

/// z = mu + exp(log_var / 2) * eps. eps is treated as a constant.
Variable reparameterize(const GaussianLatent& q, const Tensor& eps);

/// Mean of squared differences between x and the constant target y.
Variable mse(const Variable& x, const Tensor& y);
/// Sum of squared differences between x and the constant target y.
Variable sse(const Variable& x, const Tensor& y);

}  // namespace svrnn::ad
