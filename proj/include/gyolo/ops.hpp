#pragma once

#include <initializer_list>
#include <span>

#include "gyolo/tensor.hpp"

namespace gyolo {

// Numeric primitives used by the network blocks. All of them are pure and
// deterministic: a given input always produces the same bits.
//
// Convolutions accumulate each output element as
//   acc = 0; for ky, for kx, for ci: acc += w * x;  out = acc + bias
// which is the order the reference loops in the tests replicate.

/// Cross-correlation. `bias` may be empty. Weight shape is
/// (out_channels, in_channels / groups, kh, kw).
Tensor conv2d(const Tensor& x, const Tensor& weight, std::span<const float> bias,
              const ConvParams& p);

/// conv2d restricted to groups == in_channels == out_channels.
Tensor depthwise_conv2d(const Tensor& x, const Tensor& weight,
                        const ConvParams& p, std::span<const float> bias = {});

/// y = gamma * (x - mean) / sqrt(var + eps) + beta, per channel.
Tensor batchnorm_infer(const Tensor& x, std::span<const float> gamma,
                       std::span<const float> beta, std::span<const float> mean,
                       std::span<const float> var, float eps);

float sigmoid(float x);
float silu(float x);
Tensor sigmoid(const Tensor& x);
Tensor silu(const Tensor& x);

/// Sliding-window maximum; padded cells are -inf and never win.
Tensor maxpool2d(const Tensor& x, int k, int s, int p);

Tensor upsample_nearest2x(const Tensor& x);

Tensor concat_channels(std::span<const Tensor* const> xs);
Tensor concat_channels(std::initializer_list<const Tensor*> xs);
Tensor slice_channels(const Tensor& x, int begin, int count);

Tensor add(const Tensor& x, const Tensor& y);
Tensor scale(const Tensor& x, float factor);

/// Softmax over the w axis of every (n, c, h) row.
Tensor softmax_lastdim(const Tensor& x);

/// (n, c, M, K) x (n, c, K, N) -> (n, c, M, N).
Tensor matmul_batched(const Tensor& a, const Tensor& b);

/// Swaps the h and w axes.
Tensor transpose_last2(const Tensor& x);

}  // namespace gyolo
