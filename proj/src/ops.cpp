#include "gyolo/ops.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#if defined(__AVX512F__) || defined(__AVX__)
#include <immintrin.h>
#endif

#include "gyolo/parallel.hpp"

namespace gyolo {

namespace {

constexpr int kRowBlock = 8;    // output channels per micro-kernel call
constexpr int kColTile = 64;    // output positions per parallel task
constexpr int kDepthBlock = 256;

// acc[r][j] (+)= sum_k w[k * 8 + r] * col[k * ld + j], k ascending.
// Only the first `rows` rows of `out` are read or written.
void micro_scalar(int kc, const float* w, const float* col, std::size_t ld,
                  float* out, std::size_t ldo, int rows, int ncols,
                  bool first) {
  for (int r = 0; r < rows; ++r) {
    for (int j = 0; j < ncols; ++j) {
      float acc = first ? 0.0f : out[r * ldo + j];
      for (int k = 0; k < kc; ++k) {
        acc += w[k * kRowBlock + r] * col[k * ld + j];
      }
      out[r * ldo + j] = acc;
    }
  }
}

#if defined(__AVX512F__)
constexpr int kSimdCols = 32;

// Same as micro_scalar for ncols <= 32; lanes past ncols are neither read
// nor written.
void micro_simd(int kc, const float* w, const float* col, std::size_t ld,
                float* out, std::size_t ldo, int rows, int ncols, bool first) {
  const auto lane_mask = [](int n) -> __mmask16 {
    return n >= 16 ? __mmask16(0xFFFF) : n <= 0 ? __mmask16(0) : __mmask16((1u << n) - 1u);
  };
  const __mmask16 m0 = lane_mask(ncols);
  const __mmask16 m1 = lane_mask(ncols - 16);
  __m512 acc[kRowBlock][2];
  for (int r = 0; r < kRowBlock; ++r) {
    if (!first && r < rows) {
      acc[r][0] = _mm512_maskz_loadu_ps(m0, out + r * ldo);
      acc[r][1] = _mm512_maskz_loadu_ps(m1, out + r * ldo + 16);
    } else {
      acc[r][0] = _mm512_setzero_ps();
      acc[r][1] = _mm512_setzero_ps();
    }
  }
  for (int k = 0; k < kc; ++k) {
    const float* c = col + k * ld;
    const __m512 c0 = _mm512_maskz_loadu_ps(m0, c);
    const __m512 c1 = _mm512_maskz_loadu_ps(m1, c + 16);
    const float* wk = w + k * kRowBlock;
    for (int r = 0; r < kRowBlock; ++r) {
      const __m512 wr = _mm512_set1_ps(wk[r]);
      acc[r][0] = _mm512_add_ps(acc[r][0], _mm512_mul_ps(wr, c0));
      acc[r][1] = _mm512_add_ps(acc[r][1], _mm512_mul_ps(wr, c1));
    }
  }
  for (int r = 0; r < rows; ++r) {
    _mm512_mask_storeu_ps(out + r * ldo, m0, acc[r][0]);
    _mm512_mask_storeu_ps(out + r * ldo + 16, m1, acc[r][1]);
  }
}
constexpr bool kMaskedTail = true;
#elif defined(__AVX__)
constexpr int kSimdCols = 8;

void micro_simd(int kc, const float* w, const float* col, std::size_t ld,
                float* out, std::size_t ldo, int rows, int, bool first) {
  __m256 acc[kRowBlock];
  for (int r = 0; r < kRowBlock; ++r) {
    acc[r] = (!first && r < rows) ? _mm256_loadu_ps(out + r * ldo)
                                  : _mm256_setzero_ps();
  }
  for (int k = 0; k < kc; ++k) {
    const __m256 c0 = _mm256_loadu_ps(col + k * ld);
    const float* wk = w + k * kRowBlock;
    for (int r = 0; r < kRowBlock; ++r) {
      acc[r] = _mm256_add_ps(acc[r], _mm256_mul_ps(_mm256_set1_ps(wk[r]), c0));
    }
  }
  for (int r = 0; r < rows; ++r) _mm256_storeu_ps(out + r * ldo, acc[r]);
}
constexpr bool kMaskedTail = false;
#else
constexpr int kSimdCols = 0;

void micro_simd(int, const float*, const float*, std::size_t, float*,
                std::size_t, int, int, bool) {}
constexpr bool kMaskedTail = false;
#endif

void check_weight(const Tensor& x, const Tensor& weight,
                  std::span<const float> bias, const ConvParams& p) {
  p.validate(x.c());
  const Shape expect{p.out_channels, x.c() / p.groups, p.kernel.h, p.kernel.w};
  if (!(weight.shape() == expect)) {
    throw ShapeError("conv2d weight shape " + weight.shape().str() +
                     ", expected " + expect.str());
  }
  if (!bias.empty() && static_cast<int>(bias.size()) != p.out_channels) {
    throw ShapeError("conv2d bias length " + std::to_string(bias.size()) +
                     " != out_channels " + std::to_string(p.out_channels));
  }
}

Tensor conv_depthwise(const Tensor& x, const Tensor& weight,
                      std::span<const float> bias, const ConvParams& p,
                      int oh, int ow) {
  const int channels = x.c();
  const int hp = x.h() + 2 * p.padding.h;
  const int wp = x.w() + 2 * p.padding.w;
  const int kh = p.kernel.h;
  const int kw = p.kernel.w;
  Tensor out({x.n(), channels, oh, ow});
  const std::size_t tasks = static_cast<std::size_t>(x.n()) * channels;
  parallel_for(tasks, [&](std::size_t t) {
    const int b = static_cast<int>(t / channels);
    const int c = static_cast<int>(t % channels);
    std::vector<float> padded(static_cast<std::size_t>(hp) * wp, 0.0f);
    const float* src = x.plane(b, c);
    for (int y = 0; y < x.h(); ++y) {
      std::copy_n(src + static_cast<std::size_t>(y) * x.w(), x.w(),
                  padded.data() + static_cast<std::size_t>(y + p.padding.h) * wp +
                      p.padding.w);
    }
    const float* wc = weight.plane(c, 0);
    float* dst = out.plane(b, c);
    for (int oy = 0; oy < oh; ++oy) {
      float* __restrict orow = dst + static_cast<std::size_t>(oy) * ow;
      std::fill_n(orow, ow, 0.0f);
      for (int ky = 0; ky < kh; ++ky) {
        const float* row = padded.data() +
                           static_cast<std::size_t>(oy * p.stride.h + ky * p.dilation.h) * wp;
        for (int kx = 0; kx < kw; ++kx) {
          const float wv = wc[ky * kw + kx];
          const float* __restrict in = row + kx * p.dilation.w;
          if (p.stride.w == 1) {
            for (int ox = 0; ox < ow; ++ox) orow[ox] += wv * in[ox];
          } else {
            for (int ox = 0; ox < ow; ++ox) orow[ox] += wv * in[ox * p.stride.w];
          }
        }
      }
      if (!bias.empty()) {
        for (int ox = 0; ox < ow; ++ox) orow[ox] += bias[c];
      }
    }
  });
  return out;
}

Tensor conv_gemm(const Tensor& x, const Tensor& weight,
                 std::span<const float> bias, const ConvParams& p, int oh,
                 int ow) {
  const int groups = p.groups;
  const int cig = x.c() / groups;
  const int og = p.out_channels / groups;
  const int kh = p.kernel.h;
  const int kw = p.kernel.w;
  const int depth = cig * kh * kw;
  const int positions = oh * ow;
  const bool pointwise = kh == 1 && kw == 1 && p.stride.h == 1 &&
                         p.stride.w == 1 && p.padding.h == 0 &&
                         p.padding.w == 0;
  const int row_blocks = (og + kRowBlock - 1) / kRowBlock;
  const int tiles = (positions + kColTile - 1) / kColTile;

  Tensor out({x.n(), p.out_channels, oh, ow});
  std::vector<float> packed(static_cast<std::size_t>(row_blocks) * depth *
                            kRowBlock);

  for (int b = 0; b < x.n(); ++b) {
    for (int g = 0; g < groups; ++g) {
      // packed[(rb * depth + k) * 8 + r], k enumerates (ky, kx, ci).
      std::fill(packed.begin(), packed.end(), 0.0f);
      for (int o = 0; o < og; ++o) {
        const float* wo = weight.plane(g * og + o, 0);
        float* dst = packed.data() +
                     static_cast<std::size_t>(o / kRowBlock) * depth * kRowBlock +
                     o % kRowBlock;
        for (int ky = 0; ky < kh; ++ky) {
          for (int kx = 0; kx < kw; ++kx) {
            for (int ci = 0; ci < cig; ++ci) {
              const int k = (ky * kw + kx) * cig + ci;
              dst[static_cast<std::size_t>(k) * kRowBlock] =
                  wo[(ci * kh + ky) * kw + kx];
            }
          }
        }
      }

      parallel_for(static_cast<std::size_t>(tiles), [&](std::size_t t) {
        const int n0 = static_cast<int>(t) * kColTile;
        const int nt = std::min(kColTile, positions - n0);
        std::vector<float> colbuf;
        const float* col = nullptr;
        std::size_t ld = 0;
        if (pointwise) {
          col = x.plane(b, g * cig) + n0;
          ld = static_cast<std::size_t>(x.h()) * x.w();
        } else {
          colbuf.assign(static_cast<std::size_t>(depth) * kColTile, 0.0f);
          int oys[kColTile];
          int oxs[kColTile];
          for (int j = 0; j < nt; ++j) {
            oys[j] = (n0 + j) / ow;
            oxs[j] = (n0 + j) % ow;
          }
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              for (int ci = 0; ci < cig; ++ci) {
                const int k = (ky * kw + kx) * cig + ci;
                const float* src = x.plane(b, g * cig + ci);
                float* dst = colbuf.data() + static_cast<std::size_t>(k) * kColTile;
                for (int j = 0; j < nt; ++j) {
                  const int iy = oys[j] * p.stride.h - p.padding.h + ky * p.dilation.h;
                  const int ix = oxs[j] * p.stride.w - p.padding.w + kx * p.dilation.w;
                  dst[j] = (iy >= 0 && iy < x.h() && ix >= 0 && ix < x.w())
                               ? src[static_cast<std::size_t>(iy) * x.w() + ix]
                               : 0.0f;
                }
              }
            }
          }
          col = colbuf.data();
          ld = kColTile;
        }

        float* outp = out.plane(b, g * og) + n0;
        const std::size_t ldo = static_cast<std::size_t>(positions);
        for (int k0 = 0; k0 < depth; k0 += kDepthBlock) {
          const int kc = std::min(kDepthBlock, depth - k0);
          const bool first = k0 == 0;
          for (int rb = 0; rb < row_blocks; ++rb) {
            const int rows = std::min(kRowBlock, og - rb * kRowBlock);
            const float* panel = packed.data() +
                                 (static_cast<std::size_t>(rb) * depth + k0) * kRowBlock;
            const float* cp = col + static_cast<std::size_t>(k0) * ld;
            float* op = outp + static_cast<std::size_t>(rb) * kRowBlock * ldo;
            int j = 0;
            if constexpr (kSimdCols > 0) {
              for (; j + kSimdCols <= nt; j += kSimdCols) {
                micro_simd(kc, panel, cp + j, ld, op + j, ldo, rows, kSimdCols, first);
              }
              if (kMaskedTail && j < nt) {
                micro_simd(kc, panel, cp + j, ld, op + j, ldo, rows, nt - j, first);
                j = nt;
              }
            }
            if (j < nt) {
              micro_scalar(kc, panel, cp + j, ld, op + j, ldo, rows, nt - j, first);
            }
          }
        }
        if (!bias.empty()) {
          for (int o = 0; o < og; ++o) {
            const float bv = bias[g * og + o];
            float* op = outp + static_cast<std::size_t>(o) * ldo;
            for (int j = 0; j < nt; ++j) op[j] += bv;
          }
        }
      });
    }
  }
  return out;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, std::span<const float> bias,
              const ConvParams& p) {
  check_weight(x, weight, bias, p);
  const int oh = p.out_h(x.h());
  const int ow = p.out_w(x.w());
  if (oh < 1 || ow < 1) {
    throw ShapeError("conv2d output would be empty for input " +
                     x.shape().str());
  }
  if (p.groups == x.c() && p.out_channels == x.c()) {
    return conv_depthwise(x, weight, bias, p, oh, ow);
  }
  return conv_gemm(x, weight, bias, p, oh, ow);
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& weight,
                        const ConvParams& p, std::span<const float> bias) {
  if (p.groups != x.c() || p.out_channels != x.c()) {
    throw ShapeError("depthwise_conv2d needs groups == in == out channels (" +
                     std::to_string(p.groups) + ", " + std::to_string(x.c()) +
                     ", " + std::to_string(p.out_channels) + ")");
  }
  return conv2d(x, weight, bias, p);
}

Tensor batchnorm_infer(const Tensor& x, std::span<const float> gamma,
                       std::span<const float> beta, std::span<const float> mean,
                       std::span<const float> var, float eps) {
  const auto c = static_cast<std::size_t>(x.c());
  if (gamma.size() != c || beta.size() != c || mean.size() != c ||
      var.size() != c) {
    throw ShapeError("batchnorm parameter length != channels " +
                     std::to_string(c));
  }
  Tensor y(x.shape());
  const std::size_t plane = x.shape().plane();
  for (int b = 0; b < x.n(); ++b) {
    for (int ch = 0; ch < x.c(); ++ch) {
      const float inv = 1.0f / std::sqrt(var[ch] + eps);
      const float* src = x.plane(b, ch);
      float* dst = y.plane(b, ch);
      for (std::size_t i = 0; i < plane; ++i) {
        dst[i] = gamma[ch] * ((src[i] - mean[ch]) * inv) + beta[ch];
      }
    }
  }
  return y;
}

namespace {

// Cephes-style expf. The scalar and vector forms perform the same IEEE
// operations in the same order, so they agree bit for bit.
constexpr float kExpHi = 88.0f;
constexpr float kExpLo = -87.0f;
constexpr float kLog2e = 1.44269504088896341f;
constexpr float kLn2Hi = 0.693359375f;
constexpr float kLn2Lo = -2.12194440e-4f;
constexpr float kExpP[6] = {1.9875691500e-4f, 1.3981999507e-3f, 8.3334519073e-3f,
                            4.1665795894e-2f, 1.6666665459e-1f, 5.0000001201e-1f};

float exp_approx(float x) {
  x = std::min(std::max(x, kExpLo), kExpHi);
  const float fx = std::floor(x * kLog2e + 0.5f);
  float r = x - fx * kLn2Hi;
  r = r - fx * kLn2Lo;
  const float z = r * r;
  float p = kExpP[0];
  for (int i = 1; i < 6; ++i) p = p * r + kExpP[i];
  const float y = p * z + r + 1.0f;
  const auto bits = static_cast<std::uint32_t>(static_cast<int>(fx) + 127) << 23;
  return y * std::bit_cast<float>(bits);
}

#if defined(__AVX512F__)
__m512 exp_approx(__m512 x) {
  x = _mm512_min_ps(_mm512_max_ps(x, _mm512_set1_ps(kExpLo)), _mm512_set1_ps(kExpHi));
  const __m512 fx = _mm512_roundscale_ps(
      _mm512_add_ps(_mm512_mul_ps(x, _mm512_set1_ps(kLog2e)), _mm512_set1_ps(0.5f)),
      _MM_FROUND_TO_NEG_INF | _MM_FROUND_NO_EXC);
  __m512 r = _mm512_sub_ps(x, _mm512_mul_ps(fx, _mm512_set1_ps(kLn2Hi)));
  r = _mm512_sub_ps(r, _mm512_mul_ps(fx, _mm512_set1_ps(kLn2Lo)));
  const __m512 z = _mm512_mul_ps(r, r);
  __m512 p = _mm512_set1_ps(kExpP[0]);
  for (int i = 1; i < 6; ++i) {
    p = _mm512_add_ps(_mm512_mul_ps(p, r), _mm512_set1_ps(kExpP[i]));
  }
  const __m512 y = _mm512_add_ps(_mm512_add_ps(_mm512_mul_ps(p, z), r), _mm512_set1_ps(1.0f));
  const __m512i e = _mm512_slli_epi32(
      _mm512_add_epi32(_mm512_cvttps_epi32(fx), _mm512_set1_epi32(127)), 23);
  return _mm512_mul_ps(y, _mm512_castsi512_ps(e));
}

__m512 sigmoid_v(__m512 x) {
  const __m512 one = _mm512_set1_ps(1.0f);
  return _mm512_div_ps(one, _mm512_add_ps(one, exp_approx(_mm512_sub_ps(_mm512_setzero_ps(), x))));
}
#endif

template <bool kSilu>
Tensor activate(const Tensor& x) {
  Tensor y(x.shape());
  const float* src = x.data().data();
  float* dst = y.data().data();
  const std::size_t n = x.data().size();
  std::size_t i = 0;
#if defined(__AVX512F__)
  for (; i + 16 <= n; i += 16) {
    const __m512 v = _mm512_loadu_ps(src + i);
    const __m512 s = sigmoid_v(v);
    _mm512_storeu_ps(dst + i, kSilu ? _mm512_mul_ps(v, s) : s);
  }
#endif
  for (; i < n; ++i) dst[i] = kSilu ? silu(src[i]) : sigmoid(src[i]);
  return y;
}

}  // namespace

float sigmoid(float x) { return 1.0f / (1.0f + exp_approx(0.0f - x)); }

float silu(float x) { return x * sigmoid(x); }

Tensor sigmoid(const Tensor& x) { return activate<false>(x); }

Tensor silu(const Tensor& x) { return activate<true>(x); }

Tensor maxpool2d(const Tensor& x, int k, int s, int p) {
  if (k < 1 || s < 1 || p < 0) throw ShapeError("invalid maxpool parameters");
  const int oh = (x.h() + 2 * p - k) / s + 1;
  const int ow = (x.w() + 2 * p - k) / s + 1;
  if (oh < 1 || ow < 1) throw ShapeError("maxpool output would be empty");
  Tensor y({x.n(), x.c(), oh, ow});
  for (int b = 0; b < x.n(); ++b) {
    for (int c = 0; c < x.c(); ++c) {
      const float* src = x.plane(b, c);
      float* dst = y.plane(b, c);
      for (int oy = 0; oy < oh; ++oy) {
        const int y0 = std::max(0, oy * s - p);
        const int y1 = std::min(x.h(), oy * s - p + k);
        for (int ox = 0; ox < ow; ++ox) {
          const int x0 = std::max(0, ox * s - p);
          const int x1 = std::min(x.w(), ox * s - p + k);
          float m = -std::numeric_limits<float>::infinity();
          for (int iy = y0; iy < y1; ++iy) {
            for (int ix = x0; ix < x1; ++ix) {
              m = std::max(m, src[static_cast<std::size_t>(iy) * x.w() + ix]);
            }
          }
          dst[static_cast<std::size_t>(oy) * ow + ox] = m;
        }
      }
    }
  }
  return y;
}

Tensor upsample_nearest2x(const Tensor& x) {
  Tensor y({x.n(), x.c(), 2 * x.h(), 2 * x.w()});
  for (int b = 0; b < x.n(); ++b) {
    for (int c = 0; c < x.c(); ++c) {
      const float* src = x.plane(b, c);
      float* dst = y.plane(b, c);
      const int w2 = 2 * x.w();
      for (int iy = 0; iy < x.h(); ++iy) {
        float* row = dst + static_cast<std::size_t>(2 * iy) * w2;
        for (int ix = 0; ix < x.w(); ++ix) {
          row[2 * ix] = row[2 * ix + 1] = src[static_cast<std::size_t>(iy) * x.w() + ix];
        }
        std::copy_n(row, w2, row + w2);
      }
    }
  }
  return y;
}

Tensor concat_channels(std::span<const Tensor* const> xs) {
  if (xs.empty()) throw ShapeError("concat_channels needs at least one input");
  const Shape& first = xs.front()->shape();
  int channels = 0;
  for (const Tensor* t : xs) {
    const Shape& s = t->shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels spatial mismatch: " + first.str() +
                       " vs " + s.str());
    }
    channels += s.c;
  }
  Tensor y({first.n, channels, first.h, first.w});
  const std::size_t plane = first.plane();
  for (int b = 0; b < first.n; ++b) {
    float* dst = y.plane(b, 0);
    for (const Tensor* t : xs) {
      const std::size_t len = static_cast<std::size_t>(t->c()) * plane;
      std::copy_n(t->plane(b, 0), len, dst);
      dst += len;
    }
  }
  return y;
}

Tensor concat_channels(std::initializer_list<const Tensor*> xs) {
  return concat_channels(std::span<const Tensor* const>(xs.begin(), xs.size()));
}

Tensor slice_channels(const Tensor& x, int begin, int count) {
  if (begin < 0 || count < 1 || begin + count > x.c()) {
    throw ShapeError("slice_channels [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " +
                     x.shape().str());
  }
  Tensor y({x.n(), count, x.h(), x.w()});
  const std::size_t len = static_cast<std::size_t>(count) * x.shape().plane();
  for (int b = 0; b < x.n(); ++b) {
    std::copy_n(x.plane(b, begin), len, y.plane(b, 0));
  }
  return y;
}

Tensor add(const Tensor& x, const Tensor& y) {
  if (!(x.shape() == y.shape())) {
    throw ShapeError("add shape mismatch: " + x.shape().str() + " vs " +
                     y.shape().str());
  }
  Tensor z(x.shape());
  auto a = x.data();
  auto b = y.data();
  auto d = z.data();
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] + b[i];
  return z;
}

Tensor scale(const Tensor& x, float factor) {
  Tensor z(x.shape());
  auto a = x.data();
  auto d = z.data();
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] * factor;
  return z;
}

Tensor softmax_lastdim(const Tensor& x) {
  Tensor y(x.shape());
  const std::size_t rows = static_cast<std::size_t>(x.n()) * x.c() * x.h();
  const std::size_t w = static_cast<std::size_t>(x.w());
  const float* src = x.data().data();
  float* dst = y.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = src + r * w;
    float* out = dst + r * w;
    float m = in[0];
    for (std::size_t i = 1; i < w; ++i) m = std::max(m, in[i]);
    float sum = 0.0f;
    for (std::size_t i = 0; i < w; ++i) {
      out[i] = std::exp(in[i] - m);
      sum += out[i];
    }
    const float inv = 1.0f / sum;
    for (std::size_t i = 0; i < w; ++i) out[i] *= inv;
  }
  return y;
}

Tensor matmul_batched(const Tensor& a, const Tensor& b) {
  if (a.n() != b.n() || a.c() != b.c() || a.w() != b.h()) {
    throw ShapeError("matmul_batched shape mismatch: " + a.shape().str() +
                     " x " + b.shape().str());
  }
  const int m = a.h();
  const int kdim = a.w();
  const int n = b.w();
  Tensor y({a.n(), a.c(), m, n});
  for (int bi = 0; bi < a.n(); ++bi) {
    for (int ci = 0; ci < a.c(); ++ci) {
      const float* pa = a.plane(bi, ci);
      const float* pb = b.plane(bi, ci);
      float* py = y.plane(bi, ci);
      for (int i = 0; i < m; ++i) {
        float* __restrict row = py + static_cast<std::size_t>(i) * n;
        for (int k = 0; k < kdim; ++k) {
          const float av = pa[static_cast<std::size_t>(i) * kdim + k];
          const float* __restrict brow = pb + static_cast<std::size_t>(k) * n;
          for (int j = 0; j < n; ++j) row[j] += av * brow[j];
        }
      }
    }
  }
  return y;
}

Tensor transpose_last2(const Tensor& x) {
  Tensor y({x.n(), x.c(), x.w(), x.h()});
  for (int b = 0; b < x.n(); ++b) {
    for (int c = 0; c < x.c(); ++c) {
      const float* src = x.plane(b, c);
      float* dst = y.plane(b, c);
      for (int i = 0; i < x.h(); ++i) {
        for (int j = 0; j < x.w(); ++j) {
          dst[static_cast<std::size_t>(j) * x.h() + i] =
              src[static_cast<std::size_t>(i) * x.w() + j];
        }
      }
    }
  }
  return y;
}

}  // namespace gyolo
