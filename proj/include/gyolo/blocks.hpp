#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gyolo/binder.hpp"
#include "gyolo/tensor.hpp"

namespace gyolo {

// Composite building blocks. Every block binds its parameters by path at
// construction ("{path}.weight", "{path}.gamma", ...) and is immutable
// afterwards; forward() is const and safe to call concurrently.

enum class Activation { SiLU, None };

inline constexpr float kBatchNormEps = 1e-3f;
inline constexpr int kRegMax = 16;

/// Convolution (no bias) + inference batchnorm + optional SiLU.
class ConvBlock {
 public:
  ConvBlock(ParamBinder& binder, const std::string& path, int c1, int c2, int k,
            int s = 1, int groups = 1, Activation act = Activation::SiLU);

  Tensor forward(const Tensor& x) const;

  int in_channels() const { return in_channels_; }
  int out_channels() const { return params_.out_channels; }
  const ConvParams& params() const { return params_; }
  Activation activation() const { return act_; }
  float eps() const { return eps_; }

  const Tensor& weight() const { return weight_; }
  Tensor& weight() { return weight_; }
  const std::vector<float>& gamma() const { return gamma_; }
  const std::vector<float>& beta() const { return beta_; }
  const std::vector<float>& running_mean() const { return mean_; }
  const std::vector<float>& running_var() const { return var_; }

 private:
  int in_channels_;
  ConvParams params_;
  Activation act_;
  float eps_;
  Tensor weight_;
  std::vector<float> gamma_, beta_, mean_, var_;
};

/// Bare convolution with bias, used for the detect head's output layers.
class PlainConv {
 public:
  PlainConv(ParamBinder& binder, const std::string& path, int c1, int c2,
            float bias_init);
  Tensor forward(const Tensor& x) const;
  int out_channels() const { return params_.out_channels; }

 private:
  int in_channels_;
  ConvParams params_;
  Tensor weight_;
  std::vector<float> bias_;
};

/// Ghost convolution: a primary conv produces c2/2 intrinsic maps, a cheap
/// depthwise 5x5 conv derives c2/2 ghost maps from them, and both halves are
/// concatenated.
class GhostConvBlock {
 public:
  GhostConvBlock(ParamBinder& binder, const std::string& path, int c1, int c2,
                 int k = 1, int s = 1, Activation act = Activation::SiLU);

  Tensor forward(const Tensor& x) const;

  int in_channels() const { return primary_.in_channels(); }
  int out_channels() const { return 2 * primary_.out_channels(); }
  const ConvBlock& primary() const { return primary_; }
  const ConvBlock& cheap() const { return cheap_; }
  ConvBlock& primary() { return primary_; }
  ConvBlock& cheap() { return cheap_; }

 private:
  ConvBlock primary_;
  ConvBlock cheap_;
};

/// Ghost bottleneck: expansion GhostConv -> [depthwise stride-s conv] ->
/// linear GhostConv, summed with the shortcut path.
class GhostBottleneck {
 public:
  GhostBottleneck(ParamBinder& binder, const std::string& path, int c1, int c2,
                  int k = 3, int s = 1);

  Tensor forward(const Tensor& x) const;
  Tensor ghost_path(const Tensor& x) const;
  Tensor shortcut(const Tensor& x) const;

  int out_channels() const { return reduce_.out_channels(); }
  int mid_channels() const { return expand_.out_channels(); }
  const GhostConvBlock& expand() const { return expand_; }
  const GhostConvBlock& reduce() const { return reduce_; }
  GhostConvBlock& reduce() { return reduce_; }
  bool identity_shortcut() const { return !shortcut_dw_.has_value(); }

 private:
  GhostConvBlock expand_;
  std::optional<ConvBlock> dw_;
  GhostConvBlock reduce_;
  std::optional<ConvBlock> shortcut_dw_;
  std::optional<ConvBlock> shortcut_pw_;
};

/// Standard residual bottleneck (two convs, add when shapes allow).
class BottleneckBlock {
 public:
  BottleneckBlock(ParamBinder& binder, const std::string& path, int c1, int c2,
                  bool shortcut, int k1, int k2, double e);
  Tensor forward(const Tensor& x) const;
  int out_channels() const { return cv2_.out_channels(); }

 private:
  ConvBlock cv1_;
  ConvBlock cv2_;
  bool add_;
};

/// C3 with 3x3 bottlenecks.
class C3kBlock {
 public:
  C3kBlock(ParamBinder& binder, const std::string& path, int c1, int c2, int n,
           bool shortcut = true, double e = 0.5, int k = 3);
  Tensor forward(const Tensor& x) const;
  int out_channels() const { return cv3_.out_channels(); }

 private:
  ConvBlock cv1_, cv2_, cv3_;
  std::vector<BottleneckBlock> m_;
};

/// C3 with ghost bottlenecks: cv3(concat(ghost_bottlenecks(cv1(x)), cv2(x))).
class C3GhostBlock {
 public:
  C3GhostBlock(ParamBinder& binder, const std::string& path, int c1, int c2,
               int n, double e = 0.5);
  Tensor forward(const Tensor& x) const;
  int out_channels() const { return cv3_.out_channels(); }
  int hidden_channels() const { return cv1_.out_channels(); }
  const std::vector<GhostBottleneck>& bottlenecks() const { return m_; }

 private:
  ConvBlock cv1_, cv2_, cv3_;
  std::vector<GhostBottleneck> m_;
};

/// CSP block with split halves and a running concatenation of unit outputs.
class C3k2Block {
 public:
  C3k2Block(ParamBinder& binder, const std::string& path, int c1, int c2, int n,
            bool c3k, double e = 0.5);
  Tensor forward(const Tensor& x) const;
  int out_channels() const { return cv2_.out_channels(); }

 private:
  using Unit = std::variant<BottleneckBlock, C3kBlock>;
  int hidden_;
  ConvBlock cv1_, cv2_;
  std::vector<Unit> m_;
};

/// Spatial pyramid pooling (fast): three chained 5x5 max-pools.
class SPPFBlock {
 public:
  SPPFBlock(ParamBinder& binder, const std::string& path, int c1, int c2,
            int k = 5);
  Tensor forward(const Tensor& x) const;
  int out_channels() const { return cv2_.out_channels(); }

 private:
  ConvBlock cv1_, cv2_;
  int k_;
};

/// Multi-head self-attention over spatial positions with a depthwise
/// positional branch on the values.
class AttentionBlock {
 public:
  AttentionBlock(ParamBinder& binder, const std::string& path, int dim,
                 int heads, double attn_ratio = 0.5);
  Tensor forward(const Tensor& x) const;
  /// Softmax-normalized attention map, shape (n, heads, N, N) with N = h*w.
  Tensor attention_weights(const Tensor& x) const;

  int heads() const { return heads_; }
  int key_dim() const { return key_dim_; }
  int head_dim() const { return head_dim_; }

 private:
  struct Split {
    Tensor q_t;  // (n, heads, N, key_dim)
    Tensor k;    // (n, heads, key_dim, N)
    Tensor v;    // (n, heads, head_dim, N)
  };
  Split split_qkv(const Tensor& x) const;
  Tensor attend(const Split& s) const;

  int dim_, heads_, head_dim_, key_dim_;
  float scale_;
  ConvBlock qkv_, proj_, pe_;
};

/// x + attn(x), then x + ffn(x).
class PSABlock {
 public:
  PSABlock(ParamBinder& binder, const std::string& path, int c, int heads);
  Tensor forward(const Tensor& x) const;
  const AttentionBlock& attention() const { return attn_; }

 private:
  AttentionBlock attn_;
  ConvBlock ffn0_, ffn1_;
};

/// Cross-stage partial block with PSA units on one half.
class C2PSABlock {
 public:
  C2PSABlock(ParamBinder& binder, const std::string& path, int c1, int c2, int n,
             double e = 0.5);
  Tensor forward(const Tensor& x) const;
  int out_channels() const { return cv2_.out_channels(); }
  const std::vector<PSABlock>& units() const { return m_; }
  /// The tensor the first PSA unit sees for input x.
  Tensor attended_input(const Tensor& x) const;

 private:
  int hidden_;
  ConvBlock cv1_, cv2_;
  std::vector<PSABlock> m_;
};

/// Anchor-free detect head over three scales. Each scale emits
/// 4*reg_max box-distribution channels followed by nc class logits.
class DetectHead {
 public:
  /// `legacy_class_branch` selects 3x3 Conv -> 3x3 Conv -> 1x1 for the class
  /// branch instead of the depthwise-separable pair.
  DetectHead(ParamBinder& binder, const std::string& path, int nc,
             std::array<int, 3> channels, bool legacy_class_branch,
             std::array<int, 3> strides = {8, 16, 32});

  std::vector<Tensor> forward(std::span<const Tensor* const> features) const;

  int nc() const { return nc_; }
  int out_channels() const { return 4 * kRegMax + nc_; }
  int box_width() const { return c2_; }
  int class_width() const { return c3_; }
  const std::array<int, 3>& strides() const { return strides_; }

 private:
  struct Branches {
    std::vector<ConvBlock> box;
    PlainConv box_out;
    std::vector<ConvBlock> cls;
    PlainConv cls_out;
  };
  int nc_;
  int c2_, c3_;
  std::array<int, 3> channels_;
  std::array<int, 3> strides_;
  std::vector<Branches> scales_;
};

}  // namespace gyolo
