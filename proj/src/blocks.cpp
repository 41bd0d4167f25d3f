#include "gyolo/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gyolo/ops.hpp"
#include "gyolo/rng.hpp"

namespace gyolo {

// ---------------------------------------------------------------- binders --

std::size_t element_count(const std::vector<std::uint32_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

namespace {

std::string dims_str(const std::vector<std::uint32_t>& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << ']';
  return os.str();
}

std::vector<float> role_default(const ParamDecl& decl) {
  const std::size_t n = element_count(decl.dims);
  switch (decl.role) {
    case ParamRole::BnGamma:
    case ParamRole::BnVar:
      return std::vector<float>(n, 1.0f);
    case ParamRole::BnBeta:
    case ParamRole::BnMean:
      return std::vector<float>(n, 0.0f);
    case ParamRole::Bias:
      return std::vector<float>(n, decl.bias_init);
    case ParamRole::ConvWeight:
      break;
  }
  return std::vector<float>(n, 0.0f);
}

}  // namespace

std::vector<float> RandomBinder::bind(const ParamDecl& decl) {
  std::vector<float> values = role_default(decl);
  if (decl.role == ParamRole::ConvWeight && !zero_weights_) {
    std::size_t fan_in = 1;
    for (std::size_t i = 1; i < decl.dims.size(); ++i) fan_in *= decl.dims[i];
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    Xoshiro256pp rng(parameter_seed(decl.name, seed_));
    for (auto& v : values) v = rng.uniform_symmetric(bound);
  }
  if (sink_) sink_->add({decl.name, DType::F32, decl.dims, values});
  return values;
}

std::vector<float> ContainerBinder::bind(const ParamDecl& decl) {
  const WeightEntry* e = container_.find(decl.name);
  if (!e) throw BindError("missing weight entry '" + decl.name + "'");
  if (e->dims != decl.dims) {
    throw BindError("weight entry '" + decl.name + "' has dims " +
                    dims_str(e->dims) + ", expected " + dims_str(decl.dims));
  }
  used_.insert(decl.name);
  return e->values;
}

void ContainerBinder::check_all_used() const {
  for (const auto& e : container_.entries()) {
    if (!used_.contains(e.name)) {
      throw BindError("unexpected weight entry '" + e.name + "'");
    }
  }
}

std::vector<float> TestIdentityBinder::bind(const ParamDecl& decl) {
  if (decl.role == ParamRole::ConvWeight || decl.role == ParamRole::Bias) {
    auto values = source_(decl);
    if (values.size() != element_count(decl.dims)) {
      throw BindError("test source returned wrong size for '" + decl.name + "'");
    }
    return values;
  }
  return role_default(decl);
}

// ------------------------------------------------------------------ convs --

namespace {
std::vector<std::uint32_t> u32dims(std::initializer_list<int> dims) {
  std::vector<std::uint32_t> out;
  for (int d : dims) out.push_back(static_cast<std::uint32_t>(d));
  return out;
}
}  // namespace

ConvBlock::ConvBlock(ParamBinder& binder, const std::string& path, int c1,
                     int c2, int k, int s, int groups, Activation act)
    : in_channels_(c1),
      params_(ConvParams::square(c2, k, s, groups)),
      act_(binder.test_identity() ? Activation::None : act),
      eps_(binder.test_identity() ? 0.0f : kBatchNormEps) {
  params_.validate(c1);
  const auto wdims = u32dims({c2, c1 / groups, k, k});
  weight_ = Tensor({c2, c1 / groups, k, k},
                   binder.bind({path + ".weight", wdims, ParamRole::ConvWeight}));
  const auto vdims = u32dims({c2});
  gamma_ = binder.bind({path + ".gamma", vdims, ParamRole::BnGamma});
  beta_ = binder.bind({path + ".beta", vdims, ParamRole::BnBeta});
  mean_ = binder.bind({path + ".mean", vdims, ParamRole::BnMean});
  var_ = binder.bind({path + ".var", vdims, ParamRole::BnVar});
}

Tensor ConvBlock::forward(const Tensor& x) const {
  if (x.c() != in_channels_) {
    throw ShapeError("ConvBlock expects " + std::to_string(in_channels_) +
                     " channels, got " + std::to_string(x.c()));
  }
  Tensor y = batchnorm_infer(conv2d(x, weight_, {}, params_), gamma_, beta_,
                             mean_, var_, eps_);
  return act_ == Activation::SiLU ? silu(y) : y;
}

PlainConv::PlainConv(ParamBinder& binder, const std::string& path, int c1,
                     int c2, float bias_init)
    : in_channels_(c1), params_(ConvParams::square(c2, 1)) {
  weight_ = Tensor({c2, c1, 1, 1}, binder.bind({path + ".weight", u32dims({c2, c1, 1, 1}),
                                                ParamRole::ConvWeight}));
  bias_ = binder.bind({path + ".bias", u32dims({c2}), ParamRole::Bias, bias_init});
}

Tensor PlainConv::forward(const Tensor& x) const {
  if (x.c() != in_channels_) {
    throw ShapeError("PlainConv expects " + std::to_string(in_channels_) +
                     " channels, got " + std::to_string(x.c()));
  }
  return conv2d(x, weight_, bias_, params_);
}

namespace {
int require_even(int c2) {
  if (c2 < 2 || c2 % 2 != 0) {
    throw ShapeError("GhostConv output channels must be even, got " +
                     std::to_string(c2));
  }
  return c2 / 2;
}
}  // namespace

GhostConvBlock::GhostConvBlock(ParamBinder& binder, const std::string& path,
                               int c1, int c2, int k, int s, Activation act)
    : primary_(binder, path + ".cv1", c1, require_even(c2), k, s, 1, act),
      cheap_(binder, path + ".cv2", c2 / 2, c2 / 2, 5, 1, c2 / 2, act) {}

Tensor GhostConvBlock::forward(const Tensor& x) const {
  const Tensor intrinsic = primary_.forward(x);
  const Tensor ghost = cheap_.forward(intrinsic);
  return concat_channels({&intrinsic, &ghost});
}

GhostBottleneck::GhostBottleneck(ParamBinder& binder, const std::string& path,
                                 int c1, int c2, int k, int s)
    : expand_(binder, path + ".conv.0", c1, require_even(c2), 1, 1),
      dw_(s != 1 ? std::optional<ConvBlock>(std::in_place, binder,
                                            path + ".conv.1", c2 / 2, c2 / 2,
                                            k, s, c2 / 2, Activation::None)
                 : std::nullopt),
      reduce_(binder, path + ".conv.2", c2 / 2, c2, 1, 1, Activation::None) {
  if (s != 1 || c1 != c2) {
    shortcut_dw_.emplace(binder, path + ".shortcut.0", c1, c1, k, s, c1,
                         Activation::None);
    shortcut_pw_.emplace(binder, path + ".shortcut.1", c1, c2, 1, 1, 1,
                         Activation::None);
  }
}

Tensor GhostBottleneck::ghost_path(const Tensor& x) const {
  Tensor y = expand_.forward(x);
  if (dw_) y = dw_->forward(y);
  return reduce_.forward(y);
}

Tensor GhostBottleneck::shortcut(const Tensor& x) const {
  if (!shortcut_dw_) return x;
  return shortcut_pw_->forward(shortcut_dw_->forward(x));
}

Tensor GhostBottleneck::forward(const Tensor& x) const {
  return add(ghost_path(x), shortcut(x));
}

// -------------------------------------------------------------- CSP family --

BottleneckBlock::BottleneckBlock(ParamBinder& binder, const std::string& path,
                                 int c1, int c2, bool shortcut, int k1, int k2,
                                 double e)
    : cv1_(binder, path + ".cv1", c1, static_cast<int>(c2 * e), k1),
      cv2_(binder, path + ".cv2", static_cast<int>(c2 * e), c2, k2),
      add_(shortcut && c1 == c2) {}

Tensor BottleneckBlock::forward(const Tensor& x) const {
  Tensor y = cv2_.forward(cv1_.forward(x));
  return add_ ? add(x, y) : y;
}

C3kBlock::C3kBlock(ParamBinder& binder, const std::string& path, int c1, int c2,
                   int n, bool shortcut, double e, int k)
    : cv1_(binder, path + ".cv1", c1, static_cast<int>(c2 * e), 1),
      cv2_(binder, path + ".cv2", c1, static_cast<int>(c2 * e), 1),
      cv3_(binder, path + ".cv3", 2 * static_cast<int>(c2 * e), c2, 1) {
  const int hidden = static_cast<int>(c2 * e);
  for (int i = 0; i < n; ++i) {
    m_.emplace_back(binder, path + ".m." + std::to_string(i), hidden, hidden,
                    shortcut, k, k, 1.0);
  }
}

Tensor C3kBlock::forward(const Tensor& x) const {
  Tensor y = cv1_.forward(x);
  for (const auto& b : m_) y = b.forward(y);
  const Tensor side = cv2_.forward(x);
  return cv3_.forward(concat_channels({&y, &side}));
}

C3GhostBlock::C3GhostBlock(ParamBinder& binder, const std::string& path, int c1,
                           int c2, int n, double e)
    : cv1_(binder, path + ".cv1", c1, static_cast<int>(c2 * e), 1),
      cv2_(binder, path + ".cv2", c1, static_cast<int>(c2 * e), 1),
      cv3_(binder, path + ".cv3", 2 * static_cast<int>(c2 * e), c2, 1) {
  const int hidden = static_cast<int>(c2 * e);
  for (int i = 0; i < n; ++i) {
    m_.emplace_back(binder, path + ".m." + std::to_string(i), hidden, hidden);
  }
}

Tensor C3GhostBlock::forward(const Tensor& x) const {
  Tensor y = cv1_.forward(x);
  for (const auto& b : m_) y = b.forward(y);
  const Tensor side = cv2_.forward(x);
  return cv3_.forward(concat_channels({&y, &side}));
}

C3k2Block::C3k2Block(ParamBinder& binder, const std::string& path, int c1,
                     int c2, int n, bool c3k, double e)
    : hidden_(static_cast<int>(c2 * e)),
      cv1_(binder, path + ".cv1", c1, 2 * hidden_, 1),
      cv2_(binder, path + ".cv2", (2 + n) * hidden_, c2, 1) {
  for (int i = 0; i < n; ++i) {
    const std::string unit = path + ".m." + std::to_string(i);
    if (c3k) {
      m_.emplace_back(std::in_place_type<C3kBlock>, binder, unit, hidden_,
                      hidden_, 2, true);
    } else {
      m_.emplace_back(std::in_place_type<BottleneckBlock>, binder, unit,
                      hidden_, hidden_, true, 3, 3, 0.5);
    }
  }
}

Tensor C3k2Block::forward(const Tensor& x) const {
  const Tensor y = cv1_.forward(x);
  std::vector<Tensor> parts;
  parts.reserve(2 + m_.size());
  parts.push_back(slice_channels(y, 0, hidden_));
  parts.push_back(slice_channels(y, hidden_, hidden_));
  for (const auto& unit : m_) {
    Tensor next = std::visit([&](const auto& u) { return u.forward(parts.back()); }, unit);
    parts.push_back(std::move(next));
  }
  std::vector<const Tensor*> ptrs;
  for (const auto& t : parts) ptrs.push_back(&t);
  return cv2_.forward(concat_channels(ptrs));
}

// -------------------------------------------------------------------- SPPF --

SPPFBlock::SPPFBlock(ParamBinder& binder, const std::string& path, int c1,
                     int c2, int k)
    : cv1_(binder, path + ".cv1", c1, c1 / 2, 1),
      cv2_(binder, path + ".cv2", 4 * (c1 / 2), c2, 1),
      k_(k) {}

Tensor SPPFBlock::forward(const Tensor& x) const {
  const Tensor y0 = cv1_.forward(x);
  const Tensor y1 = maxpool2d(y0, k_, 1, k_ / 2);
  const Tensor y2 = maxpool2d(y1, k_, 1, k_ / 2);
  const Tensor y3 = maxpool2d(y2, k_, 1, k_ / 2);
  return cv2_.forward(concat_channels({&y0, &y1, &y2, &y3}));
}

// --------------------------------------------------------------- attention --

AttentionBlock::AttentionBlock(ParamBinder& binder, const std::string& path,
                               int dim, int heads, double attn_ratio)
    : dim_(dim),
      heads_(heads),
      head_dim_(dim / heads),
      key_dim_(static_cast<int>(head_dim_ * attn_ratio)),
      scale_(1.0f / std::sqrt(static_cast<float>(key_dim_))),
      qkv_(binder, path + ".qkv", dim, dim + 2 * key_dim_ * heads, 1, 1, 1,
           Activation::None),
      proj_(binder, path + ".proj", dim, dim, 1, 1, 1, Activation::None),
      pe_(binder, path + ".pe", dim, dim, 3, 1, dim, Activation::None) {
  if (heads < 1 || dim % heads != 0 || key_dim_ < 1) {
    throw ShapeError("attention dim " + std::to_string(dim) +
                     " incompatible with " + std::to_string(heads) + " heads");
  }
}

AttentionBlock::Split AttentionBlock::split_qkv(const Tensor& x) const {
  const Tensor qkv = qkv_.forward(x);
  const int n = x.n();
  const int positions = x.h() * x.w();
  const int per_head = 2 * key_dim_ + head_dim_;
  Split s{Tensor({n, heads_, positions, key_dim_}),
          Tensor({n, heads_, key_dim_, positions}),
          Tensor({n, heads_, head_dim_, positions})};
  for (int b = 0; b < n; ++b) {
    for (int h = 0; h < heads_; ++h) {
      const int base = h * per_head;
      for (int d = 0; d < key_dim_; ++d) {
        const float* q = qkv.plane(b, base + d);
        float* qt = s.q_t.plane(b, h);
        for (int i = 0; i < positions; ++i) qt[static_cast<std::size_t>(i) * key_dim_ + d] = q[i];
        std::copy_n(qkv.plane(b, base + key_dim_ + d), positions,
                    s.k.plane(b, h) + static_cast<std::size_t>(d) * positions);
      }
      for (int d = 0; d < head_dim_; ++d) {
        std::copy_n(qkv.plane(b, base + 2 * key_dim_ + d), positions,
                    s.v.plane(b, h) + static_cast<std::size_t>(d) * positions);
      }
    }
  }
  return s;
}

Tensor AttentionBlock::attend(const Split& s) const {
  return softmax_lastdim(scale(matmul_batched(s.q_t, s.k), scale_));
}

Tensor AttentionBlock::attention_weights(const Tensor& x) const {
  return attend(split_qkv(x));
}

Tensor AttentionBlock::forward(const Tensor& x) const {
  const Split s = split_qkv(x);
  const Tensor attn = attend(s);
  // (heads, head_dim, N) x (heads, N, N)^T -> (heads, head_dim, N) == (C, H, W)
  const Tensor out = matmul_batched(s.v, transpose_last2(attn));
  const Shape image{x.n(), dim_, x.h(), x.w()};
  const Tensor values = s.v.reshaped(image);
  return proj_.forward(add(out.reshaped(image), pe_.forward(values)));
}

PSABlock::PSABlock(ParamBinder& binder, const std::string& path, int c,
                   int heads)
    : attn_(binder, path + ".attn", c, heads),
      ffn0_(binder, path + ".ffn.0", c, 2 * c, 1),
      ffn1_(binder, path + ".ffn.1", 2 * c, c, 1, 1, 1, Activation::None) {}

Tensor PSABlock::forward(const Tensor& x) const {
  const Tensor y = add(x, attn_.forward(x));
  return add(y, ffn1_.forward(ffn0_.forward(y)));
}

C2PSABlock::C2PSABlock(ParamBinder& binder, const std::string& path, int c1,
                       int c2, int n, double e)
    : hidden_(static_cast<int>(c1 * e)),
      cv1_(binder, path + ".cv1", c1, 2 * hidden_, 1),
      cv2_(binder, path + ".cv2", 2 * hidden_, c1, 1) {
  if (c1 != c2) {
    throw ShapeError("C2PSA requires c1 == c2, got " + std::to_string(c1) +
                     " and " + std::to_string(c2));
  }
  const int heads = std::max(1, hidden_ / 64);
  for (int i = 0; i < n; ++i) {
    m_.emplace_back(binder, path + ".m." + std::to_string(i), hidden_, heads);
  }
}

Tensor C2PSABlock::attended_input(const Tensor& x) const {
  return slice_channels(cv1_.forward(x), hidden_, hidden_);
}

Tensor C2PSABlock::forward(const Tensor& x) const {
  const Tensor y = cv1_.forward(x);
  const Tensor a = slice_channels(y, 0, hidden_);
  Tensor b = slice_channels(y, hidden_, hidden_);
  for (const auto& unit : m_) b = unit.forward(b);
  return cv2_.forward(concat_channels({&a, &b}));
}

// ------------------------------------------------------------------ detect --

DetectHead::DetectHead(ParamBinder& binder, const std::string& path, int nc,
                       std::array<int, 3> channels, bool legacy_class_branch,
                       std::array<int, 3> strides)
    : nc_(nc),
      c2_(std::max({16, channels[0] / 4, 4 * kRegMax})),
      c3_(std::max(channels[0], std::min(nc, 100))),
      channels_(channels),
      strides_(strides) {
  if (nc < 1) throw ShapeError("detect head needs nc >= 1");
  // Box branches for all scales bind first, then class branches.
  std::vector<std::vector<ConvBlock>> box_convs(3);
  std::vector<PlainConv> box_outs;
  for (int i = 0; i < 3; ++i) {
    const std::string box = path + ".cv2." + std::to_string(i);
    box_convs[i].emplace_back(binder, box + ".0", channels[i], c2_, 3);
    box_convs[i].emplace_back(binder, box + ".1", c2_, c2_, 3);
    box_outs.emplace_back(binder, box + ".2", c2_, 4 * kRegMax, 1.0f);
  }
  for (int i = 0; i < 3; ++i) {
    const int ch = channels[i];
    const std::string cls = path + ".cv3." + std::to_string(i);
    std::vector<ConvBlock> cls_convs;
    if (legacy_class_branch) {
      cls_convs.emplace_back(binder, cls + ".0", ch, c3_, 3);
      cls_convs.emplace_back(binder, cls + ".1", c3_, c3_, 3);
    } else {
      cls_convs.emplace_back(binder, cls + ".0.0", ch, ch, 3, 1, ch);
      cls_convs.emplace_back(binder, cls + ".0.1", ch, c3_, 1);
      cls_convs.emplace_back(binder, cls + ".1.0", c3_, c3_, 3, 1, c3_);
      cls_convs.emplace_back(binder, cls + ".1.1", c3_, c3_, 1);
    }
    // Class prior: about 5 objects per 640x640 image spread over nc classes.
    const double cells = std::pow(640.0 / strides[i], 2);
    const auto prior = static_cast<float>(std::log(5.0 / nc / cells));
    PlainConv cls_out(binder, cls + ".2", c3_, nc, prior);
    scales_.push_back({std::move(box_convs[i]), std::move(box_outs[i]),
                       std::move(cls_convs), std::move(cls_out)});
  }
}

std::vector<Tensor> DetectHead::forward(
    std::span<const Tensor* const> features) const {
  if (features.size() != 3) {
    throw ShapeError("detect head expects 3 feature maps, got " +
                     std::to_string(features.size()));
  }
  std::vector<Tensor> out;
  for (int i = 0; i < 3; ++i) {
    const Tensor& f = *features[i];
    if (f.c() != channels_[i]) {
      throw ShapeError("detect scale " + std::to_string(i) + " expects " +
                       std::to_string(channels_[i]) + " channels, got " +
                       std::to_string(f.c()));
    }
    const Branches& br = scales_[i];
    Tensor b = f;
    for (const auto& c : br.box) b = c.forward(b);
    b = br.box_out.forward(b);
    Tensor k = f;
    for (const auto& c : br.cls) k = c.forward(k);
    k = br.cls_out.forward(k);
    out.push_back(concat_channels({&b, &k}));
  }
  return out;
}

}  // namespace gyolo
