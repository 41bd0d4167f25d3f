#include "gyolo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <json.hpp>

#include "gyolo/rng.hpp"

namespace gyolo::grad {

DTensor::DTensor(Shape s, std::vector<double> values)
    : shape(s), v(std::move(values)) {
  if (v.size() != s.numel()) {
    throw ShapeError("DTensor " + s.str() + " given " +
                     std::to_string(v.size()) + " values");
  }
}

// -------------------------------------------------------------- conv2d ----

DTensor conv2d(const DTensor& x, const DTensor& w, const std::vector<double>& b,
               const ConvParams& p) {
  p.validate(x.shape.c);
  const int cin_g = x.shape.c / p.groups;
  const int cout_g = p.out_channels / p.groups;
  if (w.shape != Shape{p.out_channels, cin_g, p.kernel.h, p.kernel.w}) {
    throw ShapeError("conv2d weight shape " + w.shape.str());
  }
  if (!b.empty() && static_cast<int>(b.size()) != p.out_channels) {
    throw ShapeError("conv2d bias length mismatch");
  }
  const int ho = p.out_h(x.shape.h);
  const int wo = p.out_w(x.shape.w);
  DTensor y({x.shape.n, p.out_channels, ho, wo});
  for (int n = 0; n < x.shape.n; ++n) {
    for (int co = 0; co < p.out_channels; ++co) {
      const int g = co / cout_g;
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          double acc = 0.0;
          for (int ky = 0; ky < p.kernel.h; ++ky) {
            const int iy = oy * p.stride.h - p.padding.h + ky * p.dilation.h;
            if (iy < 0 || iy >= x.shape.h) continue;
            for (int kx = 0; kx < p.kernel.w; ++kx) {
              const int ix = ox * p.stride.w - p.padding.w + kx * p.dilation.w;
              if (ix < 0 || ix >= x.shape.w) continue;
              for (int ci = 0; ci < cin_g; ++ci) {
                acc += w.at(co, ci, ky, kx) * x.at(n, g * cin_g + ci, iy, ix);
              }
            }
          }
          y.at(n, co, oy, ox) = acc + (b.empty() ? 0.0 : b[co]);
        }
      }
    }
  }
  return y;
}

ConvGrads conv2d_backward(const DTensor& x, const DTensor& w,
                          const ConvParams& p, const DTensor& dy) {
  const int cin_g = x.shape.c / p.groups;
  const int cout_g = p.out_channels / p.groups;
  const int ho = p.out_h(x.shape.h);
  const int wo = p.out_w(x.shape.w);
  if (dy.shape != Shape{x.shape.n, p.out_channels, ho, wo}) {
    throw ShapeError("conv2d upstream gradient shape " + dy.shape.str());
  }
  ConvGrads g{DTensor(x.shape), DTensor(w.shape),
              std::vector<double>(p.out_channels, 0.0)};
  for (int n = 0; n < x.shape.n; ++n) {
    for (int co = 0; co < p.out_channels; ++co) {
      const int grp = co / cout_g;
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          const double d = dy.at(n, co, oy, ox);
          g.db[co] += d;
          for (int ky = 0; ky < p.kernel.h; ++ky) {
            const int iy = oy * p.stride.h - p.padding.h + ky * p.dilation.h;
            if (iy < 0 || iy >= x.shape.h) continue;
            for (int kx = 0; kx < p.kernel.w; ++kx) {
              const int ix = ox * p.stride.w - p.padding.w + kx * p.dilation.w;
              if (ix < 0 || ix >= x.shape.w) continue;
              for (int ci = 0; ci < cin_g; ++ci) {
                const int c = grp * cin_g + ci;
                g.dx.at(n, c, iy, ix) += w.at(co, ci, ky, kx) * d;
                g.dw.at(co, ci, ky, kx) += x.at(n, c, iy, ix) * d;
              }
            }
          }
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------- elementwise ----

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require_same(const DTensor& a, const DTensor& b, const char* op) {
  if (a.shape != b.shape) {
    throw ShapeError(std::string(op) + ": shapes " + a.shape.str() + " and " +
                     b.shape.str() + " differ");
  }
}
}  // namespace

DTensor silu(const DTensor& x) {
  DTensor y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] * sigmoid(x.v[i]);
  return y;
}

DTensor silu_backward(const DTensor& x, const DTensor& dy) {
  require_same(x, dy, "silu_backward");
  DTensor dx(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = sigmoid(x.v[i]);
    dx.v[i] = dy.v[i] * s * (1.0 + x.v[i] * (1.0 - s));
  }
  return dx;
}

DTensor batchnorm(const DTensor& x, const BnParams& bn) {
  const auto c = static_cast<std::size_t>(x.shape.c);
  if (bn.gamma.size() != c || bn.beta.size() != c || bn.mean.size() != c ||
      bn.var.size() != c) {
    throw ShapeError("batchnorm parameter length mismatch");
  }
  DTensor y(x.shape);
  for (int n = 0; n < x.shape.n; ++n) {
    for (int ch = 0; ch < x.shape.c; ++ch) {
      const double inv = 1.0 / std::sqrt(bn.var[ch] + bn.eps);
      for (int i = 0; i < x.shape.h; ++i) {
        for (int j = 0; j < x.shape.w; ++j) {
          y.at(n, ch, i, j) =
              bn.gamma[ch] * (x.at(n, ch, i, j) - bn.mean[ch]) * inv + bn.beta[ch];
        }
      }
    }
  }
  return y;
}

BnGrads batchnorm_backward(const DTensor& x, const BnParams& bn,
                           const DTensor& dy) {
  require_same(x, dy, "batchnorm_backward");
  BnGrads g{DTensor(x.shape), std::vector<double>(x.shape.c, 0.0),
            std::vector<double>(x.shape.c, 0.0)};
  for (int n = 0; n < x.shape.n; ++n) {
    for (int ch = 0; ch < x.shape.c; ++ch) {
      const double inv = 1.0 / std::sqrt(bn.var[ch] + bn.eps);
      for (int i = 0; i < x.shape.h; ++i) {
        for (int j = 0; j < x.shape.w; ++j) {
          const double d = dy.at(n, ch, i, j);
          g.dx.at(n, ch, i, j) = d * bn.gamma[ch] * inv;
          g.dgamma[ch] += d * (x.at(n, ch, i, j) - bn.mean[ch]) * inv;
          g.dbeta[ch] += d;
        }
      }
    }
  }
  return g;
}

DTensor concat(const DTensor& a, const DTensor& b) {
  if (a.shape.n != b.shape.n || a.shape.h != b.shape.h ||
      a.shape.w != b.shape.w) {
    throw ShapeError("concat: spatial mismatch");
  }
  DTensor y({a.shape.n, a.shape.c + b.shape.c, a.shape.h, a.shape.w});
  const std::size_t pa = static_cast<std::size_t>(a.shape.c) * a.shape.plane();
  const std::size_t pb = static_cast<std::size_t>(b.shape.c) * b.shape.plane();
  for (int n = 0; n < a.shape.n; ++n) {
    std::copy_n(a.v.begin() + n * pa, pa, y.v.begin() + n * (pa + pb));
    std::copy_n(b.v.begin() + n * pb, pb, y.v.begin() + n * (pa + pb) + pa);
  }
  return y;
}

std::pair<DTensor, DTensor> concat_backward(const DTensor& dy, int a_channels) {
  if (a_channels < 0 || a_channels > dy.shape.c) {
    throw ShapeError("concat_backward: split point out of range");
  }
  const Shape sa{dy.shape.n, a_channels, dy.shape.h, dy.shape.w};
  const Shape sb{dy.shape.n, dy.shape.c - a_channels, dy.shape.h, dy.shape.w};
  DTensor da(sa), db(sb);
  const std::size_t pa = static_cast<std::size_t>(sa.c) * sa.plane();
  const std::size_t pb = static_cast<std::size_t>(sb.c) * sb.plane();
  for (int n = 0; n < dy.shape.n; ++n) {
    std::copy_n(dy.v.begin() + n * (pa + pb), pa, da.v.begin() + n * pa);
    std::copy_n(dy.v.begin() + n * (pa + pb) + pa, pb, db.v.begin() + n * pb);
  }
  return {da, db};
}

DTensor add(const DTensor& a, const DTensor& b) {
  require_same(a, b, "add");
  DTensor y(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) y.v[i] = a.v[i] + b.v[i];
  return y;
}

std::pair<DTensor, DTensor> add_backward(const DTensor& dy) { return {dy, dy}; }

DTensor softmax_lastdim(const DTensor& x) {
  DTensor y(x.shape);
  const int w = x.shape.w;
  for (std::size_t r = 0; r < x.size() / w; ++r) {
    const double* in = x.v.data() + r * w;
    double* out = y.v.data() + r * w;
    const double m = *std::max_element(in, in + w);
    double sum = 0.0;
    for (int i = 0; i < w; ++i) sum += (out[i] = std::exp(in[i] - m));
    for (int i = 0; i < w; ++i) out[i] /= sum;
  }
  return y;
}

DTensor softmax_backward(const DTensor& y, const DTensor& dy) {
  require_same(y, dy, "softmax_backward");
  DTensor dx(y.shape);
  const int w = y.shape.w;
  for (std::size_t r = 0; r < y.size() / w; ++r) {
    const double* yr = y.v.data() + r * w;
    const double* dr = dy.v.data() + r * w;
    double dot = 0.0;
    for (int i = 0; i < w; ++i) dot += yr[i] * dr[i];
    for (int i = 0; i < w; ++i) dx.v[r * w + i] = yr[i] * (dr[i] - dot);
  }
  return dx;
}

// ------------------------------------------------------------- checker ----

std::string to_string(Target t) {
  switch (t) {
    case Target::Conv2d: return "conv2d";
    case Target::DepthwiseConv2d: return "depthwise_conv2d";
    case Target::Silu: return "silu";
    case Target::BatchNorm: return "batchnorm_infer";
    case Target::Softmax: return "softmax_lastdim";
    case Target::Add: return "add";
    case Target::Concat: return "concat";
    case Target::GhostConv: return "ghost_conv";
    case Target::GhostBottleneck: return "ghost_bottleneck";
  }
  return "?";
}

std::vector<Target> all_targets() {
  return {Target::Conv2d,  Target::DepthwiseConv2d, Target::Silu,
          Target::BatchNorm, Target::Softmax,       Target::Add,
          Target::Concat,  Target::GhostConv,       Target::GhostBottleneck};
}

Target parse_target(const std::string& text) {
  for (Target t : all_targets()) {
    if (to_string(t) == text) return t;
  }
  throw std::invalid_argument("unknown gradcheck target '" + text + "'");
}

namespace {

using Vars = std::vector<DTensor>;

/// A differentiable function of named tensors.
struct Problem {
  std::vector<std::string> names;
  Vars vars;
  std::function<DTensor(const Vars&)> forward;
  /// Gradient of sum(dy * forward(vars)) with respect to every var.
  std::function<Vars(const Vars&, const DTensor&)> backward;
};

DTensor random_tensor(Xoshiro256pp& rng, Shape s, double lo, double hi) {
  DTensor t(s);
  for (auto& v : t.v) v = lo + (hi - lo) * rng.uniform01_double();
  return t;
}

std::vector<double> as_vec(const DTensor& t) { return t.v; }
DTensor as_channel(const std::vector<double>& v) {
  return DTensor({1, static_cast<int>(v.size()), 1, 1}, v);
}

/// Conv + batchnorm (+ silu) on double tensors. Parameters live in the var
/// list as [weight, gamma, beta]; running statistics are fixed.
struct ConvBnUnit {
  ConvParams p;
  std::vector<double> mean, var;
  bool act = true;
  std::size_t slot = 0;  // index of the weight within the var list

  DTensor forward(const Vars& v, const DTensor& x, DTensor* pre_bn = nullptr,
                  DTensor* pre_act = nullptr) const {
    const DTensor y = conv2d(x, v[slot], {}, p);
    const DTensor z = batchnorm(y, bn(v));
    if (pre_bn) *pre_bn = y;
    if (pre_act) *pre_act = z;
    return act ? silu(z) : z;
  }

  BnParams bn(const Vars& v) const {
    return {as_vec(v[slot + 1]), as_vec(v[slot + 2]), mean, var, 1e-3};
  }

  /// Accumulates parameter grads into g and returns dx.
  DTensor backward(const Vars& v, const DTensor& x, const DTensor& dout,
                   Vars& g) const {
    DTensor y, z;
    forward(v, x, &y, &z);
    const DTensor dz = act ? silu_backward(z, dout) : dout;
    const BnGrads bg = batchnorm_backward(y, bn(v), dz);
    const ConvGrads cg = conv2d_backward(x, v[slot], p, bg.dx);
    g[slot] = cg.dw;
    g[slot + 1] = as_channel(bg.dgamma);
    g[slot + 2] = as_channel(bg.dbeta);
    return cg.dx;
  }
};

ConvBnUnit add_unit(Problem& pr, Xoshiro256pp& rng, const std::string& name,
                    int c1, int c2, int k, int groups, bool act) {
  ConvBnUnit u;
  u.p = ConvParams::square(c2, k, 1, groups);
  u.act = act;
  u.slot = pr.vars.size();
  const double bound = std::sqrt(6.0 / ((c1 / groups) * k * k));
  pr.names.push_back(name + ".weight");
  pr.vars.push_back(random_tensor(rng, {c2, c1 / groups, k, k}, -bound, bound));
  pr.names.push_back(name + ".gamma");
  pr.vars.push_back(random_tensor(rng, {1, c2, 1, 1}, 0.5, 1.5));
  pr.names.push_back(name + ".beta");
  pr.vars.push_back(random_tensor(rng, {1, c2, 1, 1}, -0.5, 0.5));
  u.mean = random_tensor(rng, {1, c2, 1, 1}, -0.2, 0.2).v;
  u.var = random_tensor(rng, {1, c2, 1, 1}, 0.5, 1.5).v;
  return u;
}

struct GhostUnit {
  ConvBnUnit primary, cheap;
  int half = 0;

  DTensor forward(const Vars& v, const DTensor& x) const {
    const DTensor a = primary.forward(v, x);
    return concat(a, cheap.forward(v, a));
  }

  DTensor backward(const Vars& v, const DTensor& x, const DTensor& dout,
                   Vars& g) const {
    const DTensor a = primary.forward(v, x);
    auto [da, db] = concat_backward(dout, half);
    const DTensor da2 = cheap.backward(v, a, db, g);
    return primary.backward(v, x, add(da, da2), g);
  }
};

GhostUnit add_ghost(Problem& pr, Xoshiro256pp& rng, const std::string& name,
                    int c1, int c2, bool act) {
  GhostUnit u;
  u.half = c2 / 2;
  u.primary = add_unit(pr, rng, name + ".cv1", c1, u.half, 1, 1, act);
  u.cheap = add_unit(pr, rng, name + ".cv2", u.half, u.half, 5, u.half, act);
  return u;
}

Problem make_problem(Target t, Xoshiro256pp& rng) {
  Problem pr;
  auto input = [&](const std::string& name, Shape s, double lo = -2.0,
                   double hi = 2.0) {
    pr.names.push_back(name);
    pr.vars.push_back(random_tensor(rng, s, lo, hi));
  };
  switch (t) {
    case Target::Conv2d:
    case Target::DepthwiseConv2d: {
      const bool dw = t == Target::DepthwiseConv2d;
      const int c1 = dw ? 4 : 3;
      const int c2 = dw ? 4 : 5;
      const int k = dw ? 5 : 3;
      const ConvParams p = ConvParams::square(c2, k, 1, dw ? c1 : 1);
      input("x", {1, c1, 6, 6});
      input("weight", {c2, dw ? 1 : c1, k, k}, -0.5, 0.5);
      input("bias", {1, c2, 1, 1}, -0.5, 0.5);
      pr.forward = [p](const Vars& v) { return conv2d(v[0], v[1], v[2].v, p); };
      pr.backward = [p](const Vars& v, const DTensor& dy) {
        ConvGrads g = conv2d_backward(v[0], v[1], p, dy);
        return Vars{g.dx, g.dw, as_channel(g.db)};
      };
      break;
    }
    case Target::Silu:
      input("x", {1, 2, 4, 4}, -4.0, 4.0);
      pr.forward = [](const Vars& v) { return silu(v[0]); };
      pr.backward = [](const Vars& v, const DTensor& dy) {
        return Vars{silu_backward(v[0], dy)};
      };
      break;
    case Target::BatchNorm: {
      input("x", {1, 3, 4, 4});
      input("gamma", {1, 3, 1, 1}, 0.5, 1.5);
      input("beta", {1, 3, 1, 1}, -0.5, 0.5);
      const std::vector<double> mean = random_tensor(rng, {1, 3, 1, 1}, -0.2, 0.2).v;
      const std::vector<double> var = random_tensor(rng, {1, 3, 1, 1}, 0.5, 1.5).v;
      auto bn = [mean, var](const Vars& v) {
        return BnParams{v[1].v, v[2].v, mean, var, 1e-3};
      };
      pr.forward = [bn](const Vars& v) { return batchnorm(v[0], bn(v)); };
      pr.backward = [bn](const Vars& v, const DTensor& dy) {
        BnGrads g = batchnorm_backward(v[0], bn(v), dy);
        return Vars{g.dx, as_channel(g.dgamma), as_channel(g.dbeta)};
      };
      break;
    }
    case Target::Softmax:
      input("x", {1, 2, 3, 8});
      pr.forward = [](const Vars& v) { return softmax_lastdim(v[0]); };
      pr.backward = [](const Vars& v, const DTensor& dy) {
        return Vars{softmax_backward(softmax_lastdim(v[0]), dy)};
      };
      break;
    case Target::Add:
      input("a", {1, 3, 4, 4});
      input("b", {1, 3, 4, 4});
      pr.forward = [](const Vars& v) { return add(v[0], v[1]); };
      pr.backward = [](const Vars&, const DTensor& dy) {
        auto [da, db] = add_backward(dy);
        return Vars{da, db};
      };
      break;
    case Target::Concat:
      input("a", {1, 2, 4, 4});
      input("b", {1, 3, 4, 4});
      pr.forward = [](const Vars& v) { return concat(v[0], v[1]); };
      pr.backward = [](const Vars&, const DTensor& dy) {
        auto [da, db] = concat_backward(dy, 2);
        return Vars{da, db};
      };
      break;
    case Target::GhostConv: {
      input("x", {1, 4, 6, 6});
      const GhostUnit g = add_ghost(pr, rng, "ghost", 4, 8, true);
      pr.forward = [g](const Vars& v) { return g.forward(v, v[0]); };
      pr.backward = [g](const Vars& v, const DTensor& dy) {
        Vars grads(v.size());
        grads[0] = g.backward(v, v[0], dy, grads);
        return grads;
      };
      break;
    }
    case Target::GhostBottleneck: {
      input("x", {1, 8, 6, 6});
      const GhostUnit expand = add_ghost(pr, rng, "conv.0", 8, 4, true);
      const GhostUnit reduce = add_ghost(pr, rng, "conv.2", 4, 8, false);
      pr.forward = [expand, reduce](const Vars& v) {
        return add(reduce.forward(v, expand.forward(v, v[0])), v[0]);
      };
      pr.backward = [expand, reduce](const Vars& v, const DTensor& dy) {
        Vars grads(v.size());
        const DTensor mid = expand.forward(v, v[0]);
        auto [dpath, dshort] = add_backward(dy);
        const DTensor dmid = reduce.backward(v, mid, dpath, grads);
        grads[0] = add(expand.backward(v, v[0], dmid, grads), dshort);
        return grads;
      };
      break;
    }
  }
  return pr;
}

double weighted_sum(const DTensor& y, const DTensor& dy) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.v[i] * dy.v[i];
  return s;
}

}  // namespace

GradReport check(Target target, std::uint64_t seed, double tolerance,
                 bool flip_sign) {
  Xoshiro256pp rng(parameter_seed("gradcheck." + to_string(target), seed));
  Problem pr = make_problem(target, rng);
  const DTensor y0 = pr.forward(pr.vars);
  const DTensor dy = random_tensor(rng, y0.shape, -1.0, 1.0);
  Vars analytic = pr.backward(pr.vars, dy);
  if (flip_sign) {
    for (auto& v : analytic[0].v) v = -v;
  }

  GradReport r;
  r.op = to_string(target);
  r.seed = seed;
  r.tolerance = tolerance;
  for (std::size_t k = 0; k < pr.vars.size(); ++k) {
    const Shape& s = pr.vars[k].shape;
    r.shapes.push_back(pr.names[k] + "(" + std::to_string(s.n) + "," +
                       std::to_string(s.c) + "," + std::to_string(s.h) + "," +
                       std::to_string(s.w) + ")");
    if (analytic[k].shape != s) {
      throw ShapeError("gradient of " + pr.names[k] + " has shape " +
                       analytic[k].shape.str());
    }
    for (std::size_t i = 0; i < pr.vars[k].size(); ++i) {
      const double orig = pr.vars[k].v[i];
      auto loss_at = [&](double offset) {
        pr.vars[k].v[i] = orig + offset;
        return weighted_sum(pr.forward(pr.vars), dy);
      };
      // Five-point central stencil: truncation error O(h^4).
      const double h = kFiniteDifferenceStep;
      const double numeric = (loss_at(-2 * h) - 8.0 * loss_at(-h) +
                              8.0 * loss_at(h) - loss_at(2 * h)) /
                             (12.0 * h);
      pr.vars[k].v[i] = orig;
      const double a = analytic[k].v[i];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-8});
      r.max_rel_error = std::max(r.max_rel_error, rel);
      ++r.probes;
    }
  }
  r.pass = r.max_rel_error < tolerance;
  return r;
}

std::string reports_json(const std::vector<GradReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  bool all = true;
  for (const auto& r : reports) {
    arr.push_back({{"op", r.op},
                   {"seed", r.seed},
                   {"max_rel_error", r.max_rel_error},
                   {"shapes", r.shapes},
                   {"probes", r.probes},
                   {"tolerance", r.tolerance},
                   {"pass", r.pass}});
    all = all && r.pass;
  }
  nlohmann::json doc = {{"step", kFiniteDifferenceStep},
                        {"stencil", "five-point central"},
                        {"pass", all},
                        {"reports", arr}};
  return doc.dump(2) + "\n";
}

}  // namespace gyolo::grad
