#include "gyolo/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace gyolo {

namespace {

constexpr int kBoxChannels = 64;  // 4 sides x 16 bins

/// Accumulates params/flops/layers of one node.
struct Tally {
  std::int64_t params = 0;
  std::int64_t flops = 0;
  int layers = 0;

  // conv (+bn) over an hw x hw output map
  void conv(int c1, int c2, int k, int h, int w, int groups = 1, bool bn = true,
            bool bias = false) {
    const std::int64_t weights =
        static_cast<std::int64_t>(c2) * (c1 / groups) * k * k;
    params += weights + (bn ? 2 * c2 : 0) + (bias ? c2 : 0);
    flops += 2 * weights * h * w;
  }

  // Conv module: wrapper + conv + bn (+ identity when the activation is off)
  void conv_block(int c1, int c2, int k, int h, int w, int groups = 1,
                  bool act = true) {
    conv(c1, c2, k, h, w, groups);
    layers += act ? 3 : 4;
  }

  void ghost_conv(int c1, int c2, int k, int h, int w, bool act = true) {
    const int half = c2 / 2;
    conv_block(c1, half, k, h, w, 1, act);
    conv_block(half, half, 5, h, w, half, act);
    layers += 1;
  }

  void ghost_bottleneck(int c1, int c2, int h, int w) {
    const int mid = c2 / 2;
    ghost_conv(c1, mid, 1, h, w);
    layers += 1;  // identity in place of the stride-2 depthwise conv
    ghost_conv(mid, c2, 1, h, w, false);
    layers += 1 + 1 + 1;  // bottleneck, path sequence, shortcut module
    if (c1 != c2) {
      // the shortcut module is then a sequence of depthwise + pointwise
      conv_block(c1, c1, 3, h, w, c1, false);
      conv_block(c1, c2, 1, h, w, 1, false);
    }
  }

  void bottleneck(int c1, int c2, int k, double e, int h, int w) {
    const int hidden = static_cast<int>(c2 * e);
    conv_block(c1, hidden, k, h, w);
    conv_block(hidden, c2, k, h, w);
    layers += 1;
  }

  void c3k(int c1, int c2, int n, int h, int w) {
    const int hidden = c2 / 2;
    conv_block(c1, hidden, 1, h, w);
    conv_block(c1, hidden, 1, h, w);
    for (int i = 0; i < n; ++i) bottleneck(hidden, hidden, 3, 1.0, h, w);
    conv_block(2 * hidden, c2, 1, h, w);
    layers += 2;
  }

  void c3k2(int c1, int c2, int n, bool use_c3k, double e, int h, int w) {
    const int hidden = static_cast<int>(c2 * e);
    conv_block(c1, 2 * hidden, 1, h, w);
    for (int i = 0; i < n; ++i) {
      if (use_c3k) {
        c3k(hidden, hidden, 2, h, w);
      } else {
        bottleneck(hidden, hidden, 3, 0.5, h, w);
      }
    }
    conv_block((2 + n) * hidden, c2, 1, h, w);
    layers += 2;
  }

  void c3ghost(int c1, int c2, int n, double e, int h, int w) {
    const int hidden = static_cast<int>(c2 * e);
    conv_block(c1, hidden, 1, h, w);
    conv_block(c1, hidden, 1, h, w);
    for (int i = 0; i < n; ++i) ghost_bottleneck(hidden, hidden, h, w);
    conv_block(2 * hidden, c2, 1, h, w);
    layers += 2;
  }

  void sppf(int c1, int c2, int h, int w) {
    conv_block(c1, c1 / 2, 1, h, w);
    conv_block(4 * (c1 / 2), c2, 1, h, w);
    layers += 2;  // block + pool
  }

  void c2psa(int c, int n, int h, int w) {
    const int hidden = c / 2;
    conv_block(c, 2 * hidden, 1, h, w);
    const int heads = std::max(1, hidden / 64);
    const int head_dim = hidden / heads;
    const int key_dim = head_dim / 2;
    const std::int64_t positions = static_cast<std::int64_t>(h) * w;
    for (int i = 0; i < n; ++i) {
      conv_block(hidden, hidden + 2 * key_dim * heads, 1, h, w, 1, false);
      conv_block(hidden, hidden, 1, h, w, 1, false);
      conv_block(hidden, hidden, 3, h, w, hidden, false);
      // q^T k and v attn^T
      flops += 2 * heads * positions * positions * (key_dim + head_dim);
      conv_block(hidden, 2 * hidden, 1, h, w);
      conv_block(2 * hidden, hidden, 1, h, w, 1, false);
      layers += 1 + 1 + 1;  // unit, attention, ffn sequence
    }
    conv_block(2 * hidden, c, 1, h, w);
    layers += 2;
  }

  void detect(std::array<int, 3> ch, std::array<NodeShape, 3> maps, int nc,
              bool legacy) {
    const int c2 = std::max({16, ch[0] / 4, kBoxChannels});
    const int c3 = std::max(ch[0], std::min(nc, 100));
    for (int i = 0; i < 3; ++i) {
      const int h = maps[i].h;
      const int w = maps[i].w;
      conv_block(ch[i], c2, 3, h, w);
      conv_block(c2, c2, 3, h, w);
      conv(c2, kBoxChannels, 1, h, w, 1, false, true);
      layers += 1 + 1;  // output conv + sequence
    }
    for (int i = 0; i < 3; ++i) {
      const int h = maps[i].h;
      const int w = maps[i].w;
      if (legacy) {
        conv_block(ch[i], c3, 3, h, w);
        conv_block(c3, c3, 3, h, w);
      } else {
        conv_block(ch[i], ch[i], 3, h, w, ch[i]);
        conv_block(ch[i], c3, 1, h, w);
        conv_block(c3, c3, 3, h, w, c3);
        conv_block(c3, c3, 1, h, w);
        layers += 2;  // two inner sequences
      }
      conv(c3, nc, 1, h, w, 1, false, true);
      layers += 1 + 1;
    }
    layers += 1 + 2 + 2;  // head, two branch lists, DFL module and its conv
  }
};

std::vector<Tally> tally(const ArchGraph& graph, int imgsz) {
  const std::vector<NodeShape> shapes = propagate_shapes(graph, imgsz, imgsz);
  const std::vector<int> in_c = input_channels(graph);
  std::vector<Tally> out(graph.nodes.size());
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const NodeSpec& n = graph.nodes[i];
    const NodeArgs& a = n.args;
    const NodeShape o = shapes[i];
    Tally& t = out[i];
    switch (n.kind) {
      case NodeKind::Conv:
        t.conv_block(in_c[i], a.out_channels, a.kernel, o.h, o.w);
        break;
      case NodeKind::GhostConv:
        t.ghost_conv(in_c[i], a.out_channels, a.kernel, o.h, o.w);
        break;
      case NodeKind::C3k2:
        t.c3k2(in_c[i], a.out_channels, a.repeats, a.c3k, a.expansion, o.h, o.w);
        break;
      case NodeKind::C3Ghost:
        t.c3ghost(in_c[i], a.out_channels, a.repeats, a.expansion, o.h, o.w);
        break;
      case NodeKind::SPPF:
        t.sppf(in_c[i], a.out_channels, o.h, o.w);
        break;
      case NodeKind::C2PSA:
        t.c2psa(in_c[i], a.repeats, o.h, o.w);
        break;
      case NodeKind::Upsample:
      case NodeKind::Concat:
        t.layers = 1;
        break;
      case NodeKind::Detect: {
        std::array<int, 3> ch{};
        std::array<NodeShape, 3> maps{};
        for (int k = 0; k < 3; ++k) {
          maps[k] = shapes[n.source(k)];
          ch[k] = maps[k].c;
        }
        t.detect(ch, maps, graph.nc, a.legacy_head);
        break;
      }
    }
  }
  return out;
}

}  // namespace

ParamCount count_params(const ArchGraph& graph) {
  ParamCount c;
  for (const auto& t : tally(graph, 64)) {
    c.per_node.push_back(t.params);
    c.total += t.params;
  }
  return c;
}

FlopCount count_flops(const ArchGraph& graph, int imgsz) {
  FlopCount c;
  for (const auto& t : tally(graph, imgsz)) {
    c.per_node.push_back(t.flops);
    c.total += t.flops;
  }
  return c;
}

int count_layers(const ArchGraph& graph) {
  int layers = 3;  // model, top-level sequence, shared activation
  for (const auto& t : tally(graph, 64)) layers += t.layers;
  return layers;
}

ProfileReport profile(const ArchGraph& graph, int imgsz) {
  ProfileReport r;
  r.family = graph.family;
  r.scale = graph.scale;
  r.nc = graph.nc;
  r.imgsz = imgsz;
  const auto tallies = tally(graph, imgsz);
  const auto shapes = propagate_shapes(graph, imgsz, imgsz);
  const auto in_c = input_channels(graph);
  r.layers = 3;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    NodeProfile p;
    p.index = static_cast<int>(i);
    p.kind = graph.nodes[i].kind;
    for (std::size_t k = 0; k < graph.nodes[i].inputs.size(); ++k) {
      p.inputs.push_back(graph.nodes[i].source(k));
    }
    p.in_channels = in_c[i];
    p.out = shapes[i];
    p.params = tallies[i].params;
    p.flops = tallies[i].flops;
    p.layers = tallies[i].layers;
    r.params += p.params;
    r.flops += p.flops;
    r.layers += p.layers;
    r.per_node.push_back(std::move(p));
  }
  r.gradients = r.params;
  r.size_mb = 2.0 * static_cast<double>(r.params) / (1024.0 * 1024.0);
  return r;
}

double reduction_pct(double a, double b) {
  return a == 0.0 ? 0.0 : 100.0 * (a - b) / a;
}

ComparisonReport compare(const ArchGraph& base, const ArchGraph& ghost,
                         int imgsz) {
  ComparisonReport c;
  c.base = profile(base, imgsz);
  c.ghost = profile(ghost, imgsz);
  c.param_reduction_pct = reduction_pct(static_cast<double>(c.base.params),
                                        static_cast<double>(c.ghost.params));
  c.flop_reduction_pct = reduction_pct(static_cast<double>(c.base.flops),
                                       static_cast<double>(c.ghost.flops));
  c.size_reduction_pct = reduction_pct(c.base.size_mb, c.ghost.size_mb);
  return c;
}

ComparisonReport compare(Scale scale, int nc, int imgsz) {
  return compare(make_graph(Family::YOLOv11, scale, nc),
                 make_graph(Family::GYOLOv11, scale, nc), imgsz);
}

std::int64_t conv_block_params(int c1, int c2, int k, int groups) {
  Tally t;
  t.conv(c1, c2, k, 1, 1, groups);
  return t.params;
}

std::int64_t conv_flops(int c1, int c2, int k, int out_h, int out_w, int groups) {
  Tally t;
  t.conv(c1, c2, k, out_h, out_w, groups);
  return t.flops;
}

std::int64_t ghost_conv_params(int c1, int c2, int k) {
  Tally t;
  t.ghost_conv(c1, c2, k, 1, 1);
  return t.params;
}

// ---------------------------------------------------------------- emitters --

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string inputs_str(const std::vector<int>& in) {
  std::string s;
  for (std::size_t i = 0; i < in.size(); ++i) {
    s += (i ? "," : "") + std::to_string(in[i]);
  }
  return s;
}

nlohmann::json profile_doc(const ProfileReport& r) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& p : r.per_node) {
    nodes.push_back({{"index", p.index},
                     {"kind", to_string(p.kind)},
                     {"inputs", p.inputs},
                     {"in_channels", p.in_channels},
                     {"out_shape", {p.out.c, p.out.h, p.out.w}},
                     {"params", p.params},
                     {"flops", p.flops},
                     {"layers", p.layers}});
  }
  return {{"variant", variant_name(r.family, r.scale)},
          {"family", to_string(r.family)},
          {"scale", to_string(r.scale)},
          {"nc", r.nc},
          {"imgsz", r.imgsz},
          {"layers", r.layers},
          {"params", r.params},
          {"gradients", r.gradients},
          {"flops", r.flops},
          {"params_m", r.params_m()},
          {"gflops", r.gflops()},
          {"size_mb", r.size_mb},
          {"nodes", nodes}};
}

}  // namespace

std::string profile_text(const ProfileReport& r) {
  std::ostringstream os;
  os << variant_name(r.family, r.scale) << " (nc=" << r.nc
     << ", imgsz=" << r.imgsz << ")\n";
  os << "layers: module-tree node count; params: learnable elements; "
        "flops: 2 x MACs\n\n";
  char line[160];
  std::snprintf(line, sizeof line, "%4s  %-10s %-8s %6s  %-16s %12s %16s %7s\n",
                "idx", "kind", "from", "c_in", "out (c,h,w)", "params", "flops",
                "layers");
  os << line;
  for (const auto& p : r.per_node) {
    const std::string out = std::to_string(p.out.c) + "," +
                            std::to_string(p.out.h) + "," +
                            std::to_string(p.out.w);
    std::snprintf(line, sizeof line,
                  "%4d  %-10s %-8s %6d  %-16s %12lld %16lld %7d\n", p.index,
                  to_string(p.kind).c_str(), inputs_str(p.inputs).c_str(),
                  p.in_channels, out.c_str(), static_cast<long long>(p.params),
                  static_cast<long long>(p.flops), p.layers);
    os << line;
  }
  os << "\nlayers     " << r.layers << "\n";
  os << "params     " << r.params << " (" << fmt("%.3f", r.params_m()) << " M)\n";
  os << "gradients  " << r.gradients << "\n";
  os << "flops      " << r.flops << " (" << fmt("%.2f", r.gflops()) << " G)\n";
  os << "size       " << fmt("%.2f", r.size_mb) << " MB (f16)\n";
  return os.str();
}

std::string profile_json(const ProfileReport& r) {
  return profile_doc(r).dump(2) + "\n";
}

std::string profile_csv(const ProfileReport& r) {
  std::ostringstream os;
  os << "index,kind,inputs,in_channels,out_c,out_h,out_w,params,flops,layers\n";
  for (const auto& p : r.per_node) {
    os << p.index << ',' << to_string(p.kind) << ",\"" << inputs_str(p.inputs)
       << "\"," << p.in_channels << ',' << p.out.c << ',' << p.out.h << ','
       << p.out.w << ',' << p.params << ',' << p.flops << ',' << p.layers
       << '\n';
  }
  return os.str();
}

std::string comparison_text(const ComparisonReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %14s %14s %10s\n", "",
                variant_name(r.base.family, r.base.scale).c_str(),
                variant_name(r.ghost.family, r.ghost.scale).c_str(),
                "reduction");
  os << line;
  std::snprintf(line, sizeof line, "%-12s %14d %14d %10s\n", "layers",
                r.base.layers, r.ghost.layers, "");
  os << line;
  std::snprintf(line, sizeof line, "%-12s %14.3f %14.3f %9.1f%%\n", "params (M)",
                r.base.params_m(), r.ghost.params_m(), r.param_reduction_pct);
  os << line;
  std::snprintf(line, sizeof line, "%-12s %14.2f %14.2f %9.1f%%\n", "FLOPs (G)",
                r.base.gflops(), r.ghost.gflops(), r.flop_reduction_pct);
  os << line;
  std::snprintf(line, sizeof line, "%-12s %14.2f %14.2f %9.1f%%\n", "size (MB)",
                r.base.size_mb, r.ghost.size_mb, r.size_reduction_pct);
  os << line;
  return os.str();
}

std::string comparison_json(const ComparisonReport& r) {
  nlohmann::json doc = {{"base", profile_doc(r.base)},
                        {"ghost", profile_doc(r.ghost)},
                        {"param_reduction_pct", r.param_reduction_pct},
                        {"flop_reduction_pct", r.flop_reduction_pct},
                        {"size_reduction_pct", r.size_reduction_pct}};
  return doc.dump(2) + "\n";
}

std::string comparison_csv(const ComparisonReport& r) {
  std::ostringstream os;
  os << "index,base_kind,base_params,base_flops,ghost_kind,ghost_params,"
        "ghost_flops\n";
  const std::size_t rows =
      std::max(r.base.per_node.size(), r.ghost.per_node.size());
  for (std::size_t i = 0; i < rows; ++i) {
    os << i;
    for (const ProfileReport* p : {&r.base, &r.ghost}) {
      if (i < p->per_node.size()) {
        const auto& n = p->per_node[i];
        os << ',' << to_string(n.kind) << ',' << n.params << ',' << n.flops;
      } else {
        os << ",,,";
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace gyolo
