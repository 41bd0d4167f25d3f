#include "gyolo/arch.hpp"

#include <json.hpp>

namespace gyolo {

using nlohmann::json;

std::string to_string(Family f) {
  return f == Family::YOLOv11 ? "yolov11" : "g-yolov11";
}

std::string to_string(Scale s) {
  static constexpr const char* names[] = {"n", "s", "m", "l", "x"};
  return names[static_cast<int>(s)];
}

Family parse_family(std::string_view text) {
  if (text == "yolov11") return Family::YOLOv11;
  if (text == "g-yolov11") return Family::GYOLOv11;
  throw ArchError("unknown family '" + std::string(text) +
                  "' (expected yolov11 or g-yolov11)");
}

Scale parse_scale(std::string_view text) {
  for (Scale s : kAllScales) {
    if (text == to_string(s)) return s;
  }
  throw ArchError("unknown scale '" + std::string(text) +
                  "' (expected one of n, s, m, l, x)");
}

std::string variant_name(Family f, Scale s) {
  return (f == Family::GYOLOv11 ? "G-YOLOv11" : "YOLOv11") + to_string(s);
}

namespace {
constexpr std::array<std::pair<NodeKind, const char*>, 9> kKindNames{{
    {NodeKind::Conv, "Conv"},
    {NodeKind::GhostConv, "GhostConv"},
    {NodeKind::C3k2, "C3k2"},
    {NodeKind::C3Ghost, "C3Ghost"},
    {NodeKind::SPPF, "SPPF"},
    {NodeKind::C2PSA, "C2PSA"},
    {NodeKind::Upsample, "Upsample"},
    {NodeKind::Concat, "Concat"},
    {NodeKind::Detect, "Detect"},
}};
}  // namespace

std::string to_string(NodeKind k) {
  for (const auto& [kind, name] : kKindNames) {
    if (kind == k) return name;
  }
  return "?";
}

NodeKind parse_node_kind(std::string_view text) {
  for (const auto& [kind, name] : kKindNames) {
    if (text == name) return kind;
  }
  throw ArchError("unknown node kind '" + std::string(text) + "'");
}

WidthSchedule width_schedule(Family f, Scale s) {
  if (f == Family::YOLOv11) {
    switch (s) {
      case Scale::N:
        return {{16, 32, 64, 128, 256}, {64, 128, 128, 256}, {64, 128}, {128, 64, 128, 256}, 1};
      case Scale::S:
        return {{32, 64, 128, 256, 512}, {128, 256, 256, 512}, {128, 256}, {256, 128, 256, 512}, 1};
      case Scale::M:
        return {{64, 128, 256, 512, 512}, {256, 512, 512, 512}, {256, 512}, {512, 256, 512, 512}, 1};
      case Scale::L:
        return {{64, 128, 256, 512, 512}, {256, 512, 512, 512}, {256, 512}, {512, 256, 512, 512}, 2};
      case Scale::X:
        return {{96, 192, 384, 768, 768}, {384, 768, 768, 768}, {384, 768}, {768, 384, 768, 768}, 2};
    }
  }
  switch (s) {
    case Scale::N:
      return {{8, 16, 32, 64, 128}, {32, 64, 64, 128}, {32, 64}, {64, 32, 64, 128}, 1};
    case Scale::S:
      return {{16, 32, 64, 128, 256}, {64, 128, 128, 256}, {64, 128}, {128, 64, 128, 256}, 1};
    case Scale::M:
      return {{32, 64, 128, 256, 512}, {128, 256, 256, 512}, {128, 256}, {256, 128, 256, 512}, 1};
    case Scale::L:
      return {{32, 64, 128, 256, 512}, {128, 256, 256, 512}, {128, 256}, {256, 128, 256, 512}, 2};
    case Scale::X:
      return {{48, 96, 192, 384, 768}, {192, 384, 384, 768}, {192, 384}, {384, 192, 384, 768}, 2};
  }
  throw ArchError("invalid scale");
}

WidthSchedule uncapped_base_schedule(Scale s) {
  static constexpr double multiples[] = {0.25, 0.5, 1.0, 1.0, 1.5};
  const double m = multiples[static_cast<int>(s)];
  auto w = [m](int c) { return static_cast<int>(c * m); };
  return {{w(64), w(128), w(256), w(512), w(1024)},
          {w(256), w(512), w(512), w(1024)},
          {w(256), w(512)},
          {w(512), w(256), w(512), w(1024)},
          (s == Scale::L || s == Scale::X) ? 2 : 1};
}

std::vector<int> flatten(const WidthSchedule& w) {
  std::vector<int> out(w.backbone_conv.begin(), w.backbone_conv.end());
  out.insert(out.end(), w.backbone_csp.begin(), w.backbone_csp.end());
  out.insert(out.end(), w.head_conv.begin(), w.head_conv.end());
  out.insert(out.end(), w.head_csp.begin(), w.head_csp.end());
  return out;
}

ArchGraph make_graph(Family family, Scale scale, int nc) {
  if (nc < 1) throw ArchError("nc must be >= 1, got " + std::to_string(nc));
  const WidthSchedule w = width_schedule(family, scale);
  const bool ghost = family == Family::GYOLOv11;
  const bool deep = scale == Scale::M || scale == Scale::L || scale == Scale::X;

  ArchGraph g;
  g.family = family;
  g.scale = scale;
  g.nc = nc;

  auto push = [&g](NodeKind kind, NodeArgs args, std::vector<int> inputs = {-1}) {
    NodeSpec n;
    n.index = static_cast<int>(g.nodes.size());
    n.inputs = std::move(inputs);
    n.kind = kind;
    n.args = args;
    g.nodes.push_back(std::move(n));
  };
  auto down = [&](int c) {
    NodeArgs a;
    a.out_channels = c;
    a.kernel = 3;
    a.stride = 2;
    push(ghost ? NodeKind::GhostConv : NodeKind::Conv, a);
  };
  auto csp = [&](int c, bool c3k, double e, std::vector<int> inputs = {-1}) {
    NodeArgs a;
    a.out_channels = c;
    a.repeats = w.repeats;
    if (ghost) {
      push(NodeKind::C3Ghost, a, std::move(inputs));
    } else {
      a.c3k = c3k || deep;
      a.expansion = e;
      push(NodeKind::C3k2, a, std::move(inputs));
    }
  };
  auto plain = [&](NodeKind kind, std::vector<int> inputs = {-1}) {
    push(kind, NodeArgs{}, std::move(inputs));
  };

  // Backbone.
  down(w.backbone_conv[0]);                      // 0  P1/2
  down(w.backbone_conv[1]);                      // 1  P2/4
  csp(w.backbone_csp[0], false, 0.25);           // 2
  down(w.backbone_conv[2]);                      // 3  P3/8
  csp(w.backbone_csp[1], false, 0.25);           // 4
  down(w.backbone_conv[3]);                      // 5  P4/16
  csp(w.backbone_csp[2], true, 0.5);             // 6
  down(w.backbone_conv[4]);                      // 7  P5/32
  csp(w.backbone_csp[3], true, 0.5);             // 8
  {
    NodeArgs a;
    a.out_channels = w.backbone_csp[3];
    a.kernel = 5;
    push(NodeKind::SPPF, a);                     // 9
    a = NodeArgs{};
    a.out_channels = w.backbone_csp[3];
    a.repeats = w.repeats;
    push(NodeKind::C2PSA, a);                    // 10
  }
  // Neck.
  plain(NodeKind::Upsample);                     // 11
  plain(NodeKind::Concat, {-1, 6});              // 12
  csp(w.head_csp[0], false, 0.5);                // 13
  plain(NodeKind::Upsample);                     // 14
  plain(NodeKind::Concat, {-1, 4});              // 15
  csp(w.head_csp[1], false, 0.5);                // 16 P3 out
  down(w.head_conv[0]);                          // 17
  plain(NodeKind::Concat, {-1, 13});             // 18
  csp(w.head_csp[2], false, 0.5);                // 19 P4 out
  down(w.head_conv[1]);                          // 20
  plain(NodeKind::Concat, {-1, 10});             // 21
  csp(w.head_csp[3], true, 0.5);                 // 22 P5 out
  {
    NodeArgs a;
    a.out_channels = 4 * 16 + nc;
    a.legacy_head = ghost;
    push(NodeKind::Detect, a, {16, 19, 22});     // 23
  }
  g.detect_sources = {16, 19, 22};
  return g;
}

void validate_topology(const ArchGraph& graph) {
  if (graph.nodes.empty()) throw ArchError("graph has no nodes");
  std::vector<int> consumers(graph.nodes.size(), 0);
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const NodeSpec& n = graph.nodes[i];
    if (n.index != static_cast<int>(i)) {
      throw ArchError("node " + std::to_string(i) + " has index " +
                      std::to_string(n.index));
    }
    if (n.inputs.empty()) {
      throw ArchError("node " + std::to_string(i) + " has no inputs");
    }
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const int src = n.source(k);
      // Node 0 reads the image, encoded as source -1.
      if (i == 0 && src == -1) continue;
      if (src < 0 || src >= static_cast<int>(i)) {
        throw ArchError("node " + std::to_string(i) +
                        " references non-earlier node " + std::to_string(src));
      }
      ++consumers[src];
    }
    if (n.kind == NodeKind::Concat && n.inputs.size() < 2) {
      throw ArchError("concat node " + std::to_string(i) +
                      " needs at least two inputs");
    }
    if (n.kind == NodeKind::Detect && i + 1 != graph.nodes.size()) {
      throw ArchError("detect node " + std::to_string(i) + " is not last");
    }
  }
  if (graph.nodes.back().kind != NodeKind::Detect) {
    throw ArchError("graph does not end in a detect node");
  }
  for (std::size_t i = 0; i + 1 < graph.nodes.size(); ++i) {
    if (consumers[i] == 0) {
      throw ArchError("node " + std::to_string(i) + " is a dangling sink");
    }
  }
}

std::vector<int> input_channels(const ArchGraph& graph) {
  std::vector<int> in(graph.nodes.size(), 0);
  std::vector<int> out(graph.nodes.size(), 0);
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const NodeSpec& n = graph.nodes[i];
    auto src_c = [&](std::size_t k) {
      const int s = n.source(k);
      return s < 0 ? 3 : out[s];
    };
    int c = 0;
    for (std::size_t k = 0; k < n.inputs.size(); ++k) c += src_c(k);
    if (n.kind == NodeKind::Detect) c = src_c(0);
    in[i] = c;
    switch (n.kind) {
      case NodeKind::Upsample:
      case NodeKind::Concat:
        out[i] = c;
        break;
      default:
        out[i] = n.args.out_channels;
    }
  }
  return in;
}

std::vector<NodeShape> propagate_shapes(const ArchGraph& graph, int input_h,
                                        int input_w) {
  validate_topology(graph);
  if (input_h < 32 || input_w < 32 || input_h % 32 || input_w % 32) {
    throw ArchError("input size " + std::to_string(input_h) + "x" +
                    std::to_string(input_w) +
                    " must be a positive multiple of 32");
  }
  std::vector<NodeShape> out(graph.nodes.size());
  const NodeShape image{3, input_h, input_w};
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const NodeSpec& n = graph.nodes[i];
    auto src = [&](std::size_t k) {
      const int s = n.source(k);
      return s < 0 ? image : out[s];
    };
    const NodeShape x = src(0);
    switch (n.kind) {
      case NodeKind::Conv:
      case NodeKind::GhostConv: {
        const int p = n.args.kernel / 2;
        const int s = n.args.stride;
        out[i] = {n.args.out_channels, (x.h + 2 * p - n.args.kernel) / s + 1,
                  (x.w + 2 * p - n.args.kernel) / s + 1};
        if (n.kind == NodeKind::GhostConv && n.args.out_channels % 2) {
          throw ArchError("GhostConv node " + std::to_string(i) +
                          " has odd width");
        }
        break;
      }
      case NodeKind::C3k2:
      case NodeKind::C3Ghost:
      case NodeKind::SPPF:
        out[i] = {n.args.out_channels, x.h, x.w};
        break;
      case NodeKind::C2PSA:
        if (n.args.out_channels != x.c) {
          throw ArchError("C2PSA node " + std::to_string(i) +
                          " must preserve channels");
        }
        out[i] = x;
        break;
      case NodeKind::Upsample:
        out[i] = {x.c, 2 * x.h, 2 * x.w};
        break;
      case NodeKind::Concat: {
        int c = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const NodeShape y = src(k);
          if (y.h != x.h || y.w != x.w) {
            throw ArchError("concat node " + std::to_string(i) +
                            " joins mismatched spatial sizes");
          }
          c += y.c;
        }
        out[i] = {c, x.h, x.w};
        break;
      }
      case NodeKind::Detect: {
        if (n.inputs.size() != 3) {
          throw ArchError("detect node needs 3 inputs");
        }
        for (int k = 0; k < 3; ++k) {
          const NodeShape y = src(k);
          const int stride = 8 << k;
          if (y.h * stride != input_h || y.w * stride != input_w) {
            throw ArchError("detect input " + std::to_string(k) +
                            " is not at stride " + std::to_string(stride));
          }
        }
        out[i] = {n.args.out_channels, x.h, x.w};
        break;
      }
    }
  }
  return out;
}

std::string export_arch(const ArchGraph& graph) {
  json nodes = json::array();
  for (const auto& n : graph.nodes) {
    json args = {{"out_channels", n.args.out_channels},
                 {"kernel", n.args.kernel},
                 {"stride", n.args.stride},
                 {"repeats", n.args.repeats},
                 {"c3k", n.args.c3k},
                 {"expansion", n.args.expansion},
                 {"legacy_head", n.args.legacy_head}};
    nodes.push_back({{"index", n.index},
                     {"kind", to_string(n.kind)},
                     {"inputs", n.inputs},
                     {"args", args}});
  }
  json doc = {{"format", "gyolo-arch"},
              {"version", 1},
              {"family", to_string(graph.family)},
              {"scale", to_string(graph.scale)},
              {"nc", graph.nc},
              {"detect_sources", graph.detect_sources},
              {"nodes", nodes}};
  return doc.dump(2) + "\n";
}

ArchGraph import_arch(std::string_view json_text) {
  try {
    const json doc = json::parse(json_text);
    if (doc.at("format").get<std::string>() != "gyolo-arch" ||
        doc.at("version").get<int>() != 1) {
      throw ArchError("not a gyolo-arch v1 document");
    }
    ArchGraph g;
    g.family = parse_family(doc.at("family").get<std::string>());
    g.scale = parse_scale(doc.at("scale").get<std::string>());
    g.nc = doc.at("nc").get<int>();
    g.detect_sources = doc.at("detect_sources").get<std::array<int, 3>>();
    for (const auto& jn : doc.at("nodes")) {
      NodeSpec n;
      n.index = jn.at("index").get<int>();
      n.kind = parse_node_kind(jn.at("kind").get<std::string>());
      n.inputs = jn.at("inputs").get<std::vector<int>>();
      const json& a = jn.at("args");
      n.args.out_channels = a.at("out_channels").get<int>();
      n.args.kernel = a.at("kernel").get<int>();
      n.args.stride = a.at("stride").get<int>();
      n.args.repeats = a.at("repeats").get<int>();
      n.args.c3k = a.at("c3k").get<bool>();
      n.args.expansion = a.at("expansion").get<double>();
      n.args.legacy_head = a.at("legacy_head").get<bool>();
      g.nodes.push_back(std::move(n));
    }
    validate_topology(g);
    return g;
  } catch (const json::exception& e) {
    throw ArchError(std::string("malformed architecture document: ") + e.what());
  }
}

}  // namespace gyolo
