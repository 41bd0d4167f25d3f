#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gyolo/binder.hpp"
#include "gyolo/tensor.hpp"
#include "gyolo/weights.hpp"

namespace gyolo {

/// Unknown family/scale or a malformed architecture document.
class ArchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Family { YOLOv11, GYOLOv11 };
enum class Scale { N, S, M, L, X };

inline constexpr std::array<Scale, 5> kAllScales = {Scale::N, Scale::S, Scale::M,
                                                    Scale::L, Scale::X};
inline constexpr std::array<Family, 2> kAllFamilies = {Family::YOLOv11,
                                                       Family::GYOLOv11};

std::string to_string(Family f);  // "yolov11" | "g-yolov11"
std::string to_string(Scale s);   // "n" .. "x"
Family parse_family(std::string_view text);
Scale parse_scale(std::string_view text);
/// Display name, e.g. "G-YOLOv11n".
std::string variant_name(Family f, Scale s);

enum class NodeKind {
  Conv,
  GhostConv,
  C3k2,
  C3Ghost,
  SPPF,
  C2PSA,
  Upsample,
  Concat,
  Detect
};

std::string to_string(NodeKind k);
NodeKind parse_node_kind(std::string_view text);

struct NodeArgs {
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int repeats = 1;
  /// C3k2: inner units are C3k blocks instead of plain bottlenecks.
  bool c3k = false;
  /// Hidden-width ratio of CSP blocks.
  double expansion = 0.5;
  /// Detect: 3x3 conv pair class branch instead of the depthwise-separable one.
  bool legacy_head = false;
  bool operator==(const NodeArgs&) const = default;
};

struct NodeSpec {
  int index = 0;
  /// Source nodes; -1 means the previous node.
  std::vector<int> inputs{-1};
  NodeKind kind = NodeKind::Conv;
  NodeArgs args;

  /// Absolute index of input i.
  int source(std::size_t i) const {
    return inputs[i] < 0 ? index + inputs[i] : inputs[i];
  }
  bool operator==(const NodeSpec&) const = default;
};

struct ArchGraph {
  Family family = Family::YOLOv11;
  Scale scale = Scale::N;
  int nc = 1;
  std::vector<NodeSpec> nodes;
  /// Node indices of the P3/P4/P5 maps fed to Detect.
  std::array<int, 3> detect_sources{};
  bool operator==(const ArchGraph&) const = default;
};

/// Filter counts per variant: backbone down-sampling convs, backbone CSP
/// blocks, head down-sampling convs, head CSP blocks, and CSP depth.
struct WidthSchedule {
  std::array<int, 5> backbone_conv;
  std::array<int, 4> backbone_csp;
  std::array<int, 2> head_conv;
  std::array<int, 4> head_csp;
  int repeats;
};

WidthSchedule width_schedule(Family f, Scale s);

/// Base-family widths before the per-scale channel ceiling is applied
/// (width multiple times the 64..1024 template).
WidthSchedule uncapped_base_schedule(Scale s);

/// All widths of a schedule in a fixed position order (15 entries).
std::vector<int> flatten(const WidthSchedule& w);

/// The canonical 24-node graph (11 backbone, 12 neck, 1 Detect).
ArchGraph make_graph(Family family, Scale scale, int nc);

/// Throws ArchError when inputs are not strictly earlier nodes, a Concat
/// has fewer than two inputs or Detect is not the unique sink.
void validate_topology(const ArchGraph& graph);

struct NodeShape {
  int c = 0;
  int h = 0;
  int w = 0;
  bool operator==(const NodeShape&) const = default;
};

/// Input channel count seen by every node (sum over Concat inputs).
std::vector<int> input_channels(const ArchGraph& graph);

/// Output (c, h, w) of every node for a 3-channel input. For Detect the
/// entry is the P3 map shape with 4*16+nc channels.
std::vector<NodeShape> propagate_shapes(const ArchGraph& graph, int input_h,
                                        int input_w);

/// Stable JSON document (UTF-8).
std::string export_arch(const ArchGraph& graph);
ArchGraph import_arch(std::string_view json_text);

/// A graph with constructed blocks; immutable and safe for concurrent forward
/// calls.
class Model {
 public:
  Model(ArchGraph graph, ParamBinder& binder);
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;

  /// Raw per-scale maps (n, 4*16+nc, h/s, w/s) for s = 8, 16, 32.
  std::vector<Tensor> forward(const Tensor& image) const;

  /// Output shape of every node for one forward pass (the Detect entry is
  /// its P3 map).
  std::vector<Shape> trace_shapes(const Tensor& image) const;

  const ArchGraph& graph() const { return graph_; }
  std::array<int, 3> strides() const { return {8, 16, 32}; }

  struct Impl;

 private:
  ArchGraph graph_;
  std::unique_ptr<Impl> impl_;
};

/// Binds every parameter from the container (strict: missing, mis-shaped and
/// unused entries are errors).
Model build(const ArchGraph& graph, const WeightContainer& weights);
Model build(const ArchGraph& graph, std::uint64_t seed);

}  // namespace gyolo
