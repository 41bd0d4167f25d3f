#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gyolo/arch.hpp"

namespace gyolo {

// Closed-form complexity of an architecture graph. Nothing here builds or
// runs blocks, so these numbers serve as an independent check on them.
//
// Conventions:
//   params  learnable elements: conv weights, conv biases, batchnorm gamma
//           and beta. Running statistics and the fixed DFL projection are
//           excluded.
//   flops   2 x multiply-accumulates of every convolution and of the two
//           attention matmuls, at the propagated spatial sizes, batch 1.
//           Bias, batchnorm, activations, pooling and resampling are free.
//   layers  module-tree node count: every module and container counts once,
//           a Conv without activation carries an identity module, and the
//           shared SiLU counts once for the whole model (plus the model and
//           its top-level sequence).

struct NodeProfile {
  int index = 0;
  NodeKind kind = NodeKind::Conv;
  std::vector<int> inputs;
  int in_channels = 0;
  NodeShape out;
  std::int64_t params = 0;
  std::int64_t flops = 0;
  int layers = 0;
};

struct ProfileReport {
  Family family = Family::YOLOv11;
  Scale scale = Scale::N;
  int nc = 0;
  int imgsz = 640;
  int layers = 0;
  std::int64_t params = 0;
  std::int64_t gradients = 0;
  std::int64_t flops = 0;
  /// Half-precision parameter payload, 2 * params / 2^20.
  double size_mb = 0.0;
  std::vector<NodeProfile> per_node;

  double params_m() const { return params / 1e6; }
  double gflops() const { return flops / 1e9; }
};

struct ComparisonReport {
  ProfileReport base;
  ProfileReport ghost;
  double param_reduction_pct = 0.0;
  double flop_reduction_pct = 0.0;
  double size_reduction_pct = 0.0;
};

/// Per-node learnable counts plus the total.
struct ParamCount {
  std::vector<std::int64_t> per_node;
  std::int64_t total = 0;
};
ParamCount count_params(const ArchGraph& graph);

struct FlopCount {
  std::vector<std::int64_t> per_node;
  std::int64_t total = 0;
};
FlopCount count_flops(const ArchGraph& graph, int imgsz);

int count_layers(const ArchGraph& graph);

ProfileReport profile(const ArchGraph& graph, int imgsz = 640);

/// 100 * (a - b) / a, 0 when a is 0.
double reduction_pct(double a, double b);

ComparisonReport compare(const ArchGraph& base, const ArchGraph& ghost,
                         int imgsz = 640);
/// Both families at one scale.
ComparisonReport compare(Scale scale, int nc, int imgsz = 640);

// Learnable parameters of single blocks, for block-level assertions.
std::int64_t conv_block_params(int c1, int c2, int k, int groups = 1);
std::int64_t ghost_conv_params(int c1, int c2, int k);
/// 2 * c2 * (c1 / groups) * k * k * out_h * out_w.
std::int64_t conv_flops(int c1, int c2, int k, int out_h, int out_w, int groups = 1);

std::string profile_text(const ProfileReport& r);
std::string profile_json(const ProfileReport& r);
/// One header line plus one row per node.
std::string profile_csv(const ProfileReport& r);

std::string comparison_text(const ComparisonReport& r);
std::string comparison_json(const ComparisonReport& r);
/// Side-by-side per-node rows; as many rows as the larger graph has nodes.
std::string comparison_csv(const ComparisonReport& r);

}  // namespace gyolo
