#include <variant>

#include "gyolo/arch.hpp"
#include "gyolo/blocks.hpp"
#include "gyolo/ops.hpp"

namespace gyolo {

namespace {

struct Passthrough {};

using Block = std::variant<Passthrough, ConvBlock, GhostConvBlock, C3k2Block,
                           C3GhostBlock, SPPFBlock, C2PSABlock, DetectHead>;

Block make_block(const NodeSpec& n, int c_in, int nc, ParamBinder& binder,
                 const std::vector<int>& in_channels, const ArchGraph& graph) {
  const std::string path = "node" + std::to_string(n.index);
  const NodeArgs& a = n.args;
  switch (n.kind) {
    case NodeKind::Conv:
      return Block(std::in_place_type<ConvBlock>, binder, path, c_in,
                   a.out_channels, a.kernel, a.stride);
    case NodeKind::GhostConv:
      return Block(std::in_place_type<GhostConvBlock>, binder, path, c_in,
                   a.out_channels, a.kernel, a.stride);
    case NodeKind::C3k2:
      return Block(std::in_place_type<C3k2Block>, binder, path, c_in,
                   a.out_channels, a.repeats, a.c3k, a.expansion);
    case NodeKind::C3Ghost:
      return Block(std::in_place_type<C3GhostBlock>, binder, path, c_in,
                   a.out_channels, a.repeats, a.expansion);
    case NodeKind::SPPF:
      return Block(std::in_place_type<SPPFBlock>, binder, path, c_in,
                   a.out_channels, a.kernel);
    case NodeKind::C2PSA:
      return Block(std::in_place_type<C2PSABlock>, binder, path, c_in,
                   a.out_channels, a.repeats);
    case NodeKind::Upsample:
    case NodeKind::Concat:
      return Block(std::in_place_type<Passthrough>);
    case NodeKind::Detect: {
      std::array<int, 3> ch{};
      for (int k = 0; k < 3; ++k) {
        const int src = n.source(k);
        const NodeSpec& s = graph.nodes[src];
        ch[k] = s.kind == NodeKind::Concat || s.kind == NodeKind::Upsample
                    ? in_channels[src]
                    : s.args.out_channels;
      }
      return Block(std::in_place_type<DetectHead>, binder, path, nc, ch,
                   a.legacy_head);
    }
  }
  throw ArchError("unhandled node kind");
}

}  // namespace

struct Model::Impl {
  std::vector<Block> blocks;
  /// Index of the last node that reads each node's output.
  std::vector<int> last_use;
};

Model::Model(ArchGraph graph, ParamBinder& binder)
    : graph_(std::move(graph)), impl_(std::make_unique<Impl>()) {
  validate_topology(graph_);
  const std::vector<int> in_c = input_channels(graph_);
  impl_->last_use.assign(graph_.nodes.size(), -1);
  for (const auto& n : graph_.nodes) {
    impl_->blocks.push_back(
        make_block(n, in_c[n.index], graph_.nc, binder, in_c, graph_));
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const int src = n.source(k);
      if (src >= 0) impl_->last_use[src] = n.index;
    }
  }
}

Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

namespace {

template <class Visit>
std::vector<Tensor> run_graph(const ArchGraph& graph,
                              const std::vector<Block>& blocks,
                              const std::vector<int>& last_use,
                              const Tensor& image, Visit&& visit) {
  if (image.c() != 3) {
    throw ShapeError("model expects a 3-channel image, got " +
                     std::to_string(image.c()) + " channels");
  }
  if (image.h() % 32 || image.w() % 32) {
    throw ShapeError("model input " + image.shape().str() +
                     " is not a multiple of 32");
  }
  std::vector<Tensor> outputs(graph.nodes.size());
  std::vector<Tensor> result;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const NodeSpec& n = graph.nodes[i];
    auto input = [&](std::size_t k) -> const Tensor& {
      const int s = n.source(k);
      return s < 0 ? image : outputs[s];
    };
    const Block& b = blocks[i];
    if (n.kind == NodeKind::Upsample) {
      outputs[i] = upsample_nearest2x(input(0));
    } else if (n.kind == NodeKind::Concat) {
      std::vector<const Tensor*> xs;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) xs.push_back(&input(k));
      outputs[i] = concat_channels(xs);
    } else if (n.kind == NodeKind::Detect) {
      std::array<const Tensor*, 3> xs{&input(0), &input(1), &input(2)};
      result = std::get<DetectHead>(b).forward(xs);
      visit(i, result[0]);
    } else {
      outputs[i] = std::visit(
          [&](const auto& block) -> Tensor {
            if constexpr (std::is_same_v<std::decay_t<decltype(block)>,
                                         Passthrough> ||
                          std::is_same_v<std::decay_t<decltype(block)>,
                                         DetectHead>) {
              throw ArchError("node kind has no single-input block");
            } else {
              return block.forward(input(0));
            }
          },
          b);
    }
    if (n.kind != NodeKind::Detect) visit(i, outputs[i]);
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const int s = n.source(k);
      if (s >= 0 && last_use[s] == static_cast<int>(i)) outputs[s] = Tensor();
    }
  }
  return result;
}

}  // namespace

std::vector<Tensor> Model::forward(const Tensor& image) const {
  return run_graph(graph_, impl_->blocks, impl_->last_use, image,
                   [](std::size_t, const Tensor&) {});
}

std::vector<Shape> Model::trace_shapes(const Tensor& image) const {
  std::vector<Shape> shapes(graph_.nodes.size());
  run_graph(graph_, impl_->blocks, impl_->last_use, image,
            [&](std::size_t i, const Tensor& t) { shapes[i] = t.shape(); });
  return shapes;
}

Model build(const ArchGraph& graph, const WeightContainer& weights) {
  ContainerBinder binder(weights);
  Model model(graph, binder);
  binder.check_all_used();
  return model;
}

Model build(const ArchGraph& graph, std::uint64_t seed) {
  RandomBinder binder(seed);
  return Model(graph, binder);
}

WeightContainer init_random(const ArchGraph& graph, std::uint64_t seed,
                            bool zero_weights) {
  WeightContainer container;
  RandomBinder binder(seed, &container, zero_weights);
  Model model(graph, binder);
  return container;
}

}  // namespace gyolo
