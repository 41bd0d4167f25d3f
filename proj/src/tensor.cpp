#include "gyolo/tensor.hpp"

#include <cstring>
#include <sstream>

namespace gyolo {

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
  return os.str();
}

namespace {
void check_extents(const Shape& s) {
  if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1) {
    throw ShapeError("tensor extents must be >= 1, got " + s.str());
  }
}
}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(shape) {
  check_extents(shape);
  data_.assign(shape.numel(), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : shape_(shape), data_(std::move(values)) {
  check_extents(shape);
  if (data_.size() != shape.numel()) {
    throw ShapeError("tensor " + shape.str() + " needs " +
                     std::to_string(shape.numel()) + " values, got " +
                     std::to_string(data_.size()));
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != numel()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return Tensor(shape, data_);
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(),
                     a.numel() * sizeof(float)) == 0;
}

ConvParams ConvParams::square(int out_channels, int k, int s, int groups) {
  ConvParams p;
  p.out_channels = out_channels;
  p.kernel = {k, k};
  p.stride = {s, s};
  p.padding = {k / 2, k / 2};
  p.groups = groups;
  return p;
}

int ConvParams::out_h(int in_h) const {
  return (in_h + 2 * padding.h - dilation.h * (kernel.h - 1) - 1) / stride.h +
         1;
}

int ConvParams::out_w(int in_w) const {
  return (in_w + 2 * padding.w - dilation.w * (kernel.w - 1) - 1) / stride.w +
         1;
}

void ConvParams::validate(int in_channels) const {
  if (groups < 1 || kernel.h < 1 || kernel.w < 1 || stride.h < 1 ||
      stride.w < 1 || dilation.h < 1 || dilation.w < 1 || padding.h < 0 ||
      padding.w < 0 || out_channels < 1) {
    throw ShapeError("invalid convolution parameters");
  }
  if (in_channels % groups != 0 || out_channels % groups != 0) {
    throw ShapeError("groups=" + std::to_string(groups) +
                     " must divide in_channels=" + std::to_string(in_channels) +
                     " and out_channels=" + std::to_string(out_channels));
  }
}

}  // namespace gyolo
