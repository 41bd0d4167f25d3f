#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gyolo {

/// Raised when operand shapes are inconsistent with an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Extents of a rank-4 tensor in batch-channel-height-width order.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense single-precision tensor, row-major in (n, c, h, w) order.
class Tensor {
 public:
  Tensor() : data_(1, 0.0f) {}
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  static Tensor zeros(Shape shape) { return Tensor(shape, 0.0f); }
  static Tensor full(Shape shape, float value) { return Tensor(shape, value); }

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t numel() const { return data_.size(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }

  float* plane(int n, int c) { return data_.data() + offset(n, c, 0, 0); }
  const float* plane(int n, int c) const {
    return data_.data() + offset(n, c, 0, 0);
  }

  float& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  float at(int n, int c, int h, int w) const {
    return data_[offset(n, c, h, w)];
  }

  /// Same values under a new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  /// Value equality (NaN compares unequal, -0 == +0).
  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) *
               shape_.w +
           w;
  }

  Shape shape_{};
  std::vector<float> data_;
};

/// Byte-wise equality of shape and payload.
bool bit_equal(const Tensor& a, const Tensor& b);

/// Convolution hyper-parameters; `out_channels` and `groups` determine the
/// expected weight shape (out_channels, in_channels / groups, kh, kw).
struct ConvParams {
  struct Pair {
    int h = 1;
    int w = 1;
    bool operator==(const Pair&) const = default;
  };

  int out_channels = 1;
  Pair kernel{1, 1};
  Pair stride{1, 1};
  Pair padding{0, 0};
  int groups = 1;
  Pair dilation{1, 1};

  /// Square kernel with "same" padding k/2, the layout every network conv uses.
  static ConvParams square(int out_channels, int k, int s = 1, int groups = 1);

  int out_h(int in_h) const;
  int out_w(int in_w) const;
  void validate(int in_channels) const;
};

}  // namespace gyolo
