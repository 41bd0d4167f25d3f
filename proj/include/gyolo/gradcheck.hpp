#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gyolo/tensor.hpp"

namespace gyolo::grad {

// Double-precision shadow implementations of the core ops with hand-written
// vector-Jacobian products, and a central-difference checker for them.

struct DTensor {
  Shape shape;
  std::vector<double> v;

  DTensor() = default;
  explicit DTensor(Shape s, double fill = 0.0) : shape(s), v(s.numel(), fill) {}
  DTensor(Shape s, std::vector<double> values);

  double& at(int n, int c, int h, int w) { return v[offset(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const { return v[offset(n, c, h, w)]; }
  std::size_t size() const { return v.size(); }

 private:
  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape.c + c) * shape.h + h) *
               shape.w + w;
  }
};

DTensor conv2d(const DTensor& x, const DTensor& w, const std::vector<double>& b,
               const ConvParams& p);
struct ConvGrads {
  DTensor dx;
  DTensor dw;
  std::vector<double> db;
};
ConvGrads conv2d_backward(const DTensor& x, const DTensor& w,
                          const ConvParams& p, const DTensor& dy);

DTensor silu(const DTensor& x);
DTensor silu_backward(const DTensor& x, const DTensor& dy);

struct BnParams {
  std::vector<double> gamma, beta, mean, var;
  double eps = 1e-3;
};
DTensor batchnorm(const DTensor& x, const BnParams& bn);
struct BnGrads {
  DTensor dx;
  std::vector<double> dgamma, dbeta;
};
BnGrads batchnorm_backward(const DTensor& x, const BnParams& bn,
                           const DTensor& dy);

DTensor concat(const DTensor& a, const DTensor& b);
/// Splits dy back into the two operands' channel ranges.
std::pair<DTensor, DTensor> concat_backward(const DTensor& dy, int a_channels);

DTensor add(const DTensor& a, const DTensor& b);
std::pair<DTensor, DTensor> add_backward(const DTensor& dy);

DTensor softmax_lastdim(const DTensor& x);
DTensor softmax_backward(const DTensor& y, const DTensor& dy);

enum class Target {
  Conv2d,
  DepthwiseConv2d,
  Silu,
  BatchNorm,
  Softmax,
  Add,
  Concat,
  GhostConv,
  GhostBottleneck
};

std::string to_string(Target t);
Target parse_target(const std::string& text);
std::vector<Target> all_targets();

struct GradReport {
  std::string op;
  std::uint64_t seed = 0;
  double max_rel_error = 0.0;
  /// Shapes of every probed tensor, e.g. "x(1,3,6,6)".
  std::vector<std::string> shapes;
  std::size_t probes = 0;
  double tolerance = 1e-4;
  bool pass = false;
};

inline constexpr double kFiniteDifferenceStep = 1e-3;
inline constexpr double kGradTolerance = 1e-4;

/// Compares the analytic gradient of sum(upstream * f(inputs)) against
/// five-point central differences for every input and parameter element.
/// `flip_sign` negates the analytic input gradient (a negative control).
GradReport check(Target target, std::uint64_t seed,
                 double tolerance = kGradTolerance, bool flip_sign = false);

std::string reports_json(const std::vector<GradReport>& reports);

}  // namespace gyolo::grad
