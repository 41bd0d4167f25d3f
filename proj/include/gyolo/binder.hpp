#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "gyolo/weights.hpp"

namespace gyolo {

/// A weight container does not match what the graph demands.
class BindError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ParamRole { ConvWeight, Bias, BnGamma, BnBeta, BnMean, BnVar };

/// One parameter a block asks for while it is being constructed.
struct ParamDecl {
  std::string name;
  std::vector<std::uint32_t> dims;
  ParamRole role = ParamRole::ConvWeight;
  /// Initial value for Bias parameters.
  float bias_init = 0.0f;
};

/// Supplies parameter values to blocks under construction.
class ParamBinder {
 public:
  virtual ~ParamBinder() = default;
  virtual std::vector<float> bind(const ParamDecl& decl) = 0;
  /// Test-identity mode: batchnorm is the identity (eps 0) and every
  /// activation is off.
  virtual bool test_identity() const { return false; }
};

/// Deterministic initialization: conv weights uniform in +-sqrt(6 / fan_in)
/// from a per-name xoshiro256++ stream, batchnorm (1, 0, 0, 1), biases at
/// their declared init. Every bound value is also appended to `sink`.
class RandomBinder : public ParamBinder {
 public:
  RandomBinder(std::uint64_t seed, WeightContainer* sink = nullptr,
               bool zero_weights = false)
      : seed_(seed), sink_(sink), zero_weights_(zero_weights) {}
  std::vector<float> bind(const ParamDecl& decl) override;

 private:
  std::uint64_t seed_;
  WeightContainer* sink_;
  bool zero_weights_;
};

/// Looks every parameter up in a container; names the offending entry when
/// one is missing or mis-shaped.
class ContainerBinder : public ParamBinder {
 public:
  explicit ContainerBinder(const WeightContainer& container)
      : container_(container) {}
  std::vector<float> bind(const ParamDecl& decl) override;

  /// Throws BindError if the container holds entries nothing asked for.
  void check_all_used() const;

 private:
  const WeightContainer& container_;
  std::set<std::string> used_;
};

/// Test-identity binder: conv weights and biases come from a callback,
/// batchnorm is the identity.
class TestIdentityBinder : public ParamBinder {
 public:
  using Source = std::function<std::vector<float>(const ParamDecl&)>;
  explicit TestIdentityBinder(Source source) : source_(std::move(source)) {}
  std::vector<float> bind(const ParamDecl& decl) override;
  bool test_identity() const override { return true; }

 private:
  Source source_;
};

std::size_t element_count(const std::vector<std::uint32_t>& dims);

}  // namespace gyolo
