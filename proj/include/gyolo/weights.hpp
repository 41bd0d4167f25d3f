#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gyolo {

struct ArchGraph;

/// Malformed or inconsistent GWTC data.
class WeightFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DType : std::uint8_t { F32 = 0, F16 = 1 };

struct WeightEntry {
  std::string name;
  DType dtype = DType::F32;
  std::vector<std::uint32_t> dims;
  /// Values widened to f32; for F16 entries every value is exactly
  /// representable in binary16.
  std::vector<float> values;

  std::size_t numel() const;
  bool operator==(const WeightEntry&) const = default;
};

/// Running batchnorm statistics are stored but are not learnable.
bool is_running_stat(std::string_view name);

/// Ordered named-tensor store.
class WeightContainer {
 public:
  /// Throws WeightFormatError on a duplicate name or a value count that does
  /// not match the dims.
  void add(WeightEntry entry);

  const WeightEntry* find(std::string_view name) const;
  const std::vector<WeightEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::size_t total_elements() const;
  std::size_t learnable_elements() const;

  bool operator==(const WeightContainer& other) const {
    return entries_ == other.entries_;
  }

 private:
  std::vector<WeightEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// GWTC v1, little-endian:
//   "GWTC" u32 version=1 u32 count
//   per entry: u32 name_len, name bytes, u8 dtype (0=f32, 1=f16), u8 ndim,
//              u32 dims[ndim], raw values
inline constexpr std::uint32_t kGwtcVersion = 1;

std::vector<std::uint8_t> serialize(const WeightContainer& container);
WeightContainer deserialize(std::span<const std::uint8_t> bytes);
std::size_t serialized_size(const WeightContainer& container);

void save(const WeightContainer& container, const std::filesystem::path& path);
WeightContainer load(const std::filesystem::path& path);

/// Every F32 entry converted to F16 (round-to-nearest-even) and widened back.
WeightContainer halfprec_roundtrip(const WeightContainer& container);

/// Seeded random parameters for every block of the graph (defined with the
/// model builder). `zero_weights` zeroes every conv weight instead.
WeightContainer init_random(const ArchGraph& graph, std::uint64_t seed,
                            bool zero_weights = false);

}  // namespace gyolo
