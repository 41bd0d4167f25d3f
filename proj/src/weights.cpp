#include "gyolo/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "gyolo/half.hpp"

namespace gyolo {

static_assert(std::endian::native == std::endian::little,
              "GWTC I/O assumes a little-endian host");

std::size_t WeightEntry::numel() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

bool is_running_stat(std::string_view name) {
  return name.ends_with(".mean") || name.ends_with(".var");
}

void WeightContainer::add(WeightEntry entry) {
  if (index_.contains(entry.name)) {
    throw WeightFormatError("duplicate weight entry '" + entry.name + "'");
  }
  if (entry.values.size() != entry.numel()) {
    throw WeightFormatError("weight entry '" + entry.name + "' has " +
                            std::to_string(entry.values.size()) +
                            " values for " + std::to_string(entry.numel()) +
                            " elements");
  }
  index_.emplace(entry.name, entries_.size());
  entries_.push_back(std::move(entry));
}

const WeightEntry* WeightContainer::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &entries_[it->second];
}

std::size_t WeightContainer::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.values.size();
  return n;
}

std::size_t WeightContainer::learnable_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (!is_running_stat(e.name)) n += e.values.size();
  }
  return n;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (n > bytes_.size() - pos_) {
      throw WeightFormatError(std::string("truncated GWTC data while reading ") +
                              what + " at offset " + std::to_string(pos_));
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32(const char* what) {
    auto s = take(4, what);
    return static_cast<std::uint32_t>(s[0]) | static_cast<std::uint32_t>(s[1]) << 8 |
           static_cast<std::uint32_t>(s[2]) << 16 |
           static_cast<std::uint32_t>(s[3]) << 24;
  }
  std::uint8_t u8(const char* what) { return take(1, what)[0]; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t serialized_size(const WeightContainer& container) {
  std::size_t n = 12;
  for (const auto& e : container.entries()) {
    n += 4 + e.name.size() + 2 + 4 * e.dims.size() +
         e.numel() * (e.dtype == DType::F16 ? 2 : 4);
  }
  return n;
}

std::vector<std::uint8_t> serialize(const WeightContainer& container) {
  std::vector<std::uint8_t> out;
  out.reserve(serialized_size(container));
  out.insert(out.end(), {'G', 'W', 'T', 'C'});
  put_u32(out, kGwtcVersion);
  put_u32(out, static_cast<std::uint32_t>(container.size()));
  for (const auto& e : container.entries()) {
    if (e.dims.size() > 255) {
      throw WeightFormatError("entry '" + e.name + "' has more than 255 dims");
    }
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    out.push_back(static_cast<std::uint8_t>(e.dtype));
    out.push_back(static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) put_u32(out, d);
    if (e.dtype == DType::F32) {
      const auto* raw = reinterpret_cast<const std::uint8_t*>(e.values.data());
      out.insert(out.end(), raw, raw + e.values.size() * 4);
    } else {
      for (float v : e.values) {
        const std::uint16_t h = float_to_half_bits(v);
        out.push_back(static_cast<std::uint8_t>(h & 0xFF));
        out.push_back(static_cast<std::uint8_t>(h >> 8));
      }
    }
  }
  return out;
}

WeightContainer deserialize(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), "GWTC", 4) != 0) {
    throw WeightFormatError("bad magic: not a GWTC file");
  }
  const std::uint32_t version = in.u32("version");
  if (version != kGwtcVersion) {
    throw WeightFormatError("unsupported GWTC version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32("entry count");
  WeightContainer container;
  for (std::uint32_t i = 0; i < count; ++i) {
    WeightEntry e;
    const std::uint32_t name_len = in.u32("name length");
    auto name = in.take(name_len, "name");
    e.name.assign(name.begin(), name.end());
    const std::uint8_t dtype = in.u8("dtype");
    if (dtype > 1) {
      throw WeightFormatError("entry '" + e.name + "' has unknown dtype " +
                              std::to_string(dtype));
    }
    e.dtype = static_cast<DType>(dtype);
    const std::uint8_t ndim = in.u8("ndim");
    e.dims.resize(ndim);
    for (auto& d : e.dims) d = in.u32("dims");
    const std::size_t numel = e.numel();
    const std::size_t width = e.dtype == DType::F16 ? 2 : 4;
    if (numel > in.remaining() / width) {
      throw WeightFormatError("truncated GWTC data: entry '" + e.name +
                              "' declares " + std::to_string(numel) +
                              " values");
    }
    auto raw = in.take(numel * width, "values");
    e.values.resize(numel);
    if (e.dtype == DType::F32) {
      std::memcpy(e.values.data(), raw.data(), raw.size());
    } else {
      for (std::size_t k = 0; k < numel; ++k) {
        const auto h = static_cast<std::uint16_t>(raw[2 * k] | raw[2 * k + 1] << 8);
        e.values[k] = half_bits_to_float(h);
      }
    }
    container.add(std::move(e));
  }
  if (in.remaining() != 0) {
    throw WeightFormatError(std::to_string(in.remaining()) +
                            " trailing bytes after the last GWTC entry");
  }
  return container;
}

void save(const WeightContainer& container, const std::filesystem::path& path) {
  const auto bytes = serialize(container);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

WeightContainer load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

WeightContainer halfprec_roundtrip(const WeightContainer& container) {
  WeightContainer out;
  for (const auto& e : container.entries()) {
    WeightEntry h = e;
    h.dtype = DType::F16;
    for (auto& v : h.values) v = round_to_half(v);
    out.add(std::move(h));
  }
  return out;
}

}  // namespace gyolo
