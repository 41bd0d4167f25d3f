#include "gyolo/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace gyolo {

namespace {

struct Token {
  std::string_view text;
  int column;  // 1-based
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

double parse_number(const Token& t, int line) {
  double v = 0.0;
  const char* end = t.text.data() + t.text.size();
  auto [ptr, ec] = std::from_chars(t.text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw LabelParseError("non-numeric token '" + std::string(t.text) + "'",
                          line, t.column);
  }
  return v;
}

}  // namespace

std::vector<GroundTruthBox> parse_label_file(std::string_view text,
                                             int num_classes) {
  std::vector<GroundTruthBox> boxes;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;

    const std::vector<Token> tokens = tokenize(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 5) {
      throw LabelParseError("expected 5 tokens, got " +
                                std::to_string(tokens.size()),
                            line_no, tokens.size() > 5 ? tokens[5].column : 1);
    }
    const double cls = parse_number(tokens[0], line_no);
    if (cls != std::floor(cls) || cls < 0) {
      throw LabelParseError("class id must be a non-negative integer",
                            line_no, tokens[0].column);
    }
    if (cls >= num_classes) {
      throw LabelParseError("class id " + std::string(tokens[0].text) +
                                " >= number of classes " +
                                std::to_string(num_classes),
                            line_no, tokens[0].column);
    }
    GroundTruthBox b;
    b.class_id = static_cast<int>(cls);
    static constexpr const char* names[] = {"cx", "cy", "w", "h"};
    double* fields[] = {&b.cx, &b.cy, &b.w, &b.h};
    for (int k = 0; k < 4; ++k) {
      const double v = parse_number(tokens[k + 1], line_no);
      const bool size = k >= 2;
      if (v < 0.0 || v > 1.0 || (size && v == 0.0)) {
        throw LabelParseError(std::string(names[k]) + " = " +
                                  std::string(tokens[k + 1].text) +
                                  (size ? " outside (0, 1]" : " outside [0, 1]"),
                              line_no, tokens[k + 1].column);
      }
      *fields[k] = v;
    }
    boxes.push_back(b);
  }
  return boxes;
}

std::string serialize_labels(const std::vector<GroundTruthBox>& boxes) {
  std::ostringstream os;
  char buf[160];
  for (const auto& b : boxes) {
    std::snprintf(buf, sizeof buf, "%d %.17g %.17g %.17g %.17g\n", b.class_id,
                  b.cx, b.cy, b.w, b.h);
    os << buf;
  }
  return os.str();
}

Box to_pixels(const GroundTruthBox& b, int width, int height) {
  auto clip = [](double v, double hi) { return std::clamp(v, 0.0, hi); };
  return {clip((b.cx - b.w / 2) * width, width),
          clip((b.cy - b.h / 2) * height, height),
          clip((b.cx + b.w / 2) * width, width),
          clip((b.cy + b.h / 2) * height, height)};
}

GroundTruthBox to_normalized(int class_id, const Box& box, int width,
                             int height) {
  return {class_id, (box.x1 + box.x2) / 2 / width, (box.y1 + box.y2) / 2 / height,
          (box.x2 - box.x1) / width, (box.y2 - box.y1) / height};
}

std::vector<std::string> default_class_names() {
  return {"boneanomaly", "bonelesion",         "foreignbody",
          "fracture",    "metal",              "periostealreaction",
          "pronatorsign", "softtissue",        "text"};
}

namespace {
std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

void check_names(const std::vector<std::string>& names) {
  if (names.empty()) throw DataError("class name list is empty");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw DataError("empty class name");
    if (!seen.insert(n).second) throw DataError("duplicate class name '" + n + "'");
  }
}
}  // namespace

std::vector<std::string> parse_names_file(std::string_view text) {
  std::vector<std::string> names;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    std::string t = trim(line);
    if (!t.empty() && t[0] != '#') names.push_back(std::move(t));
  }
  check_names(names);
  return names;
}

DatasetManifest parse_manifest(std::string_view text,
                               const std::filesystem::path& base_dir) {
  DatasetManifest m;
  std::istringstream is{std::string(text)};
  std::string line;
  int line_no = 0;
  bool have_images = false;
  bool have_labels = false;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    auto resolve = [&](const std::string& v) {
      std::filesystem::path p(v);
      return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };
    if (key == "images_dir") {
      m.images_dir = resolve(value);
      have_images = true;
    } else if (key == "labels_dir") {
      m.labels_dir = resolve(value);
      have_labels = true;
    } else if (key == "names") {
      m.names.clear();
      std::size_t start = 0;
      while (start <= value.size()) {
        const auto comma = value.find(',', start);
        m.names.push_back(trim(value.substr(
            start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    } else {
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": unknown key '" + key + "'");
    }
  }
  if (!have_images) throw DataError("manifest is missing images_dir");
  if (!have_labels) throw DataError("manifest is missing labels_dir");
  check_names(m.names);
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path), path.parent_path());
}

DatasetScan scan_dataset(const DatasetManifest& manifest) {
  namespace fs = std::filesystem;
  for (const fs::path& dir : {manifest.images_dir, manifest.labels_dir}) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  }
  std::map<std::string, fs::path> images;
  std::map<std::string, fs::path> labels;
  for (const auto& e : fs::directory_iterator(manifest.images_dir)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext == ".ppm" || ext == ".pgm") images[e.path().stem().string()] = e.path();
  }
  for (const auto& e : fs::directory_iterator(manifest.labels_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") {
      labels[e.path().stem().string()] = e.path();
    }
  }
  DatasetScan scan;
  for (const auto& [stem, img] : images) {
    auto it = labels.find(stem);
    if (it == labels.end()) {
      scan.images_without_labels.push_back(img);
    } else {
      scan.items.push_back({stem, img, it->second});
    }
  }
  for (const auto& [stem, lbl] : labels) {
    if (!images.contains(stem)) scan.labels_without_images.push_back(lbl);
  }
  return scan;
}

// ----------------------------------------------------------------- images --

namespace {

/// Netpbm header reader: magic, width, height, maxval, with # comments.
class HeaderReader {
 public:
  explicit HeaderReader(std::string_view b) : bytes_(b) {}

  int next_int() {
    skip_space();
    if (pos_ >= bytes_.size() || bytes_[pos_] < '0' || bytes_[pos_] > '9') {
      throw DataError("malformed image header");
    }
    long v = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1 << 20) throw DataError("image header value too large");
    }
    return static_cast<int>(v);
  }

  /// Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size()) throw DataError("image has no raster");
    return pos_ + 1;
  }

  void skip(std::size_t n) { pos_ += n; }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Image decode_image(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw DataError("unsupported image format (expected binary PGM P5 or PPM P6)");
  }
  const bool color = bytes[1] == '6';
  HeaderReader hr(bytes);
  hr.skip(2);
  const int w = hr.next_int();
  const int h = hr.next_int();
  const int maxval = hr.next_int();
  if (w < 1 || h < 1) throw DataError("image has zero extent");
  if (maxval < 1 || maxval > 255) {
    throw DataError("only 8-bit images are supported (maxval " +
                    std::to_string(maxval) + ")");
  }
  const std::size_t off = hr.raster_offset();
  const std::size_t channels = color ? 3 : 1;
  const std::size_t need = static_cast<std::size_t>(w) * h * channels;
  if (bytes.size() - off < need) throw DataError("image raster is truncated");

  Image img;
  img.width = w;
  img.height = h;
  img.pixels = Tensor({1, 3, h, w});
  const float inv = 1.0f / static_cast<float>(maxval);
  const auto* raster = reinterpret_cast<const unsigned char*>(bytes.data() + off);
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) {
      const unsigned char v = color ? raster[i * 3 + c] : raster[i];
      img.pixels.plane(0, c)[i] = static_cast<float>(v) * inv;
    }
  }
  return img;
}

Image load_image(const std::filesystem::path& path) {
  try {
    return decode_image(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string encode_ppm(const Tensor& image) {
  if (image.n() != 1 || image.c() != 3) {
    throw ShapeError("PPM encoding needs a (1,3,h,w) tensor, got " +
                     image.shape().str());
  }
  std::string out = "P6\n" + std::to_string(image.w()) + " " +
                    std::to_string(image.h()) + "\n255\n";
  const std::size_t plane = image.shape().plane();
  out.reserve(out.size() + plane * 3);
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) {
      const float v = std::clamp(image.plane(0, c)[i], 0.0f, 1.0f);
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f))));
    }
  }
  return out;
}

void save_ppm(const Tensor& image, const std::filesystem::path& path) {
  const std::string bytes = encode_ppm(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

Tensor adjust_contrast_luminance(const Tensor& image, float alpha, float beta) {
  if (!(alpha > 0.0f)) throw std::invalid_argument("contrast alpha must be > 0");
  Tensor out = image;
  for (float& v : out.values()) {
    const double y = static_cast<double>(alpha) * (static_cast<double>(v) - 0.5) +
                     0.5 + static_cast<double>(beta);
    v = static_cast<float>(std::clamp(y, 0.0, 1.0));
  }
  return out;
}

}  // namespace gyolo
