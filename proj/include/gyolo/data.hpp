#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gyolo/detection.hpp"
#include "gyolo/tensor.hpp"

namespace gyolo {

/// Label text that violates the "class cx cy w h" contract.
class LabelParseError : public std::runtime_error {
 public:
  LabelParseError(const std::string& message, int line, int column)
      : std::runtime_error("line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Unreadable or unsupported image / manifest.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Normalized YOLO annotation.
struct GroundTruthBox {
  int class_id = 0;
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  bool operator==(const GroundTruthBox&) const = default;
};

/// One annotation per non-blank line. `num_classes` bounds class ids.
std::vector<GroundTruthBox> parse_label_file(std::string_view text,
                                             int num_classes);
std::string serialize_labels(const std::vector<GroundTruthBox>& boxes);

/// Corner box in pixels, clipped to the image.
Box to_pixels(const GroundTruthBox& box, int width, int height);
GroundTruthBox to_normalized(int class_id, const Box& box, int width,
                             int height);

/// The nine GRAZPEDWRI-DX classes.
std::vector<std::string> default_class_names();
/// One class name per non-empty line.
std::vector<std::string> parse_names_file(std::string_view text);

struct DatasetManifest {
  std::filesystem::path images_dir;
  std::filesystem::path labels_dir;
  std::vector<std::string> names = default_class_names();
};

/// `key=value` lines: images_dir, labels_dir, names (comma separated).
/// Relative directories resolve against `base_dir`.
DatasetManifest parse_manifest(std::string_view text,
                               const std::filesystem::path& base_dir = {});
DatasetManifest load_manifest(const std::filesystem::path& path);

struct DatasetItem {
  std::string stem;
  std::filesystem::path image;
  std::filesystem::path label;
};

struct DatasetScan {
  /// Sorted by stem.
  std::vector<DatasetItem> items;
  std::vector<std::filesystem::path> images_without_labels;
  std::vector<std::filesystem::path> labels_without_images;
};

/// Pairs *.ppm / *.pgm images with *.txt labels by file stem.
DatasetScan scan_dataset(const DatasetManifest& manifest);

/// 8-bit image in planar float form, values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  /// (1, 3, height, width); grayscale is replicated to three channels.
  Tensor pixels;
};

Image decode_image(std::string_view bytes);
Image load_image(const std::filesystem::path& path);
/// Binary P6, values rounded to 8 bits.
std::string encode_ppm(const Tensor& image);
void save_ppm(const Tensor& image, const std::filesystem::path& path);

/// y = clamp(alpha * (x - 0.5) + 0.5 + beta, 0, 1).
Tensor adjust_contrast_luminance(const Tensor& image, float alpha, float beta);

std::string read_file(const std::filesystem::path& path);

}  // namespace gyolo
