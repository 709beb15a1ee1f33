#include "nbrenc/data/loaders.hpp"

#include "nbrenc/errors.hpp"

#include <fstream>
#include <sstream>

namespace nbrenc::data {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return buf.str();
}

namespace {

std::uint32_t be32(const std::string& bytes, std::size_t offset, const char* what) {
  if (bytes.size() < offset + 4) throw IoError(std::string(what) + ": truncated IDX header");
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
  return v;
}

}  // namespace

LabeledDataset parse_idx(const std::string& image_bytes, const std::string& label_bytes) {
  const std::uint32_t image_magic = be32(image_bytes, 0, "images");
  if (image_magic != kIdxImageMagic) {
    throw FormatError("images: bad IDX magic " + std::to_string(image_magic) + ", expected 2051");
  }
  const std::uint32_t label_magic = be32(label_bytes, 0, "labels");
  if (label_magic != kIdxLabelMagic) {
    throw FormatError("labels: bad IDX magic " + std::to_string(label_magic) + ", expected 2049");
  }
  const std::size_t count = be32(image_bytes, 4, "images");
  const std::size_t rows = be32(image_bytes, 8, "images");
  const std::size_t cols = be32(image_bytes, 12, "images");
  const std::size_t label_count = be32(label_bytes, 4, "labels");
  if (count != label_count) {
    throw ConsistencyError("IDX image count " + std::to_string(count) + " differs from label count " +
                           std::to_string(label_count));
  }
  const std::size_t dims = rows * cols;
  constexpr std::size_t kImageHeader = 16;
  constexpr std::size_t kLabelHeader = 8;
  if (image_bytes.size() < kImageHeader + count * dims) throw IoError("images: IDX file truncated");
  if (label_bytes.size() < kLabelHeader + count) throw IoError("labels: IDX file truncated");

  LabeledDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dims));
  const auto* px = reinterpret_cast<const unsigned char*>(image_bytes.data() + kImageHeader);
  float* out = ds.features.data();
  for (std::size_t i = 0; i < count * dims; ++i) out[i] = static_cast<float>(px[i]) / 255.0f;
  LabelVector labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = static_cast<unsigned char>(label_bytes[kLabelHeader + i]);
  ds.labels = std::move(labels);
  ds.scaling.kind = FeatureScaling::Kind::minmax;
  ds.scaling.a.assign(dims, 0.0);
  ds.scaling.b.assign(dims, 255.0);
  return ds;
}

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  return parse_idx(read_file(images), read_file(labels));
}

}  // namespace nbrenc::data
