#include "nbrenc/training/checkpoint.hpp"

#include "nbrenc/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace nbrenc::training {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void read(void* dst, std::size_t count, const char* what) {
    if (bytes_.size() - pos_ < count) {
      throw IoError(std::string("checkpoint truncated while reading ") + what);
    }
    std::memcpy(dst, bytes_.data() + pos_, count);
    pos_ += count;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v = 0;
    read(&v, 4, what);
    return v;
  }
  std::uint64_t u64(const char* what) {
    std::uint64_t v = 0;
    read(&v, 8, what);
    return v;
  }
  std::string str(std::uint64_t len, const char* what) {
    if (bytes_.size() - pos_ < len) throw IoError(std::string("checkpoint truncated while reading ") + what);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const models::Model<float>& model) {
  std::string out;
  out.append(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  const std::string config = models::to_json(model.config).dump();
  put_u64(out, config.size());
  out += config;
  for (const auto& [name, value] : model.all_parameters()) {
    put_u64(out, name.size());
    out += name;
    put_u64(out, static_cast<std::uint64_t>(value->rows()));
    put_u64(out, static_cast<std::uint64_t>(value->cols()));
    out.append(reinterpret_cast<const char*>(value->data()), static_cast<std::size_t>(value->size()) * sizeof(float));
  }
  return out;
}

models::Model<float> deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  char magic[4];
  in.read(magic, 4, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("not a checkpoint file (bad magic)");
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t config_len = in.u64("config length");
  const std::string config_text = in.str(config_len, "config");
  models::ModelConfig config;
  try {
    config = models::model_config_from_json(nlohmann::json::parse(config_text));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint config is not valid JSON: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config is invalid: ") + e.what());
  }

  // The expected parameter set follows from the config alone.
  const models::Model<float> shape = models::init_model<float>(config, 0);
  const auto expected = shape.all_parameters();
  std::map<std::string, DenseMatrix> loaded;
  for (const auto& [name, ref] : expected) {
    const std::uint64_t name_len = in.u64("parameter name length");
    const std::string got = in.str(name_len, "parameter name");
    if (got != name) throw FormatError("checkpoint parameter '" + got + "' where '" + name + "' was expected");
    const std::uint64_t rows = in.u64("parameter rows");
    const std::uint64_t cols = in.u64("parameter cols");
    if (rows != static_cast<std::uint64_t>(ref->rows()) || cols != static_cast<std::uint64_t>(ref->cols())) {
      throw FormatError("checkpoint parameter '" + name + "' has shape " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", config implies " + std::to_string(ref->rows()) + "x" +
                        std::to_string(ref->cols()));
    }
    DenseMatrix value(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(value.data(), static_cast<std::size_t>(value.size()) * sizeof(float), "parameter values");
    loaded.emplace(name, std::move(value));
  }
  if (!in.done()) throw FormatError("trailing bytes after the last checkpoint parameter");

  models::Model<float> model;
  model.config = config;
  model.decoders.resize(config.decoder_count);
  for (auto& [name, value] : loaded) {
    if (shape.encoder.contains(name)) {
      model.encoder.add(name, std::move(value));
      continue;
    }
    for (std::size_t j = 0; j < config.decoder_count; ++j) {
      if (shape.decoders[j].contains(name)) model.decoders[j].add(name, std::move(value));
    }
  }
  return model;
}

void save_checkpoint(const models::Model<float>& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at '" + path.string() + "': " + ec.message());
}

models::Model<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading checkpoint '" + path.string() + "'");
  return deserialize_checkpoint(buf.str());
}

}  // namespace nbrenc::training
