#include "fixtures.hpp"

#include "nbrenc/random.hpp"

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fixture {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::string templ = (fs::temp_directory_path() / "nbrenc-test-XXXXXX").string();
  if (mkdtemp(templ.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = templ;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  out << contents;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Blobs gaussian_blobs(std::size_t per_cluster, std::size_t dims, std::size_t clusters, double spread,
                     std::uint64_t seed) {
  nbrenc::Rng rng(seed);
  nbrenc::Matrix<double> centers(static_cast<Eigen::Index>(clusters), static_cast<Eigen::Index>(dims));
  for (Eigen::Index i = 0; i < centers.size(); ++i) centers.data()[i] = spread * nbrenc::standard_normal(rng);
  Blobs out;
  out.points.resize(static_cast<Eigen::Index>(per_cluster * clusters), static_cast<Eigen::Index>(dims));
  for (std::size_t c = 0; c < clusters; ++c) {
    for (std::size_t i = 0; i < per_cluster; ++i) {
      const auto r = static_cast<Eigen::Index>(c * per_cluster + i);
      for (Eigen::Index d = 0; d < out.points.cols(); ++d) {
        out.points(r, d) =
            static_cast<float>(centers(static_cast<Eigen::Index>(c), d) + nbrenc::standard_normal(rng));
      }
      out.labels.push_back(static_cast<int>(c));
    }
  }
  return out;
}

nbrenc::DenseMatrix uniform_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  nbrenc::Rng rng(seed);
  nbrenc::DenseMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(nbrenc::uniform01(rng));
  return m;
}

nbrenc::Matrix<double> uniform_matrix_d(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo,
                                        double hi) {
  nbrenc::Rng rng(seed);
  nbrenc::Matrix<double> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nbrenc::uniform(rng, lo, hi);
  return m;
}

std::string labeled_csv(const nbrenc::DenseMatrix& x, const nbrenc::LabelVector& y) {
  std::string out;
  std::array<char, 64> buf{};
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      std::snprintf(buf.data(), buf.size(), "%.9g,", static_cast<double>(x(r, c)));
      out += buf.data();
    }
    out += std::to_string(y[static_cast<std::size_t>(r)]);
    out += '\n';
  }
  return out;
}

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

}  // namespace

ProcessResult run_process(const fs::path& exe, const std::vector<std::string>& args) {
  std::string cmd = shell_quote(exe.string());
  for (const auto& a : args) cmd += " " + shell_quote(a);
  cmd += " 2>&1";
  ProcessResult result;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) throw std::runtime_error("popen failed");
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) result.output.append(buf.data(), got);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

fs::path mnist_dir() {
  const char* env = std::getenv("NBRENC_MNIST_DIR");
  const fs::path dir = env != nullptr ? fs::path(env) : fs::path("/root/data/mnist");
  for (const char* name : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                           "t10k-labels-idx1-ubyte"}) {
    if (!fs::exists(dir / name)) return {};
  }
  return dir;
}

}  // namespace fixture
