#pragma once

#include "nbrenc/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fixture {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& contents);
std::string read_text(const std::filesystem::path& path);

// Gaussian blobs with unit-variance noise around centers scaled by `spread`.
struct Blobs {
  nbrenc::DenseMatrix points;
  nbrenc::LabelVector labels;
};
Blobs gaussian_blobs(std::size_t per_cluster, std::size_t dims, std::size_t clusters, double spread,
                     std::uint64_t seed);

// Uniform [0, 1) matrix.
nbrenc::DenseMatrix uniform_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed);
nbrenc::Matrix<double> uniform_matrix_d(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                        double lo = 0.0, double hi = 1.0);

// Features then label per row, as the CSV loader expects.
std::string labeled_csv(const nbrenc::DenseMatrix& x, const nbrenc::LabelVector& y);

struct ProcessResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};
// Runs the executable with the arguments through the shell.
ProcessResult run_process(const std::filesystem::path& exe, const std::vector<std::string>& args);

// Directory holding the four MNIST IDX files, or empty when they are missing.
std::filesystem::path mnist_dir();

}  // namespace fixture
