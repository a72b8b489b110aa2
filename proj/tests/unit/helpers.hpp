#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "ltood/ndcore/tensor.hpp"

namespace testing {

inline ltood::nd::Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng,
                                       double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(r * c);
  for (auto& x : v) x = d(rng);
  return ltood::nd::Tensor::matrix(r, c, std::move(v));
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ltood-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
