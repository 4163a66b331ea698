#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "tdrc/drive.hpp"

namespace tdrc::test {

inline EncodedDrive make_drive(const VectorXcd& levels, double dt, std::size_t hold = 1) {
  EncodedDrive d;
  d.levels = levels;
  d.hold = hold;
  d.dt = dt;
  d.input_period = static_cast<double>(d.size()) * dt;
  d.markers = {0};
  return d;
}

inline EncodedDrive constant_drive(Complex value, std::size_t n, double dt) {
  return make_drive(VectorXcd::Constant(static_cast<Eigen::Index>(n), value), dt);
}

// Fresh scratch directory under the build tree, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() /
           ("tdrc-test-" + name + "-" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& f) const { return path / f; }
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace tdrc::test
