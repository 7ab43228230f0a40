#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "oodbench/error.hpp"
#include "oodbench/volume.hpp"

namespace testing {

namespace fs = std::filesystem;
using oodbench::Errc;

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("oodbench_" + tag + "_" + std::to_string(rd()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

/// Runs f and returns the code of the oodbench::Error it throws.
template <typename F>
std::optional<Errc> error_code(F&& f) {
  try {
    f();
  } catch (const oodbench::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline oodbench::ScalarVolume random_volume(oodbench::Shape s, std::uint64_t seed, double lo = -100.0,
                                            double hi = 100.0, oodbench::Spacing sp = {}) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> data(s.voxels());
  for (auto& x : data) x = d(gen);
  return {oodbench::make_grid(s, sp), std::move(data)};
}

inline oodbench::ScalarVolume constant_volume(oodbench::Shape s, double value) {
  return {oodbench::make_grid(s), std::vector<double>(s.voxels(), value)};
}

inline oodbench::ScalarVolume filled(oodbench::Shape s, std::vector<double> data) {
  return {oodbench::make_grid(s), std::move(data)};
}

/// Largest |a - b| / max(1, |b|) over two equally sized arrays.
template <typename A, typename B>
double max_rel_diff(const A& a, const B& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  }
  return m;
}

/// Direct O(N^2) forward DFT with the same layout as fft::forward.
inline std::vector<std::complex<double>> naive_dft(const oodbench::ScalarVolume& v) {
  const auto& s = v.shape();
  std::vector<std::complex<double>> out(v.size());
  const double tau = 2.0 * std::numbers::pi;
  for (std::size_t kz = 0; kz < s.nz; ++kz)
    for (std::size_t ky = 0; ky < s.ny; ++ky)
      for (std::size_t kx = 0; kx < s.nx; ++kx) {
        std::complex<double> acc = 0.0;
        for (std::size_t z = 0; z < s.nz; ++z)
          for (std::size_t y = 0; y < s.ny; ++y)
            for (std::size_t x = 0; x < s.nx; ++x) {
              const double ph = -tau * (static_cast<double>(kx * x) / s.nx + static_cast<double>(ky * y) / s.ny +
                                        static_cast<double>(kz * z) / s.nz);
              acc += v.at(x, y, z) * std::polar(1.0, ph);
            }
        out[kx + s.nx * (ky + s.ny * kz)] = acc;
      }
  return out;
}

/// Real part of the 1/N inverse DFT.
inline std::vector<double> naive_idft_real(const std::vector<std::complex<double>>& k, oodbench::Shape s) {
  std::vector<double> out(s.voxels());
  const double tau = 2.0 * std::numbers::pi;
  const double n = static_cast<double>(s.voxels());
  for (std::size_t z = 0; z < s.nz; ++z)
    for (std::size_t y = 0; y < s.ny; ++y)
      for (std::size_t x = 0; x < s.nx; ++x) {
        std::complex<double> acc = 0.0;
        for (std::size_t kz = 0; kz < s.nz; ++kz)
          for (std::size_t ky = 0; ky < s.ny; ++ky)
            for (std::size_t kx = 0; kx < s.nx; ++kx) {
              const double ph = tau * (static_cast<double>(kx * x) / s.nx + static_cast<double>(ky * y) / s.ny +
                                       static_cast<double>(kz * z) / s.nz);
              acc += k[kx + s.nx * (ky + s.ny * kz)] * std::polar(1.0, ph);
            }
        out[x + s.nx * (y + s.ny * z)] = acc.real() / n;
      }
  return out;
}

/// Brute-force Mann-Whitney over all pairs, in half-units.
inline double pair_count_auroc(const std::vector<double>& neg, const std::vector<double>& pos) {
  std::uint64_t twice = 0;
  for (double n : neg)
    for (double p : pos) twice += p > n ? 2 : p == n ? 1 : 0;
  return static_cast<double>(twice) / (2.0 * static_cast<double>(neg.size()) * static_cast<double>(pos.size()));
}

}  // namespace testing
