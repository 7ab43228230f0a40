#include "oodbench/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

namespace oodbench::fft {

namespace detail {

void* aligned_alloc(std::size_t bytes) {
  void* p = fftw_malloc(bytes == 0 ? 1 : bytes);
  if (!p) throw std::bad_alloc();
  return p;
}

void aligned_free(void* p) noexcept { fftw_free(p); }

}  // namespace detail

namespace {

// The FFTW planner is not re-entrant; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void transform(Buffer& data, const Shape& shape, int sign) {
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_3d(static_cast<int>(shape.nz), static_cast<int>(shape.ny), static_cast<int>(shape.nx), ptr,
                            ptr, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace

Spectrum forward(const ScalarVolume& v) {
  Spectrum s{v.shape(), Buffer(v.size())};
  std::transform(v.data().begin(), v.data().end(), s.bins.begin(), [](double x) { return Complex(x, 0.0); });
  transform(s.bins, s.shape, FFTW_FORWARD);
  return s;
}

std::vector<double> inverse_real(Spectrum s, double* max_imag) {
  transform(s.bins, s.shape, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(s.bins.size());
  std::vector<double> out(s.bins.size());
  double max_re = 0.0, max_im = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = s.bins[i].real() * scale;
    max_re = std::max(max_re, std::abs(out[i]));
    max_im = std::max(max_im, std::abs(s.bins[i].imag() * scale));
  }
  if (max_imag) *max_imag = max_im / std::max(max_re, 1e-300);
  return out;
}

}  // namespace oodbench::fft
