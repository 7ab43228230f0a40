#pragma once

#include <complex>
#include <cstddef>
#include <new>
#include <span>
#include <vector>

#include "oodbench/volume.hpp"

namespace oodbench::fft {

using Complex = std::complex<double>;

namespace detail {
void* aligned_alloc(std::size_t bytes);
void aligned_free(void* p) noexcept;
}  // namespace detail

/// Allocator giving FFTW-aligned storage; plan selection (and so the exact
/// bits of a transform) depends on alignment, so every buffer uses it.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(detail::aligned_alloc(n * sizeof(T))); }
  void deallocate(T* p, std::size_t) noexcept { detail::aligned_free(p); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<Complex, AlignedAllocator<Complex>>;

/// k-space of a volume: unnormalized forward DFT, same x-fastest layout.
struct Spectrum {
  Shape shape;
  Buffer bins;

  Complex& at(std::size_t kx, std::size_t ky, std::size_t kz) {
    return bins[kx + shape.nx * (ky + shape.ny * kz)];
  }
  const Complex& at(std::size_t kx, std::size_t ky, std::size_t kz) const {
    return bins[kx + shape.nx * (ky + shape.ny * kz)];
  }
};

Spectrum forward(const ScalarVolume& v);

/// Inverse DFT scaled by 1/N; returns the real part. When max_imag is given
/// it receives max |imag| / max(|real|, tiny) over the output.
std::vector<double> inverse_real(Spectrum s, double* max_imag = nullptr);

/// Signed frequency of bin k on an axis of length n: k for k <= n/2, else k - n.
constexpr long signed_frequency(std::size_t k, std::size_t n) noexcept {
  return 2 * k <= n ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

/// Bin holding the s-th frequency in centered (fftshift) order.
constexpr std::size_t centered_to_bin(std::size_t s, std::size_t n) noexcept { return (s + (n + 1) / 2) % n; }

}  // namespace oodbench::fft
