#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

namespace eulero {

// Iterative radix-2 FFT. All transform sizes in this codebase are powers of two.
namespace fft {

inline bool is_pow2(size_t n) { return n && (n & (n - 1)) == 0; }

template <typename T>
inline void transform(std::vector<std::complex<T>>& a, bool inverse) {
  const size_t n = a.size();
  if (!is_pow2(n)) throw std::invalid_argument("fft: size must be a power of two");
  // bit-reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * 3.14159265358979323846 / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u(a[i + k]);
        std::complex<double> v = std::complex<double>(a[i + k + len / 2]) * w;
        a[i + k] = std::complex<T>(u + v);
        a[i + k + len / 2] = std::complex<T>(u - v);
        w *= wl;
      }
    }
  }
  if (inverse) {
    const T inv = static_cast<T>(1.0 / static_cast<double>(n));
    for (auto& z : a) z *= inv;
  }
}

template <typename T>
inline void forward(std::vector<std::complex<T>>& a) { transform(a, false); }

template <typename T>
inline void inverse(std::vector<std::complex<T>>& a) { transform(a, true); }

}  // namespace fft
}  // namespace eulero
