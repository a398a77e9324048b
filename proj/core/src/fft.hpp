#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "ps/error.hpp"

namespace ps::detail {

// In-place iterative radix-2 FFT. n must be a power of two.
inline void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw InternalError("fft size must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// Power spectrum of a real frame zero-padded to nfft; returns nfft/2 + 1 bins.
inline std::vector<double> power_spectrum(const double* x, std::size_t len,
                                          std::size_t nfft) {
  std::vector<std::complex<double>> buf(nfft, {0.0, 0.0});
  for (std::size_t i = 0; i < len && i < nfft; ++i) buf[i] = x[i];
  fft(buf);
  std::vector<double> p(nfft / 2 + 1);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::norm(buf[i]);
  return p;
}

}  // namespace ps::detail
