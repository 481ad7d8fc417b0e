#include "egofuse/spectral.hpp"

#include <cmath>

namespace egofuse {

std::vector<double> dft_magnitudes(std::span<const double> signal, std::size_t count) {
  std::vector<double> out(count, 0.0);
  const std::size_t n = signal.size();
  if (n == 0) return out;
  const std::size_t available = n / 2 + 1;
  for (std::size_t k = 0; k < count && k < available; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      // Reduce k*i mod n first so the angle stays small and exact.
      const double angle = 2.0 * M_PI * static_cast<double>((k * i) % n) / static_cast<double>(n);
      re += signal[i] * std::cos(angle);
      im -= signal[i] * std::sin(angle);
    }
    out[k] = std::hypot(re, im) / static_cast<double>(n);
  }
  return out;
}

}  // namespace egofuse
