#include <algorithm>
#include <cmath>

#include "egofuse/error.hpp"
#include "egofuse/spectral.hpp"
#include "egofuse/video_features.hpp"

namespace egofuse {

namespace {

constexpr std::size_t kFrequencyComponents = 10;
// Samples this close to zero carry no sign.
constexpr double kSignEpsilon = 1e-9;

}  // namespace

std::vector<double> VifVector::concat() const {
  std::vector<double> out;
  out.reserve(kDim);
  out.insert(out.end(), zc.begin(), zc.end());
  out.insert(out.end(), four_meks.begin(), four_meks.end());
  out.insert(out.end(), ff.begin(), ff.end());
  return out;
}

std::vector<std::array<double, 2>> centroid_track(const std::vector<Image>& frames) {
  std::vector<std::array<double, 2>> track;
  track.reserve(frames.size());
  for (const auto& f : frames) {
    const double mean = f.cast<double>().mean();
    double mass = 0.0, sx = 0.0, sy = 0.0;
    for (Eigen::Index y = 0; y < f.rows(); ++y)
      for (Eigen::Index x = 0; x < f.cols(); ++x) {
        const double w = std::max(0.0, static_cast<double>(f(y, x)) - mean);
        mass += w;
        sx += w * static_cast<double>(x);
        sy += w * static_cast<double>(y);
      }
    if (!(mass > 0.0)) throw DataError("zero-mass frames");
    track.push_back({sx / mass, sy / mass});
  }
  return track;
}

double zero_crossing_rate(std::span<const double> signal) {
  if (signal.size() < 2) return 0.0;
  double mean = 0.0;
  for (double s : signal) mean += s;
  mean /= static_cast<double>(signal.size());
  double scale = 0.0;
  for (double s : signal) scale = std::max(scale, std::abs(s));
  const double eps = kSignEpsilon * std::max(1.0, scale);
  int crossings = 0, last_sign = 0;
  for (double s : signal) {
    const double d = s - mean;
    const int sign = d > eps ? 1 : (d < -eps ? -1 : 0);
    if (sign == 0) continue;
    if (last_sign != 0 && sign != last_sign) ++crossings;
    last_sign = sign;
  }
  return static_cast<double>(crossings) / static_cast<double>(signal.size() - 1);
}

std::array<double, 7> signal_statistics(std::span<const double> signal) {
  const auto n = static_cast<double>(signal.size());
  std::vector<double> sorted(signal.begin(), signal.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  double mean = 0.0, energy = 0.0;
  for (double s : signal) {
    mean += s;
    energy += s * s;
  }
  mean /= n;
  energy /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double s : signal) {
    const double d = s - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m4 /= n;
  const double kurtosis = m2 > 1e-24 ? m4 / (m2 * m2) : 0.0;
  return {sorted.front(), sorted.back(), median, energy, kurtosis, mean, std::sqrt(m2)};
}

VifVector compute_vif(const std::vector<Image>& frames) {
  if (frames.size() < 4) throw DataError("VIF needs at least 4 frames");
  const auto c = centroid_track(frames);
  const std::size_t nv = c.size() - 1, na = c.size() - 2;
  std::vector<double> vx(nv), vy(nv), vm(nv), ax(na), ay(na), am(na);
  for (std::size_t t = 0; t < nv; ++t) {
    vx[t] = c[t + 1][0] - c[t][0];
    vy[t] = c[t + 1][1] - c[t][1];
    vm[t] = std::hypot(vx[t], vy[t]);
  }
  for (std::size_t t = 0; t < na; ++t) {
    ax[t] = vx[t + 1] - vx[t];
    ay[t] = vy[t + 1] - vy[t];
    am[t] = std::hypot(ax[t], ay[t]);
  }

  VifVector out;
  const std::array<const std::vector<double>*, 6> signals{&vx, &vy, &ax, &ay, &vm, &am};
  for (std::size_t s = 0; s < 4; ++s) out.zc[s] = zero_crossing_rate(*signals[s]);
  for (std::size_t s = 0; s < 6; ++s) {
    const auto stats = signal_statistics(*signals[s]);
    std::copy(stats.begin(), stats.end(), out.four_meks.begin() + static_cast<std::ptrdiff_t>(7 * s));
    const auto spectrum = dft_magnitudes(*signals[s], kFrequencyComponents);
    std::copy(spectrum.begin(), spectrum.end(),
              out.ff.begin() + static_cast<std::ptrdiff_t>(kFrequencyComponents * s));
  }
  return out;
}

}  // namespace egofuse
