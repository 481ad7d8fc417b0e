#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "egofuse/media_io.hpp"
#include "egofuse/optical_flow.hpp"

namespace egofuse {

// ---------------------------------------------------------------------------
// GOFF: grid optical-flow features (137 dims).

struct GoffParams {
  int grid_x = 8;
  int grid_y = 8;
  // Magnitude histogram: bin 0 = [0, stationary); the remaining 14 bins are
  // delimited by 15 geometrically spaced edges from `stationary` to
  // `max_magnitude` (larger magnitudes fall in the last bin).
  double stationary = 0.1;
  double max_magnitude = 16.0;
};

struct GoffVector {
  static constexpr std::size_t kMagnitudeBins = 15;
  static constexpr std::size_t kDirectionBins = 36;
  static constexpr std::size_t kFrequencyBands = 25;
  static constexpr std::size_t kDim = kMagnitudeBins + 2 * kDirectionBins + 2 * kFrequencyBands;

  std::array<double, kMagnitudeBins> mmhf{};
  std::array<double, kDirectionBins> mdhf{};
  std::array<double, kDirectionBins> mdhsf{};
  std::array<double, kFrequencyBands> ftmaf{};
  std::array<double, kFrequencyBands> ftmpf{};

  std::vector<double> concat() const;
};

// Upper edges of magnitude bins 0..13 (bin 14 is open-ended).
std::vector<double> goff_magnitude_edges(const GoffParams& params = {});
// Mean (u, v) per grid cell, row-major over (gy, gx).
std::vector<std::array<double, 2>> grid_cell_flow(const FlowField& flow, int grid_x, int grid_y);
// Direction bin of a displacement: floor(angle / 10 deg), angle = atan2(v, u) in [0, 360).
int direction_bin(double u, double v);

GoffVector compute_goff(const std::vector<FlowField>& flows, const GoffParams& params = {});

// ---------------------------------------------------------------------------
// VIF: virtual inertial features from the intensity centroid (106 dims).

struct VifVector {
  static constexpr std::size_t kDim = 4 + 7 * 6 + 10 * 6;
  // Zero-crossing rates of vx, vy, ax, ay.
  std::array<double, 4> zc{};
  // For each of vx, vy, ax, ay, |v|, |a|: min, max, median, energy, kurtosis, mean, std.
  std::array<double, 42> four_meks{};
  // For each of the same six signals: DFT magnitudes of the 10 lowest frequencies.
  std::array<double, 60> ff{};

  std::vector<double> concat() const;
};

// Centroid of the mean-subtracted, non-negative part of each frame, (x, y).
std::vector<std::array<double, 2>> centroid_track(const std::vector<Image>& frames);
// Rate of sign changes between consecutive non-negligible samples, after
// mean removal; in [0, 1].
double zero_crossing_rate(std::span<const double> signal);
// min, max, median, energy (mean of squares), kurtosis (0 for zero variance), mean, std.
std::array<double, 7> signal_statistics(std::span<const double> signal);

VifVector compute_vif(const std::vector<Image>& frames);

// ---------------------------------------------------------------------------
// Log-C: log-Euclidean covariance descriptors (78 dims per window).

using LogCVector = std::array<double, 78>;
using Covariance12 = Eigen::Matrix<double, 12, 12>;

struct LogCParams {
  int window_len = 15;
  int stride = 5;
};

// Regularize by eps*I with eps = 1e-5 * trace / 12 (floored for an all-zero
// covariance), take the symmetric matrix logarithm and vectorize.
LogCVector log_euclidean_vector(const Covariance12& cov);
// Upper triangle, row-major, off-diagonal entries scaled by sqrt(2).
LogCVector vectorize_symmetric(const Covariance12& m);
Covariance12 devectorize_symmetric(const LogCVector& v);
double logc_regularizer(const Covariance12& cov);

// Per-pixel 12-dim features for time step t (needs flows t and t+1):
// [I_t, u, v, u_t, v_t, u_x, u_y, v_x, v_y, u_x+v_y, v_x-u_y, (u_y+v_x)/2].
Eigen::Matrix<double, Eigen::Dynamic, 12> logc_pixel_features(const std::vector<Image>& frames,
                                                              const std::vector<FlowField>& flows, int t);

std::vector<LogCVector> compute_logc_windows(const std::vector<Image>& frames, const std::vector<FlowField>& flows,
                                             int window_len = 15, int stride = 5);

// ---------------------------------------------------------------------------
// Cuboids: spatio-temporal interest points and gradient descriptors.

struct CuboidParams {
  double sigma = 2.0;       // spatial Gaussian scale (px)
  double tau = 3.0;         // temporal scale (frames)
  double threshold = 2e-4;  // on the range-normalized response
  int half_width = 6;       // descriptor cuboid is (2*6+1)^2 px ...
  int half_depth = 9;       // ... by (2*9+1) frames
  int sample_step = 3;      // gradient lattice spacing inside the cuboid
  int max_points = 200;     // strongest detections kept per video

  double omega() const { return 4.0 / tau; }
  int temporal_radius() const;
  std::size_t descriptor_dim() const;
};

struct InterestPoint {
  int x = 0;
  int y = 0;
  int t = 0;
  double response = 0.0;
};

struct CuboidDescriptorSet {
  std::vector<InterestPoint> points;
  Eigen::MatrixXd descriptors;  // one row per point
};

// Zero-mean even/odd temporal Gabor taps over [-r, r].
std::pair<std::vector<double>, std::vector<double>> gabor_pair(const CuboidParams& params);

// Detector response R = (I*g*h_ev)^2 + (I*g*h_od)^2, divided by the squared
// intensity range of the video; frames without full temporal support are 0.
// Indexed [t](y, x).
std::vector<Eigen::MatrixXd> cuboid_response(const std::vector<Image>& frames, const CuboidParams& params = {});

CuboidDescriptorSet compute_cuboids(const std::vector<Image>& frames, const CuboidParams& params = {});

}  // namespace egofuse
