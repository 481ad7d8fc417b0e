#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace egofuse {

struct MfccConfig {
  int sample_rate = 24000;
  double frame_len_ms = 40.0;
  double frame_shift_ms = 10.0;
  int n_filters = 23;
  int n_ceps = 12;
  int delta_span = 3;
  int delta_delta_span = 2;
  double pre_emphasis = 0.97;
  double low_freq = 0.0;
  double high_freq = 0.0;  // 0 selects the Nyquist frequency

  int frame_len() const;    // samples
  int frame_shift() const;  // samples
  int fft_size() const;     // next power of two >= frame_len
  int static_dim() const { return n_ceps + 1; }
  int feature_dim() const { return 3 * static_dim(); }
  void validate() const;
};

// Floor applied to filterbank outputs and frame energy before the log.
inline constexpr double kLogFloor = 1e-10;

int mfcc_frame_count(std::size_t samples, const MfccConfig& config = {});

// Mel scale used by the filterbank: 2595 log10(1 + f / 700).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// n_filters x (fft_size / 2 + 1) triangular weights applied to the DFT magnitude.
Eigen::MatrixXd mel_filterbank(const MfccConfig& config);

// Regression deltas over +-span frames, edge frames replicated.
Eigen::MatrixXd delta_features(const Eigen::MatrixXd& features, int span);

// Rows are frames: [c1..c12, log energy, 13 deltas, 13 delta-deltas].
// `samples` must already be at config.sample_rate.
Eigen::MatrixXd mfcc(std::span<const double> samples, const MfccConfig& config = {});

struct DiagGmm {
  Eigen::VectorXd weights;    // M
  Eigen::MatrixXd means;      // M x D
  Eigen::MatrixXd variances;  // M x D

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(means.cols()); }
  // Per-frame log-likelihood.
  Eigen::VectorXd log_likelihood(const Eigen::MatrixXd& frames) const;
  // Component posteriors, frames x M.
  Eigen::MatrixXd posteriors(const Eigen::MatrixXd& frames) const;
};

struct UbmOptions {
  int max_iter = 50;
  double tolerance = 1e-4;       // per-frame log-likelihood gain
  double variance_floor = 1e-4;  // relative to the global per-dimension variance
  // When set, receives the average log-likelihood of each EM iteration.
  std::vector<double>* log_likelihood_trace = nullptr;
};

// k-means initialization then EM on the pooled frames.
DiagGmm train_ubm(const Eigen::MatrixXd& frames, int components, std::uint64_t seed, const UbmOptions& options = {});

// Mean-only MAP adaptation with relevance factor `relevance`.
DiagGmm map_adapt(const DiagGmm& ubm, const Eigen::MatrixXd& frames, double relevance = 16.0);

// Component means concatenated in component order.
std::vector<double> supervector(const DiagGmm& model);

}  // namespace egofuse
