#include "egofuse/audio_features.hpp"

#include <cmath>
#include <limits>
#include <mutex>

#include <fftw3.h>

#include "egofuse/descriptor_encoding.hpp"
#include "egofuse/error.hpp"

namespace egofuse {

namespace {

// The FFTW planner is not re-entrant.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  // |X_k| for k = 0 .. n/2.
  void magnitudes(Eigen::VectorXd& out) {
    fftw_execute(plan_);
    out.resize(n_ / 2 + 1);
    for (int k = 0; k <= n_ / 2; ++k) out(k) = std::hypot(out_[k][0], out_[k][1]);
  }

 private:
  int n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

constexpr double kLog2Pi = 1.8378770664093453;

Eigen::MatrixXd component_log_densities(const DiagGmm& g, const Eigen::MatrixXd& frames) {
  const Eigen::Index n = frames.rows(), m = g.components();
  Eigen::MatrixXd out(n, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::RowVectorXd inv_var = g.variances.row(k).cwiseInverse();
    const double log_norm = -0.5 * (static_cast<double>(g.dim()) * kLog2Pi + g.variances.row(k).array().log().sum());
    const double log_w = g.weights(k) > 0.0 ? std::log(g.weights(k)) : -std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd diff = frames.rowwise() - g.means.row(k);
    out.col(k) = (log_w + log_norm) - 0.5 * (diff.array().square().rowwise() * inv_var.array()).rowwise().sum();
  }
  return out;
}

// Row-wise log-sum-exp; fills `post` with normalized posteriors when given.
Eigen::VectorXd log_sum_exp_rows(const Eigen::MatrixXd& logd, Eigen::MatrixXd* post) {
  Eigen::VectorXd out(logd.rows());
  if (post) post->resize(logd.rows(), logd.cols());
  for (Eigen::Index i = 0; i < logd.rows(); ++i) {
    const double mx = logd.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logd.row(i).array() - mx).exp();
    const double s = e.sum();
    out(i) = mx + std::log(s);
    if (post) post->row(i) = e / s;
  }
  return out;
}

}  // namespace

int MfccConfig::frame_len() const { return static_cast<int>(std::lround(sample_rate * frame_len_ms / 1000.0)); }
int MfccConfig::frame_shift() const { return static_cast<int>(std::lround(sample_rate * frame_shift_ms / 1000.0)); }
int MfccConfig::fft_size() const {
  int n = 1;
  while (n < frame_len()) n <<= 1;
  return n;
}

void MfccConfig::validate() const {
  if (sample_rate <= 0 || frame_shift() <= 0) throw ConfigError("invalid MFCC timing");
  if (!(frame_len() > frame_shift())) throw ConfigError("MFCC frame length must exceed the shift");
  if (!(n_ceps < n_filters) || n_ceps < 1) throw ConfigError("MFCC needs 1 <= n_ceps < n_filters");
  if (delta_span < 1 || delta_delta_span < 1) throw ConfigError("delta spans must be positive");
}

int mfcc_frame_count(std::size_t samples, const MfccConfig& config) {
  const auto len = static_cast<std::size_t>(config.frame_len());
  if (samples < len) return 0;
  return 1 + static_cast<int>((samples - len) / static_cast<std::size_t>(config.frame_shift()));
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Eigen::MatrixXd mel_filterbank(const MfccConfig& config) {
  const int nfft = config.fft_size();
  const int bins = nfft / 2 + 1;
  const double high = config.high_freq > 0.0 ? config.high_freq : 0.5 * config.sample_rate;
  const double mel_lo = hz_to_mel(config.low_freq), mel_hi = hz_to_mel(high);
  const int nf = config.n_filters;
  std::vector<double> centers(static_cast<std::size_t>(nf + 2));
  for (int i = 0; i < nf + 2; ++i)
    centers[static_cast<std::size_t>(i)] = mel_lo + (mel_hi - mel_lo) * i / (nf + 1);
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(nf, bins);
  for (int k = 0; k < bins; ++k) {
    const double mel = hz_to_mel(static_cast<double>(k) * config.sample_rate / nfft);
    for (int j = 0; j < nf; ++j) {
      const double l = centers[static_cast<std::size_t>(j)], c = centers[static_cast<std::size_t>(j) + 1],
                   r = centers[static_cast<std::size_t>(j) + 2];
      if (mel > l && mel < r) fb(j, k) = mel <= c ? (mel - l) / (c - l) : (r - mel) / (r - c);
    }
  }
  return fb;
}

Eigen::MatrixXd delta_features(const Eigen::MatrixXd& features, int span) {
  const Eigen::Index n = features.rows();
  double denom = 0.0;
  for (int t = 1; t <= span; ++t) denom += 2.0 * t * t;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, features.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (int t = 1; t <= span; ++t) {
      const Eigen::Index fwd = std::min<Eigen::Index>(i + t, n - 1);
      const Eigen::Index back = std::max<Eigen::Index>(i - t, 0);
      out.row(i) += t * (features.row(fwd) - features.row(back));
    }
  return out / denom;
}

Eigen::MatrixXd mfcc(std::span<const double> samples, const MfccConfig& config) {
  config.validate();
  const int frames = mfcc_frame_count(samples.size(), config);
  if (frames < 1) throw DataError("audio shorter than one frame");
  const int len = config.frame_len(), shift = config.frame_shift(), nfft = config.fft_size();
  const int nf = config.n_filters, nc = config.n_ceps;

  const Eigen::MatrixXd fb = mel_filterbank(config);
  Eigen::VectorXd window(len);
  for (int i = 0; i < len; ++i) window(i) = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (len - 1));
  Eigen::MatrixXd dct(nc, nf);
  for (int i = 0; i < nc; ++i)
    for (int j = 0; j < nf; ++j) dct(i, j) = std::sqrt(2.0 / nf) * std::cos(M_PI * (i + 1) * (j + 0.5) / nf);

  RealFft fft(nfft);
  Eigen::VectorXd mag;
  Eigen::MatrixXd statics(frames, config.static_dim());
  for (int f = 0; f < frames; ++f) {
    const double* x = samples.data() + static_cast<std::ptrdiff_t>(f) * shift;
    double energy = 0.0;
    for (int i = 0; i < len; ++i) energy += x[i] * x[i];
    double* buf = fft.input();
    buf[0] = x[0] * (1.0 - config.pre_emphasis) * window(0);
    for (int i = 1; i < len; ++i) buf[i] = (x[i] - config.pre_emphasis * x[i - 1]) * window(i);
    for (int i = len; i < nfft; ++i) buf[i] = 0.0;
    fft.magnitudes(mag);
    const Eigen::VectorXd log_fb = (fb * mag).cwiseMax(kLogFloor).array().log();
    statics.row(f).head(nc) = (dct * log_fb).transpose();
    statics(f, nc) = std::log(std::max(energy, kLogFloor));
  }
  const Eigen::MatrixXd d1 = delta_features(statics, config.delta_span);
  const Eigen::MatrixXd d2 = delta_features(d1, config.delta_delta_span);
  Eigen::MatrixXd out(frames, config.feature_dim());
  out << statics, d1, d2;
  return out;
}

Eigen::VectorXd DiagGmm::log_likelihood(const Eigen::MatrixXd& frames) const {
  if (frames.cols() != means.cols()) throw DataError("GMM dimension mismatch");
  return log_sum_exp_rows(component_log_densities(*this, frames), nullptr);
}

Eigen::MatrixXd DiagGmm::posteriors(const Eigen::MatrixXd& frames) const {
  if (frames.cols() != means.cols()) throw DataError("GMM dimension mismatch");
  Eigen::MatrixXd post;
  log_sum_exp_rows(component_log_densities(*this, frames), &post);
  return post;
}

DiagGmm train_ubm(const Eigen::MatrixXd& frames, int components, std::uint64_t seed, const UbmOptions& options) {
  const Eigen::Index n = frames.rows(), d = frames.cols();
  if (components < 1) throw ConfigError("UBM needs at least one component");
  if (n < 10 * static_cast<Eigen::Index>(components))
    throw DataError("insufficient frames for UBM: " + std::to_string(n) + " < 10 x " + std::to_string(components));
  if (!frames.allFinite()) throw DataError("non-finite audio features");

  const Eigen::RowVectorXd global_mean = frames.colwise().mean();
  const Eigen::RowVectorXd global_var = (frames.rowwise() - global_mean).array().square().colwise().mean();
  const Eigen::RowVectorXd floor = (options.variance_floor * global_var).cwiseMax(1e-10);

  KMeansOptions km;
  km.max_iter = 20;
  const Codebook init = kmeans_fit(frames, components, seed, km);
  DiagGmm g;
  g.means = init.centers;
  g.variances = Eigen::MatrixXd::Zero(components, d);
  g.weights = Eigen::VectorXd::Zero(components);
  {
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(components);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::RowVectorXd row = frames.row(i);
      const int c = nearest_center(init, std::span<const double>(row.data(), static_cast<std::size_t>(d)));
      counts(c) += 1.0;
      g.variances.row(c) += (row - g.means.row(c)).array().square().matrix();
    }
    for (int c = 0; c < components; ++c) {
      g.variances.row(c) = counts(c) > 0.0 ? (g.variances.row(c) / counts(c)).eval() : global_var;
      g.variances.row(c) = g.variances.row(c).cwiseMax(floor);
    }
    g.weights = counts / static_cast<double>(n);
  }

  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iter; ++it) {
    Eigen::MatrixXd post;
    const double avg_ll = log_sum_exp_rows(component_log_densities(g, frames), &post).mean();
    if (options.log_likelihood_trace) options.log_likelihood_trace->push_back(avg_ll);
    if (it > 0 && avg_ll - prev < options.tolerance) break;
    prev = avg_ll;

    const Eigen::VectorXd occ = post.colwise().sum().transpose();
    const Eigen::MatrixXd first = post.transpose() * frames;
    const Eigen::MatrixXd second = post.transpose() * frames.array().square().matrix();
    for (int k = 0; k < components; ++k) {
      if (occ(k) <= 1e-10) continue;  // starved component keeps its parameters
      g.means.row(k) = first.row(k) / occ(k);
      g.variances.row(k) = (second.row(k) / occ(k) - g.means.row(k).array().square().matrix()).cwiseMax(floor);
    }
    g.weights = occ / occ.sum();
  }
  return g;
}

DiagGmm map_adapt(const DiagGmm& ubm, const Eigen::MatrixXd& frames, double relevance) {
  if (!(relevance > 0.0)) throw ConfigError("MAP relevance factor must be positive");
  if (frames.rows() == 0) throw DataError("MAP adaptation needs frames");
  const Eigen::MatrixXd post = ubm.posteriors(frames);
  const Eigen::VectorXd occ = post.colwise().sum().transpose();
  const Eigen::MatrixXd first = post.transpose() * frames;
  DiagGmm out = ubm;
  for (int k = 0; k < ubm.components(); ++k) {
    if (!(occ(k) > 0.0)) continue;
    const double data_weight = occ(k) / (occ(k) + relevance);
    const double prior_weight = relevance / (occ(k) + relevance);
    out.means.row(k) = data_weight * (first.row(k) / occ(k)) + prior_weight * ubm.means.row(k);
  }
  return out;
}

std::vector<double> supervector(const DiagGmm& model) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(model.means.size()));
  for (Eigen::Index k = 0; k < model.means.rows(); ++k)
    for (Eigen::Index j = 0; j < model.means.cols(); ++j) out.push_back(model.means(k, j));
  return out;
}

}  // namespace egofuse
