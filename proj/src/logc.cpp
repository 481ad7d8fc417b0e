#include <cmath>

#include <Eigen/Eigenvalues>

#include "egofuse/error.hpp"
#include "egofuse/video_features.hpp"

namespace egofuse {

namespace {

// Central difference with one-sided differences at the borders.
double dx_at(const Image& p, Eigen::Index y, Eigen::Index x) {
  const Eigen::Index w = p.cols();
  if (w < 2) return 0.0;
  if (x == 0) return p(y, 1) - p(y, 0);
  if (x == w - 1) return p(y, w - 1) - p(y, w - 2);
  return 0.5 * (p(y, x + 1) - p(y, x - 1));
}

double dy_at(const Image& p, Eigen::Index y, Eigen::Index x) {
  const Eigen::Index h = p.rows();
  if (h < 2) return 0.0;
  if (y == 0) return p(1, x) - p(0, x);
  if (y == h - 1) return p(h - 1, x) - p(h - 2, x);
  return 0.5 * (p(y + 1, x) - p(y - 1, x));
}

}  // namespace

double logc_regularizer(const Covariance12& cov) {
  const double eps = 1e-5 * cov.trace() / 12.0;
  return eps > 1e-12 ? eps : 1e-12;
}

LogCVector vectorize_symmetric(const Covariance12& m) {
  LogCVector v{};
  std::size_t k = 0;
  for (int i = 0; i < 12; ++i)
    for (int j = i; j < 12; ++j) v[k++] = (i == j ? 1.0 : M_SQRT2) * m(i, j);
  return v;
}

Covariance12 devectorize_symmetric(const LogCVector& v) {
  Covariance12 m;
  std::size_t k = 0;
  for (int i = 0; i < 12; ++i)
    for (int j = i; j < 12; ++j) {
      const double x = v[k++] / (i == j ? 1.0 : M_SQRT2);
      m(i, j) = x;
      m(j, i) = x;
    }
  return m;
}

LogCVector log_euclidean_vector(const Covariance12& cov) {
  if (!cov.allFinite()) throw DataError("non-finite covariance");
  const Covariance12 sym = 0.5 * (cov + cov.transpose());
  const Covariance12 reg = sym + logc_regularizer(sym) * Covariance12::Identity();
  Eigen::SelfAdjointEigenSolver<Covariance12> eig(reg);
  if (eig.info() != Eigen::Success) throw SolverError("covariance eigendecomposition failed");
  Eigen::Matrix<double, 12, 1> logs;
  for (int i = 0; i < 12; ++i) {
    // Floating-point noise can push an eigenvalue of a PSD+eps*I matrix
    // marginally below eps; the floor keeps the log defined.
    logs(i) = std::log(std::max(eig.eigenvalues()(i), 1e-300));
  }
  const Covariance12 log_m = eig.eigenvectors() * logs.asDiagonal() * eig.eigenvectors().transpose();
  return vectorize_symmetric(log_m);
}

Eigen::Matrix<double, Eigen::Dynamic, 12> logc_pixel_features(const std::vector<Image>& frames,
                                                              const std::vector<FlowField>& flows, int t) {
  if (t < 0 || static_cast<std::size_t>(t) + 1 >= flows.size() || static_cast<std::size_t>(t) + 1 >= frames.size())
    throw DataError("Log-C time step out of range");
  const Image& i0 = frames[static_cast<std::size_t>(t)];
  const Image& i1 = frames[static_cast<std::size_t>(t) + 1];
  const FlowField& f0 = flows[static_cast<std::size_t>(t)];
  const FlowField& f1 = flows[static_cast<std::size_t>(t) + 1];
  const Eigen::Index h = i0.rows(), w = i0.cols();
  if (f0.height() != h || f0.width() != w) throw DataError("flow/frame size mismatch");

  Eigen::Matrix<double, Eigen::Dynamic, 12> x(h * w, 12);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index c = 0; c < w; ++c) {
      const double ux = dx_at(f0.u, y, c), uy = dy_at(f0.u, y, c);
      const double vx = dx_at(f0.v, y, c), vy = dy_at(f0.v, y, c);
      x.row(y * w + c) << static_cast<double>(i1(y, c)) - i0(y, c), f0.u(y, c), f0.v(y, c),
          static_cast<double>(f1.u(y, c)) - f0.u(y, c), static_cast<double>(f1.v(y, c)) - f0.v(y, c), ux, uy, vx,
          vy, ux + vy, vx - uy, 0.5 * (uy + vx);
    }
  return x;
}

std::vector<LogCVector> compute_logc_windows(const std::vector<Image>& frames, const std::vector<FlowField>& flows,
                                             int window_len, int stride) {
  if (window_len < 2 || stride < 1) throw ConfigError("invalid Log-C window");
  const int n = static_cast<int>(frames.size());
  if (window_len > n) throw DataError("Log-C window longer than the segment");
  if (flows.size() + 1 != frames.size()) throw DataError("expected one flow field per consecutive frame pair");

  const int last_t = static_cast<int>(flows.size()) - 2;  // u_t needs flow t+1
  std::vector<LogCVector> out;
  for (int s = 0; s + window_len <= n; s += stride) {
    const int t_end = std::min(s + window_len - 2, last_t);
    Eigen::Matrix<double, 12, 1> sum = Eigen::Matrix<double, 12, 1>::Zero();
    Covariance12 outer = Covariance12::Zero();
    double count = 0.0;
    for (int t = s; t <= t_end; ++t) {
      const auto x = logc_pixel_features(frames, flows, t);
      sum += x.colwise().sum().transpose();
      outer.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
      count += static_cast<double>(x.rows());
    }
    if (count < 2.0) throw DataError("Log-C window with fewer than 2 samples");
    const Covariance12 full = outer.selfadjointView<Eigen::Lower>();
    const Eigen::Matrix<double, 12, 1> mean = sum / count;
    const Covariance12 cov = (full - count * mean * mean.transpose()) / (count - 1.0);
    out.push_back(log_euclidean_vector(cov));
  }
  return out;
}

}  // namespace egofuse
