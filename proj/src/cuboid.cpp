#include <algorithm>
#include <cmath>
#include <tuple>

#include "egofuse/error.hpp"
#include "egofuse/video_features.hpp"

namespace egofuse {

namespace {

using Volume = std::vector<Eigen::MatrixXd>;

Eigen::MatrixXd smooth_frame(const Image& frame, double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  const Eigen::Index h = frame.rows(), w = frame.cols();
  Eigen::MatrixXd tmp(h, w), out(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i)
        acc += k[static_cast<std::size_t>(i + r)] * frame(y, std::clamp<Eigen::Index>(x + i, 0, w - 1));
      tmp(y, x) = acc;
    }
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i)
        acc += k[static_cast<std::size_t>(i + r)] * tmp(std::clamp<Eigen::Index>(y + i, 0, h - 1), x);
      out(y, x) = acc;
    }
  return out;
}

Volume smooth_volume(const std::vector<Image>& frames, double sigma) {
  Volume out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(smooth_frame(f, sigma));
  return out;
}

double intensity_range(const std::vector<Image>& frames) {
  float lo = frames.front().minCoeff(), hi = frames.front().maxCoeff();
  for (const auto& f : frames) {
    lo = std::min(lo, f.minCoeff());
    hi = std::max(hi, f.maxCoeff());
  }
  return static_cast<double>(hi) - static_cast<double>(lo);
}

std::vector<Eigen::MatrixXd> response_from_smoothed(const Volume& smoothed, double range, const CuboidParams& p) {
  const auto [even, odd] = gabor_pair(p);
  const int r = p.temporal_radius();
  const int n = static_cast<int>(smoothed.size());
  const Eigen::Index h = smoothed.front().rows(), w = smoothed.front().cols();
  std::vector<Eigen::MatrixXd> resp(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(h, w));
  if (!(range > 0.0)) return resp;
  const double norm = 1.0 / (range * range);
  for (int t = r; t + r < n; ++t) {
    Eigen::MatrixXd ev = Eigen::MatrixXd::Zero(h, w), od = Eigen::MatrixXd::Zero(h, w);
    for (int k = -r; k <= r; ++k) {
      const auto& s = smoothed[static_cast<std::size_t>(t + k)];
      ev += even[static_cast<std::size_t>(k + r)] * s;
      od += odd[static_cast<std::size_t>(k + r)] * s;
    }
    resp[static_cast<std::size_t>(t)] = (ev.array().square() + od.array().square()).matrix() * norm;
  }
  return resp;
}

}  // namespace

int CuboidParams::temporal_radius() const { return static_cast<int>(std::ceil(3.0 * tau)); }

std::size_t CuboidParams::descriptor_dim() const {
  const auto spatial = static_cast<std::size_t>(2 * (half_width / sample_step) + 1);
  const auto temporal = static_cast<std::size_t>(2 * (half_depth / sample_step) + 1);
  return 3 * spatial * spatial * temporal;
}

std::pair<std::vector<double>, std::vector<double>> gabor_pair(const CuboidParams& p) {
  const int r = p.temporal_radius();
  const double omega = p.omega();
  std::vector<double> even, odd, env;
  for (int k = -r; k <= r; ++k) {
    const double g = std::exp(-static_cast<double>(k * k) / (p.tau * p.tau));
    env.push_back(g);
    even.push_back(-std::cos(2.0 * M_PI * omega * k) * g);
    odd.push_back(-std::sin(2.0 * M_PI * omega * k) * g);
  }
  // The even filter has a DC response; remove it along the envelope so a
  // constant signal yields exactly zero.
  double even_sum = 0.0, env_sum = 0.0;
  for (std::size_t i = 0; i < even.size(); ++i) {
    even_sum += even[i];
    env_sum += env[i];
  }
  for (std::size_t i = 0; i < even.size(); ++i) even[i] -= even_sum / env_sum * env[i];
  return {even, odd};
}

std::vector<Eigen::MatrixXd> cuboid_response(const std::vector<Image>& frames, const CuboidParams& params) {
  if (frames.empty()) throw DataError("no frames");
  return response_from_smoothed(smooth_volume(frames, params.sigma), intensity_range(frames), params);
}

CuboidDescriptorSet compute_cuboids(const std::vector<Image>& frames, const CuboidParams& params) {
  const int r = params.temporal_radius();
  if (static_cast<int>(frames.size()) < 2 * r) throw DataError("too few frames for the temporal filter");
  if (params.sample_step < 1 || params.half_width < 0 || params.half_depth < 0 || params.max_points < 0)
    throw ConfigError("invalid cuboid parameters");

  const Volume smoothed = smooth_volume(frames, params.sigma);
  const auto resp = response_from_smoothed(smoothed, intensity_range(frames), params);
  const int n = static_cast<int>(frames.size());
  const int h = static_cast<int>(frames.front().rows()), w = static_cast<int>(frames.front().cols());

  CuboidDescriptorSet out;
  for (int t = std::max(1, r); t + 1 < n && t + r < n; ++t) {
    const auto& cur = resp[static_cast<std::size_t>(t)];
    for (int y = 1; y + 1 < h; ++y)
      for (int x = 1; x + 1 < w; ++x) {
        const double v = cur(y, x);
        if (!(v > params.threshold)) continue;
        bool is_max = true;
        for (int dt = -1; dt <= 1 && is_max; ++dt)
          for (int dy = -1; dy <= 1 && is_max; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              if (!dt && !dy && !dx) continue;
              if (resp[static_cast<std::size_t>(t + dt)](y + dy, x + dx) > v) {
                is_max = false;
                break;
              }
            }
        if (is_max) out.points.push_back({x, y, t, v});
      }
  }
  std::sort(out.points.begin(), out.points.end(), [](const InterestPoint& a, const InterestPoint& b) {
    if (a.response != b.response) return a.response > b.response;
    return std::tie(a.t, a.y, a.x) < std::tie(b.t, b.y, b.x);
  });
  if (out.points.size() > static_cast<std::size_t>(params.max_points))
    out.points.resize(static_cast<std::size_t>(params.max_points));

  // Brightness-gradient lattice inside the cuboid, L2-normalized.
  const std::size_t dim = params.descriptor_dim();
  out.descriptors = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out.points.size()), static_cast<Eigen::Index>(dim));
  auto at = [&](int t, int y, int x) {
    return smoothed[static_cast<std::size_t>(std::clamp(t, 0, n - 1))](std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1));
  };
  const int sw = params.half_width / params.sample_step * params.sample_step;
  const int sd = params.half_depth / params.sample_step * params.sample_step;
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    const auto& p = out.points[i];
    Eigen::Index k = 0;
    for (int dt = -sd; dt <= sd; dt += params.sample_step)
      for (int dy = -sw; dy <= sw; dy += params.sample_step)
        for (int dx = -sw; dx <= sw; dx += params.sample_step) {
          const int t = p.t + dt, y = p.y + dy, x = p.x + dx;
          const auto row = static_cast<Eigen::Index>(i);
          out.descriptors(row, k++) = 0.5 * (at(t, y, x + 1) - at(t, y, x - 1));
          out.descriptors(row, k++) = 0.5 * (at(t, y + 1, x) - at(t, y - 1, x));
          out.descriptors(row, k++) = 0.5 * (at(t + 1, y, x) - at(t - 1, y, x));
        }
    const double norm = out.descriptors.row(static_cast<Eigen::Index>(i)).norm();
    if (norm > 0.0) out.descriptors.row(static_cast<Eigen::Index>(i)) /= norm;
  }
  return out;
}

}  // namespace egofuse
