#include "egofuse/optical_flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>

#include "binary_io.hpp"
#include "egofuse/error.hpp"

namespace egofuse {

namespace {

using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Quadratic expansion f(x) ~ x^T A x + b^T x + c at every pixel.
struct Expansion {
  Plane bx, by, axx, ayy, axy;  // axy is the off-diagonal of A
};

double clamp_at(const Plane& p, int y, int x) {
  y = std::clamp(y, 0, static_cast<int>(p.rows()) - 1);
  x = std::clamp(x, 0, static_cast<int>(p.cols()) - 1);
  return p(y, x);
}

double bilinear(const Plane& p, double y, double x) {
  const double yc = std::clamp(y, 0.0, static_cast<double>(p.rows() - 1));
  const double xc = std::clamp(x, 0.0, static_cast<double>(p.cols() - 1));
  const int y0 = static_cast<int>(std::floor(yc));
  const int x0 = static_cast<int>(std::floor(xc));
  const int y1 = std::min(y0 + 1, static_cast<int>(p.rows()) - 1);
  const int x1 = std::min(x0 + 1, static_cast<int>(p.cols()) - 1);
  const double fy = yc - y0, fx = xc - x0;
  return (1 - fy) * ((1 - fx) * p(y0, x0) + fx * p(y0, x1)) + fy * ((1 - fx) * p(y1, x0) + fx * p(y1, x1));
}

Plane gaussian_blur(const Plane& src, double sigma) {
  if (sigma <= 0.0) return src;
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  const int h = static_cast<int>(src.rows()), w = static_cast<int>(src.cols());
  Plane tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * clamp_at(src, y, x + i);
      tmp(y, x) = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * clamp_at(tmp, y + i, x);
      out(y, x) = acc;
    }
  return out;
}

// Sample `src` onto an (h, w) grid with pixel-centre alignment.
Plane resize(const Plane& src, int h, int w) {
  Plane out(h, w);
  const double sy = static_cast<double>(src.rows()) / h;
  const double sx = static_cast<double>(src.cols()) / w;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out(y, x) = bilinear(src, (y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5);
  return out;
}

// Mean over a (2r+1)^2 box with replicated borders.
Plane box_mean(const Plane& src, int r) {
  const int h = static_cast<int>(src.rows()), w = static_cast<int>(src.cols());
  const double norm = 1.0 / (2 * r + 1);
  Plane tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y) {
    double acc = 0.0;
    for (int i = -r; i <= r; ++i) acc += clamp_at(src, y, i);
    for (int x = 0; x < w; ++x) {
      tmp(y, x) = acc * norm;
      acc += clamp_at(src, y, x + r + 1) - clamp_at(src, y, x - r);
    }
  }
  for (int x = 0; x < w; ++x) {
    double acc = 0.0;
    for (int i = -r; i <= r; ++i) acc += clamp_at(tmp, i, x);
    for (int y = 0; y < h; ++y) {
      out(y, x) = acc * norm;
      acc += clamp_at(tmp, y + r + 1, x) - clamp_at(tmp, y - r, x);
    }
  }
  return out;
}

// Weighted least-squares fit of {1, x, y, x^2, y^2, xy} over a Gaussian
// window; the 6 x window^2 projection is shared by every pixel.
Expansion poly_expand(const Plane& img, int window, double sigma) {
  const int n = window / 2;
  const int taps = window * window;
  Eigen::MatrixXd basis(taps, 6);
  Eigen::VectorXd weight(taps);
  int t = 0;
  for (int dy = -n; dy <= n; ++dy)
    for (int dx = -n; dx <= n; ++dx, ++t) {
      basis.row(t) << 1.0, dx, dy, dx * dx, dy * dy, dx * dy;
      weight(t) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  const Eigen::MatrixXd gram = basis.transpose() * weight.asDiagonal() * basis;
  const Eigen::MatrixXd proj = gram.ldlt().solve(basis.transpose() * weight.asDiagonal().toDenseMatrix());

  const int h = static_cast<int>(img.rows()), w = static_cast<int>(img.cols());
  Expansion e{Plane(h, w), Plane(h, w), Plane(h, w), Plane(h, w), Plane(h, w)};
  Eigen::VectorXd patch(taps);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      t = 0;
      for (int dy = -n; dy <= n; ++dy)
        for (int dx = -n; dx <= n; ++dx) patch(t++) = clamp_at(img, y + dy, x + dx);
      const Eigen::Matrix<double, 6, 1> r = proj * patch;
      e.bx(y, x) = r(1);
      e.by(y, x) = r(2);
      e.axx(y, x) = r(3);
      e.ayy(y, x) = r(4);
      e.axy(y, x) = 0.5 * r(5);
    }
  return e;
}

// One refinement pass: pool the displacement constraints around each pixel
// and solve the regularized 2x2 system for the total displacement.
void update_flow(const Expansion& e1, const Expansion& e2, Plane& u, Plane& v, int avg_radius, double reg) {
  const int h = static_cast<int>(u.rows()), w = static_cast<int>(u.cols());
  Plane g11(h, w), g12(h, w), g22(h, w), h1(h, w), h2(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dx = u(y, x), dy = v(y, x);
      const double py = y + dy, px = x + dx;
      const double a11 = 0.5 * (e1.axx(y, x) + bilinear(e2.axx, py, px));
      const double a22 = 0.5 * (e1.ayy(y, x) + bilinear(e2.ayy, py, px));
      const double a12 = 0.5 * (e1.axy(y, x) + bilinear(e2.axy, py, px));
      const double db1 = -0.5 * (bilinear(e2.bx, py, px) - e1.bx(y, x)) + a11 * dx + a12 * dy;
      const double db2 = -0.5 * (bilinear(e2.by, py, px) - e1.by(y, x)) + a12 * dx + a22 * dy;
      g11(y, x) = a11 * a11 + a12 * a12;
      g12(y, x) = a11 * a12 + a12 * a22;
      g22(y, x) = a12 * a12 + a22 * a22;
      h1(y, x) = a11 * db1 + a12 * db2;
      h2(y, x) = a12 * db1 + a22 * db2;
    }
  g11 = box_mean(g11, avg_radius);
  g12 = box_mean(g12, avg_radius);
  g22 = box_mean(g22, avg_radius);
  h1 = box_mean(h1, avg_radius);
  h2 = box_mean(h2, avg_radius);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double a = g11(y, x) + reg, b = g12(y, x), d = g22(y, x) + reg;
      const double det = a * d - b * b;
      u(y, x) = (d * h1(y, x) - b * h2(y, x)) / det;
      v(y, x) = (a * h2(y, x) - b * h1(y, x)) / det;
    }
}

Plane to_plane(const Image& img) { return img.cast<double>().array(); }

void replicate_border(Plane& p, int border) {
  const int h = static_cast<int>(p.rows()), w = static_cast<int>(p.cols());
  if (2 * border >= h || 2 * border >= w) return;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int yi = std::clamp(y, border, h - 1 - border);
      const int xi = std::clamp(x, border, w - 1 - border);
      if (yi != y || xi != x) p(y, x) = p(yi, xi);
    }
}

}  // namespace

FlowField FlowField::zeros(int width, int height) {
  return FlowField{Image::Zero(height, width), Image::Zero(height, width)};
}

void FlowParams::validate() const {
  if (pyramid_levels < 1 || iterations < 1 || average_window < 1)
    throw ConfigError("flow parameters must be positive");
  if (!(pyramid_scale > 0.0 && pyramid_scale < 1.0)) throw ConfigError("pyramid_scale must lie in (0, 1)");
  if (poly_window < 5 || poly_window % 2 == 0) throw ConfigError("poly_window must be odd and >= 5");
  if (!(poly_sigma > 0.0) || !(regularization > 0.0)) throw ConfigError("flow parameters must be positive");
}

FlowField farneback_flow(const Image& prev, const Image& next, const FlowParams& params) {
  params.validate();
  if (prev.rows() != next.rows() || prev.cols() != next.cols()) throw DataError("frame size mismatch");
  if (prev.rows() < 16 || prev.cols() < 16) throw DataError("frames must be at least 16x16");
  if (!prev.allFinite() || !next.allFinite()) throw DataError("non-finite frame data");

  // Pyramid, finest level first; levels smaller than 8 px are dropped.
  std::vector<Plane> pyr1{to_plane(prev)}, pyr2{to_plane(next)};
  const double sigma = 0.5 * std::sqrt(1.0 / (params.pyramid_scale * params.pyramid_scale) - 1.0);
  for (int level = 1; level < params.pyramid_levels; ++level) {
    const int h = static_cast<int>(std::lround(pyr1.back().rows() * params.pyramid_scale));
    const int w = static_cast<int>(std::lround(pyr1.back().cols() * params.pyramid_scale));
    if (std::min(h, w) < 8) break;
    pyr1.push_back(resize(gaussian_blur(pyr1.back(), sigma), h, w));
    pyr2.push_back(resize(gaussian_blur(pyr2.back(), sigma), h, w));
  }

  Plane u, v;
  for (int level = static_cast<int>(pyr1.size()) - 1; level >= 0; --level) {
    const auto& i1 = pyr1[static_cast<std::size_t>(level)];
    const auto& i2 = pyr2[static_cast<std::size_t>(level)];
    const int h = static_cast<int>(i1.rows()), w = static_cast<int>(i1.cols());
    if (u.size() == 0) {
      u = Plane::Zero(h, w);
      v = Plane::Zero(h, w);
    } else {
      const double sx = static_cast<double>(w) / u.cols(), sy = static_cast<double>(h) / u.rows();
      u = resize(u, h, w) * sx;
      v = resize(v, h, w) * sy;
    }
    const Expansion e1 = poly_expand(i1, params.poly_window, params.poly_sigma);
    const Expansion e2 = poly_expand(i2, params.poly_window, params.poly_sigma);
    const int radius = std::min(params.average_window / 2, std::max(1, std::min(h, w) / 2));
    for (int it = 0; it < params.iterations; ++it) update_flow(e1, e2, u, v, radius, params.regularization);
  }

  replicate_border(u, params.poly_window / 2);
  replicate_border(v, params.poly_window / 2);
  FlowField out{u.cast<float>().matrix(), v.cast<float>().matrix()};
  if (!out.u.allFinite() || !out.v.allFinite()) throw SolverError("optical flow produced non-finite values");
  return out;
}

std::vector<FlowField> flow_sequence(const std::vector<Image>& frames, const FlowParams& params) {
  std::vector<FlowField> flows;
  if (frames.size() < 2) return flows;
  flows.reserve(frames.size() - 1);
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) flows.push_back(farneback_flow(frames[i], frames[i + 1], params));
  return flows;
}

void write_flow_dump(const std::vector<FlowField>& flows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write flow dump: " + path.string());
  for (const auto& f : flows) {
    out.write("FLW1", 4);
    detail::put_u32(out, static_cast<std::uint32_t>(f.width()));
    detail::put_u32(out, static_cast<std::uint32_t>(f.height()));
    for (Eigen::Index i = 0; i < f.u.size(); ++i) detail::put_f32(out, f.u.data()[i]);
    for (Eigen::Index i = 0; i < f.v.size(); ++i) detail::put_f32(out, f.v.data()[i]);
  }
  if (!out) throw DataError("cannot write flow dump: " + path.string());
}

std::vector<FlowField> read_flow_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open flow dump: " + path.string());
  detail::Reader r(in, "corrupt flow dump: " + path.string());
  std::vector<FlowField> flows;
  while (!r.at_eof()) {
    char magic[4];
    r.bytes(magic, 4);
    if (std::string(magic, 4) != "FLW1") throw DataError("corrupt flow dump: bad magic in " + path.string());
    const auto w = static_cast<int>(r.u32());
    const auto h = static_cast<int>(r.u32());
    if (w <= 0 || h <= 0 || w > 1 << 15 || h > 1 << 15) throw DataError("corrupt flow dump: bad dims");
    FlowField f = FlowField::zeros(w, h);
    for (Eigen::Index i = 0; i < f.u.size(); ++i) f.u.data()[i] = r.f32();
    for (Eigen::Index i = 0; i < f.v.size(); ++i) f.v.data()[i] = r.f32();
    if (!f.u.allFinite() || !f.v.allFinite()) throw DataError("corrupt flow dump: non-finite values");
    flows.push_back(std::move(f));
  }
  return flows;
}

}  // namespace egofuse
