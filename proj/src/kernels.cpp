#include "egofuse/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "egofuse/error.hpp"

namespace egofuse {

std::string kernel_kind_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::kLinear: return "linear";
    case KernelKind::kPolynomial: return "polynomial";
    case KernelKind::kRbf: return "rbf";
    case KernelKind::kDcInt: return "dc_int";
  }
  return "unknown";
}

KernelKind parse_kernel_kind(const std::string& name) {
  if (name == "linear") return KernelKind::kLinear;
  if (name == "polynomial" || name == "poly") return KernelKind::kPolynomial;
  if (name == "rbf") return KernelKind::kRbf;
  if (name == "dc_int") return KernelKind::kDcInt;
  throw ConfigError("unknown kernel kind: " + name);
}

KernelSpec KernelSpec::linear() { return KernelSpec{}; }

KernelSpec KernelSpec::polynomial(int degree, double bias) {
  KernelSpec s;
  s.kind = KernelKind::kPolynomial;
  s.degree = degree;
  s.bias = bias;
  return s;
}

KernelSpec KernelSpec::rbf(double gamma) {
  KernelSpec s;
  s.kind = KernelKind::kRbf;
  s.gamma = gamma;
  return s;
}

KernelSpec KernelSpec::dc_int(std::vector<std::size_t> channel_widths) {
  KernelSpec s;
  s.kind = KernelKind::kDcInt;
  s.channel_widths = std::move(channel_widths);
  return s;
}

void KernelSpec::validate() const {
  switch (kind) {
    case KernelKind::kPolynomial:
      if (degree < 1) throw ConfigError("polynomial degree must be >= 1");
      if (bias < 0.0) throw ConfigError("polynomial bias must be >= 0");
      break;
    case KernelKind::kRbf:
      if (!(gamma > 0.0)) throw ConfigError("RBF gamma must be positive");
      break;
    case KernelKind::kDcInt:
      if (channel_widths.empty()) throw ConfigError("dc_int needs at least one channel");
      for (auto w : channel_widths)
        if (w == 0) throw ConfigError("dc_int channel width must be positive");
      break;
    case KernelKind::kLinear: break;
  }
}

std::string KernelSpec::describe() const {
  std::ostringstream os;
  os << kernel_kind_name(kind);
  if (kind == KernelKind::kPolynomial) os << "(p=" << degree << ",l=" << bias << ")";
  if (kind == KernelKind::kRbf) os << "(gamma=" << gamma << ")";
  if (kind == KernelKind::kDcInt) os << "(channels=" << channel_widths.size() << ")";
  return os.str();
}

double histogram_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("histogram width mismatch");
  double mn = 0.0, mx = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) {
    mn += std::min(a[m], b[m]);
    mx += std::max(a[m], b[m]);
  }
  if (mx == 0.0) return 0.0;
  return 1.0 - mn / mx;
}

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw DataError("kernel dimension mismatch: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  switch (spec.kind) {
    case KernelKind::kLinear: return std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
    case KernelKind::kPolynomial: {
      const double base = std::inner_product(x.begin(), x.end(), y.begin(), 0.0) + spec.bias;
      return std::pow(base, spec.degree);
    }
    case KernelKind::kRbf: {
      double d2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
      return std::exp(-spec.gamma * d2);
    }
    case KernelKind::kDcInt: {
      const std::size_t total = std::accumulate(spec.channel_widths.begin(), spec.channel_widths.end(), std::size_t{0});
      if (total != x.size()) throw DataError("dc_int input width does not match channel widths");
      double sum = 0.0;
      std::size_t off = 0;
      for (auto w : spec.channel_widths) {
        sum += histogram_distance(x.subspan(off, w), y.subspan(off, w));
        off += w;
      }
      return std::exp(-sum);
    }
  }
  return 0.0;
}

namespace {

std::span<const double> row_span(const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& m,
                                 Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

GramMatrix gram(const KernelSpec& spec, const Eigen::MatrixXd& samples) {
  spec.validate();
  if (samples.rows() < 1) throw DataError("Gram matrix needs at least one sample");
  const RowMatrix s = samples;
  const Eigen::Index n = s.rows();
  GramMatrix g{Eigen::MatrixXd(n, n), spec, false};
  if (spec.kind == KernelKind::kLinear || spec.kind == KernelKind::kPolynomial) {
    Eigen::MatrixXd dots = samples * samples.transpose();
    dots = 0.5 * (dots + dots.transpose()).eval();
    if (spec.kind == KernelKind::kPolynomial) dots = (dots.array() + spec.bias).pow(spec.degree).matrix();
    g.values = dots;
  } else {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j) g.values(i, j) = g.values(j, i) = kernel_eval(spec, row_span(s, i), row_span(s, j));
  }
  if (!g.values.allFinite()) throw DataError("non-finite Gram matrix");
  return g;
}

GramMatrix normalize(const GramMatrix& k) {
  const Eigen::VectorXd d = k.values.diagonal();
  if ((d.array() <= 0.0).any()) throw DataError("zero self-similarity in Gram normalization");
  const Eigen::VectorXd inv = d.cwiseSqrt().cwiseInverse();
  GramMatrix out{inv.asDiagonal() * k.values * inv.asDiagonal(), k.spec, true};
  out.values.diagonal().setOnes();
  return out;
}

Eigen::MatrixXd cross_gram(const KernelSpec& spec, const Eigen::MatrixXd& queries, const Eigen::MatrixXd& training) {
  spec.validate();
  if (queries.cols() != training.cols()) throw DataError("kernel dimension mismatch");
  if (spec.kind == KernelKind::kLinear) return queries * training.transpose();
  if (spec.kind == KernelKind::kPolynomial)
    return ((queries * training.transpose()).array() + spec.bias).pow(spec.degree).matrix();
  const RowMatrix q = queries, t = training;
  Eigen::MatrixXd out(q.rows(), t.rows());
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    for (Eigen::Index j = 0; j < t.rows(); ++j) out(i, j) = kernel_eval(spec, row_span(q, i), row_span(t, j));
  return out;
}

Eigen::VectorXd self_similarity(const KernelSpec& spec, const Eigen::MatrixXd& queries) {
  const RowMatrix q = queries;
  Eigen::VectorXd out(q.rows());
  for (Eigen::Index i = 0; i < q.rows(); ++i) out(i) = kernel_eval(spec, row_span(q, i), row_span(q, i));
  return out;
}

Eigen::MatrixXd normalize_cross(const Eigen::MatrixXd& cross, const Eigen::VectorXd& query_diag,
                                const Eigen::VectorXd& train_diag) {
  if (cross.rows() != query_diag.size() || cross.cols() != train_diag.size())
    throw DataError("cross Gram normalization size mismatch");
  if ((query_diag.array() <= 0.0).any() || (train_diag.array() <= 0.0).any())
    throw DataError("zero self-similarity in Gram normalization");
  return query_diag.cwiseSqrt().cwiseInverse().asDiagonal() * cross * train_diag.cwiseSqrt().cwiseInverse().asDiagonal();
}

double median_squared_distance(const Eigen::MatrixXd& samples) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < samples.rows(); ++i)
    for (Eigen::Index j = i + 1; j < samples.rows(); ++j) d.push_back((samples.row(i) - samples.row(j)).squaredNorm());
  if (d.empty()) return 0.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  if (d.size() % 2) return d[mid];
  const double upper = d[mid];
  const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

void write_gram_dump(const GramMatrix& k, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write Gram dump: " + path.string());
  const Eigen::Index n = k.values.rows();
  detail::put_u32(out, static_cast<std::uint32_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) detail::put_f64(out, k.values(i, j));
  if (!out) throw DataError("cannot write Gram dump: " + path.string());
}

Eigen::MatrixXd read_gram_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open Gram dump: " + path.string());
  detail::Reader r(in, "corrupt Gram dump: " + path.string());
  const auto n = static_cast<Eigen::Index>(r.u32());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) m(i, j) = m(j, i) = r.f64();
  return m;
}

}  // namespace egofuse

namespace egofuse {

std::string KernelDescriptor::label() const {
  std::string s = kind + ":";
  for (std::size_t i = 0; i < channels.size(); ++i) s += (i ? "+" : "") + channels[i];
  return s;
}

}  // namespace egofuse
