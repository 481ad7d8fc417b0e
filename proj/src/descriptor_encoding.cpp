#include "egofuse/descriptor_encoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "egofuse/error.hpp"
#include "egofuse/rng.hpp"

namespace egofuse {

namespace {

double squared_distance(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

// Assignment via ||x||^2 - 2 x.c + ||c||^2, evaluated with a matrix product.
std::vector<int> assign_all(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centers) {
  const Eigen::VectorXd cn = centers.rowwise().squaredNorm();
  const Eigen::MatrixXd cross = x * centers.transpose();
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index best = 0;
    double best_d = cn(0) - 2.0 * cross(i, 0);
    for (Eigen::Index c = 1; c < centers.rows(); ++c) {
      const double d = cn(c) - 2.0 * cross(i, c);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

// Eigenvectors are defined up to sign; fix the largest-magnitude entry positive.
void canonical_signs(Eigen::MatrixXd& basis) {
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    Eigen::Index idx = 0;
    basis.col(c).cwiseAbs().maxCoeff(&idx);
    if (basis(idx, c) < 0.0) basis.col(c) *= -1.0;
  }
}

// Full spectrum of the sample covariance, eigenvalues descending. Uses the
// n x n Gram matrix when there are fewer samples than dimensions.
void covariance_spectrum(const Eigen::MatrixXd& centered, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  const double denom = static_cast<double>(centered.rows() - 1);
  const Eigen::Index n = centered.rows(), d = centered.cols();
  if (d <= n) {
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw SolverError("PCA eigendecomposition failed");
    values = eig.eigenvalues().reverse();
    vectors = eig.eigenvectors().rowwise().reverse();
  } else {
    const Eigen::MatrixXd gram = (centered * centered.transpose()) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw SolverError("PCA eigendecomposition failed");
    values = eig.eigenvalues().reverse();
    const Eigen::MatrixXd u = eig.eigenvectors().rowwise().reverse();
    vectors = Eigen::MatrixXd::Zero(d, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      if (values(c) <= 0.0) continue;
      vectors.col(c) = centered.transpose() * u.col(c);
      const double norm = vectors.col(c).norm();
      if (norm > 0.0) vectors.col(c) /= norm;
    }
  }
  values = values.cwiseMax(0.0);
}

PcaModel build_pca(const Eigen::MatrixXd& vectors, int retained_or_zero, double fraction) {
  const Eigen::Index n = vectors.rows(), d = vectors.cols();
  if (n < 2) throw DataError("PCA needs at least 2 samples");
  PcaModel m;
  m.mean = vectors.colwise().mean().transpose();
  const Eigen::MatrixXd centered = vectors.rowwise() - m.mean.transpose();
  Eigen::VectorXd values;
  Eigen::MatrixXd vecs;
  covariance_spectrum(centered, values, vecs);
  m.total_variance = values.sum();

  const int max_rank = static_cast<int>(std::min<Eigen::Index>(n - 1, d));
  int r = retained_or_zero;
  if (r == 0) {
    r = 1;
    double acc = values(0);
    while (r < max_rank && acc < fraction * m.total_variance) acc += values(r++);
  }
  if (r < 1 || r > max_rank)
    throw DataError("PCA retained dimension " + std::to_string(r) + " exceeds min(n-1, d) = " +
                    std::to_string(max_rank));
  m.basis = vecs.leftCols(r);
  canonical_signs(m.basis);
  m.explained_variance = values.head(r);
  return m;
}

}  // namespace

double total_distortion(const Eigen::MatrixXd& vectors, const Codebook& codebook) {
  double sum = 0.0;
  Eigen::RowVectorXd row;
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    row = vectors.row(i);
    const int c = nearest_center(codebook, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    sum += squared_distance(vectors, i, codebook.centers, c);
  }
  return sum;
}

Codebook kmeans_fit(const Eigen::MatrixXd& vectors, int k, std::uint64_t seed, const KMeansOptions& options) {
  const Eigen::Index n = vectors.rows(), d = vectors.cols();
  if (k < 1) throw ConfigError("k-means needs k >= 1");
  if (d < 1) throw DataError("k-means needs d >= 1");
  if (n < k) throw DataError("k-means needs n >= k (n = " + std::to_string(n) + ", k = " + std::to_string(k) + ")");
  if (!vectors.allFinite()) throw DataError("non-finite k-means input");

  Rng rng(seed);
  Codebook cb;
  cb.seed = seed;
  cb.centers.resize(k, d);

  // k-means++ seeding.
  std::vector<double> best_d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  Eigen::Index pick = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
  for (int c = 0; c < k; ++c) {
    if (c > 0) {
      const double total = std::accumulate(best_d2.begin(), best_d2.end(), 0.0);
      if (total > 0.0) {
        double target = uniform01(rng) * total;
        pick = n - 1;
        for (Eigen::Index i = 0; i < n; ++i) {
          target -= best_d2[static_cast<std::size_t>(i)];
          if (target < 0.0 && best_d2[static_cast<std::size_t>(i)] > 0.0) {
            pick = i;
            break;
          }
        }
        while (best_d2[static_cast<std::size_t>(pick)] == 0.0) --pick;
      } else {
        // Fewer distinct points than centers: fall back to unused rows.
        std::vector<Eigen::Index> unused;
        for (Eigen::Index i = 0; i < n; ++i)
          if (!chosen[static_cast<std::size_t>(i)]) unused.push_back(i);
        pick = unused[uniform_index(rng, unused.size())];
      }
    }
    chosen[static_cast<std::size_t>(pick)] = 1;
    cb.centers.row(c) = vectors.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      best_d2[static_cast<std::size_t>(i)] =
          std::min(best_d2[static_cast<std::size_t>(i)], squared_distance(vectors, i, cb.centers, c));
  }

  // Lloyd iterations.
  std::vector<int> assign = assign_all(vectors, cb.centers);
  for (int it = 0; it < options.max_iter; ++it) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, d);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = assign[static_cast<std::size_t>(i)];
      sums.row(c) += vectors.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0) cb.centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
    auto next = assign_all(vectors, cb.centers);
    if (options.distortion_trace) {
      double dist = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) dist += squared_distance(vectors, i, cb.centers, next[static_cast<std::size_t>(i)]);
      options.distortion_trace->push_back(dist);
    }
    if (next == assign) break;
    assign = std::move(next);
  }
  return cb;
}

int nearest_center(const Codebook& codebook, std::span<const double> vector) {
  if (static_cast<int>(vector.size()) != codebook.dim())
    throw DataError("dimension mismatch vs codebook: " + std::to_string(vector.size()) + " vs " +
                    std::to_string(codebook.dim()));
  const Eigen::Map<const Eigen::RowVectorXd> x(vector.data(), static_cast<Eigen::Index>(vector.size()));
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < codebook.k(); ++c) {
    const double dd = (codebook.centers.row(c) - x).squaredNorm();
    if (dd < best_d) {
      best_d = dd;
      best = c;
    }
  }
  return best;
}

std::vector<double> bow_encode(const Eigen::MatrixXd& vectors, const Codebook& codebook) {
  const auto k = static_cast<std::size_t>(codebook.k());
  if (vectors.rows() == 0) return std::vector<double>(k, 1.0 / static_cast<double>(k));
  if (vectors.cols() != codebook.dim()) throw DataError("dimension mismatch vs codebook");
  std::vector<double> hist(k, 0.0);
  Eigen::RowVectorXd row;
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    row = vectors.row(i);
    hist[static_cast<std::size_t>(nearest_center(codebook, std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))))] += 1.0;
  }
  for (auto& h : hist) h /= static_cast<double>(vectors.rows());
  return hist;
}

Eigen::VectorXd PcaModel::project(const Eigen::VectorXd& x) const {
  if (x.size() != mean.size()) throw DataError("PCA dimension mismatch");
  return basis.transpose() * (x - mean);
}

Eigen::MatrixXd PcaModel::project_rows(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size()) throw DataError("PCA dimension mismatch");
  return (x.rowwise() - mean.transpose()) * basis;
}

PcaModel pca_fit(const Eigen::MatrixXd& vectors, int retained) {
  if (retained < 1) throw ConfigError("PCA must retain at least one component");
  return build_pca(vectors, retained, 0.0);
}

PcaModel pca_fit_fraction(const Eigen::MatrixXd& vectors, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("PCA variance fraction must lie in (0, 1]");
  return build_pca(vectors, 0, fraction);
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& training) {
  if (training.rows() < 1) throw DataError("standardizer needs training rows");
  Standardizer s;
  const Eigen::RowVectorXd mean = training.colwise().mean();
  s.scale_ = Eigen::VectorXd::Ones(training.cols());
  for (Eigen::Index j = 0; j < training.cols(); ++j) {
    const double var = (training.col(j).array() - mean(j)).square().mean();
    const double sd = std::sqrt(var);
    if (sd > 1e-12 * (1.0 + std::abs(mean(j)))) s.scale_(j) = sd;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& vectors) const {
  if (vectors.cols() != scale_.size()) throw DataError("standardizer dimension mismatch");
  return vectors.array().rowwise() / scale_.transpose().array();
}

Eigen::VectorXd Standardizer::apply(const Eigen::VectorXd& vector) const {
  if (vector.size() != scale_.size()) throw DataError("standardizer dimension mismatch");
  return vector.array() / scale_.array();
}

}  // namespace egofuse
