#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace egofuse {

// Rows of every matrix argument are samples.

struct Codebook {
  Eigen::MatrixXd centers;  // k x d
  std::uint64_t seed = 0;

  int k() const { return static_cast<int>(centers.rows()); }
  int dim() const { return static_cast<int>(centers.cols()); }
};

struct KMeansOptions {
  int max_iter = 100;
  // When set, receives the total distortion after every Lloyd iteration.
  std::vector<double>* distortion_trace = nullptr;
};

// k-means++ seeding followed by Lloyd iterations until the assignment stops
// changing. Squared Euclidean distance.
Codebook kmeans_fit(const Eigen::MatrixXd& vectors, int k, std::uint64_t seed, const KMeansOptions& options = {});

// Index of the nearest center; ties go to the lowest index.
int nearest_center(const Codebook& codebook, std::span<const double> vector);
double total_distortion(const Eigen::MatrixXd& vectors, const Codebook& codebook);

// L1-normalized assignment histogram. An empty set maps to the uniform
// histogram 1/k.
std::vector<double> bow_encode(const Eigen::MatrixXd& vectors, const Codebook& codebook);

struct PcaModel {
  Eigen::VectorXd mean;                // d
  Eigen::MatrixXd basis;               // d x r, orthonormal columns
  Eigen::VectorXd explained_variance;  // r, non-increasing
  double total_variance = 0.0;

  int retained() const { return static_cast<int>(basis.cols()); }
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd project_rows(const Eigen::MatrixXd& x) const;
};

// Keep `retained` components; requires retained <= min(n - 1, d).
PcaModel pca_fit(const Eigen::MatrixXd& vectors, int retained);
// Keep the fewest components whose variance reaches `fraction` of the total.
PcaModel pca_fit_fraction(const Eigen::MatrixXd& vectors, double fraction);
inline Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::VectorXd& x) { return model.project(x); }

// Per-dimension division by the training standard deviation; dimensions with
// zero variance pass through unchanged.
class Standardizer {
 public:
  static Standardizer fit(const Eigen::MatrixXd& training);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& vectors) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& vector) const;
  const Eigen::VectorXd& scale() const { return scale_; }

 private:
  Eigen::VectorXd scale_;
};

}  // namespace egofuse
