#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace egofuse {

enum class KernelKind { kLinear, kPolynomial, kRbf, kDcInt };

std::string kernel_kind_name(KernelKind kind);
KernelKind parse_kernel_kind(const std::string& name);

struct KernelSpec {
  KernelKind kind = KernelKind::kLinear;
  int degree = 3;      // polynomial order p
  double bias = 1.0;   // polynomial offset l
  double gamma = 1.0;  // RBF width
  // DC-Int: widths of the histogram channels concatenated in each sample.
  std::vector<std::size_t> channel_widths;

  static KernelSpec linear();
  static KernelSpec polynomial(int degree = 3, double bias = 1.0);
  static KernelSpec rbf(double gamma);
  static KernelSpec dc_int(std::vector<std::size_t> channel_widths);

  void validate() const;
  std::string describe() const;
};

// Histogram distance 1 - sum(min) / sum(max); 0 when both are all-zero.
double histogram_distance(std::span<const double> a, std::span<const double> b);

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y);

struct GramMatrix {
  Eigen::MatrixXd values;
  KernelSpec spec;
  bool normalized = false;

  Eigen::Index size() const { return values.rows(); }
};

// Rows of `samples` are the sample vectors.
GramMatrix gram(const KernelSpec& spec, const Eigen::MatrixXd& samples);
// K[i][j] / sqrt(K[i][i] K[j][j]).
GramMatrix normalize(const GramMatrix& k);

// Test-vs-train block: rows = queries, columns = training samples.
Eigen::MatrixXd cross_gram(const KernelSpec& spec, const Eigen::MatrixXd& queries, const Eigen::MatrixXd& training);
// Self-similarities k(x, x) of each query row.
Eigen::VectorXd self_similarity(const KernelSpec& spec, const Eigen::MatrixXd& queries);
// Normalizes a cross block with query self-similarities and the training
// Gram diagonal.
Eigen::MatrixXd normalize_cross(const Eigen::MatrixXd& cross, const Eigen::VectorXd& query_diag,
                                const Eigen::VectorXd& train_diag);

// Median of the pairwise squared distances (i < j); RBF gamma defaults to its inverse.
double median_squared_distance(const Eigen::MatrixXd& samples);

// Debug dump: u32 n, then the upper triangle (row-major, diagonal included)
// as little-endian float64.
void write_gram_dump(const GramMatrix& k, const std::filesystem::path& path);
Eigen::MatrixXd read_gram_dump(const std::filesystem::path& path);

}  // namespace egofuse

namespace egofuse {

// What a bank kernel is built from, for selection reporting.
struct KernelDescriptor {
  std::string kind;                   // kernel_kind_name()
  std::vector<std::string> channels;  // feature channels it reads
  std::string label() const;
};

}  // namespace egofuse
