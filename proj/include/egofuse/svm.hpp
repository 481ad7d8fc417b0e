#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace egofuse {

struct DualSolution {
  Eigen::VectorXd alpha;
  double bias = 0.0;
  Eigen::VectorXd y;  // +-1
  double c = 1.0;
  std::vector<int> support;  // indices with alpha > 1e-8
  double objective = 0.0;    // sum(alpha) - 1/2 alpha^T (yy^T o K) alpha
  double kkt_gap = 0.0;      // maximal violating-pair gap at termination
  long iterations = 0;
};

struct SvmOptions {
  double tolerance = 1e-3;
  long max_iter = 10'000'000;
  // Feasible starting point (same labels and C); zero when empty.
  const Eigen::VectorXd* warm_start = nullptr;
  // When set, receives the dual objective after every pair update.
  std::vector<double>* objective_trace = nullptr;
};

// Dual soft-margin SVM on a precomputed kernel by SMO with maximal
// violating-pair selection. Labels are +-1 and both must be present.
DualSolution solve_binary(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y, double c,
                          const SvmOptions& options = {});

// Dual objective of an arbitrary alpha.
double dual_objective(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y, const Eigen::VectorXd& alpha);

// f(x) = sum_i alpha_i y_i k_row[i] + b.
double decision_value(const DualSolution& sol, std::span<const double> k_row);
double decision_value(const DualSolution& sol, const Eigen::VectorXd& k_row);

// +1 for `positive`, -1 otherwise.
Eigen::VectorXd one_vs_rest_labels(std::span<const int> labels, int positive);

struct MulticlassModel {
  std::vector<DualSolution> per_class;  // class c vs rest
  int num_classes() const { return static_cast<int>(per_class.size()); }
};

MulticlassModel train_one_vs_rest(const Eigen::MatrixXd& kernel, std::span<const int> labels, int num_classes,
                                  double c, const SvmOptions& options = {});

// Argmax of per-class decision values, ties to the lowest class index.
int argmax_class(std::span<const double> scores);
// k_rows[c] holds the query's kernel row against the training set used by class c.
int predict_multiclass(const MulticlassModel& model, const std::vector<Eigen::VectorXd>& k_rows);

}  // namespace egofuse
