#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "egofuse/kernels.hpp"
#include "egofuse/svm.hpp"

namespace egofuse {

struct MklOptions {
  double outer_tol = 1e-3;
  int max_outer = 50;
  int line_search_evals = 20;
  double weight_change_tol = 1e-6;
  SvmOptions svm;
};

struct MklModel {
  Eigen::VectorXd weights;  // on the simplex
  DualSolution inner;
  std::vector<double> objective_trace;          // J after initialization and each accepted step
  std::vector<Eigen::VectorXd> weight_trace;    // d at the same points
  int outer_iterations = 0;
  double final_gap = 0.0;
};

// Sum_m d_m K_m.
Eigen::MatrixXd combine_kernels(std::span<const GramMatrix> grams, const Eigen::VectorXd& weights);

// dJ/dd_m = -1/2 (alpha o y)^T K_m (alpha o y).
Eigen::VectorXd mkl_gradient(std::span<const GramMatrix> grams, const Eigen::VectorXd& y, const Eigen::VectorXd& alpha);

// J(d) with alpha held fixed.
double mkl_objective_fixed_alpha(std::span<const GramMatrix> grams, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& alpha, const Eigen::VectorXd& weights);

// SimpleMKL: reduced-gradient descent on the simplex wrapping the SVM dual solver.
MklModel simple_mkl_train(std::span<const GramMatrix> grams, const Eigen::VectorXd& y, double c,
                          const MklOptions& options = {});

// rows[m] is the query's kernel-m row against the training set.
double mkl_decision(const MklModel& model, const std::vector<Eigen::VectorXd>& rows);

// Kernels whose weight reaches `threshold`.
std::vector<int> selected_kernels(const Eigen::VectorXd& weights, double threshold = 1e-4);

struct MklMulticlass {
  std::vector<MklModel> per_class;
};

MklMulticlass train_mkl_one_vs_rest(std::span<const GramMatrix> grams, std::span<const int> labels, int num_classes,
                                    double c, const MklOptions& options = {});
int predict_mkl_multiclass(const MklMulticlass& model, const std::vector<Eigen::VectorXd>& rows);

}  // namespace egofuse
