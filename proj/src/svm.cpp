#include "egofuse/svm.hpp"

#include <cmath>
#include <limits>

#include "egofuse/error.hpp"

namespace egofuse {

namespace {

// Curvature used along a pair direction with no curvature (duplicate
// points); the step then runs to the box boundary.
constexpr double kMinCurvature = 1e-12;

}  // namespace

double dual_objective(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y, const Eigen::VectorXd& alpha) {
  const Eigen::VectorXd ay = alpha.cwiseProduct(y);
  return alpha.sum() - 0.5 * ay.dot(kernel * ay);
}

DualSolution solve_binary(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y, double c,
                          const SvmOptions& options) {
  const Eigen::Index n = kernel.rows();
  if (kernel.cols() != n || y.size() != n) throw DataError("SVM kernel/label size mismatch");
  if (!kernel.allFinite()) throw DataError("non-finite kernel matrix");
  if (!(c > 0.0)) throw ConfigError("SVM box constraint C must be positive");
  bool has_pos = false, has_neg = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y(i) == 1.0) has_pos = true;
    else if (y(i) == -1.0) has_neg = true;
    else throw DataError("SVM labels must be +-1");
  }
  if (!has_pos || !has_neg) throw DataError("single-class labels");

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  if (options.warm_start) {
    if (options.warm_start->size() != n) throw DataError("warm start size mismatch");
    alpha = options.warm_start->cwiseMax(0.0).cwiseMin(c);
  }
  // Gradient of the minimization form 1/2 a^T Q a - e^T a, Q = yy^T o K.
  const Eigen::VectorXd ay0 = alpha.cwiseProduct(y);
  Eigen::VectorXd grad = y.cwiseProduct(kernel * ay0) - Eigen::VectorXd::Ones(n);

  auto in_up = [&](Eigen::Index t) { return (y(t) > 0 && alpha(t) < c) || (y(t) < 0 && alpha(t) > 0); };
  auto in_low = [&](Eigen::Index t) { return (y(t) > 0 && alpha(t) > 0) || (y(t) < 0 && alpha(t) < c); };
  auto objective = [&] { return alpha.sum() - 0.5 * alpha.dot(grad + Eigen::VectorXd::Ones(n)); };

  DualSolution sol;
  long iter = 0;
  double gap = 0.0;
  for (;; ++iter) {
    Eigen::Index i = -1, j = -1;
    double gmax = -std::numeric_limits<double>::infinity(), gmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -y(t) * grad(t);
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    gap = (i < 0 || j < 0) ? 0.0 : gmax - gmin;
    if (gap < options.tolerance) break;
    if (iter >= options.max_iter) throw SolverError("SMO did not converge within the iteration limit");

    const double kii = kernel(i, i), kjj = kernel(j, j), kij = kernel(i, j);
    double quad = kii + kjj - 2.0 * kij;
    if (quad <= 0.0) quad = kMinCurvature;
    const double old_i = alpha(i), old_j = alpha(j);

    if (y(i) != y(j)) {
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0) {
        if (alpha(j) < 0) {
          alpha(j) = 0;
          alpha(i) = diff;
        }
      } else if (alpha(i) < 0) {
        alpha(i) = 0;
        alpha(j) = -diff;
      }
      if (diff > 0) {
        if (alpha(i) > c) {
          alpha(i) = c;
          alpha(j) = c - diff;
        }
      } else if (alpha(j) > c) {
        alpha(j) = c;
        alpha(i) = c + diff;
      }
    } else {
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > c) {
        if (alpha(i) > c) {
          alpha(i) = c;
          alpha(j) = sum - c;
        }
      } else if (alpha(j) < 0) {
        alpha(j) = 0;
        alpha(i) = sum;
      }
      if (sum > c) {
        if (alpha(j) > c) {
          alpha(j) = c;
          alpha(i) = sum - c;
        }
      } else if (alpha(i) < 0) {
        alpha(i) = 0;
        alpha(j) = sum;
      }
    }

    const double di = alpha(i) - old_i, dj = alpha(j) - old_j;
    grad += y.cwiseProduct(kernel.col(i) * (y(i) * di) + kernel.col(j) * (y(j) * dj));
    if (options.objective_trace) options.objective_trace->push_back(objective());
  }

  // Bias from the free support vectors; midpoint of the feasible interval
  // when every multiplier sits at a bound.
  double upper = std::numeric_limits<double>::infinity(), lower = -upper, free_sum = 0.0;
  int free_count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y(t) * grad(t);
    if (alpha(t) >= c) {
      if (y(t) < 0) upper = std::min(upper, yg);
      else lower = std::max(lower, yg);
    } else if (alpha(t) <= 0) {
      if (y(t) > 0) upper = std::min(upper, yg);
      else lower = std::max(lower, yg);
    } else {
      free_sum += yg;
      ++free_count;
    }
  }
  const double rho = free_count > 0 ? free_sum / free_count : 0.5 * (upper + lower);

  sol.alpha = alpha;
  sol.bias = -rho;
  sol.y = y;
  sol.c = c;
  for (Eigen::Index t = 0; t < n; ++t)
    if (alpha(t) > 1e-8) sol.support.push_back(static_cast<int>(t));
  sol.objective = objective();
  sol.kkt_gap = gap;
  sol.iterations = iter;
  return sol;
}

double decision_value(const DualSolution& sol, std::span<const double> k_row) {
  if (static_cast<Eigen::Index>(k_row.size()) != sol.alpha.size())
    throw DataError("kernel row length " + std::to_string(k_row.size()) + " does not match training size " +
                    std::to_string(sol.alpha.size()));
  double f = sol.bias;
  for (Eigen::Index i = 0; i < sol.alpha.size(); ++i)
    if (sol.alpha(i) != 0.0) f += sol.alpha(i) * sol.y(i) * k_row[static_cast<std::size_t>(i)];
  return f;
}

double decision_value(const DualSolution& sol, const Eigen::VectorXd& k_row) {
  return decision_value(sol, std::span<const double>(k_row.data(), static_cast<std::size_t>(k_row.size())));
}

Eigen::VectorXd one_vs_rest_labels(std::span<const int> labels, int positive) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i)) = labels[i] == positive ? 1.0 : -1.0;
  return y;
}

MulticlassModel train_one_vs_rest(const Eigen::MatrixXd& kernel, std::span<const int> labels, int num_classes,
                                  double c, const SvmOptions& options) {
  if (num_classes < 2) throw DataError("multiclass SVM needs at least 2 classes");
  MulticlassModel m;
  for (int k = 0; k < num_classes; ++k) m.per_class.push_back(solve_binary(kernel, one_vs_rest_labels(labels, k), c, options));
  return m;
}

int argmax_class(std::span<const double> scores) {
  if (scores.empty()) throw DataError("no class scores");
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (scores[k] > scores[best]) best = k;
  return static_cast<int>(best);
}

int predict_multiclass(const MulticlassModel& model, const std::vector<Eigen::VectorXd>& k_rows) {
  if (static_cast<int>(k_rows.size()) != model.num_classes()) throw DataError("one kernel row per class expected");
  std::vector<double> scores;
  for (int k = 0; k < model.num_classes(); ++k)
    scores.push_back(decision_value(model.per_class[static_cast<std::size_t>(k)], k_rows[static_cast<std::size_t>(k)]));
  return argmax_class(scores);
}

}  // namespace egofuse
