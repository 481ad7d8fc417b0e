#include "egofuse/mkl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "egofuse/error.hpp"

namespace egofuse {

namespace {

// Weights at or below this are treated as zero by the direction update.
constexpr double kZeroWeight = 1e-12;

struct Evaluation {
  Eigen::VectorXd weights;
  DualSolution sol;
  double objective = 0.0;
};

Eigen::VectorXd project_to_simplex_face(const Eigen::VectorXd& d) {
  Eigen::VectorXd p = d.cwiseMax(0.0);
  for (Eigen::Index m = 0; m < p.size(); ++m)
    if (p(m) < kZeroWeight) p(m) = 0.0;
  const double s = p.sum();
  if (!(s > 0.0)) throw SolverError("kernel weights collapsed to zero");
  return p / s;
}

// Reduced gradient with respect to the largest weight mu: coordinates at 0
// that would have to decrease are frozen; mu absorbs the sum constraint.
Eigen::VectorXd descent_direction(const Eigen::VectorXd& d, const Eigen::VectorXd& grad, Eigen::Index mu) {
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(d.size());
  double others = 0.0;
  for (Eigen::Index m = 0; m < d.size(); ++m) {
    if (m == mu) continue;
    const double g = grad(m) - grad(mu);
    if (d(m) > kZeroWeight || g < 0.0) dir(m) = -g;
    others += dir(m);
  }
  dir(mu) = -others;
  return dir;
}

// Largest step keeping d + gamma * dir >= 0, and the coordinate that hits 0.
double max_step(const Eigen::VectorXd& d, const Eigen::VectorXd& dir, Eigen::Index& hit) {
  double best = std::numeric_limits<double>::infinity();
  hit = -1;
  for (Eigen::Index m = 0; m < d.size(); ++m)
    if (dir(m) < 0.0) {
      const double g = -d(m) / dir(m);
      if (g < best) {
        best = g;
        hit = m;
      }
    }
  return hit < 0 ? 0.0 : best;
}

}  // namespace

Eigen::MatrixXd combine_kernels(std::span<const GramMatrix> grams, const Eigen::VectorXd& weights) {
  if (grams.empty()) throw DataError("no kernels to combine");
  if (static_cast<Eigen::Index>(grams.size()) != weights.size()) throw DataError("kernel-count mismatch");
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(grams.front().size(), grams.front().size());
  for (std::size_t m = 0; m < grams.size(); ++m)
    if (weights(static_cast<Eigen::Index>(m)) != 0.0) k += weights(static_cast<Eigen::Index>(m)) * grams[m].values;
  return k;
}

Eigen::VectorXd mkl_gradient(std::span<const GramMatrix> grams, const Eigen::VectorXd& y, const Eigen::VectorXd& alpha) {
  const Eigen::VectorXd ay = alpha.cwiseProduct(y);
  Eigen::VectorXd g(static_cast<Eigen::Index>(grams.size()));
  for (std::size_t m = 0; m < grams.size(); ++m) g(static_cast<Eigen::Index>(m)) = -0.5 * ay.dot(grams[m].values * ay);
  return g;
}

double mkl_objective_fixed_alpha(std::span<const GramMatrix> grams, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& alpha, const Eigen::VectorXd& weights) {
  return dual_objective(combine_kernels(grams, weights), y, alpha);
}

MklModel simple_mkl_train(std::span<const GramMatrix> grams, const Eigen::VectorXd& y, double c,
                          const MklOptions& options) {
  const auto m_count = static_cast<Eigen::Index>(grams.size());
  if (m_count == 0) throw DataError("SimpleMKL needs at least one kernel");
  const Eigen::Index n = grams.front().size();
  for (const auto& g : grams) {
    if (g.size() != n || g.values.cols() != n) throw DataError("Gram matrices differ in size");
    if (!g.normalized) throw DataError("SimpleMKL expects normalized Gram matrices");
  }
  if (y.size() != n) throw DataError("label count does not match Gram size");

  auto solve = [&](const Eigen::VectorXd& d, const DualSolution* warm) {
    SvmOptions o = options.svm;
    o.warm_start = warm ? &warm->alpha : nullptr;
    o.objective_trace = nullptr;
    Evaluation e;
    e.weights = d;
    e.sol = solve_binary(combine_kernels(grams, d), y, c, o);
    e.objective = e.sol.objective;
    return e;
  };

  MklModel model;
  Evaluation cur = solve(Eigen::VectorXd::Constant(m_count, 1.0 / static_cast<double>(m_count)), nullptr);
  model.objective_trace.push_back(cur.objective);
  model.weight_trace.push_back(cur.weights);

  for (int outer = 0; outer < options.max_outer; ++outer) {
    const Eigen::VectorXd grad = mkl_gradient(grams, y, cur.sol.alpha);
    const Eigen::VectorXd neg = -grad;
    model.final_gap = neg.maxCoeff() - cur.weights.dot(neg);
    if (model.final_gap < options.outer_tol) break;

    Eigen::Index mu = 0;
    cur.weights.maxCoeff(&mu);
    Eigen::VectorXd dir = descent_direction(cur.weights, grad, mu);

    // Descent direction update: follow the direction to the face where a
    // weight vanishes for as long as that keeps lowering J.
    Evaluation base = cur;
    Evaluation far;
    double gamma_max = 0.0;
    for (;;) {
      Eigen::Index hit = -1;
      gamma_max = max_step(base.weights, dir, hit);
      if (hit < 0 || gamma_max <= 0.0) {
        gamma_max = 0.0;
        break;
      }
      Eigen::VectorXd d_far = base.weights + gamma_max * dir;
      d_far(hit) = 0.0;
      far = solve(project_to_simplex_face(d_far), &base.sol);
      if (!(far.objective < base.objective)) break;
      base = far;
      for (Eigen::Index m = 0; m < m_count; ++m)
        if (m != mu && base.weights(m) <= kZeroWeight && dir(m) < 0.0) dir(m) = 0.0;
      double others = 0.0;
      for (Eigen::Index m = 0; m < m_count; ++m)
        if (m != mu) others += dir(m);
      dir(mu) = -others;
    }

    // Golden-section line search on [0, gamma_max]; the best evaluated
    // point (including both ends) is kept, so J never increases.
    Evaluation best = base;
    if (gamma_max > 0.0) {
      if (far.objective < best.objective) best = far;
      const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
      double lo = 0.0, hi = gamma_max;
      double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
      auto at = [&](double g) { return solve(project_to_simplex_face(base.weights + g * dir), &base.sol); };
      Evaluation e1 = at(x1), e2 = at(x2);
      int evals = 2;
      auto keep = [&](const Evaluation& e) {
        if (e.objective < best.objective) best = e;
      };
      keep(e1);
      keep(e2);
      while (evals < options.line_search_evals) {
        if (e1.objective <= e2.objective) {
          hi = x2;
          x2 = x1;
          e2 = e1;
          x1 = hi - phi * (hi - lo);
          e1 = at(x1);
          keep(e1);
        } else {
          lo = x1;
          x1 = x2;
          e1 = e2;
          x2 = lo + phi * (hi - lo);
          e2 = at(x2);
          keep(e2);
        }
        ++evals;
      }
    }

    const double change = (best.weights - cur.weights).cwiseAbs().maxCoeff();
    cur = std::move(best);
    model.objective_trace.push_back(cur.objective);
    model.weight_trace.push_back(cur.weights);
    model.outer_iterations = outer + 1;
    if (change < options.weight_change_tol) break;
  }

  model.weights = cur.weights;
  model.inner = std::move(cur.sol);
  return model;
}

double mkl_decision(const MklModel& model, const std::vector<Eigen::VectorXd>& rows) {
  if (static_cast<Eigen::Index>(rows.size()) != model.weights.size())
    throw DataError("kernel-count mismatch: " + std::to_string(rows.size()) + " rows for " +
                    std::to_string(model.weights.size()) + " kernels");
  Eigen::VectorXd combined = Eigen::VectorXd::Zero(model.inner.alpha.size());
  for (std::size_t m = 0; m < rows.size(); ++m) {
    if (rows[m].size() != combined.size()) throw DataError("kernel row length mismatch");
    combined += model.weights(static_cast<Eigen::Index>(m)) * rows[m];
  }
  return decision_value(model.inner, combined);
}

std::vector<int> selected_kernels(const Eigen::VectorXd& weights, double threshold) {
  std::vector<int> out;
  for (Eigen::Index m = 0; m < weights.size(); ++m)
    if (weights(m) >= threshold) out.push_back(static_cast<int>(m));
  return out;
}

MklMulticlass train_mkl_one_vs_rest(std::span<const GramMatrix> grams, std::span<const int> labels, int num_classes,
                                    double c, const MklOptions& options) {
  if (num_classes < 2) throw DataError("multiclass MKL needs at least 2 classes");
  MklMulticlass out;
  for (int k = 0; k < num_classes; ++k)
    out.per_class.push_back(simple_mkl_train(grams, one_vs_rest_labels(labels, k), c, options));
  return out;
}

int predict_mkl_multiclass(const MklMulticlass& model, const std::vector<Eigen::VectorXd>& rows) {
  std::vector<double> scores;
  for (const auto& m : model.per_class) scores.push_back(mkl_decision(m, rows));
  return argmax_class(scores);
}

}  // namespace egofuse
