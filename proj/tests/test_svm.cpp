#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "egofuse/error.hpp"
#include "egofuse/kernels.hpp"
#include "egofuse/svm.hpp"
#include "support.hpp"

using namespace egofuse;

namespace {

Eigen::MatrixXd linear_gram(const Eigen::MatrixXd& x) { return x * x.transpose(); }

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& x, double gamma) {
  return gram(KernelSpec::rbf(gamma), x).values;
}

void check_feasible(const DualSolution& s, double c) {
  CHECK(std::abs(s.alpha.dot(s.y)) <= 1e-8);
  CHECK(s.alpha.minCoeff() >= 0.0);
  CHECK(s.alpha.maxCoeff() <= c);
}

// Two Gaussian clouds at +-shift on the first axis.
void two_clouds(int n, double shift, Rng& rng, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
  x = testing::gaussian_matrix(n, 2, rng);
  y.resize(n);
  for (int i = 0; i < n; ++i) {
    y(i) = i % 2 ? 1.0 : -1.0;
    x(i, 0) += shift * y(i);
  }
}

}  // namespace

TEST_CASE("two points in 1-D have the analytic solution") {
  Eigen::MatrixXd x(2, 1);
  x << 1, -1;
  const Eigen::VectorXd y = Eigen::Vector2d(1, -1);
  const DualSolution s = solve_binary(linear_gram(x), y, 10.0);
  CHECK(s.alpha(0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.alpha(1) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(std::abs(s.bias) < 1e-9);
  CHECK(s.support == std::vector<int>{0, 1});
  CHECK(s.objective == doctest::Approx(0.5));
}

TEST_CASE("duplicated point with conflicting labels saturates the box") {
  const Eigen::MatrixXd k = Eigen::MatrixXd::Constant(2, 2, 1.0);
  const Eigen::VectorXd y = Eigen::Vector2d(1, -1);
  const DualSolution s = solve_binary(k, y, 1.0);
  // Brute force over the feasible segment alpha_1 = alpha_2 = a in [0, C].
  double best_a = 0.0, best = -1e300;
  for (int i = 0; i <= 1000; ++i) {
    const double a = i / 1000.0;
    const double obj = dual_objective(k, y, Eigen::Vector2d(a, a));
    if (obj > best) best = obj, best_a = a;
  }
  CHECK(best_a == 1.0);
  CHECK(s.alpha(0) == doctest::Approx(1.0));
  CHECK(s.alpha(1) == doctest::Approx(1.0));
  CHECK(s.objective == doctest::Approx(best));
}

TEST_CASE("property: solutions are feasible, objective non-decreasing, free SVs on the margin") {
  Rng rng(1);
  for (int trial = 0; trial < 15; ++trial) {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    two_clouds(20 + trial * 3, 0.5 + 0.2 * trial, rng, x, y);
    const double c = std::pow(10.0, static_cast<double>(trial % 4) - 1.0);
    const Eigen::MatrixXd k = trial % 2 ? linear_gram(x) : rbf_gram(x, 0.5);
    std::vector<double> trace;
    SvmOptions opt;
    opt.objective_trace = &trace;
    const DualSolution s = solve_binary(k, y, c, opt);
    check_feasible(s, c);
    CHECK(s.kkt_gap < opt.tolerance);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-12);
    CHECK(s.objective == doctest::Approx(dual_objective(k, y, s.alpha)));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (s.alpha(i) > 1e-6 * c && s.alpha(i) < c * (1 - 1e-6)) {
        const Eigen::VectorXd row = k.row(i).transpose();
        CHECK(std::abs(decision_value(s, row) - y(i)) <= 10 * opt.tolerance);
      }
    }
  }
}

TEST_CASE("midpoint of a symmetric toy set scores zero") {
  Eigen::MatrixXd x(4, 2);
  x << 2, 1, 2, -1, -2, 1, -2, -1;
  const Eigen::VectorXd y = Eigen::Vector4d(1, 1, -1, -1);
  const DualSolution s = solve_binary(linear_gram(x), y, 10.0);
  const Eigen::Vector2d q(0, 0.3);
  const Eigen::VectorXd row = x * q;
  CHECK(std::abs(decision_value(s, row)) < 1e-8);
}

TEST_CASE("property: permuting the training order leaves alpha unchanged") {
  Rng rng(2);
  for (int trial = 0; trial < 8; ++trial) {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    two_clouds(30, 1.0, rng, x, y);
    const Eigen::MatrixXd k = rbf_gram(x, 0.7);
    const DualSolution s = solve_binary(k, y, 1.0);
    std::vector<Eigen::Index> perm(30);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd kp(30, 30);
    Eigen::VectorXd yp(30);
    for (Eigen::Index i = 0; i < 30; ++i) {
      yp(i) = y(perm[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < 30; ++j) kp(i, j) = k(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    const DualSolution sp = solve_binary(kp, yp, 1.0);
    for (Eigen::Index i = 0; i < 30; ++i)
      CHECK(std::abs(sp.alpha(i) - s.alpha(perm[static_cast<std::size_t>(i)])) <= 10 * 1e-3);
  }
}

TEST_CASE("property: separable data with large C is fit perfectly") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    two_clouds(40, 6.0, rng, x, y);
    const Eigen::MatrixXd k = linear_gram(x);
    const DualSolution s = solve_binary(k, y, 1e4);
    for (Eigen::Index i = 0; i < 40; ++i) {
      const Eigen::VectorXd row = k.row(i).transpose();
      CHECK(decision_value(s, row) * y(i) > 0.0);
    }
  }
}

TEST_CASE("warm start from a feasible point reaches the same optimum") {
  Rng rng(4);
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  two_clouds(30, 0.8, rng, x, y);
  const Eigen::MatrixXd k = rbf_gram(x, 0.5);
  const DualSolution cold = solve_binary(k, y, 1.0);
  SvmOptions opt;
  opt.warm_start = &cold.alpha;
  const DualSolution warm = solve_binary(k, y, 1.0, opt);
  CHECK(warm.iterations <= cold.iterations);
  CHECK(warm.objective == doctest::Approx(cold.objective).epsilon(1e-6));
}

TEST_CASE("three separated blobs are classified like the nearest blob") {
  Rng rng(5);
  const Eigen::Matrix<double, 3, 2> centers = (Eigen::Matrix<double, 3, 2>() << 0, 8, -7, -4, 7, -4).finished();
  Eigen::MatrixXd x(45, 2);
  std::vector<int> labels(45);
  for (int i = 0; i < 45; ++i) {
    labels[static_cast<std::size_t>(i)] = i % 3;
    x.row(i) = centers.row(i % 3) + Eigen::RowVector2d(testing::normal(rng), testing::normal(rng));
  }
  const KernelSpec spec = KernelSpec::rbf(0.05);
  const MulticlassModel m = train_one_vs_rest(gram(spec, x).values, labels, 3, 10.0);
  CHECK(m.num_classes() == 3);
  for (int q = 0; q < 60; ++q) {
    const Eigen::RowVector2d p = centers.row(q % 3) + 1.5 * Eigen::RowVector2d(testing::normal(rng), testing::normal(rng));
    int nearest = 0;
    for (int c = 1; c < 3; ++c)
      if ((centers.row(c) - p).norm() < (centers.row(nearest) - p).norm()) nearest = c;
    const Eigen::VectorXd row = cross_gram(spec, p, x).row(0).transpose();
    CHECK(predict_multiclass(m, {row, row, row}) == nearest);
  }
}

TEST_CASE("argmax ties go to the lowest class") {
  CHECK(argmax_class(std::vector<double>{0.5, 0.5, 0.1}) == 0);
  CHECK(argmax_class(std::vector<double>{-1, 2, 2}) == 1);
  const std::vector<int> labels{0, 2, 1, 2};
  CHECK(one_vs_rest_labels(labels, 2) == Eigen::Vector4d(-1, 1, -1, 1));
}

TEST_CASE("SVM errors") {
  const Eigen::MatrixXd k = Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(solve_binary(k, Eigen::Vector3d(1, 1, 1), 1.0), DataError);
  Eigen::MatrixXd bad = k;
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(solve_binary(bad, Eigen::Vector3d(1, -1, 1), 1.0), DataError);
  const DualSolution s = solve_binary(k, Eigen::Vector3d(1, -1, 1), 1.0);
  CHECK_THROWS_AS(decision_value(s, Eigen::VectorXd(Eigen::VectorXd::Zero(2))), DataError);
}
