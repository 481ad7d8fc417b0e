#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "egofuse/error.hpp"
#include "egofuse/kernels.hpp"
#include "egofuse/mkboost.hpp"
#include "support.hpp"

using namespace egofuse;

namespace {

struct Toy {
  std::vector<GramMatrix> grams;
  Eigen::VectorXd y;
};

// Kernel 0 sees a noisy version of the class signal, kernel 1 only noise.
Toy make_toy(int n, double shift, Rng& rng) {
  Eigen::MatrixXd a = testing::gaussian_matrix(n, 2, rng), b = testing::gaussian_matrix(n, 4, rng);
  Toy t;
  t.y.resize(n);
  for (int i = 0; i < n; ++i) {
    t.y(i) = i % 2 ? 1.0 : -1.0;
    a(i, 0) += shift * t.y(i);
  }
  t.grams = {normalize(gram(KernelSpec::rbf(0.3), a)), normalize(gram(KernelSpec::linear(), b))};
  return t;
}

std::vector<Eigen::VectorXd> train_rows(const Toy& t, Eigen::Index i) {
  std::vector<Eigen::VectorXd> rows;
  for (const auto& g : t.grams) rows.push_back(g.values.row(i).transpose());
  return rows;
}

// Weak learner output on training point i, recomputed from the round's sample.
int weak_output(const BoostRound& r, const Eigen::MatrixXd& k, Eigen::Index i) {
  double f = r.weak.bias;
  for (std::size_t s = 0; s < r.sample.size(); ++s)
    f += r.weak.alpha(static_cast<Eigen::Index>(s)) * r.weak.y(static_cast<Eigen::Index>(s)) * k(i, r.sample[s]);
  return f >= 0.0 ? 1 : -1;
}

DualSolution constant_learner(int n, double bias) {
  DualSolution s;
  s.alpha = Eigen::VectorXd::Zero(n);
  s.y = Eigen::VectorXd::Ones(n);
  s.bias = bias;
  return s;
}

}  // namespace

TEST_CASE("round weights") {
  CHECK(boost_weight(0.5) == 0.0);
  CHECK(boost_weight(0.1) == doctest::Approx(0.5 * std::log(9.0)));
  CHECK(boost_weight(0.1) == doctest::Approx(1.09861).epsilon(1e-5));
}

TEST_CASE("property: distributions stay normalized and follow the exponential update") {
  Rng rng(1);
  for (int trial = 0; trial < 6; ++trial) {
    const Toy t = make_toy(30 + 4 * trial, 0.8, rng);
    std::vector<Eigen::VectorXd> trace;
    BoostOptions opt;
    opt.rounds = 8;
    opt.distribution_trace = &trace;
    const BoostEnsemble e = mkboost_train(t.grams, t.y, 1.0, rng(), opt);
    REQUIRE(e.rounds.size() == 8);
    REQUIRE(trace.size() == 9);
    const auto n = static_cast<Eigen::Index>(t.y.size());
    for (const auto& s : trace) {
      CHECK(std::abs(s.sum() - 1.0) <= 1e-12);
      CHECK(s.minCoeff() >= 0.0);
    }
    for (std::size_t r = 0; r < e.rounds.size(); ++r) {
      const BoostRound& round = e.rounds[r];
      CHECK(static_cast<Eigen::Index>(round.sample.size()) == (n + 1) / 2);
      const Eigen::MatrixXd& k = t.grams[static_cast<std::size_t>(round.kernel)].values;
      double eps = 0.0;
      Eigen::VectorXd next = trace[r];
      for (Eigen::Index i = 0; i < n; ++i) {
        const bool ok = weak_output(round, k, i) == static_cast<int>(t.y(i));
        if (!ok) eps += trace[r](i);
        next(i) *= std::exp(ok ? -round.weight : round.weight);
      }
      next /= next.sum();
      if (round.weight == 0.0) {
        CHECK(round.error >= 0.5);
        CHECK((trace[r + 1] - trace[r]).cwiseAbs().maxCoeff() == 0.0);
        continue;
      }
      CHECK(round.error == doctest::Approx(std::max(eps, 1.0 / (2.0 * static_cast<double>(n)))).epsilon(1e-12));
      CHECK(round.weight == doctest::Approx(boost_weight(round.error)));
      CHECK((trace[r + 1] - next).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("the chosen kernel has the lowest weighted error of the bank on its draw") {
  Rng rng(2);
  const Toy t = make_toy(40, 2.0, rng);
  BoostOptions opt;
  opt.rounds = 5;
  const BoostEnsemble e = mkboost_train(t.grams, t.y, 1.0, 11, opt);
  int informative = 0;
  for (const auto& r : e.rounds) informative += r.kernel == 0;
  CHECK(informative >= 4);
}

TEST_CASE("separable toy set: training error respects the product bound") {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Toy t = make_toy(40, 1.2, rng);
    BoostOptions opt;
    opt.rounds = 10;
    const BoostEnsemble e = mkboost_train(t.grams, t.y, 1.0, rng(), opt);
    bool all_below_half = true;
    for (const auto& r : e.rounds) all_below_half = all_below_half && r.error < 0.5;
    if (!all_below_half) continue;
    int wrong = 0;
    for (Eigen::Index i = 0; i < 40; ++i) wrong += boost_predict(e, train_rows(t, i)) != static_cast<int>(t.y(i));
    CHECK(static_cast<double>(wrong) / 40.0 <= boost_error_bound(e) + 1e-12);
  }
}

TEST_CASE("hand-built ensembles") {
  const int n = 4;
  const std::vector<Eigen::VectorXd> rows{Eigen::VectorXd::Zero(n)};
  BoostEnsemble e;
  e.num_train = n;
  BoostRound pos;
  pos.sample = {0, 1, 2, 3};
  pos.weak = constant_learner(n, 1.0);
  pos.weight = 1.0;

  SUBCASE("a single round predicts like its weak learner") {
    e.rounds = {pos};
    CHECK(boost_predict(e, rows) == 1);
    e.rounds[0].weak.bias = -1.0;
    CHECK(boost_predict(e, rows) == -1);
    CHECK(boost_margin(e, rows) == -1.0);
  }
  SUBCASE("equal and opposite rounds tie at zero and predict +1") {
    BoostRound neg = pos;
    neg.weak.bias = -1.0;
    e.rounds = {neg, pos};
    CHECK(boost_margin(e, rows) == 0.0);
    CHECK(boost_predict(e, rows) == 1);
  }
  SUBCASE("empty ensemble") {
    CHECK_THROWS_AS(boost_predict(e, rows), DataError);
  }
}

TEST_CASE("fixed seed gives an identical ensemble") {
  Rng rng(4);
  const Toy t = make_toy(30, 0.7, rng);
  BoostOptions opt;
  opt.rounds = 6;
  const BoostEnsemble a = mkboost_train(t.grams, t.y, 1.0, 99, opt), b = mkboost_train(t.grams, t.y, 1.0, 99, opt);
  REQUIRE(a.rounds.size() == b.rounds.size());
  for (std::size_t r = 0; r < a.rounds.size(); ++r) {
    CHECK(a.rounds[r].kernel == b.rounds[r].kernel);
    CHECK(a.rounds[r].sample == b.rounds[r].sample);
    CHECK(a.rounds[r].weight == b.rounds[r].weight);
    CHECK(a.rounds[r].weak.alpha == b.rounds[r].weak.alpha);
  }
}

TEST_CASE("one-vs-rest boosting on three blobs") {
  Rng rng(5);
  Eigen::MatrixXd x(45, 2);
  std::vector<int> labels(45);
  const Eigen::Matrix<double, 3, 2> centers = (Eigen::Matrix<double, 3, 2>() << 0, 6, -5, -3, 5, -3).finished();
  for (int i = 0; i < 45; ++i) {
    labels[static_cast<std::size_t>(i)] = i % 3;
    x.row(i) = centers.row(i % 3) + Eigen::RowVector2d(testing::normal(rng), testing::normal(rng));
  }
  const std::vector<GramMatrix> g{normalize(gram(KernelSpec::rbf(0.1), x)), normalize(gram(KernelSpec::polynomial(2, 1), x))};
  const BoostMulticlass m = train_mkboost_one_vs_rest(g, labels, 3, 10.0, 7);
  int correct = 0;
  for (Eigen::Index i = 0; i < 45; ++i) {
    const std::vector<Eigen::VectorXd> rows{g[0].values.row(i).transpose(), g[1].values.row(i).transpose()};
    correct += predict_mkboost_multiclass(m, rows) == labels[static_cast<std::size_t>(i)];
  }
  CHECK(correct >= 43);
}

TEST_CASE("selection histograms") {
  const std::vector<KernelDescriptor> bank{{"linear", {"GOFF"}}, {"rbf", {"VIF"}}, {"dc_int", {"LogC", "Cuboid"}}};
  auto ensemble_with = [](std::vector<int> kernels) {
    BoostEnsemble e;
    for (int k : kernels) {
      BoostRound r;
      r.kernel = k;
      e.rounds.push_back(r);
    }
    return e;
  };

  SUBCASE("all rounds on kernel 0 give a one-hot histogram") {
    const std::vector<BoostEnsemble> es{ensemble_with({0, 0, 0})};
    const auto h = selection_histogram(es, bank);
    CHECK(h.kernel_kinds.at("linear") == 3);
    CHECK(h.kernel_kinds.at("rbf") == 0);
    CHECK(h.kernel_kinds.at("dc_int") == 0);
    CHECK(h.channels.at("GOFF") == 3);
    CHECK(h.channels.at("Cuboid") == 0);
  }
  SUBCASE("counts add up over ensembles and disjoint trials sum elementwise") {
    const std::vector<BoostEnsemble> a{ensemble_with({0, 1})}, b{ensemble_with({2, 2, 2})};
    const std::vector<BoostEnsemble> both{a[0], b[0]};
    const auto ha = selection_histogram(a, bank), hb = selection_histogram(b, bank), hab = selection_histogram(both, bank);
    long total = 0;
    for (const auto& [kind, count] : hab.kernel_kinds) {
      CHECK(count == ha.kernel_kinds.at(kind) + hb.kernel_kinds.at(kind));
      total += count;
    }
    CHECK(total == 5);
    for (const auto& [ch, count] : hab.channels) CHECK(count == ha.channels.at(ch) + hb.channels.at(ch));
    // A combined kernel marks every channel it reads.
    CHECK(hab.channels.at("LogC") == 3);
    CHECK(hab.channels.at("Cuboid") == 3);
  }
  SUBCASE("out-of-bank round") {
    const std::vector<BoostEnsemble> es{ensemble_with({5})};
    CHECK_THROWS_AS(selection_histogram(es, bank), DataError);
  }
}

TEST_CASE("MKBoost errors") {
  Rng rng(6);
  const Toy t = make_toy(10, 1.0, rng);
  BoostOptions opt;
  opt.sample_fraction = 0.0;
  CHECK_THROWS_AS(mkboost_train(t.grams, t.y, 1.0, 1, opt), ConfigError);
  opt = BoostOptions{};
  opt.rounds = 0;
  CHECK_THROWS_AS(mkboost_train(t.grams, t.y, 1.0, 1, opt), ConfigError);
  CHECK_THROWS_AS(mkboost_train({}, t.y, 1.0, 1), DataError);
  CHECK_THROWS_AS(mkboost_train(t.grams, Eigen::VectorXd::Ones(10), 1.0, 1), DataError);
}

TEST_CASE("a draw that keeps missing a class raises after the retries") {
  // One positive among 200: a 2-sample draw from the uniform start almost never holds both classes.
  const int n = 200;
  Eigen::VectorXd y = -Eigen::VectorXd::Ones(n);
  y(0) = 1.0;
  const std::vector<GramMatrix> g{normalize(gram(KernelSpec::linear(), Eigen::MatrixXd::Identity(n, n)))};
  BoostOptions opt;
  opt.sample_fraction = 0.01;
  opt.rounds = 1;
  CHECK_THROWS_AS(mkboost_train(g, y, 1.0, 3, opt), SolverError);
}
