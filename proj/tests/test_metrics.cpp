#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "egofuse/error.hpp"
#include "egofuse/metrics.hpp"
#include "support.hpp"

using namespace egofuse;

namespace {

ConfusionMatrix cm_of(std::initializer_list<std::initializer_list<int>> rows) {
  ConfusionMatrix cm;
  const auto n = static_cast<Eigen::Index>(rows.size());
  cm.counts = Eigen::MatrixXi::Zero(n, n);
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (int v : r) cm.counts(i, j++) = v;
    ++i;
  }
  return cm;
}

ConfusionMatrix random_cm(int c, Rng& rng, bool full_rows) {
  ConfusionMatrix cm;
  cm.counts = Eigen::MatrixXi::Zero(c, c);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < c; ++j) cm.counts(i, j) = static_cast<int>(uniform_index(rng, i == j ? 20 : 6));
  if (full_rows)
    for (int i = 0; i < c; ++i) cm.counts(i, i) += 1;
  return cm;
}

void check_same(const MetricsReport& a, const MetricsReport& b) {
  CHECK(a.accuracy == doctest::Approx(b.accuracy).epsilon(1e-12));
  CHECK(a.precision == doctest::Approx(b.precision).epsilon(1e-12));
  CHECK(a.recall == doctest::Approx(b.recall).epsilon(1e-12));
  CHECK(a.f1 == doctest::Approx(b.f1).epsilon(1e-12));
  CHECK(a.kappa == doctest::Approx(b.kappa).epsilon(1e-12));
  CHECK(a.sic == doctest::Approx(b.sic).epsilon(1e-12));
}

}  // namespace

TEST_CASE("confusion tallies") {
  const std::vector<int> t{0, 0, 1, 1}, p{0, 1, 1, 1};
  const ConfusionMatrix cm = confusion(t, p, 2);
  CHECK(cm.counts == cm_of({{1, 1}, {0, 2}}).counts);
  CHECK(cm.total() == 4);
  const std::vector<int> same{2, 0, 1, 2, 2};
  const ConfusionMatrix d = confusion(same, same, 3);
  CHECK(d.counts == Eigen::Vector3i(1, 1, 3).asDiagonal().toDenseMatrix());
  CHECK(d.total() == 5);
  const std::vector<int> bad{0, 3};
  CHECK_THROWS_WITH_AS(confusion(bad, bad, 3), doctest::Contains("label outside range"), DataError);
  CHECK_THROWS_AS(confusion(std::vector<int>{0}, std::vector<int>{0, 1}, 2), DataError);
  CHECK_THROWS_AS(confusion(std::vector<int>{}, std::vector<int>{}, 2), DataError);
}

TEST_CASE("precision, recall and F1") {
  SUBCASE("perfect diagonal") {
    const MetricsReport r = evaluate(cm_of({{3, 0, 0}, {0, 2, 0}, {0, 0, 5}}));
    CHECK(r.accuracy == 1.0);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.f1 == 1.0);
    CHECK(r.kappa == 1.0);
    CHECK(r.sic == 1.0);
  }
  SUBCASE("hand tally of [[1,1],[0,2]]") {
    const MetricsReport r = prf(cm_of({{1, 1}, {0, 2}}));
    CHECK(r.accuracy == 0.75);
    CHECK(r.class_precision[0] == 1.0);
    CHECK(r.class_recall[0] == 0.5);
    CHECK(r.class_precision[1] == doctest::Approx(2.0 / 3.0));
    CHECK(r.class_recall[1] == 1.0);
    CHECK(r.precision == doctest::Approx(5.0 / 6.0));
    CHECK(r.recall == doctest::Approx(0.75));
    CHECK(r.class_f1[0] == doctest::Approx(2.0 / 3.0));
    CHECK(r.class_f1[1] == doctest::Approx(0.8));
    CHECK(r.f1 == doctest::Approx((2.0 / 3.0 + 0.8) / 2.0));
  }
  SUBCASE("a class never true and never predicted contributes zeros") {
    const MetricsReport r = prf(cm_of({{2, 0, 0}, {0, 2, 0}, {0, 0, 0}}));
    CHECK(r.class_precision[2] == 0.0);
    CHECK(r.class_recall[2] == 0.0);
    CHECK(r.class_f1[2] == 0.0);
    CHECK(r.precision == doctest::Approx(2.0 / 3.0));
    CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("empty matrix") {
    CHECK_THROWS_AS(prf(cm_of({{0, 0}, {0, 0}})), DataError);
  }
}

TEST_CASE("kappa") {
  CHECK(kappa(cm_of({{4, 0}, {0, 6}})) == 1.0);
  CHECK(kappa(cm_of({{25, 25}, {25, 25}})) == doctest::Approx(0.0));
  CHECK(kappa(cm_of({{40, 10}, {20, 30}})) == doctest::Approx(0.4));
  // Every sample in one cell: p_e = 1.
  CHECK(kappa(cm_of({{5, 0}, {0, 0}})) == 1.0);
  CHECK(kappa(cm_of({{0, 5}, {0, 0}})) == 0.0);
}

TEST_CASE("SIC") {
  CHECK(sic(cm_of({{3, 0}, {0, 7}})) == 1.0);
  CHECK(sic(cm_of({{0, 3}, {7, 0}})) == 0.0);
  CHECK(sic(cm_of({{5, 5}, {1, 1}})) == doctest::Approx(0.75));
  CHECK(sic(cm_of({{5, 5}, {1, 1}})) == doctest::Approx(1.0 - 2 * 50.0 * 50.0 / (2 * 100.0 * 100.0)));
  CHECK_THROWS_AS(sic(cm_of({{1, 0}, {0, 0}})), DataError);
}

TEST_CASE("property: metrics are invariant to relabeling and count scaling; kappa <= accuracy") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int c = 2 + static_cast<int>(uniform_index(rng, 6));
    const ConfusionMatrix cm = random_cm(c, rng, true);
    const MetricsReport r = evaluate(cm);

    std::vector<int> perm(static_cast<std::size_t>(c));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    ConfusionMatrix pc;
    pc.counts = Eigen::MatrixXi::Zero(c, c);
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < c; ++j) pc.counts(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) = cm.counts(i, j);
    check_same(evaluate(pc), r);

    ConfusionMatrix sc;
    sc.counts = cm.counts * (2 + static_cast<int>(uniform_index(rng, 5)));
    check_same(evaluate(sc), r);

    CHECK(r.kappa <= r.accuracy + 1e-12);
    CHECK(r.kappa >= -1.0);
    for (double v : {r.accuracy, r.precision, r.recall, r.f1, r.sic}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("mean report and rendering") {
  const MetricsReport a = evaluate(cm_of({{2, 0}, {0, 2}})), b = evaluate(cm_of({{1, 1}, {0, 2}}));
  const std::vector<MetricsReport> both{a, b};
  const MetricsReport m = mean_report(both);
  CHECK(m.accuracy == doctest::Approx(0.875));
  CHECK(m.class_recall[0] == doctest::Approx(0.75));
  CHECK(m.kappa == doctest::Approx((a.kappa + b.kappa) / 2));
  const std::vector<std::string> names{"walk", "sit"};
  const std::string text = render_confusion(cm_of({{1, 1}, {0, 2}}), names);
  CHECK(text.find("walk") != std::string::npos);
  CHECK(text.find("sit") != std::string::npos);
  CHECK(text.find("50.0") != std::string::npos);
  CHECK(text.find("100.0") != std::string::npos);
}
