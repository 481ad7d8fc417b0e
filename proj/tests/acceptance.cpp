// End-to-end acceptance checks. Prints one PASS/FAIL/SKIP line per criterion
// and exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "egofuse/audio_features.hpp"
#include "egofuse/config.hpp"
#include "egofuse/kernels.hpp"
#include "egofuse/metrics.hpp"
#include "egofuse/mkboost.hpp"
#include "egofuse/mkl.hpp"
#include "egofuse/pipeline.hpp"
#include "egofuse/svm.hpp"
#include "egofuse/synth.hpp"
#include "reference_mfcc.hpp"
#include "support.hpp"

using namespace egofuse;

namespace {

enum class Status { kPass, kFail, kSkip };

// Collects failed expectations; the first few are kept for the report line.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (ok) return;
    if (failures_++ < 3) detail_ += (detail_.empty() ? "" : "; ") + what;
  }
  bool ok() const { return failures_ == 0; }
  std::string summary() const {
    return ok() ? std::to_string(count_) + " checks"
                : std::to_string(failures_) + " of " + std::to_string(count_) + " failed: " + detail_;
  }

 private:
  int count_ = 0;
  int failures_ = 0;
  std::string detail_;
};

struct Outcome {
  Status status = Status::kPass;
  std::string detail;
};

Outcome from(const Checks& c) { return {c.ok() ? Status::kPass : Status::kFail, c.summary()}; }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Shared synthetic corpus for the dimensional and end-to-end checks.

struct SynthCorpus {
  testing::TempDir dir;
  DatasetManifest manifest;
  ExperimentConfig config;
  FeatureTable table;
  double extract_seconds = 0.0;

  SynthCorpus() {
    const auto t0 = std::chrono::steady_clock::now();
    manifest = synth_dataset(2024, dir / "data");
    config.manifest = dir / "data" / "manifest.tsv";
    config.output_dir = dir / "out";
    config.trials = 10;
    config.save_models = false;
    table = extract(config, manifest);
    extract_seconds = seconds_since(t0);
  }
};

SynthCorpus& synth_corpus() {
  static SynthCorpus c;
  return c;
}

// ---------------------------------------------------------------------------

Outcome dimensional_contracts() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthCorpus& c = synth_corpus();
  Checks k;
  k.expect(c.manifest.segments.size() == 48, "48 segments");
  k.expect(c.table.channel(channels::kGoff).dim() == 137, "GOFF dim 137");
  k.expect(c.table.channel(channels::kVif).dim() == 106, "VIF dim 106");
  k.expect(c.table.channel(channels::kLogCWindows).dim() == 78, "Log-C window dim 78");
  k.expect(c.table.channel(channels::kAudioFrames).dim() == 39, "MFCC row dim 39");
  ExperimentConfig cfg = c.config;
  cfg.channels = {kChannelAudio};
  const PreparedTrial p = prepare_trial(cfg, c.manifest, c.table, 0);
  k.expect(p.channels.size() == 1 && p.channels[0].train.cols() == 624 && p.channels[0].test.cols() == 624,
           "supervector dim 624");
  const double secs = seconds_since(t0);
  k.expect(secs < 120.0, "runtime " + fmt(secs) + " s exceeds 2 min");
  Outcome o = from(k);
  o.detail += ", " + fmt(secs) + " s";
  return o;
}

Outcome kernel_suite() {
  Checks k;
  Rng rng(101);
  // Integer-valued vectors keep every operation exact.
  for (int pair = 0; pair < 200; ++pair) {
    const int dim = 1 + static_cast<int>(uniform_index(rng, 8));
    const int degree = 1 + static_cast<int>(uniform_index(rng, 4));
    const double bias = static_cast<double>(uniform_index(rng, 3));
    std::vector<double> x(static_cast<std::size_t>(dim)), y(x.size());
    for (auto& v : x) v = static_cast<double>(uniform_index(rng, 7)) - 3.0;
    for (auto& v : y) v = static_cast<double>(uniform_index(rng, 7)) - 3.0;
    double base = bias;
    for (std::size_t i = 0; i < x.size(); ++i) base += x[i] * y[i];
    double direct = 1.0;
    for (int i = 0; i < degree; ++i) direct *= base;
    k.expect(kernel_eval(KernelSpec::polynomial(degree, bias), x, y) == direct, "polynomial pair " + std::to_string(pair));
  }
  const KernelSpec dc = KernelSpec::dc_int({4});
  const std::vector<double> h{0.1, 0.2, 0.3, 0.4}, a{0.5, 0.5, 0.0, 0.0}, b{0.0, 0.0, 0.25, 0.75};
  k.expect(std::abs(kernel_eval(dc, h, h) - 1.0) <= 1e-12, "DC-Int identical = 1");
  k.expect(std::abs(kernel_eval(dc, a, b) - std::exp(-1.0)) <= 1e-12, "DC-Int disjoint = 1/e");

  const Eigen::MatrixXd samples = testing::gaussian_matrix(30, 5, rng);
  for (const KernelSpec& s : {KernelSpec::linear(), KernelSpec::polynomial(3, 1), KernelSpec::rbf(0.2)}) {
    const Eigen::MatrixXd g = gram(s, samples).values;
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().minCoeff();
    k.expect(min_eig >= -1e-8, s.describe() + " min eigenvalue " + fmt(min_eig));
  }
  return from(k);
}

double kkt_residual(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y, const DualSolution& s) {
  double worst = 0.0;
  const Eigen::VectorXd f = kernel * s.alpha.cwiseProduct(y) + Eigen::VectorXd::Constant(y.size(), s.bias);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double m = y(i) * f(i);
    const double a = s.alpha(i);
    double r = 0.0;
    if (a <= 1e-8 * s.c) r = std::max(0.0, 1.0 - m);
    else if (a >= s.c * (1 - 1e-8)) r = std::max(0.0, m - 1.0);
    else r = std::abs(m - 1.0);
    worst = std::max(worst, r);
  }
  return worst;
}

Outcome svm_solver() {
  Checks k;
  {
    Eigen::MatrixXd kernel(2, 2);
    kernel << 1, -1, -1, 1;
    Eigen::VectorXd y(2);
    y << 1, -1;
    const DualSolution s = solve_binary(kernel, y, 10.0);
    k.expect(std::abs(s.alpha(0) - 0.5) <= 1e-6 && std::abs(s.alpha(1) - 0.5) <= 1e-6, "two-point alpha");
    k.expect(std::abs(s.bias) <= 1e-6, "two-point bias");
  }
  Rng rng(202);
  for (int problem = 0; problem < 20; ++problem) {
    const int n = 20 + 2 * problem;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    const double angle = 2 * std::numbers::pi * uniform01(rng);
    const Eigen::Vector2d w(std::cos(angle), std::sin(angle));
    for (int i = 0; i < n; ++i) {
      Eigen::Vector2d p;
      do p = Eigen::Vector2d(testing::normal(rng), testing::normal(rng)) * 2.0;
      while (std::abs(p.dot(w)) < 0.3);
      x.row(i) = p.transpose();
      y(i) = p.dot(w) > 0 ? 1.0 : -1.0;
    }
    const Eigen::MatrixXd kernel = gram(KernelSpec::linear(), x).values;
    std::vector<double> trace;
    SvmOptions opt;
    opt.tolerance = 1e-4;
    opt.objective_trace = &trace;
    const DualSolution s = solve_binary(kernel, y, 100.0, opt);
    const double r = kkt_residual(kernel, y, s);
    k.expect(r < 1e-3, "problem " + std::to_string(problem) + " KKT residual " + fmt(r));
    k.expect(!trace.empty(), "objective trace recorded");
    for (std::size_t i = 1; i < trace.size(); ++i)
      k.expect(trace[i] >= trace[i - 1] - 1e-12, "problem " + std::to_string(problem) + " objective decreased");
  }
  return from(k);
}

Outcome simple_mkl() {
  const auto t0 = std::chrono::steady_clock::now();
  Checks k;
  Rng rng(303);
  auto problem = [&](int n, Eigen::MatrixXd& informative, Eigen::MatrixXd& noise, Eigen::VectorXd& y) {
    informative = testing::gaussian_matrix(n, 3, rng);
    noise = testing::gaussian_matrix(n, 6, rng);
    y.resize(n);
    for (int i = 0; i < n; ++i) {
      y(i) = i % 2 ? 1.0 : -1.0;
      informative(i, 0) += 3.0 * y(i);
    }
  };
  for (int trial = 0; trial < 6; ++trial) {
    Eigen::MatrixXd inf, noise;
    Eigen::VectorXd y;
    problem(30, inf, noise, y);
    const std::vector<GramMatrix> g{normalize(gram(KernelSpec::linear(), inf)),
                                    normalize(gram(KernelSpec::rbf(0.3), inf)),
                                    normalize(gram(KernelSpec::polynomial(2, 1), noise)),
                                    normalize(gram(KernelSpec::rbf(0.5), noise))};
    const MklModel m = simple_mkl_train(g, y, 10.0);
    for (const auto& d : m.weight_trace)
      k.expect(d.minCoeff() >= 0.0 && std::abs(d.sum() - 1.0) <= 1e-10, "simplex at an outer iteration");

    Eigen::VectorXd d = Eigen::VectorXd::Constant(4, 0.1);
    for (int i = 0; i < 4; ++i) d(i) += uniform01(rng);
    d /= d.sum();
    const DualSolution s = solve_binary(combine_kernels(g, d), y, 1.0);
    const Eigen::VectorXd grad = mkl_gradient(g, y, s.alpha);
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd hi = d, lo = d;
      hi(i) += 1e-5;
      lo(i) -= 1e-5;
      const double fd =
          (mkl_objective_fixed_alpha(g, y, s.alpha, hi) - mkl_objective_fixed_alpha(g, y, s.alpha, lo)) / 2e-5;
      k.expect(std::abs(fd - grad(i)) <= 1e-4 * std::abs(grad(i)), "finite-difference gradient");
    }
  }

  Eigen::MatrixXd inf, noise;
  Eigen::VectorXd y;
  problem(40, inf, noise, y);
  const std::vector<GramMatrix> g{normalize(gram(KernelSpec::linear(), inf)),
                                  normalize(gram(KernelSpec::linear(), noise))};
  const double c = 10.0;
  const MklModel m = simple_mkl_train(g, y, c);
  double best = 1e300;
  for (int i = 0; i <= 100; ++i) {
    const double d = i / 100.0;
    best = std::min(best, solve_binary(d * g[0].values + (1 - d) * g[1].values, y, c).objective);
  }
  k.expect(m.weights(0) >= 0.9, "d_informative " + fmt(m.weights(0)));
  k.expect(std::abs(m.inner.objective - best) <= 1e-3 * std::abs(best),
           "J " + fmt(m.inner.objective) + " vs grid " + fmt(best));
  const double secs = seconds_since(t0);
  k.expect(secs < 60.0, "runtime " + fmt(secs) + " s exceeds 1 min");
  return from(k);
}

Outcome mkboost() {
  Checks k;
  k.expect(boost_weight(0.5) == 0.0, "w(0.5) = 0");
  k.expect(std::abs(boost_weight(0.1) - 0.5 * std::log(9.0)) <= 1e-12, "w(0.1) = ln(9)/2");

  Rng rng(404);
  for (int toy = 0; toy < 5; ++toy) {
    const int n = 40;
    Eigen::MatrixXd a = testing::gaussian_matrix(n, 2, rng), b = testing::gaussian_matrix(n, 4, rng);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      y(i) = i % 2 ? 1.0 : -1.0;
      a(i, 0) += 1.2 * y(i);
    }
    const std::vector<GramMatrix> g{normalize(gram(KernelSpec::rbf(0.3), a)),
                                    normalize(gram(KernelSpec::linear(), b))};
    std::vector<Eigen::VectorXd> trace;
    BoostOptions opt;
    opt.rounds = 10;
    opt.distribution_trace = &trace;
    const std::uint64_t seed = rng();
    const BoostEnsemble e = mkboost_train(g, y, 1.0, seed, opt);
    for (const auto& s : trace) k.expect(std::abs(s.sum() - 1.0) <= 1e-12, "distribution normalization");

    int wrong = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      std::vector<Eigen::VectorXd> rows;
      for (const auto& gm : g) rows.push_back(gm.values.row(i).transpose());
      wrong += boost_predict(e, rows) != static_cast<int>(y(i));
    }
    double bound = 1.0;
    for (const auto& r : e.rounds) bound *= 2.0 * std::sqrt(r.error * (1.0 - r.error));
    k.expect(static_cast<double>(wrong) / n <= bound + 1e-12,
             "training error " + fmt(static_cast<double>(wrong) / n) + " above bound " + fmt(bound));

    opt.distribution_trace = nullptr;
    const BoostEnsemble again = mkboost_train(g, y, 1.0, seed, opt);
    bool same = again.rounds.size() == e.rounds.size();
    for (std::size_t r = 0; same && r < e.rounds.size(); ++r) {
      const auto& p = e.rounds[r];
      const auto& q = again.rounds[r];
      same = p.kernel == q.kernel && p.sample == q.sample && p.weight == q.weight && p.error == q.error &&
             p.weak.alpha == q.weak.alpha && p.weak.bias == q.weak.bias;
    }
    k.expect(same, "fixed seed reproduces the ensemble");
  }
  return from(k);
}

Outcome audio_chain() {
  Checks k;
  Rng rng(505);
  for (int run = 0; run < 5; ++run) {
    Eigen::MatrixXd frames(300, 3);
    for (Eigen::Index i = 0; i < frames.rows(); ++i)
      for (Eigen::Index j = 0; j < 3; ++j) frames(i, j) = testing::normal(rng) + (i % 3 == 0 ? 4.0 : -2.0) * (j + 1);
    std::vector<double> trace;
    UbmOptions opt;
    opt.log_likelihood_trace = &trace;
    const DiagGmm ubm = train_ubm(frames, 2 + run % 3, rng(), opt);
    for (std::size_t i = 1; i < trace.size(); ++i) k.expect(trace[i] >= trace[i - 1] - 1e-9, "EM log-likelihood decreased");

    const Eigen::MatrixXd seg = frames.topRows(40);
    const DiagGmm stiff = map_adapt(ubm, seg, 1e12);
    k.expect((stiff.means - ubm.means).cwiseAbs().maxCoeff() <= 1e-6, "tau -> inf keeps UBM means");

    const DiagGmm one = train_ubm(frames, 1, rng());
    const DiagGmm loose = map_adapt(one, seg, 1e-12);
    const Eigen::RowVectorXd mean = seg.colwise().mean();
    k.expect((loose.means.row(0) - mean).cwiseAbs().maxCoeff() <= 1e-6, "M = 1, tau -> 0 gives the data mean");
  }

  k.expect(mfcc_frame_count(24000) == 97, "97 frames for 1 s at 24 kHz");
  const auto second = mfcc(testing::sine(1000, 1.0, 24000));
  k.expect(second.rows() == 97 && second.cols() == 39, "MFCC matrix 97 x 39");

  const auto x = testing::sine(1000, 0.25, 24000);
  const Eigen::MatrixXd m = mfcc(x);
  const auto ref = testing::reference_mfcc(x);
  double worst = static_cast<std::size_t>(m.rows()) == ref.size() ? 0.0 : 1e300;
  for (std::size_t f = 0; f < ref.size() && f < static_cast<std::size_t>(m.rows()); ++f)
    for (std::size_t d = 0; d < 39; ++d)
      worst = std::max(worst, std::abs(m(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(d)) - ref[f][d]));
  k.expect(worst <= 1e-6, "reference MFCC difference " + fmt(worst));
  return from(k);
}

ConfusionMatrix cm2(int a, int b, int c, int d) {
  ConfusionMatrix cm;
  cm.counts.resize(2, 2);
  cm.counts << a, b, c, d;
  return cm;
}

Outcome metrics() {
  Checks k;
  k.expect(kappa(cm2(4, 0, 0, 6)) == 1.0, "kappa = 1");
  k.expect(std::abs(kappa(cm2(25, 25, 25, 25))) <= 1e-12, "kappa = 0");
  k.expect(std::abs(kappa(cm2(40, 10, 20, 30)) - 0.4) <= 1e-12, "kappa = 0.4");
  k.expect(sic(cm2(3, 0, 0, 7)) == 1.0, "SIC = 1");
  k.expect(sic(cm2(0, 3, 7, 0)) == 0.0, "SIC = 0");
  k.expect(std::abs(sic(cm2(5, 5, 1, 1)) - 0.75) <= 1e-12, "SIC = 0.75");

  Rng rng(606);
  auto same = [](const MetricsReport& a, const MetricsReport& b) {
    auto eq = [](double u, double v) { return std::abs(u - v) <= 1e-12 * std::max(1.0, std::abs(u)); };
    return eq(a.accuracy, b.accuracy) && eq(a.precision, b.precision) && eq(a.recall, b.recall) && eq(a.f1, b.f1) &&
           eq(a.kappa, b.kappa) && eq(a.sic, b.sic);
  };
  for (int trial = 0; trial < 100; ++trial) {
    const int c = 2 + static_cast<int>(uniform_index(rng, 6));
    ConfusionMatrix cm;
    cm.counts = Eigen::MatrixXi::Zero(c, c);
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < c; ++j) cm.counts(i, j) = static_cast<int>(uniform_index(rng, i == j ? 20 : 6)) + (i == j);
    const MetricsReport r = evaluate(cm);

    std::vector<int> perm(static_cast<std::size_t>(c));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    ConfusionMatrix pc;
    pc.counts = Eigen::MatrixXi::Zero(c, c);
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < c; ++j)
        pc.counts(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) = cm.counts(i, j);
    k.expect(same(evaluate(pc), r), "permutation invariance");

    ConfusionMatrix sc;
    sc.counts = cm.counts * (2 + static_cast<int>(uniform_index(rng, 5)));
    k.expect(same(evaluate(sc), r), "count-scaling invariance");
  }
  return from(k);
}

Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthCorpus& c = synth_corpus();
  Checks k;
  std::string scores;
  for (auto kind : {ClassifierKind::kSvmPoly, ClassifierKind::kSvmHist, ClassifierKind::kSimpleMkl,
                    ClassifierKind::kMkBoost}) {
    ExperimentConfig cfg = c.config;
    cfg.classifier = kind;
    const RunResult r = run_trials(cfg, c.manifest, c.table);
    const std::string name = classifier_name(kind);
    const double need = kind == ClassifierKind::kSimpleMkl ? 0.95 : 0.90;
    k.expect(r.failed == 0, name + ": " + std::to_string(r.failed) + " failed trials");
    k.expect(r.aggregate.accuracy >= need, name + " accuracy " + fmt(r.aggregate.accuracy));
    std::size_t leaks = 0;
    for (const auto& t : r.trials) leaks += fit_phase_leaks(r.access, t.trial, t.split.test_ids).size();
    k.expect(leaks == 0, name + ": " + std::to_string(leaks) + " test accesses while fitting");
    scores += (scores.empty() ? "" : " ") + name + "=" + fmt(r.aggregate.accuracy);
  }
  // Extraction counts toward the budget even when an earlier criterion ran it.
  const double secs = seconds_since(t0) + c.extract_seconds;
  k.expect(secs < 900.0, "runtime " + fmt(secs) + " s exceeds 15 min");
  Outcome o = from(k);
  o.detail += ", " + scores;
  return o;
}

Outcome real_data() {
  const char* path = std::getenv("EGOFUSE_JPL_CONFIG");
  if (!path || !*path) return {Status::kSkip, "set EGOFUSE_JPL_CONFIG to a JPL-format experiment config"};
  ExperimentConfig cfg = load_config(path);
  cfg.classifier = ClassifierKind::kSimpleMkl;
  cfg.validate();
  const DatasetManifest manifest = load_manifest(cfg.manifest);
  const FeatureTable table = extract(cfg, manifest);
  const RunResult r = run_trials(cfg, manifest, table);
  Checks k;
  k.expect(!r.too_many_failures(), std::to_string(r.failed) + " failed trials");
  k.expect(std::abs(r.aggregate.f1 - 0.93) <= 0.07, "F1 " + fmt(r.aggregate.f1) + " outside 0.93 +- 0.07");
  Outcome o = from(k);
  o.detail += ", F1=" + fmt(r.aggregate.f1);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"dimensional contracts", dimensional_contracts},
      {"kernel suite", kernel_suite},
      {"SVM solver", svm_solver},
      {"SimpleMKL", simple_mkl},
      {"MKBoost", mkboost},
      {"audio chain", audio_chain},
      {"metrics", metrics},
      {"end-to-end synthetic corpus", end_to_end},
      {"real JPL-format corpus (optional)", real_data},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Status::kFail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::kPass ? "PASS" : o.status == Status::kFail ? "FAIL" : "SKIP";
    failed += o.status == Status::kFail;
    std::printf("%s criterion %zu (%s): %s [%.1f s]\n", tag, i + 1, criteria[i].first.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
