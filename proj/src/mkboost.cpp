#include "egofuse/mkboost.hpp"

#include <algorithm>
#include <cmath>

#include "egofuse/error.hpp"
#include "egofuse/rng.hpp"

namespace egofuse {

namespace {

std::vector<int> draw_sample(const Eigen::VectorXd& dist, int count, Rng& rng) {
  std::vector<double> cumulative(static_cast<std::size_t>(dist.size()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < dist.size(); ++i) {
    acc += dist(i);
    cumulative[static_cast<std::size_t>(i)] = acc;
  }
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double u = uniform01(rng) * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    out.push_back(static_cast<int>(it - cumulative.begin()));
  }
  return out;
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& k, const std::vector<int>& idx) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = k(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  return out;
}

// Weak learner output on training example i: kernel row restricted to the sample.
int weak_label(const DualSolution& weak, const Eigen::MatrixXd& k, const std::vector<int>& sample, Eigen::Index i) {
  double f = weak.bias;
  for (std::size_t s = 0; s < sample.size(); ++s) {
    const double a = weak.alpha(static_cast<Eigen::Index>(s));
    if (a != 0.0) f += a * weak.y(static_cast<Eigen::Index>(s)) * k(i, sample[s]);
  }
  return f >= 0.0 ? 1 : -1;
}

bool has_both_labels(const Eigen::VectorXd& y) {
  return (y.array() > 0.0).any() && (y.array() < 0.0).any();
}

struct Candidate {
  BoostRound round;
  std::vector<int> predictions;
};

}  // namespace

double boost_weight(double error) { return 0.5 * std::log((1.0 - error) / error); }

double boost_error_bound(const BoostEnsemble& ensemble) {
  double b = 1.0;
  for (const auto& r : ensemble.rounds) b *= 2.0 * std::sqrt(r.error * (1.0 - r.error));
  return b;
}

BoostEnsemble mkboost_train(std::span<const GramMatrix> grams, const Eigen::VectorXd& y, double c,
                            std::uint64_t seed, const BoostOptions& options) {
  if (grams.empty()) throw DataError("MKBoost needs at least one kernel");
  if (options.rounds < 1) throw ConfigError("boosting rounds must be >= 1");
  if (!(options.sample_fraction > 0.0 && options.sample_fraction <= 1.0))
    throw ConfigError("sample fraction must lie in (0, 1]");
  const Eigen::Index n = y.size();
  for (const auto& g : grams)
    if (g.size() != n || g.values.cols() != n) throw DataError("Gram size does not match labels");
  if (!has_both_labels(y)) throw DataError("single-class labels");

  BoostEnsemble ens;
  ens.num_train = static_cast<int>(n);
  ens.seed = seed;
  Rng rng(seed);
  const int draw = static_cast<int>(std::ceil(options.sample_fraction * static_cast<double>(n) - 1e-12));
  Eigen::VectorXd dist = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));

  // One draw: sample, fit a weak SVM per kernel, keep the lowest error.
  auto attempt = [&]() -> Candidate {
    for (int retry = 0; retry <= options.max_retries; ++retry) {
      std::vector<int> sample = draw_sample(dist, std::max(draw, 2), rng);
      Eigen::VectorXd ys(static_cast<Eigen::Index>(sample.size()));
      for (std::size_t s = 0; s < sample.size(); ++s) ys(static_cast<Eigen::Index>(s)) = y(sample[s]);
      if (!has_both_labels(ys)) continue;
      Candidate best;
      bool have = false;
      for (std::size_t m = 0; m < grams.size(); ++m) {
        Candidate cand;
        cand.round.kernel = static_cast<int>(m);
        cand.round.sample = sample;
        cand.round.weak = solve_binary(submatrix(grams[m].values, sample), ys, c, options.svm);
        cand.predictions.resize(static_cast<std::size_t>(n));
        double err = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const int p = weak_label(cand.round.weak, grams[m].values, sample, i);
          cand.predictions[static_cast<std::size_t>(i)] = p;
          if (p != static_cast<int>(y(i))) err += dist(i);
        }
        cand.round.error = err;
        if (!have || err < best.round.error) {
          best = std::move(cand);
          have = true;
        }
      }
      return best;
    }
    throw SolverError("degenerate boosting sample: every draw held a single class");
  };

  for (int t = 0; t < options.rounds; ++t) {
    if (options.distribution_trace) options.distribution_trace->push_back(dist);
    Candidate cand = attempt();
    if (cand.round.error >= 0.5) cand = attempt();
    if (cand.round.error >= 0.5) {
      cand.round.weight = 0.0;
      ens.rounds.push_back(std::move(cand.round));
      continue;
    }
    const double floor = 1.0 / (2.0 * static_cast<double>(n));
    if (cand.round.error < floor) cand.round.error = floor;
    cand.round.weight = boost_weight(cand.round.error);
    const double w = cand.round.weight;
    for (Eigen::Index i = 0; i < n; ++i)
      dist(i) *= std::exp(cand.predictions[static_cast<std::size_t>(i)] == static_cast<int>(y(i)) ? -w : w);
    dist /= dist.sum();
    ens.rounds.push_back(std::move(cand.round));
  }
  if (options.distribution_trace) options.distribution_trace->push_back(dist);
  return ens;
}

double boost_margin(const BoostEnsemble& ensemble, const std::vector<Eigen::VectorXd>& rows) {
  if (ensemble.rounds.empty()) throw DataError("empty ensemble");
  double margin = 0.0;
  for (const auto& r : ensemble.rounds) {
    if (r.kernel >= static_cast<int>(rows.size())) throw DataError("missing kernel row for boosting round");
    const Eigen::VectorXd& row = rows[static_cast<std::size_t>(r.kernel)];
    if (row.size() != ensemble.num_train) throw DataError("kernel row length mismatch");
    double f = r.weak.bias;
    for (std::size_t s = 0; s < r.sample.size(); ++s)
      f += r.weak.alpha(static_cast<Eigen::Index>(s)) * r.weak.y(static_cast<Eigen::Index>(s)) * row(r.sample[s]);
    margin += r.weight * (f >= 0.0 ? 1.0 : -1.0);
  }
  return margin;
}

int boost_predict(const BoostEnsemble& ensemble, const std::vector<Eigen::VectorXd>& rows) {
  return boost_margin(ensemble, rows) >= 0.0 ? 1 : -1;
}

BoostMulticlass train_mkboost_one_vs_rest(std::span<const GramMatrix> grams, std::span<const int> labels,
                                          int num_classes, double c, std::uint64_t seed,
                                          const BoostOptions& options) {
  if (num_classes < 2) throw DataError("multiclass boosting needs at least 2 classes");
  BoostMulticlass out;
  for (int k = 0; k < num_classes; ++k)
    out.per_class.push_back(mkboost_train(grams, one_vs_rest_labels(labels, k), c,
                                          derive_seed(seed, static_cast<std::uint64_t>(k)), options));
  return out;
}

int predict_mkboost_multiclass(const BoostMulticlass& model, const std::vector<Eigen::VectorXd>& rows) {
  std::vector<double> scores;
  for (const auto& e : model.per_class) scores.push_back(boost_margin(e, rows));
  return argmax_class(scores);
}

SelectionHistogram selection_histogram(std::span<const BoostEnsemble> ensembles,
                                       std::span<const KernelDescriptor> bank) {
  SelectionHistogram h;
  for (const auto& k : bank) {
    h.kernel_kinds.emplace(k.kind, 0);
    for (const auto& ch : k.channels) h.channels.emplace(ch, 0);
  }
  for (const auto& e : ensembles)
    for (const auto& r : e.rounds) {
      if (r.kernel < 0 || r.kernel >= static_cast<int>(bank.size()))
        throw DataError("round refers to a kernel outside the bank");
      const auto& k = bank[static_cast<std::size_t>(r.kernel)];
      ++h.kernel_kinds[k.kind];
      for (const auto& ch : k.channels) ++h.channels[ch];
    }
  return h;
}

}  // namespace egofuse
