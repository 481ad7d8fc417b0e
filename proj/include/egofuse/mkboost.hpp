#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "egofuse/kernels.hpp"
#include "egofuse/svm.hpp"

namespace egofuse {

struct BoostOptions {
  int rounds = 20;            // T
  double sample_fraction = 0.5;  // r
  int max_retries = 5;
  SvmOptions svm;
  // When set, receives S_t before each round and after the last update.
  std::vector<Eigen::VectorXd>* distribution_trace = nullptr;
};

struct BoostRound {
  int kernel = 0;
  std::vector<int> sample;  // training indices the weak SVM was fit on (with repeats)
  DualSolution weak;
  double weight = 0.0;  // w_t
  double error = 0.0;   // eps_t over all N
};

struct BoostEnsemble {
  std::vector<BoostRound> rounds;
  int num_train = 0;
  std::uint64_t seed = 0;
};

// 1/2 ln((1 - eps) / eps).
double boost_weight(double error);

// Product over rounds of 2 sqrt(eps (1 - eps)).
double boost_error_bound(const BoostEnsemble& ensemble);

BoostEnsemble mkboost_train(std::span<const GramMatrix> grams, const Eigen::VectorXd& y, double c,
                            std::uint64_t seed, const BoostOptions& options = {});

// rows[m] is the query's kernel-m row against the full training set.
double boost_margin(const BoostEnsemble& ensemble, const std::vector<Eigen::VectorXd>& rows);
// sign(margin), zero margin is +1.
int boost_predict(const BoostEnsemble& ensemble, const std::vector<Eigen::VectorXd>& rows);

struct BoostMulticlass {
  std::vector<BoostEnsemble> per_class;
};

BoostMulticlass train_mkboost_one_vs_rest(std::span<const GramMatrix> grams, std::span<const int> labels,
                                          int num_classes, double c, std::uint64_t seed,
                                          const BoostOptions& options = {});
int predict_mkboost_multiclass(const BoostMulticlass& model, const std::vector<Eigen::VectorXd>& rows);

struct SelectionHistogram {
  std::map<std::string, long> kernel_kinds;
  std::map<std::string, long> channels;
};

// Counts, over every round of every ensemble, the kind of the chosen kernel
// and each channel that kernel reads. Every kind and channel in the bank is
// present, possibly with a zero count.
SelectionHistogram selection_histogram(std::span<const BoostEnsemble> ensembles,
                                       std::span<const KernelDescriptor> bank);

}  // namespace egofuse
