#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "egofuse/config.hpp"
#include "egofuse/data_model.hpp"
#include "egofuse/kernels.hpp"
#include "egofuse/metrics.hpp"
#include "egofuse/mkboost.hpp"
#include "egofuse/mkl.hpp"
#include "egofuse/svm.hpp"

namespace egofuse {

// ---------------------------------------------------------------------------
// Extraction

// Raw per-segment channels for the requested config channel names. With a
// non-empty `flow_dir`, flows are read from <flow_dir>/<id>.flw when that
// file exists and written there after computation otherwise.
FeatureTable extract_segment(const SegmentRecord& segment, const std::vector<std::string>& channels,
                             const fs::path& flow_dir = {});

// Flow dump location of a segment inside `flow_dir`.
fs::path flow_dump_path(const fs::path& flow_dir, const std::string& segment_id);

struct ExtractStats {
  int computed = 0;
  int cached = 0;
};

// Extracts every segment, reusing <cache_dir>/<id>.egf when it holds all
// requested channels. The Audio channel is dropped when no segment has audio.
FeatureTable extract(const ExperimentConfig& config, const DatasetManifest& manifest, ExtractStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Leak audit

struct AccessEntry {
  int trial = 0;
  std::string phase;  // "fit:<what>" or "apply:<what>"
  std::string segment_id;
};

// Fit-phase entries whose segment id is in `test_ids`.
std::vector<AccessEntry> fit_phase_leaks(const std::vector<AccessEntry>& log, int trial,
                                         const std::vector<std::string>& test_ids);

// ---------------------------------------------------------------------------
// Per-trial encoding

struct EncodedChannel {
  std::string name;
  Eigen::MatrixXd train;  // vector representation, rows follow split.train_ids
  Eigen::MatrixXd test;
  bool histogram = false;
  Eigen::MatrixXd hist_train;  // raw bag-of-words histograms
  Eigen::MatrixXd hist_test;
  // False when the training side carries no variation (for example no
  // descriptors at all); such channels get no kernels.
  bool informative = true;
};

struct PreparedTrial {
  int trial = 0;
  std::uint64_t seed = 0;
  SplitPlan split;
  std::vector<int> train_labels;
  std::vector<int> test_labels;
  std::vector<EncodedChannel> channels;
  FeatureTable models;  // fitted encoders as "model:" channels
  std::vector<AccessEntry> access;
};

std::uint64_t trial_seed(std::uint64_t master, int trial);

// Splits, then fits every encoder (standardizers, codebooks, PCA, UBM) on
// the training side only and encodes both sides.
PreparedTrial prepare_trial(const ExperimentConfig& config, const DatasetManifest& manifest,
                            const FeatureTable& table, int trial);

// ---------------------------------------------------------------------------
// Kernels and classifiers

struct KernelSet {
  std::vector<KernelDescriptor> descriptors;
  std::vector<GramMatrix> train;       // normalized training Grams
  std::vector<Eigen::MatrixXd> test;   // normalized test x train blocks
};

// One kernel for svm_poly / svm_hist, the full bank for simple_mkl / mkboost.
KernelSet build_kernels(const ExperimentConfig& config, const PreparedTrial& prepared);

struct ClassifierModel {
  ClassifierKind kind = ClassifierKind::kSimpleMkl;
  double c = 1.0;
  MulticlassModel svm;
  MklMulticlass mkl;
  BoostMulticlass boost;
};

ClassifierModel fit_classifier(const ExperimentConfig& config, std::span<const GramMatrix> grams,
                               std::span<const int> labels, int num_classes, double c, std::uint64_t seed);
// cross[m] holds query rows of kernel m against the training set.
std::vector<int> predict_classifier(const ClassifierModel& model, const std::vector<Eigen::MatrixXd>& cross);

// Stratified k-fold accuracy over the C grid on training Grams; returns the
// best C (ties to the smaller value). A single-value grid skips the search.
double select_c(const ExperimentConfig& config, std::span<const GramMatrix> grams, std::span<const int> labels,
                int num_classes, std::uint64_t seed);

// Kernel kinds and channels used by a trained model.
SelectionHistogram model_selection(const ClassifierModel& model, const std::vector<KernelDescriptor>& bank);

// ---------------------------------------------------------------------------
// Trials

struct TrialResult {
  int trial = 0;
  bool ok = false;
  std::string error;
  double c = 0.0;
  SplitPlan split;
  std::vector<int> test_labels;
  std::vector<int> predictions;
  ConfusionMatrix confusion;
  MetricsReport metrics;
  SelectionHistogram selection;
};

struct RunResult {
  ExperimentConfig config;
  std::vector<std::string> class_names;
  std::vector<TrialResult> trials;
  MetricsReport aggregate;
  int failed = 0;
  std::vector<AccessEntry> access;

  // More than 10% of the trials failed.
  bool too_many_failures() const { return failed * 10 > static_cast<int>(trials.size()); }
};

// Worker count from EGOFUSE_WORKERS (default: hardware concurrency).
int worker_count();

// Runs config.trials independent trials. Failed trials are recorded and
// excluded from the aggregate. When `model_dir` is non-empty each trial's
// models are written there.
RunResult run_trials(const ExperimentConfig& config, const DatasetManifest& manifest, const FeatureTable& table,
                     const fs::path& model_dir = {});

TrialResult run_single_trial(const ExperimentConfig& config, const DatasetManifest& manifest,
                             const FeatureTable& table, int trial, std::vector<AccessEntry>* access = nullptr,
                             FeatureTable* models = nullptr);

}  // namespace egofuse
