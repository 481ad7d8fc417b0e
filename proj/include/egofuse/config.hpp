#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace egofuse {

namespace fs = std::filesystem;

enum class ClassifierKind { kSvmPoly, kSvmHist, kSimpleMkl, kMkBoost };

std::string classifier_name(ClassifierKind kind);
ClassifierKind parse_classifier(const std::string& name);

// Per-segment feature channels as named in the config file.
inline constexpr const char* kChannelGoff = "GOFF";
inline constexpr const char* kChannelVif = "VIF";
inline constexpr const char* kChannelLogC = "LogC";
inline constexpr const char* kChannelCuboid = "Cuboid";
inline constexpr const char* kChannelAudio = "Audio";

// Channels encoded as bag-of-words histograms.
bool is_histogram_channel(const std::string& channel);

struct ExperimentConfig {
  fs::path manifest;
  fs::path output_dir = "egofuse-out";
  fs::path cache_dir;  // empty: <output_dir>/cache
  // Optional directory of <id>.flw flow dumps: read when present, written otherwise.
  fs::path flow_dir;
  std::vector<std::string> channels{kChannelGoff, kChannelVif, kChannelLogC, kChannelCuboid, kChannelAudio};
  ClassifierKind classifier = ClassifierKind::kSimpleMkl;
  // Kernel kinds instantiated per channel for the MKL/boosting bank.
  std::vector<std::string> kernel_bank{"linear", "polynomial", "rbf", "dc_int"};
  int trials = 100;
  double train_fraction = 0.75;
  std::uint64_t seed = 1;
  std::vector<double> c_grid{0.1, 1.0, 10.0, 100.0};
  int cv_folds = 3;
  int poly_degree = 3;
  double poly_bias = 1.0;
  int logc_codebook = 300;
  int cuboid_codebook = 500;
  int cuboid_pca = 100;
  int encoded_pca = 128;
  int ubm_components = 16;
  double map_relevance = 16.0;
  int boost_rounds = 20;
  double boost_fraction = 0.5;
  bool save_models = true;

  fs::path effective_cache_dir() const { return cache_dir.empty() ? output_dir / "cache" : cache_dir; }
  bool uses(const std::string& channel) const;
  void validate() const;
};

// UTF-8 "key = value" lines; '#' starts a comment; list values are
// comma-separated. Relative paths are resolved against the file's directory.
ExperimentConfig load_config(const fs::path& path);
ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir = {});
std::string format_config(const ExperimentConfig& config);

}  // namespace egofuse
