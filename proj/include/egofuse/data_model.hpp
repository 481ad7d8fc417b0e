#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace egofuse {

namespace fs = std::filesystem;

struct SegmentRecord {
  std::string id;
  int class_label = 0;
  fs::path frame_dir;
  double frame_rate = 30.0;
  std::optional<fs::path> audio_path;
  int duration_frames = 0;

  bool operator==(const SegmentRecord&) const = default;
};

struct DatasetManifest {
  std::vector<SegmentRecord> segments;
  std::vector<std::string> class_names;

  int num_classes() const { return static_cast<int>(class_names.size()); }
  const SegmentRecord& find(const std::string& id) const;
  bool has_audio() const;

  bool operator==(const DatasetManifest&) const = default;
};

// Reads the tab-separated manifest. Relative frame/audio paths are resolved
// against the manifest's directory; each frame directory is scanned for PGM
// files to fill duration_frames.
DatasetManifest load_manifest(const fs::path& path);
// Writes `manifest` in the same format; paths are written as given.
void write_manifest(const DatasetManifest& manifest, const fs::path& path);
// Structural checks shared by the loader and generators.
void validate_manifest(const DatasetManifest& manifest);

// Sorted list of PGM frame files in a directory.
std::vector<fs::path> list_frame_files(const fs::path& dir);

struct SplitPlan {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::uint64_t seed = 0;

  bool operator==(const SplitPlan&) const = default;
};

// Number of training segments for a class of size n.
int stratified_train_count(int n, double train_fraction);

// Per-class random split; id order within each side follows the manifest.
SplitPlan stratified_split(const DatasetManifest& manifest, double train_fraction,
                           std::uint64_t seed);

// One named channel of row vectors keyed by segment id. Global descriptors
// have one row per segment; local descriptors (windows, cuboids, audio
// frames) may have any number of rows per segment, including zero.
class FeatureChannel {
 public:
  FeatureChannel() = default;
  FeatureChannel(std::string name, std::size_t dim);

  const std::string& name() const { return name_; }
  std::size_t dim() const { return dim_; }
  std::size_t count() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<double>& values() const { return values_; }

  std::span<const double> row(std::size_t i) const;
  void append(const std::string& id, std::span<const double> values);
  // Row indices belonging to `id`, in insertion order.
  std::vector<std::size_t> rows_for(const std::string& id) const;
  // The single row for `id`; throws when there is not exactly one.
  std::span<const double> single(const std::string& id) const;
  bool contains(const std::string& id) const;

  bool operator==(const FeatureChannel& other) const;

 private:
  std::string name_;
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<double> values_;
  std::multimap<std::string, std::size_t> index_;
};

class FeatureTable {
 public:
  FeatureChannel& add_channel(const std::string& name, std::size_t dim);
  bool has(const std::string& name) const { return channels_.count(name) > 0; }
  const FeatureChannel& channel(const std::string& name) const;
  FeatureChannel& channel(const std::string& name);
  const std::map<std::string, FeatureChannel>& channels() const { return channels_; }
  void merge(const FeatureTable& other);
  // Every row id must be a manifest segment id (model channels excepted).
  void validate_against(const DatasetManifest& manifest) const;

  bool operator==(const FeatureTable& other) const { return channels_ == other.channels_; }

 private:
  std::map<std::string, FeatureChannel> channels_;
};

// Binary cache container ("EGF1").
void write_feature_table(const FeatureTable& table, const fs::path& path);
FeatureTable read_feature_table(const fs::path& path);

// Standard channel names.
namespace channels {
inline constexpr const char* kGoff = "GOFF";
inline constexpr const char* kVif = "VIF";
inline constexpr const char* kLogCWindows = "LogC-windows";
inline constexpr const char* kCuboidDescriptors = "Cuboid-descriptors";
inline constexpr const char* kAudioFrames = "Audio-frames";
inline constexpr const char* kModelPrefix = "model:";
}  // namespace channels

}  // namespace egofuse
