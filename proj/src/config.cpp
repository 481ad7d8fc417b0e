#include "egofuse/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "egofuse/error.hpp"
#include "egofuse/kernels.hpp"

namespace egofuse {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("invalid value for '" + key + "': " + value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("invalid boolean for '" + key + "': " + value);
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_relative() && !base.empty() ? base / p : p;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

std::string number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string classifier_name(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::kSvmPoly: return "svm_poly";
    case ClassifierKind::kSvmHist: return "svm_hist";
    case ClassifierKind::kSimpleMkl: return "simple_mkl";
    case ClassifierKind::kMkBoost: return "mkboost";
  }
  return "unknown";
}

ClassifierKind parse_classifier(const std::string& name) {
  for (auto k : {ClassifierKind::kSvmPoly, ClassifierKind::kSvmHist, ClassifierKind::kSimpleMkl, ClassifierKind::kMkBoost})
    if (classifier_name(k) == name) return k;
  throw ConfigError("unknown classifier: " + name);
}

bool is_histogram_channel(const std::string& channel) {
  return channel == kChannelLogC || channel == kChannelCuboid;
}

bool ExperimentConfig::uses(const std::string& channel) const {
  return std::find(channels.begin(), channels.end(), channel) != channels.end();
}

void ExperimentConfig::validate() const {
  if (manifest.empty()) throw ConfigError("config lacks a manifest path");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  if (channels.empty()) throw ConfigError("no feature channels enabled");
  for (const auto& ch : channels)
    if (ch != kChannelGoff && ch != kChannelVif && ch != kChannelLogC && ch != kChannelCuboid && ch != kChannelAudio)
      throw ConfigError("unknown channel: " + ch);
  for (std::size_t i = 0; i < channels.size(); ++i)
    for (std::size_t j = i + 1; j < channels.size(); ++j)
      if (channels[i] == channels[j]) throw ConfigError("channel listed twice: " + channels[i]);
  if (classifier == ClassifierKind::kSvmHist && std::none_of(channels.begin(), channels.end(), is_histogram_channel))
    throw ConfigError("svm_hist needs at least one histogram channel (LogC or Cuboid)");
  if (kernel_bank.empty()) throw ConfigError("kernel bank is empty");
  for (const auto& k : kernel_bank) parse_kernel_kind(k);
  if (c_grid.empty()) throw ConfigError("C grid is empty");
  for (double c : c_grid)
    if (!(c > 0.0)) throw ConfigError("C values must be positive");
  if (cv_folds < 2) throw ConfigError("cv_folds must be >= 2");
  if (poly_degree < 1) throw ConfigError("poly_degree must be >= 1");
  if (logc_codebook < 1 || cuboid_codebook < 1 || cuboid_pca < 1 || encoded_pca < 1)
    throw ConfigError("codebook and PCA sizes must be positive");
  if (ubm_components < 1) throw ConfigError("ubm_components must be >= 1");
  if (!(map_relevance > 0.0)) throw ConfigError("map_relevance must be positive");
  if (boost_rounds < 1) throw ConfigError("boost_rounds must be >= 1");
  if (!(boost_fraction > 0.0 && boost_fraction <= 1.0)) throw ConfigError("boost_fraction must lie in (0, 1]");
}

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "manifest") c.manifest = resolve(base_dir, value);
    else if (key == "output_dir") c.output_dir = resolve(base_dir, value);
    else if (key == "cache_dir") c.cache_dir = resolve(base_dir, value);
    else if (key == "flow_dir") c.flow_dir = resolve(base_dir, value);
    else if (key == "channels") c.channels = split_list(value);
    else if (key == "classifier") c.classifier = parse_classifier(value);
    else if (key == "kernel_bank") c.kernel_bank = split_list(value);
    else if (key == "trials") c.trials = parse_number<int>(key, value);
    else if (key == "train_fraction") c.train_fraction = parse_number<double>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "c_grid") {
      c.c_grid.clear();
      for (const auto& v : split_list(value)) c.c_grid.push_back(parse_number<double>(key, v));
    } else if (key == "cv_folds") c.cv_folds = parse_number<int>(key, value);
    else if (key == "poly_degree") c.poly_degree = parse_number<int>(key, value);
    else if (key == "poly_bias") c.poly_bias = parse_number<double>(key, value);
    else if (key == "logc_codebook") c.logc_codebook = parse_number<int>(key, value);
    else if (key == "cuboid_codebook") c.cuboid_codebook = parse_number<int>(key, value);
    else if (key == "cuboid_pca") c.cuboid_pca = parse_number<int>(key, value);
    else if (key == "encoded_pca") c.encoded_pca = parse_number<int>(key, value);
    else if (key == "ubm_components") c.ubm_components = parse_number<int>(key, value);
    else if (key == "map_relevance") c.map_relevance = parse_number<double>(key, value);
    else if (key == "boost_rounds") c.boost_rounds = parse_number<int>(key, value);
    else if (key == "boost_fraction") c.boost_fraction = parse_number<double>(key, value);
    else if (key == "save_models") c.save_models = parse_bool(key, value);
    else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string format_config(const ExperimentConfig& c) {
  std::vector<std::string> grid;
  for (double v : c.c_grid) grid.push_back(number(v));
  std::ostringstream os;
  os << "manifest = " << c.manifest.string() << "\n"
     << "output_dir = " << c.output_dir.string() << "\n";
  if (!c.cache_dir.empty()) os << "cache_dir = " << c.cache_dir.string() << "\n";
  if (!c.flow_dir.empty()) os << "flow_dir = " << c.flow_dir.string() << "\n";
  os << "channels = " << join(c.channels) << "\n"
     << "classifier = " << classifier_name(c.classifier) << "\n"
     << "kernel_bank = " << join(c.kernel_bank) << "\n"
     << "trials = " << c.trials << "\n"
     << "train_fraction = " << number(c.train_fraction) << "\n"
     << "seed = " << c.seed << "\n"
     << "c_grid = " << join(grid) << "\n"
     << "cv_folds = " << c.cv_folds << "\n"
     << "poly_degree = " << c.poly_degree << "\n"
     << "poly_bias = " << number(c.poly_bias) << "\n"
     << "logc_codebook = " << c.logc_codebook << "\n"
     << "cuboid_codebook = " << c.cuboid_codebook << "\n"
     << "cuboid_pca = " << c.cuboid_pca << "\n"
     << "encoded_pca = " << c.encoded_pca << "\n"
     << "ubm_components = " << c.ubm_components << "\n"
     << "map_relevance = " << number(c.map_relevance) << "\n"
     << "boost_rounds = " << c.boost_rounds << "\n"
     << "boost_fraction = " << number(c.boost_fraction) << "\n"
     << "save_models = " << (c.save_models ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace egofuse
