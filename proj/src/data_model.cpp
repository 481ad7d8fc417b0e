#include "egofuse/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "egofuse/error.hpp"
#include "egofuse/rng.hpp"

namespace egofuse {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

void strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
}

constexpr char kCacheMagic[4] = {'E', 'G', 'F', '1'};

}  // namespace

const SegmentRecord& DatasetManifest::find(const std::string& id) const {
  for (const auto& s : segments)
    if (s.id == id) return s;
  throw DataError("unknown segment id: " + id);
}

bool DatasetManifest::has_audio() const {
  return std::any_of(segments.begin(), segments.end(),
                     [](const SegmentRecord& s) { return s.audio_path.has_value(); });
}

std::vector<fs::path> list_frame_files(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw DataError("unreadable frame directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  if (ec) throw DataError("unreadable frame directory: " + dir.string());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

void validate_manifest(const DatasetManifest& manifest) {
  if (manifest.segments.empty()) throw DataError("empty manifest");
  const int c = manifest.num_classes();
  if (c < 1) throw DataError("manifest declares no classes");
  std::set<std::string> ids;
  std::vector<int> per_class(static_cast<std::size_t>(c), 0);
  for (const auto& s : manifest.segments) {
    if (s.id.empty()) throw DataError("missing id");
    if (!ids.insert(s.id).second) throw DataError("duplicate id: " + s.id);
    if (s.class_label < 0 || s.class_label >= c)
      throw DataError("label outside range for " + s.id + ": " + std::to_string(s.class_label));
    if (!(s.frame_rate > 0.0)) throw DataError("non-positive frame rate for " + s.id);
    if (s.duration_frames < 2) throw DataError("segment " + s.id + " has fewer than 2 frames");
    ++per_class[static_cast<std::size_t>(s.class_label)];
  }
  for (int k = 0; k < c; ++k)
    if (per_class[static_cast<std::size_t>(k)] < 2)
      throw DataError("class " + std::to_string(k) + " has fewer than 2 segments");
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };

  DatasetManifest manifest;
  std::string line;
  bool have_header = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (!have_header) {
      if (fields.size() != 2 || fields[0] != "#classes")
        throw DataError("manifest line 1: expected '#classes<TAB>names'");
      manifest.class_names = split(fields[1], ',');
      have_header = true;
      continue;
    }
    if (fields.size() != 5)
      throw DataError("manifest line " + std::to_string(line_no) + ": expected 5 tab-separated fields");
    SegmentRecord rec;
    rec.id = fields[0];
    try {
      std::size_t used = 0;
      rec.class_label = std::stoi(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("label");
      rec.frame_rate = std::stod(fields[3], &used);
      if (used != fields[3].size()) throw std::invalid_argument("rate");
    } catch (const std::exception&) {
      throw DataError("manifest line " + std::to_string(line_no) + ": malformed number");
    }
    rec.frame_dir = resolve(fields[2]);
    if (fields[4] != "-") rec.audio_path = resolve(fields[4]);
    manifest.segments.push_back(std::move(rec));
  }
  if (!have_header) throw DataError("empty manifest");
  if (manifest.segments.empty()) throw DataError("empty manifest");

  // Cheap structural checks before touching the filesystem per segment.
  std::set<std::string> ids;
  for (const auto& s : manifest.segments) {
    if (!ids.insert(s.id).second) throw DataError("duplicate id: " + s.id);
    if (s.class_label < 0 || s.class_label >= manifest.num_classes())
      throw DataError("label outside range for " + s.id + ": " + std::to_string(s.class_label));
  }
  for (auto& s : manifest.segments)
    s.duration_frames = static_cast<int>(list_frame_files(s.frame_dir).size());
  validate_manifest(manifest);
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  out << "#classes\t";
  for (std::size_t i = 0; i < manifest.class_names.size(); ++i)
    out << (i ? "," : "") << manifest.class_names[i];
  out << '\n';
  for (const auto& s : manifest.segments) {
    std::ostringstream rate;
    rate.precision(17);
    rate << s.frame_rate;
    out << s.id << '\t' << s.class_label << '\t' << s.frame_dir.string() << '\t' << rate.str() << '\t'
        << (s.audio_path ? s.audio_path->string() : std::string("-")) << '\n';
  }
  if (!out) throw DataError("cannot write manifest: " + path.string());
}

int stratified_train_count(int n, double train_fraction) {
  if (n < 2) throw DataError("class too small to split: " + std::to_string(n) + " segment(s)");
  const int t = static_cast<int>(std::lround(train_fraction * n));
  return std::clamp(t, 1, n - 1);
}

SplitPlan stratified_split(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0, 1)");
  const int c = manifest.num_classes();
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(c));
  for (std::size_t i = 0; i < manifest.segments.size(); ++i)
    members[static_cast<std::size_t>(manifest.segments[i].class_label)].push_back(i);

  Rng rng(seed);
  std::vector<char> is_train(manifest.segments.size(), 0);
  for (int k = 0; k < c; ++k) {
    auto& m = members[static_cast<std::size_t>(k)];
    const int n_train = stratified_train_count(static_cast<int>(m.size()), train_fraction);
    for (std::size_t i = m.size(); i > 1; --i) std::swap(m[i - 1], m[uniform_index(rng, i)]);
    for (int i = 0; i < n_train; ++i) is_train[m[static_cast<std::size_t>(i)]] = 1;
  }

  SplitPlan plan;
  plan.seed = seed;
  for (std::size_t i = 0; i < manifest.segments.size(); ++i)
    (is_train[i] ? plan.train_ids : plan.test_ids).push_back(manifest.segments[i].id);
  return plan;
}

// ---------------------------------------------------------------------------

FeatureChannel::FeatureChannel(std::string name, std::size_t dim) : name_(std::move(name)), dim_(dim) {}

std::span<const double> FeatureChannel::row(std::size_t i) const {
  return std::span<const double>(values_).subspan(i * dim_, dim_);
}

void FeatureChannel::append(const std::string& id, std::span<const double> values) {
  if (values.size() != dim_)
    throw DataError("dimension mismatch in channel " + name_ + ": expected " + std::to_string(dim_) +
                    ", got " + std::to_string(values.size()));
  index_.emplace(id, ids_.size());
  ids_.push_back(id);
  values_.insert(values_.end(), values.begin(), values.end());
}

std::vector<std::size_t> FeatureChannel::rows_for(const std::string& id) const {
  std::vector<std::size_t> out;
  auto [lo, hi] = index_.equal_range(id);
  for (auto it = lo; it != hi; ++it) out.push_back(it->second);
  std::sort(out.begin(), out.end());
  return out;
}

std::span<const double> FeatureChannel::single(const std::string& id) const {
  auto rows = rows_for(id);
  if (rows.size() != 1)
    throw DataError("channel " + name_ + " has " + std::to_string(rows.size()) + " rows for " + id);
  return row(rows.front());
}

bool FeatureChannel::contains(const std::string& id) const { return index_.count(id) > 0; }

bool FeatureChannel::operator==(const FeatureChannel& other) const {
  if (name_ != other.name_ || dim_ != other.dim_ || ids_ != other.ids_) return false;
  // Bitwise comparison so that NaN payloads and signed zeros count.
  return values_.size() == other.values_.size() &&
         std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(double)) == 0;
}

FeatureChannel& FeatureTable::add_channel(const std::string& name, std::size_t dim) {
  auto [it, inserted] = channels_.try_emplace(name, name, dim);
  if (!inserted && it->second.dim() != dim)
    throw DataError("channel " + name + " already exists with dimension " + std::to_string(it->second.dim()));
  return it->second;
}

const FeatureChannel& FeatureTable::channel(const std::string& name) const {
  auto it = channels_.find(name);
  if (it == channels_.end()) throw DataError("missing channel: " + name);
  return it->second;
}

FeatureChannel& FeatureTable::channel(const std::string& name) {
  auto it = channels_.find(name);
  if (it == channels_.end()) throw DataError("missing channel: " + name);
  return it->second;
}

void FeatureTable::merge(const FeatureTable& other) {
  for (const auto& [name, ch] : other.channels_) {
    auto& dst = add_channel(name, ch.dim());
    for (std::size_t i = 0; i < ch.count(); ++i) dst.append(ch.ids()[i], ch.row(i));
  }
}

void FeatureTable::validate_against(const DatasetManifest& manifest) const {
  std::set<std::string> ids;
  for (const auto& s : manifest.segments) ids.insert(s.id);
  for (const auto& [name, ch] : channels_) {
    if (name.rfind(channels::kModelPrefix, 0) == 0) continue;
    for (const auto& id : ch.ids())
      if (!ids.count(id)) throw DataError("channel " + name + " references unknown segment " + id);
  }
}

void write_feature_table(const FeatureTable& table, const fs::path& path) {
  // Write to a sibling temp file then rename, so readers never observe a
  // partially written cache.
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write cache: " + path.string());
    out.write(kCacheMagic, 4);
    for (const auto& [name, ch] : table.channels()) {
      detail::put_string(out, name);
      detail::put_u32(out, static_cast<std::uint32_t>(ch.dim()));
      detail::put_u32(out, static_cast<std::uint32_t>(ch.count()));
      for (const auto& id : ch.ids()) detail::put_string(out, id);
      for (double v : ch.values()) detail::put_f64(out, v);
    }
    if (!out) throw DataError("cannot write cache: " + path.string());
  }
  fs::rename(tmp, path);
}

FeatureTable read_feature_table(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open cache: " + path.string());
  detail::Reader r(in, "corrupt cache: " + path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCacheMagic, 3) != 0) throw DataError("corrupt cache: bad magic in " + path.string());
  if (magic[3] != kCacheMagic[3])
    throw DataError("cache version mismatch: expected EGF1, found EGF" + std::string(1, magic[3]));

  FeatureTable table;
  while (!r.at_eof()) {
    const std::string name = r.string();
    const std::uint32_t dim = r.u32();
    const std::uint32_t count = r.u32();
    if (table.has(name)) throw DataError("corrupt cache: duplicate channel " + name);
    auto& ch = table.add_channel(name, dim);
    std::vector<std::string> ids(count);
    for (auto& id : ids) id = r.string();
    std::vector<double> row(dim);
    for (std::uint32_t i = 0; i < count; ++i) {
      for (auto& v : row) v = r.f64();
      ch.append(ids[i], row);
    }
  }
  return table;
}

}  // namespace egofuse
