#include "egofuse/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <thread>

#include "egofuse/audio_features.hpp"
#include "egofuse/descriptor_encoding.hpp"
#include "egofuse/error.hpp"
#include "egofuse/media_io.hpp"
#include "egofuse/optical_flow.hpp"
#include "egofuse/rng.hpp"
#include "egofuse/video_features.hpp"
#include "parallel.hpp"

namespace egofuse {

namespace {

// Stream indices for seeds derived from a trial seed.
enum SeedStream : std::uint64_t { kLogCCodebook = 11, kCuboidCodebook, kUbm, kBoost, kCrossValidation };

// A codebook word needs at least this many training descriptors; keeps
// desk-scale corpora from degenerating into one word per descriptor.
constexpr int kDescriptorsPerWord = 4;
constexpr double kSelectedWeight = 1e-4;

const char* raw_channel_name(const std::string& channel) {
  if (channel == kChannelGoff) return channels::kGoff;
  if (channel == kChannelVif) return channels::kVif;
  if (channel == kChannelLogC) return channels::kLogCWindows;
  if (channel == kChannelCuboid) return channels::kCuboidDescriptors;
  if (channel == kChannelAudio) return channels::kAudioFrames;
  throw ConfigError("unknown channel: " + channel);
}

std::size_t raw_channel_dim(const std::string& channel) {
  if (channel == kChannelGoff) return GoffVector::kDim;
  if (channel == kChannelVif) return VifVector::kDim;
  if (channel == kChannelLogC) return std::tuple_size_v<LogCVector>;
  if (channel == kChannelCuboid) return CuboidParams{}.descriptor_dim();
  if (channel == kChannelAudio) return static_cast<std::size_t>(MfccConfig{}.feature_dim());
  throw ConfigError("unknown channel: " + channel);
}

std::string safe_stem(const std::string& id) {
  std::string out;
  for (char ch : id) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.') ? ch : '_';
  return out;
}

std::string cache_file_name(const std::string& id) { return safe_stem(id) + ".egf"; }

std::vector<FlowField> segment_flows(const std::vector<Image>& frames, const fs::path& dump) {
  if (dump.empty()) return flow_sequence(frames);
  if (!fs::exists(dump)) {
    std::vector<FlowField> flows = flow_sequence(frames);
    fs::create_directories(dump.parent_path());
    write_flow_dump(flows, dump);
    return flows;
  }
  std::vector<FlowField> flows = read_flow_dump(dump);
  if (flows.size() + 1 != frames.size())
    throw DataError("flow dump " + dump.string() + " holds " + std::to_string(flows.size()) + " fields for " +
                    std::to_string(frames.size()) + " frames");
  for (const auto& f : flows)
    if (f.width() != frames.front().cols() || f.height() != frames.front().rows())
      throw DataError("flow dump " + dump.string() + " does not match the frame size");
  return flows;
}

bool covers(const FeatureTable& t, const std::vector<std::string>& chans) {
  return std::all_of(chans.begin(), chans.end(), [&](const std::string& c) { return t.has(raw_channel_name(c)); });
}

Eigen::MatrixXd single_rows(const FeatureChannel& ch, const std::vector<std::string>& ids) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(ch.dim()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto r = ch.single(ids[i]);
    for (std::size_t j = 0; j < r.size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[j];
  }
  return m;
}

Eigen::MatrixXd segment_rows(const FeatureChannel& ch, const std::string& id) {
  const auto idx = ch.rows_for(id);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(ch.dim()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto r = ch.row(idx[i]);
    for (std::size_t j = 0; j < r.size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[j];
  }
  return m;
}

Eigen::MatrixXd stack_rows(const FeatureChannel& ch, const std::vector<std::string>& ids) {
  std::size_t total = 0;
  for (const auto& id : ids) total += ch.rows_for(id).size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(ch.dim()));
  Eigen::Index r = 0;
  for (const auto& id : ids) {
    const Eigen::MatrixXd s = segment_rows(ch, id);
    m.middleRows(r, s.rows()) = s;
    r += s.rows();
  }
  return m;
}

void put_matrix(FeatureTable& t, const std::string& name, const Eigen::MatrixXd& m, const std::string& id) {
  auto& ch = t.add_channel(name, static_cast<std::size_t>(m.cols()));
  std::vector<double> row(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    ch.append(id, row);
  }
}

void put_vector(FeatureTable& t, const std::string& name, const Eigen::VectorXd& v, const std::string& id) {
  put_matrix(t, name, v.transpose(), id);
}

void put_pca(FeatureTable& t, const std::string& prefix, const PcaModel& p) {
  put_vector(t, prefix + ":pca-mean", p.mean, "mean");
  put_matrix(t, prefix + ":pca-basis", p.basis.transpose(), "component");
}

int codebook_size(int configured, Eigen::Index descriptors) {
  return std::max(1, std::min(configured, static_cast<int>(descriptors / kDescriptorsPerWord)));
}

int pca_size(int configured, Eigen::Index n, Eigen::Index d) {
  return static_cast<int>(std::max<Eigen::Index>(1, std::min<Eigen::Index>({configured, n - 1, d})));
}

Eigen::MatrixXd bow_rows(const FeatureChannel& ch, const std::vector<std::string>& ids, const Codebook& book,
                         const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& transform) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), book.k());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Eigen::MatrixXd rows = segment_rows(ch, ids[i]);
    const std::vector<double> h = bow_encode(rows.rows() ? transform(rows) : Eigen::MatrixXd(0, book.dim()), book);
    for (int j = 0; j < book.k(); ++j) out(static_cast<Eigen::Index>(i), j) = h[static_cast<std::size_t>(j)];
  }
  return out;
}

Eigen::MatrixXd select(const Eigen::MatrixXd& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Extraction

fs::path flow_dump_path(const fs::path& flow_dir, const std::string& segment_id) {
  return flow_dir / (safe_stem(segment_id) + ".flw");
}

FeatureTable extract_segment(const SegmentRecord& segment, const std::vector<std::string>& chans,
                             const fs::path& flow_dir) {
  auto wants = [&](const char* c) { return std::find(chans.begin(), chans.end(), c) != chans.end(); };
  FeatureTable t;
  for (const auto& c : chans) t.add_channel(raw_channel_name(c), raw_channel_dim(c));
  const std::string& id = segment.id;

  const bool video = wants(kChannelGoff) || wants(kChannelVif) || wants(kChannelLogC) || wants(kChannelCuboid);
  if (video) {
    const std::vector<Image> frames = read_frames(segment.frame_dir);
    if (frames.size() < 2) throw DataError("fewer than 2 frames");
    std::vector<FlowField> flows;
    if (wants(kChannelGoff) || wants(kChannelLogC)) flows = segment_flows(frames, flow_dir.empty() ? fs::path{} : flow_dump_path(flow_dir, id));
    if (wants(kChannelGoff)) t.channel(channels::kGoff).append(id, compute_goff(flows).concat());
    if (wants(kChannelVif)) t.channel(channels::kVif).append(id, compute_vif(frames).concat());
    if (wants(kChannelLogC))
      for (const auto& w : compute_logc_windows(frames, flows)) t.channel(channels::kLogCWindows).append(id, w);
    if (wants(kChannelCuboid)) {
      const CuboidDescriptorSet set = compute_cuboids(frames);
      auto& ch = t.channel(channels::kCuboidDescriptors);
      std::vector<double> row(static_cast<std::size_t>(set.descriptors.cols()));
      for (Eigen::Index i = 0; i < set.descriptors.rows(); ++i) {
        for (Eigen::Index j = 0; j < set.descriptors.cols(); ++j) row[static_cast<std::size_t>(j)] = set.descriptors(i, j);
        ch.append(id, row);
      }
    }
  }
  if (wants(kChannelAudio) && segment.audio_path) {
    const MfccConfig cfg;
    AudioClip clip = read_wav(*segment.audio_path);
    std::vector<double> samples = clip.sample_rate == cfg.sample_rate
                                      ? clip.samples
                                      : resample(clip.samples, clip.sample_rate, cfg.sample_rate);
    const Eigen::MatrixXd m = mfcc(samples, cfg);
    put_matrix(t, channels::kAudioFrames, m, id);
  }
  return t;
}

FeatureTable extract(const ExperimentConfig& config, const DatasetManifest& manifest, ExtractStats* stats) {
  validate_manifest(manifest);
  std::vector<std::string> chans;
  for (const auto& c : config.channels)
    if (c != kChannelAudio || manifest.has_audio()) chans.push_back(c);

  const fs::path cache = config.effective_cache_dir();
  fs::create_directories(cache);
  const int n = static_cast<int>(manifest.segments.size());
  std::vector<FeatureTable> parts(static_cast<std::size_t>(n));
  std::vector<char> hit(static_cast<std::size_t>(n), 0);
  detail::parallel_for(n, worker_count(), [&](int i) {
    const SegmentRecord& seg = manifest.segments[static_cast<std::size_t>(i)];
    const fs::path file = cache / cache_file_name(seg.id);
    if (fs::exists(file)) {
      try {
        FeatureTable cached = read_feature_table(file);
        if (covers(cached, chans)) {
          FeatureTable subset;
          for (const auto& c : chans) {
            const auto& src = cached.channel(raw_channel_name(c));
            auto& dst = subset.add_channel(src.name(), src.dim());
            for (std::size_t r = 0; r < src.count(); ++r) dst.append(src.ids()[r], src.row(r));
          }
          parts[static_cast<std::size_t>(i)] = std::move(subset);
          hit[static_cast<std::size_t>(i)] = 1;
          return;
        }
      } catch (const DataError&) {
        // Unreadable cache entries are recomputed.
      }
    }
    try {
      parts[static_cast<std::size_t>(i)] = extract_segment(seg, chans, config.flow_dir);
    } catch (const Error& e) {
      throw DataError("segment " + seg.id + ": " + e.what());
    }
    write_feature_table(parts[static_cast<std::size_t>(i)], file);
  });

  FeatureTable table;
  for (const auto& c : chans) table.add_channel(raw_channel_name(c), raw_channel_dim(c));
  for (const auto& p : parts) table.merge(p);
  if (stats) {
    stats->cached = static_cast<int>(std::count(hit.begin(), hit.end(), 1));
    stats->computed = n - stats->cached;
  }
  return table;
}

// ---------------------------------------------------------------------------
// Leak audit

std::vector<AccessEntry> fit_phase_leaks(const std::vector<AccessEntry>& log, int trial,
                                         const std::vector<std::string>& test_ids) {
  const std::set<std::string> test(test_ids.begin(), test_ids.end());
  std::vector<AccessEntry> out;
  for (const auto& e : log)
    if (e.trial == trial && e.phase.rfind("fit:", 0) == 0 && test.count(e.segment_id)) out.push_back(e);
  return out;
}

// ---------------------------------------------------------------------------
// Per-trial encoding

std::uint64_t trial_seed(std::uint64_t master, int trial) {
  return derive_seed(master, static_cast<std::uint64_t>(trial));
}

PreparedTrial prepare_trial(const ExperimentConfig& config, const DatasetManifest& manifest,
                            const FeatureTable& table, int trial) {
  PreparedTrial p;
  p.trial = trial;
  p.seed = trial_seed(config.seed, trial);
  p.split = stratified_split(manifest, config.train_fraction, p.seed);
  for (const auto& id : p.split.train_ids) p.train_labels.push_back(manifest.find(id).class_label);
  for (const auto& id : p.split.test_ids) p.test_labels.push_back(manifest.find(id).class_label);
  const auto& train_ids = p.split.train_ids;
  const auto& test_ids = p.split.test_ids;

  auto log = [&](const std::string& phase, const std::vector<std::string>& ids) {
    for (const auto& id : ids) p.access.push_back({trial, phase, id});
  };
  const std::string model = channels::kModelPrefix;

  for (const auto& name : config.channels) {
    const char* raw = raw_channel_name(name);
    if (!table.has(raw)) {
      if (name == kChannelAudio) continue;  // corpus without audio
      throw DataError("feature table lacks channel " + std::string(raw));
    }
    const FeatureChannel& ch = table.channel(raw);
    EncodedChannel e;
    e.name = name;
    e.histogram = is_histogram_channel(name);

    if (name == kChannelGoff || name == kChannelVif) {
      log("fit:" + name, train_ids);
      const Eigen::MatrixXd tr = single_rows(ch, train_ids);
      const Standardizer s = Standardizer::fit(tr);
      const Eigen::RowVectorXd mean = s.apply(tr).colwise().mean();
      log("apply:" + name, test_ids);
      e.train = s.apply(tr).rowwise() - mean;
      e.test = s.apply(single_rows(ch, test_ids)).rowwise() - mean;
      put_vector(p.models, model + name + ":scale", s.scale(), "scale");
      put_vector(p.models, model + name + ":mean", mean.transpose(), "mean");
    } else if (name == kChannelLogC || name == kChannelCuboid) {
      log("fit:" + name, train_ids);
      const Eigen::MatrixXd pooled = stack_rows(ch, train_ids);
      if (pooled.rows() < 2) {
        e.informative = false;
        p.channels.push_back(std::move(e));
        continue;
      }
      std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> transform;
      Eigen::MatrixXd fitted;
      if (name == kChannelLogC) {
        const Standardizer s = Standardizer::fit(pooled);
        transform = [s](const Eigen::MatrixXd& x) { return s.apply(x); };
        put_vector(p.models, model + name + ":scale", s.scale(), "scale");
      } else {
        const PcaModel pca = pca_fit(pooled, pca_size(config.cuboid_pca, pooled.rows(), pooled.cols()));
        transform = [pca](const Eigen::MatrixXd& x) { return pca.project_rows(x); };
        put_pca(p.models, model + name + ":descriptor", pca);
      }
      fitted = transform(pooled);
      const int configured = name == kChannelLogC ? config.logc_codebook : config.cuboid_codebook;
      const Codebook book = kmeans_fit(fitted, codebook_size(configured, fitted.rows()),
                                       derive_seed(p.seed, name == kChannelLogC ? kLogCCodebook : kCuboidCodebook));
      put_matrix(p.models, model + name + ":codebook", book.centers, "center");
      e.hist_train = bow_rows(ch, train_ids, book, transform);
      const PcaModel hp = pca_fit(e.hist_train, pca_size(config.encoded_pca, e.hist_train.rows(), e.hist_train.cols()));
      put_pca(p.models, model + name + ":histogram", hp);
      log("apply:" + name, test_ids);
      e.hist_test = bow_rows(ch, test_ids, book, transform);
      e.train = hp.project_rows(e.hist_train);
      e.test = hp.project_rows(e.hist_test);
    } else {  // Audio
      log("fit:" + name, train_ids);
      const Eigen::MatrixXd pooled = stack_rows(ch, train_ids);
      if (pooled.rows() < 2) throw DataError("too few audio frames in the training split");
      const int m = std::min<int>(config.ubm_components, static_cast<int>(pooled.rows()));
      const DiagGmm ubm = train_ubm(pooled, m, derive_seed(p.seed, kUbm));
      put_vector(p.models, model + name + ":ubm-weights", ubm.weights, "ubm");
      put_matrix(p.models, model + name + ":ubm-means", ubm.means, "ubm");
      put_matrix(p.models, model + name + ":ubm-variances", ubm.variances, "ubm");
      auto encode = [&](const std::vector<std::string>& ids) {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(ubm.means.size()));
        for (std::size_t i = 0; i < ids.size(); ++i) {
          const Eigen::MatrixXd frames = segment_rows(ch, ids[i]);
          if (frames.rows() == 0) {  // segment without audio
            out.row(static_cast<Eigen::Index>(i)).setZero();
            continue;
          }
          const std::vector<double> sv = supervector(map_adapt(ubm, frames, config.map_relevance));
          out.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
        }
        return out;
      };
      const Eigen::MatrixXd tr = encode(train_ids);
      const Standardizer s = Standardizer::fit(tr);
      const Eigen::RowVectorXd mean = s.apply(tr).colwise().mean();
      put_vector(p.models, model + name + ":scale", s.scale(), "scale");
      put_vector(p.models, model + name + ":mean", mean.transpose(), "mean");
      log("apply:" + name, test_ids);
      e.train = s.apply(tr).rowwise() - mean;
      e.test = s.apply(encode(test_ids)).rowwise() - mean;
    }
    if (e.train.size() == 0 || e.train.rowwise().norm().maxCoeff() < 1e-12) e.informative = false;
    p.channels.push_back(std::move(e));
  }
  if (std::none_of(p.channels.begin(), p.channels.end(), [](const EncodedChannel& e) { return e.informative; }))
    throw DataError("no enabled channel carries information in the training split");
  return p;
}

// ---------------------------------------------------------------------------
// Kernels and classifiers

namespace {

void add_kernel(KernelSet& set, const KernelSpec& spec, std::vector<std::string> chans, const Eigen::MatrixXd& train,
                const Eigen::MatrixXd& test) {
  const GramMatrix raw = gram(spec, train);
  set.train.push_back(normalize(raw));
  set.test.push_back(normalize_cross(cross_gram(spec, test, train), self_similarity(spec, test), raw.values.diagonal()));
  set.descriptors.push_back({kernel_kind_name(spec.kind), std::move(chans)});
}

double rbf_gamma(const Eigen::MatrixXd& train) {
  const double med = median_squared_distance(train);
  return med > 0.0 ? 1.0 / med : 1.0;
}

}  // namespace

KernelSet build_kernels(const ExperimentConfig& config, const PreparedTrial& prepared) {
  KernelSet set;
  switch (config.classifier) {
    case ClassifierKind::kSvmPoly: {
      // Channels are concatenated after scaling each block to unit mean row
      // norm on the training side, so no channel dominates by dimension.
      Eigen::Index cols = 0;
      for (const auto& e : prepared.channels)
        if (e.informative) cols += e.train.cols();
      Eigen::MatrixXd tr(prepared.train_labels.size(), cols), te(prepared.test_labels.size(), cols);
      std::vector<std::string> names;
      Eigen::Index at = 0;
      for (const auto& e : prepared.channels) {
        if (!e.informative) continue;
        const double norm = e.train.rowwise().norm().mean();
        const double s = norm > 0.0 ? 1.0 / norm : 1.0;
        tr.middleCols(at, e.train.cols()) = s * e.train;
        te.middleCols(at, e.test.cols()) = s * e.test;
        at += e.train.cols();
        names.push_back(e.name);
      }
      add_kernel(set, KernelSpec::polynomial(config.poly_degree, config.poly_bias), names, tr, te);
      break;
    }
    case ClassifierKind::kSvmHist: {
      std::vector<const EncodedChannel*> hist;
      for (const auto& e : prepared.channels)
        if (e.histogram && e.informative) hist.push_back(&e);
      if (hist.empty()) throw ConfigError("svm_hist needs at least one histogram channel (LogC or Cuboid)");
      Eigen::Index cols = 0;
      std::vector<std::size_t> widths;
      std::vector<std::string> names;
      for (const auto* e : hist) {
        cols += e->hist_train.cols();
        widths.push_back(static_cast<std::size_t>(e->hist_train.cols()));
        names.push_back(e->name);
      }
      Eigen::MatrixXd tr(prepared.train_labels.size(), cols), te(prepared.test_labels.size(), cols);
      Eigen::Index at = 0;
      for (const auto* e : hist) {
        tr.middleCols(at, e->hist_train.cols()) = e->hist_train;
        te.middleCols(at, e->hist_test.cols()) = e->hist_test;
        at += e->hist_train.cols();
      }
      add_kernel(set, KernelSpec::dc_int(widths), names, tr, te);
      break;
    }
    case ClassifierKind::kSimpleMkl:
    case ClassifierKind::kMkBoost:
      for (const auto& e : prepared.channels) {
        if (!e.informative) continue;
        for (const auto& kind_name : config.kernel_bank) {
          switch (parse_kernel_kind(kind_name)) {
            case KernelKind::kLinear: add_kernel(set, KernelSpec::linear(), {e.name}, e.train, e.test); break;
            case KernelKind::kPolynomial:
              add_kernel(set, KernelSpec::polynomial(config.poly_degree, config.poly_bias), {e.name}, e.train, e.test);
              break;
            case KernelKind::kRbf: add_kernel(set, KernelSpec::rbf(rbf_gamma(e.train)), {e.name}, e.train, e.test); break;
            case KernelKind::kDcInt:
              if (e.histogram)
                add_kernel(set, KernelSpec::dc_int({static_cast<std::size_t>(e.hist_train.cols())}), {e.name},
                           e.hist_train, e.hist_test);
              break;
          }
        }
      }
      if (set.train.empty()) throw ConfigError("kernel bank produced no kernels for the enabled channels");
      break;
  }
  return set;
}

ClassifierModel fit_classifier(const ExperimentConfig& config, std::span<const GramMatrix> grams,
                               std::span<const int> labels, int num_classes, double c, std::uint64_t seed) {
  ClassifierModel m;
  m.kind = config.classifier;
  m.c = c;
  switch (config.classifier) {
    case ClassifierKind::kSvmPoly:
    case ClassifierKind::kSvmHist:
      if (grams.size() != 1) throw DataError("single-kernel SVM expects exactly one Gram matrix");
      m.svm = train_one_vs_rest(grams.front().values, labels, num_classes, c);
      break;
    case ClassifierKind::kSimpleMkl: m.mkl = train_mkl_one_vs_rest(grams, labels, num_classes, c); break;
    case ClassifierKind::kMkBoost: {
      BoostOptions o;
      o.rounds = config.boost_rounds;
      o.sample_fraction = config.boost_fraction;
      m.boost = train_mkboost_one_vs_rest(grams, labels, num_classes, c, seed, o);
      break;
    }
  }
  return m;
}

std::vector<int> predict_classifier(const ClassifierModel& model, const std::vector<Eigen::MatrixXd>& cross) {
  if (cross.empty()) throw DataError("no kernel rows to predict from");
  const Eigen::Index q = cross.front().rows();
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(q));
  for (Eigen::Index i = 0; i < q; ++i) {
    std::vector<Eigen::VectorXd> rows;
    for (const auto& k : cross) rows.push_back(k.row(i).transpose());
    switch (model.kind) {
      case ClassifierKind::kSvmPoly:
      case ClassifierKind::kSvmHist:
        out.push_back(predict_multiclass(model.svm, std::vector<Eigen::VectorXd>(model.svm.per_class.size(), rows.front())));
        break;
      case ClassifierKind::kSimpleMkl: out.push_back(predict_mkl_multiclass(model.mkl, rows)); break;
      case ClassifierKind::kMkBoost: out.push_back(predict_mkboost_multiclass(model.boost, rows)); break;
    }
  }
  return out;
}

double select_c(const ExperimentConfig& config, std::span<const GramMatrix> grams, std::span<const int> labels,
                int num_classes, std::uint64_t seed) {
  std::vector<double> grid = config.c_grid;
  std::sort(grid.begin(), grid.end());
  if (grid.size() == 1) return grid.front();

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
  int folds = config.cv_folds;
  for (const auto& v : by_class) folds = std::min<int>(folds, static_cast<int>(v.size()));
  if (folds < 2) return grid.front();

  Rng rng(seed);
  std::vector<int> fold_of(labels.size(), 0);
  for (auto& v : by_class) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
    for (std::size_t i = 0; i < v.size(); ++i) fold_of[static_cast<std::size_t>(v[i])] = static_cast<int>(i % folds);
  }

  double best_c = grid.front();
  int best_correct = -1;
  for (double c : grid) {
    int correct = 0;
    for (int f = 0; f < folds; ++f) {
      std::vector<int> tr, va;
      for (std::size_t i = 0; i < labels.size(); ++i) (fold_of[i] == f ? va : tr).push_back(static_cast<int>(i));
      std::vector<GramMatrix> sub;
      std::vector<Eigen::MatrixXd> cross;
      for (const auto& g : grams) {
        GramMatrix s = g;
        s.values = select(g.values, tr, tr);
        sub.push_back(std::move(s));
        cross.push_back(select(g.values, va, tr));
      }
      std::vector<int> sub_labels;
      for (int i : tr) sub_labels.push_back(labels[static_cast<std::size_t>(i)]);
      try {
        const ClassifierModel m =
            fit_classifier(config, sub, sub_labels, num_classes, c, derive_seed(seed, static_cast<std::uint64_t>(f)));
        const std::vector<int> pred = predict_classifier(m, cross);
        for (std::size_t i = 0; i < va.size(); ++i)
          if (pred[i] == labels[static_cast<std::size_t>(va[i])]) ++correct;
      } catch (const SolverError&) {
        // A fold the solver cannot handle scores zero for this C.
      }
    }
    if (correct > best_correct) {
      best_correct = correct;
      best_c = c;
    }
  }
  return best_c;
}

SelectionHistogram model_selection(const ClassifierModel& model, const std::vector<KernelDescriptor>& bank) {
  switch (model.kind) {
    case ClassifierKind::kMkBoost: return selection_histogram(model.boost.per_class, bank);
    default: break;
  }
  SelectionHistogram h;
  for (const auto& k : bank) {
    h.kernel_kinds.emplace(k.kind, 0);
    for (const auto& ch : k.channels) h.channels.emplace(ch, 0);
  }
  auto count = [&](std::size_t m) {
    ++h.kernel_kinds[bank[m].kind];
    for (const auto& ch : bank[m].channels) ++h.channels[ch];
  };
  if (model.kind == ClassifierKind::kSimpleMkl) {
    for (const auto& pc : model.mkl.per_class)
      for (int m : selected_kernels(pc.weights, kSelectedWeight)) count(static_cast<std::size_t>(m));
  } else {
    for (std::size_t c = 0; c < model.svm.per_class.size(); ++c) count(0);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Trials

namespace {

void put_dual(FeatureTable& t, const std::string& prefix, const DualSolution& s, const std::string& id) {
  put_vector(t, prefix + ":alpha", s.alpha, id);
  put_vector(t, prefix + ":bias", Eigen::VectorXd::Constant(1, s.bias), id);
}

void put_classifier(FeatureTable& t, const ClassifierModel& m, const std::vector<KernelDescriptor>& bank) {
  const std::string prefix = std::string(channels::kModelPrefix) + classifier_name(m.kind);
  auto& b = t.add_channel(std::string(channels::kModelPrefix) + "bank", 0);
  for (const auto& k : bank) b.append(k.label(), {});
  put_vector(t, prefix + ":C", Eigen::VectorXd::Constant(1, m.c), "C");
  for (std::size_t c = 0; c < m.svm.per_class.size(); ++c) put_dual(t, prefix, m.svm.per_class[c], "class" + std::to_string(c));
  for (std::size_t c = 0; c < m.mkl.per_class.size(); ++c) {
    const std::string id = "class" + std::to_string(c);
    put_vector(t, prefix + ":weights", m.mkl.per_class[c].weights, id);
    put_dual(t, prefix, m.mkl.per_class[c].inner, id);
  }
  for (std::size_t c = 0; c < m.boost.per_class.size(); ++c) {
    const std::string id = "class" + std::to_string(c);
    for (const auto& r : m.boost.per_class[c].rounds) {
      put_vector(t, prefix + ":round", Eigen::Vector3d(r.kernel, r.weight, r.error), id);
      Eigen::VectorXd sample(static_cast<Eigen::Index>(r.sample.size()));
      for (std::size_t i = 0; i < r.sample.size(); ++i) sample(static_cast<Eigen::Index>(i)) = r.sample[i];
      put_vector(t, prefix + ":sample", sample, id);
      put_dual(t, prefix, r.weak, id);
    }
  }
}

}  // namespace

int worker_count() {
  if (const char* env = std::getenv("EGOFUSE_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

TrialResult run_single_trial(const ExperimentConfig& config, const DatasetManifest& manifest,
                             const FeatureTable& table, int trial, std::vector<AccessEntry>* access,
                             FeatureTable* models) {
  TrialResult r;
  r.trial = trial;
  PreparedTrial p = prepare_trial(config, manifest, table, trial);
  r.split = p.split;
  r.test_labels = p.test_labels;
  auto log = [&](const std::string& phase, const std::vector<std::string>& ids) {
    for (const auto& id : ids) p.access.push_back({trial, phase, id});
  };
  // Kernel statistics (RBF widths, normalization diagonals) come from the
  // training rows; test rows are only projected.
  log("fit:kernels", p.split.train_ids);
  log("apply:kernels", p.split.test_ids);
  const KernelSet ks = build_kernels(config, p);
  const int nc = manifest.num_classes();
  log("fit:cv", p.split.train_ids);
  r.c = select_c(config, ks.train, p.train_labels, nc, derive_seed(p.seed, kCrossValidation));
  log("fit:classifier", p.split.train_ids);
  const ClassifierModel model = fit_classifier(config, ks.train, p.train_labels, nc, r.c, derive_seed(p.seed, kBoost));
  log("apply:classifier", p.split.test_ids);
  r.predictions = predict_classifier(model, ks.test);
  r.confusion = confusion(p.test_labels, r.predictions, nc);
  r.metrics = evaluate(r.confusion);
  r.selection = model_selection(model, ks.descriptors);
  r.ok = true;
  if (access) *access = std::move(p.access);
  if (models) {
    *models = std::move(p.models);
    put_classifier(*models, model, ks.descriptors);
  }
  return r;
}

RunResult run_trials(const ExperimentConfig& config, const DatasetManifest& manifest, const FeatureTable& table,
                     const fs::path& model_dir) {
  config.validate();
  validate_manifest(manifest);
  for (const auto& c : config.channels)
    if (!table.has(raw_channel_name(c)) && !(c == kChannelAudio && !manifest.has_audio()))
      throw DataError("feature table lacks channel " + std::string(raw_channel_name(c)));
  table.validate_against(manifest);
  if (!model_dir.empty()) fs::create_directories(model_dir);

  RunResult out;
  out.config = config;
  out.class_names = manifest.class_names;
  out.trials.resize(static_cast<std::size_t>(config.trials));
  std::vector<std::vector<AccessEntry>> access(static_cast<std::size_t>(config.trials));

  detail::parallel_for(config.trials, worker_count(), [&](int t) {
    auto& slot = out.trials[static_cast<std::size_t>(t)];
    try {
      FeatureTable models;
      slot = run_single_trial(config, manifest, table, t, &access[static_cast<std::size_t>(t)],
                              model_dir.empty() ? nullptr : &models);
      if (!model_dir.empty()) {
        char name[32];
        std::snprintf(name, sizeof name, "trial_%03d.egf", t);
        write_feature_table(models, model_dir / name);
      }
    } catch (const std::exception& e) {
      slot = TrialResult{};
      slot.trial = t;
      slot.ok = false;
      slot.error = e.what();
    }
  });

  std::vector<MetricsReport> ok;
  for (std::size_t t = 0; t < out.trials.size(); ++t) {
    auto& tr = out.trials[t];
    if (tr.ok) ok.push_back(tr.metrics);
    else ++out.failed;
    out.access.insert(out.access.end(), access[t].begin(), access[t].end());
  }
  if (!ok.empty()) out.aggregate = mean_report(ok);
  return out;
}

}  // namespace egofuse
