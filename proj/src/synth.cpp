#include "egofuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "egofuse/error.hpp"
#include "egofuse/media_io.hpp"
#include "egofuse/rng.hpp"

namespace egofuse {

namespace {

// Corpus texture: four smooth oriented sinusoids (periods 12-40 px) plus a
// fine near-horizontal one (6 px, about three frames of travel at 2 px/frame,
// the cuboid detector's temporal band). Frequencies are shared by the whole
// corpus; each segment draws its own phases and amplitudes.
struct WaveShape {
  double kx, ky, amp;
};

std::vector<WaveShape> corpus_waves(Rng& rng) {
  std::vector<WaveShape> out;
  auto add = [&](double period, double angle, double amp) {
    const double k = 2.0 * std::numbers::pi / period;
    out.push_back({k * std::cos(angle), k * std::sin(angle), amp});
  };
  for (int i = 0; i < 4; ++i) add(12.0 + 28.0 * uniform01(rng), 2.0 * std::numbers::pi * uniform01(rng), 24.0);
  add(6.0, (uniform01(rng) - 0.5) * (20.0 * std::numbers::pi / 180.0), 13.0);
  return out;
}

struct Texture {
  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<Wave> waves;

  Texture(const std::vector<WaveShape>& shapes, Rng& rng) {
    for (const auto& w : shapes)
      waves.push_back({w.kx, w.ky, 2.0 * std::numbers::pi * uniform01(rng), w.amp * (0.75 + 0.5 * uniform01(rng))});
  }

  double operator()(double x, double y) const {
    double v = 128.0;
    for (const auto& w : waves) v += w.amp * std::sin(w.kx * x + w.ky * y + w.phase);
    return v;
  }
};

Image render(const Texture& tex, int w, int h, double shift_x, double zoom) {
  Image img(h, w);
  const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double sx = (x - cx) / zoom + cx - shift_x;
      const double sy = (y - cy) / zoom + cy;
      img(y, x) = static_cast<float>(std::clamp(std::round(tex(sx, sy)), 0.0, 255.0));
    }
  return img;
}

std::vector<double> make_audio(int cls, const SynthOptions& o, Rng& rng) {
  const std::size_t n = static_cast<std::size_t>(std::lround(o.audio_seconds * o.audio_rate));
  std::vector<double> s(n, 0.0);
  const double amp = 0.2 + 0.2 * uniform01(rng);
  const double phase = 2.0 * std::numbers::pi * uniform01(rng);
  if (cls == 0 || cls == 1) {
    const double f = cls == 0 ? 440.0 : 880.0;
    for (std::size_t i = 0; i < n; ++i) s[i] = amp * std::sin(2.0 * std::numbers::pi * f * i / o.audio_rate + phase);
  } else if (cls == 2) {
    for (auto& v : s) v = amp * (2.0 * uniform01(rng) - 1.0);
  }
  return s;
}

}  // namespace

DatasetManifest synth_dataset(std::uint64_t seed, const std::filesystem::path& out_dir, const SynthOptions& o) {
  if (o.segments_per_class < 2 || o.frames < 2 || o.width < 16 || o.height < 16)
    throw ConfigError("synthetic corpus options out of range");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  DatasetManifest m;
  m.class_names = {"pan_right", "pan_left", "zoom", "static"};
  Rng corpus_rng(derive_seed(seed, ~0ULL));
  const std::vector<WaveShape> shapes = corpus_waves(corpus_rng);
  for (int cls = 0; cls < 4; ++cls)
    for (int k = 0; k < o.segments_per_class; ++k) {
      const int index = cls * o.segments_per_class + k;
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
      char id[32];
      std::snprintf(id, sizeof id, "c%d_s%02d", cls, k);
      const fs::path rel_frames = fs::path("frames") / id;
      fs::create_directories(out_dir / rel_frames);
      const double speed = 1.8 + 0.4 * uniform01(rng);           // px / frame
      const double zoom_rate = 0.008 + 0.004 * uniform01(rng);  // per frame
      const Texture tex(shapes, rng);
      for (int t = 0; t < o.frames; ++t) {
        double shift = 0.0, zoom = 1.0;
        if (cls == 0) shift = speed * t;
        if (cls == 1) shift = -speed * t;
        if (cls == 2) zoom = 1.0 + zoom_rate * t;
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04d.pgm", t);
        write_pgm(render(tex, o.width, o.height, shift, zoom), out_dir / rel_frames / name);
      }
      const fs::path rel_audio = fs::path("audio") / (std::string(id) + ".wav");
      fs::create_directories(out_dir / "audio");
      write_wav(AudioClip{o.audio_rate, make_audio(cls, o, rng)}, out_dir / rel_audio);

      SegmentRecord s;
      s.id = id;
      s.class_label = cls;
      s.frame_dir = rel_frames;
      s.frame_rate = o.frame_rate;
      s.audio_path = rel_audio;
      s.duration_frames = o.frames;
      m.segments.push_back(std::move(s));
    }
  write_manifest(m, out_dir / "manifest.tsv");
  return load_manifest(out_dir / "manifest.tsv");
}

}  // namespace egofuse
