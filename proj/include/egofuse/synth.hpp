#pragma once

#include <cstdint>
#include <filesystem>

#include "egofuse/data_model.hpp"

namespace egofuse {

struct SynthOptions {
  int segments_per_class = 12;
  int frames = 45;
  int width = 160;
  int height = 120;
  double frame_rate = 30.0;
  double audio_seconds = 1.5;
  int audio_rate = 16000;
};

// Four-class corpus: (0) rightward-translating texture with a 440 Hz tone,
// (1) leftward translation with 880 Hz, (2) radial zoom with white noise,
// (3) static texture with silence. Writes PGM frames, WAV audio and
// <out_dir>/manifest.tsv, and returns the loaded manifest.
DatasetManifest synth_dataset(std::uint64_t seed, const std::filesystem::path& out_dir,
                              const SynthOptions& options = {});

}  // namespace egofuse
