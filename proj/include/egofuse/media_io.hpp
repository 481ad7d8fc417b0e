#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

namespace egofuse {

// Grayscale frame, indexed (row = y, col = x), intensities in [0, 255].
using Image = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Binary 8-bit PGM ("P5").
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const Image& image, const std::filesystem::path& path);

// Reads every PGM in `dir` in lexicographic filename order.
std::vector<Image> read_frames(const std::filesystem::path& dir);

struct AudioClip {
  int sample_rate = 0;
  std::vector<double> samples;  // mono, full scale = 1.0
};

// RIFF WAV, 16-bit PCM, mono.
AudioClip read_wav(const std::filesystem::path& path);
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

// Band-limited resampling with a Kaiser-windowed sinc (beta 8.6, 32 zero
// crossings per side at the narrower of the two Nyquist rates). The filter is
// linear-phase, so no group delay is introduced.
std::vector<double> resample(const std::vector<double>& samples, int from_rate, int to_rate);

}  // namespace egofuse
