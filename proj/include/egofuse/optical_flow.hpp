#pragma once

#include <filesystem>
#include <vector>

#include "egofuse/media_io.hpp"

namespace egofuse {

// Dense displacement field: a pixel at (x, y) in the first frame moves to
// (x + u, y + v) in the second.
struct FlowField {
  Image u;
  Image v;

  int width() const { return static_cast<int>(u.cols()); }
  int height() const { return static_cast<int>(u.rows()); }
  static FlowField zeros(int width, int height);
};

struct FlowParams {
  int pyramid_levels = 3;
  double pyramid_scale = 0.5;
  int poly_window = 5;     // neighbourhood of the quadratic fit (odd)
  double poly_sigma = 1.1;
  int iterations = 3;
  int average_window = 15;  // box window over which the normal equations are pooled
  double regularization = 1e-3;

  void validate() const;
};

// Two-frame Farneback flow: quadratic polynomial expansion of both frames,
// coarse-to-fine displacement estimation from the expansion coefficients.
FlowField farneback_flow(const Image& prev, const Image& next, const FlowParams& params = {});

// Flow between every consecutive frame pair (frames.size() - 1 fields).
std::vector<FlowField> flow_sequence(const std::vector<Image>& frames, const FlowParams& params = {});

// Debug / precomputed flow format: a sequence of records, each
// "FLW1", u32 width, u32 height, then u and v as little-endian float32.
void write_flow_dump(const std::vector<FlowField>& flows, const std::filesystem::path& path);
std::vector<FlowField> read_flow_dump(const std::filesystem::path& path);

}  // namespace egofuse
