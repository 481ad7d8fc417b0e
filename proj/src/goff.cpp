#include <algorithm>
#include <cmath>

#include "egofuse/error.hpp"
#include "egofuse/spectral.hpp"
#include "egofuse/video_features.hpp"

namespace egofuse {

std::vector<double> GoffVector::concat() const {
  std::vector<double> out;
  out.reserve(kDim);
  out.insert(out.end(), mmhf.begin(), mmhf.end());
  out.insert(out.end(), mdhf.begin(), mdhf.end());
  out.insert(out.end(), mdhsf.begin(), mdhsf.end());
  out.insert(out.end(), ftmaf.begin(), ftmaf.end());
  out.insert(out.end(), ftmpf.begin(), ftmpf.end());
  return out;
}

std::vector<double> goff_magnitude_edges(const GoffParams& params) {
  // 15 edges e_0 = stationary .. e_14 = max_magnitude; bin 0 is [0, e_0),
  // bin k is [e_{k-1}, e_k) for k = 1..13 and bin 14 is [e_13, inf).
  constexpr int kEdges = 15;
  std::vector<double> edges(kEdges);
  const double ratio = std::pow(params.max_magnitude / params.stationary, 1.0 / (kEdges - 1));
  for (int i = 0; i < kEdges; ++i) edges[static_cast<std::size_t>(i)] = params.stationary * std::pow(ratio, i);
  edges.resize(GoffVector::kMagnitudeBins - 1);
  return edges;
}

std::vector<std::array<double, 2>> grid_cell_flow(const FlowField& flow, int grid_x, int grid_y) {
  const int w = flow.width(), h = flow.height();
  if (grid_x < 1 || grid_y < 1 || grid_x > w || grid_y > h) throw ConfigError("invalid GOFF grid");
  std::vector<std::array<double, 2>> cells(static_cast<std::size_t>(grid_x * grid_y));
  for (int gy = 0; gy < grid_y; ++gy) {
    const int y0 = gy * h / grid_y, y1 = (gy + 1) * h / grid_y;
    for (int gx = 0; gx < grid_x; ++gx) {
      const int x0 = gx * w / grid_x, x1 = (gx + 1) * w / grid_x;
      double su = 0.0, sv = 0.0;
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
          su += flow.u(y, x);
          sv += flow.v(y, x);
        }
      const double n = static_cast<double>((y1 - y0) * (x1 - x0));
      cells[static_cast<std::size_t>(gy * grid_x + gx)] = {su / n, sv / n};
    }
  }
  return cells;
}

int direction_bin(double u, double v) {
  double deg = std::atan2(v, u) * 180.0 / M_PI;
  if (deg < 0.0) deg += 360.0;
  return std::min(35, static_cast<int>(std::floor(deg / 10.0)));
}

GoffVector compute_goff(const std::vector<FlowField>& flows, const GoffParams& params) {
  if (flows.empty()) throw DataError("empty flow sequence");
  const auto edges = goff_magnitude_edges(params);
  constexpr std::size_t kDir = GoffVector::kDirectionBins;
  const std::size_t frames = flows.size();

  GoffVector g;
  std::vector<std::array<double, kDir>> per_frame_dir(frames);
  std::vector<double> dominant(frames, 0.0), spread(frames, 0.0);
  double moving_total = 0.0, cells_total = 0.0;

  for (std::size_t f = 0; f < frames; ++f) {
    const auto cells = grid_cell_flow(flows[f], params.grid_x, params.grid_y);
    std::array<double, kDir> dir_counts{};
    std::vector<double> mags;
    mags.reserve(cells.size());
    for (const auto& [u, v] : cells) {
      const double m = std::hypot(u, v);
      mags.push_back(m);
      const auto bin = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), m) - edges.begin());
      g.mmhf[bin] += 1.0;
      cells_total += 1.0;
      if (m >= params.stationary) {
        dir_counts[static_cast<std::size_t>(direction_bin(u, v))] += 1.0;
        moving_total += 1.0;
      }
    }
    for (std::size_t b = 0; b < kDir; ++b) {
      g.mdhf[b] += dir_counts[b];
      per_frame_dir[f][b] = dir_counts[b] / static_cast<double>(cells.size());
    }
    // Dominant direction as bin index + 1; 0 marks a frame without motion.
    const auto best = std::max_element(dir_counts.begin(), dir_counts.end());
    dominant[f] = *best > 0.0 ? static_cast<double>(best - dir_counts.begin()) + 1.0 : 0.0;

    double mean = 0.0;
    for (double m : mags) mean += m;
    mean /= static_cast<double>(mags.size());
    double var = 0.0;
    for (double m : mags) var += (m - mean) * (m - mean);
    spread[f] = std::sqrt(var / static_cast<double>(mags.size()));
  }

  for (auto& h : g.mmhf) h /= cells_total;
  if (moving_total > 0.0)
    for (auto& h : g.mdhf) h /= moving_total;

  for (std::size_t b = 0; b < kDir; ++b) {
    double mean = 0.0;
    for (std::size_t f = 0; f < frames; ++f) mean += per_frame_dir[f][b];
    mean /= static_cast<double>(frames);
    double var = 0.0;
    for (std::size_t f = 0; f < frames; ++f) var += (per_frame_dir[f][b] - mean) * (per_frame_dir[f][b] - mean);
    g.mdhsf[b] = std::sqrt(var / static_cast<double>(frames));
  }

  const auto ftmaf = dft_magnitudes(dominant, GoffVector::kFrequencyBands);
  const auto ftmpf = dft_magnitudes(spread, GoffVector::kFrequencyBands);
  std::copy(ftmaf.begin(), ftmaf.end(), g.ftmaf.begin());
  std::copy(ftmpf.begin(), ftmpf.end(), g.ftmpf.begin());
  return g;
}

}  // namespace egofuse
