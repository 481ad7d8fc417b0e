#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace egofuse {

// |X_k| / N for k = 0 .. count-1 of the length-N DFT of `signal`. Components
// above N/2 do not exist for a real signal of this length and are returned
// as 0, so the output length is always `count`.
std::vector<double> dft_magnitudes(std::span<const double> signal, std::size_t count);

}  // namespace egofuse
