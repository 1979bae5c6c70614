#pragma once

#include <cstdint>

#include "wavelatent/dataset.hpp"

namespace wavelatent {

/// Version of the synthetic tile recipe. Any change to the generator below
/// changes acceptance runs and must bump this.
inline constexpr int kSynthVersion = 1;

/// Seeded satellite-like tiles, quantised to the byte grid so they survive a
/// PPM round trip exactly. Each tile layers, in [0, 1] reflectance:
///   - a terrain base colour (vegetation/soil/urban/water palette, +-0.05
///     jitter) with a linear gradient of up to +-0.15 per channel and a
///     0.5-1.5 cycle-per-tile undulation of amplitude 0.06;
///   - 1-3 rectangular "fields" with a tint shift and an oriented sinusoidal
///     row texture (period 2.5-7 px, amplitude 0.05-0.12);
///   - 0-1 straight road, 2 px wide, grey 0.45-0.6;
///   - 2-8 "buildings": 3-10 px rectangles with a bright or dark roof and a
///     one-pixel shadow edge;
///   - per-sample Gaussian speckle with sigma 0.035.
/// Tile i depends only on (seed, i, size).
Dataset synth_tiles(int n, int size, std::uint64_t seed);

}  // namespace wavelatent
