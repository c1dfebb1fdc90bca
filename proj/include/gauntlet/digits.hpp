#pragma once

#include <cstdint>

#include "gauntlet/dataset.hpp"

namespace gauntlet::data {

// Procedurally rendered handwritten-style digits: per-class stroke skeletons
// drawn with randomized affine pose, stroke width, vertex jitter, intensity
// and pixel noise. Deterministic for a given (count, seed); disjoint seeds
// give independent sets. Written out via write_idx, these files exercise the
// same loader path as any other IDX dataset.
LabelledSet synth_digits(size_t count, uint64_t seed);

}  // namespace gauntlet::data
