#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gauntlet/tensor.hpp"

namespace gauntlet::transforms {

enum class Kind {
    // reversible: exact pixel permutations
    shift_up, shift_down, shift_left, shift_right,
    shift_top_left, shift_top_right, shift_bottom_left, shift_bottom_right,
    flip_horizontal, flip_vertical, flip_both,
    rotate_90, rotate_180, rotate_270,
    // irreversible
    gaussian_noise, salt_pepper_noise, median_filter, gaussian_blur,
    erosion, dilation, quantize_4, quantize_8, entropy_normalize,
    identity,
};

struct TransformSpec {
    std::string id;
    Kind kind = Kind::identity;
    int offset = 3;        // shifts: circular offset in pixels (>= 1)
    float sigma = 0.0f;    // gaussian noise/blur
    float density = 0.0f;  // salt & pepper
    int ksize = 3;         // filter / morphology window, odd
    uint64_t seed = 0;     // noise derandomization
    bool reversible = false;
};

// Applies the transformation; output has the input shape with values in
// [0,1]. Noise kinds draw from a PRNG seeded from (spec.seed, content hash),
// so repeated calls on the same image agree.
Tensor apply(const TransformSpec& spec, const Tensor& image);

// Exact inverse, defined only for the 14 reversible kinds:
// apply(spec, reset(spec, y)) == y and reset(spec, apply(spec, x)) == x,
// pixel for pixel. Throws on irreversible specs.
Tensor reset(const TransformSpec& spec, const Tensor& image);

// Maps a transformed-domain image back to the original space: exact inverse
// for reversible specs, no-op for identity, error otherwise.
Tensor to_original(const TransformSpec& spec, const Tensor& image);

// The 14 reversible specs in fixed (alphabetical-id) order; with
// include_irreversible, the 14-spec irreversible subset is appended.
std::vector<TransformSpec> registry(bool include_irreversible);

TransformSpec identity_spec();
TransformSpec spec_by_id(const std::string& id);

// apply() invocation counter, for tests that assert how many member
// transforms a prediction path consumed.
uint64_t apply_call_count();
void reset_apply_call_count();

}  // namespace gauntlet::transforms
