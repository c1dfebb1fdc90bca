#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gauntlet/tensor.hpp"

namespace gauntlet::data {

// Images are 28x28x1 tensors with pixels in [0,1]; labels are class ids 0..9.
struct LabelledSet {
    std::vector<Tensor> images;
    std::vector<uint8_t> labels;

    size_t size() const { return images.size(); }
    bool empty() const { return images.empty(); }
};

struct IdxFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// IDX readers, bit-exact per the format: 4-byte big-endian magic
// (0x00000803 images / 0x00000801 labels), big-endian u32 dimension sizes,
// then raw bytes. Pixels are normalized as byte/255.
LabelledSet load_idx(const std::string& images_path, const std::string& labels_path);

// Writes a LabelledSet back out in IDX format (pixel = round(p*255)).
void write_idx(const LabelledSet& set, const std::string& images_path,
               const std::string& labels_path);

// Seeded shuffle then halve: validation gets ceil(n/2), test gets floor(n/2).
std::pair<LabelledSet, LabelledSet> split_val_test(const LabelledSet& test_set,
                                                   uint64_t seed);

// Seeded shuffle, first n retained. Throws if n exceeds the set size.
LabelledSet take_subset(const LabelledSet& set, size_t n, uint64_t seed);

}  // namespace gauntlet::data
