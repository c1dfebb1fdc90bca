#include "gauntlet/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "gauntlet/rng.hpp"

namespace gauntlet::data {

namespace {

constexpr uint32_t kImageMagic = 0x00000803;
constexpr uint32_t kLabelMagic = 0x00000801;

uint32_t read_be32(std::istream& in, const std::string& path, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw IdxFormatError("truncated IDX file (" + std::string(what) + "): " + path);
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

void write_be32(std::ostream& out, uint32_t v) {
    const unsigned char b[4] = {
        static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

LabelledSet load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IdxFormatError("cannot open IDX image file: " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw IdxFormatError("cannot open IDX label file: " + labels_path);

    const uint32_t img_magic = read_be32(img, images_path, "image magic");
    if (img_magic != kImageMagic)
        throw IdxFormatError("bad magic in IDX image file (expected 0x00000803): " +
                             images_path);
    const uint32_t lab_magic = read_be32(lab, labels_path, "label magic");
    if (lab_magic != kLabelMagic)
        throw IdxFormatError("bad magic in IDX label file (expected 0x00000801): " +
                             labels_path);

    const uint32_t n_img = read_be32(img, images_path, "image count");
    const uint32_t rows = read_be32(img, images_path, "rows");
    const uint32_t cols = read_be32(img, images_path, "cols");
    const uint32_t n_lab = read_be32(lab, labels_path, "label count");
    if (n_img != n_lab)
        throw IdxFormatError("count mismatch between IDX files: " +
                             std::to_string(n_img) + " images vs " +
                             std::to_string(n_lab) + " labels");

    LabelledSet set;
    set.images.reserve(n_img);
    set.labels.resize(n_img);
    std::vector<unsigned char> buf(static_cast<size_t>(rows) * cols);
    for (uint32_t i = 0; i < n_img; ++i) {
        img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!img)
            throw IdxFormatError("truncated IDX file (pixel data): " + images_path);
        Tensor t({static_cast<int>(rows), static_cast<int>(cols), 1});
        for (size_t p = 0; p < buf.size(); ++p)
            t.data[p] = static_cast<float>(buf[p]) / 255.0f;
        set.images.push_back(std::move(t));
    }
    lab.read(reinterpret_cast<char*>(set.labels.data()),
             static_cast<std::streamsize>(set.labels.size()));
    if (!lab) throw IdxFormatError("truncated IDX file (label data): " + labels_path);
    for (uint8_t l : set.labels)
        if (l > 9) throw IdxFormatError("label out of range 0..9 in " + labels_path);
    return set;
}

void write_idx(const LabelledSet& set, const std::string& images_path,
               const std::string& labels_path) {
    if (set.images.size() != set.labels.size())
        throw std::invalid_argument("write_idx: image/label count mismatch");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("cannot write IDX image file: " + images_path);
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("cannot write IDX label file: " + labels_path);

    const int rows = set.images.empty() ? 28 : set.images[0].dim(0);
    const int cols = set.images.empty() ? 28 : set.images[0].dim(1);
    write_be32(img, kImageMagic);
    write_be32(img, static_cast<uint32_t>(set.images.size()));
    write_be32(img, static_cast<uint32_t>(rows));
    write_be32(img, static_cast<uint32_t>(cols));
    write_be32(lab, kLabelMagic);
    write_be32(lab, static_cast<uint32_t>(set.labels.size()));

    std::vector<unsigned char> buf;
    for (const auto& t : set.images) {
        buf.resize(static_cast<size_t>(t.numel()));
        for (size_t p = 0; p < buf.size(); ++p) {
            const float v = t.data[p];
            const int byte = static_cast<int>(std::lround(v * 255.0f));
            buf[p] = static_cast<unsigned char>(byte < 0 ? 0 : (byte > 255 ? 255 : byte));
        }
        img.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
    }
    lab.write(reinterpret_cast<const char*>(set.labels.data()),
              static_cast<std::streamsize>(set.labels.size()));
}

std::pair<LabelledSet, LabelledSet> split_val_test(const LabelledSet& test_set,
                                                   uint64_t seed) {
    const size_t n = test_set.size();
    if (n < 2) throw std::invalid_argument("split_val_test: need at least 2 examples");
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    const size_t n_val = (n + 1) / 2;
    LabelledSet val, test;
    for (size_t i = 0; i < n; ++i) {
        auto& dst = i < n_val ? val : test;
        dst.images.push_back(test_set.images[order[i]]);
        dst.labels.push_back(test_set.labels[order[i]]);
    }
    return {std::move(val), std::move(test)};
}

LabelledSet take_subset(const LabelledSet& set, size_t n, uint64_t seed) {
    if (n > set.size())
        throw std::invalid_argument("take_subset: requested " + std::to_string(n) +
                                    " of " + std::to_string(set.size()) + " examples");
    std::vector<size_t> order(set.size());
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    LabelledSet out;
    out.images.reserve(n);
    out.labels.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        out.images.push_back(set.images[order[i]]);
        out.labels.push_back(set.labels[order[i]]);
    }
    return out;
}

}  // namespace gauntlet::data
