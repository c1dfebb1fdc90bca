#include "gauntlet/transforms.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "gauntlet/rng.hpp"

namespace gauntlet::transforms {

namespace {

std::atomic<uint64_t> g_apply_calls{0};

void check_image(const Tensor& img) {
    if (img.rank() != 3 || img.dim(2) != 1)
        throw std::invalid_argument("transform expects an HxWx1 image, got " +
                                    img.shape_str());
}

int mod(int a, int n) { return ((a % n) + n) % n; }

// out(y,x) = in((y+dy) mod H, (x+dx) mod W); circular, so shifts stay exact
// pixel permutations with an exact inverse.
Tensor circular_shift(const Tensor& in, int dy, int dx) {
    const int h = in.dim(0), w = in.dim(1);
    Tensor out({h, w, 1});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(y, x, 0) = in.at(mod(y + dy, h), mod(x + dx, w), 0);
    return out;
}

Tensor flip_h(const Tensor& in) {
    const int h = in.dim(0), w = in.dim(1);
    Tensor out({h, w, 1});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(y, x, 0) = in.at(y, w - 1 - x, 0);
    return out;
}

Tensor flip_v(const Tensor& in) {
    const int h = in.dim(0), w = in.dim(1);
    Tensor out({h, w, 1});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(y, x, 0) = in.at(h - 1 - y, x, 0);
    return out;
}

// counter-clockwise quarter turn; requires a square image
Tensor rot90(const Tensor& in) {
    const int h = in.dim(0), w = in.dim(1);
    if (h != w) throw std::invalid_argument("rotation requires a square image");
    Tensor out({h, w, 1});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(y, x, 0) = in.at(x, w - 1 - y, 0);
    return out;
}

Tensor rot180(const Tensor& in) {
    const int h = in.dim(0), w = in.dim(1);
    Tensor out({h, w, 1});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(y, x, 0) = in.at(h - 1 - y, w - 1 - x, 0);
    return out;
}

Tensor rot270(const Tensor& in) {
    const int h = in.dim(0), w = in.dim(1);
    if (h != w) throw std::invalid_argument("rotation requires a square image");
    Tensor out({h, w, 1});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(y, x, 0) = in.at(h - 1 - x, y, 0);
    return out;
}

void clip01(Tensor& t) {
    for (auto& v : t.data) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
}

Rng noise_rng(const TransformSpec& spec, const Tensor& img) {
    const uint64_t content = fnv1a(img.data.data(), img.data.size() * sizeof(float));
    return Rng(mix_seed(spec.seed, content));
}

Tensor add_gaussian_noise(const TransformSpec& spec, const Tensor& in) {
    Tensor out = in;
    Rng rng = noise_rng(spec, in);
    for (auto& v : out.data) v += static_cast<float>(spec.sigma * rng.normal());
    clip01(out);
    return out;
}

Tensor add_salt_pepper(const TransformSpec& spec, const Tensor& in) {
    Tensor out = in;
    Rng rng = noise_rng(spec, in);
    const double half = spec.density / 2.0;
    for (auto& v : out.data) {
        const double u = rng.uniform();
        if (u < half)
            v = 0.0f;
        else if (u < spec.density)
            v = 1.0f;
    }
    return out;
}

template <typename Reduce>
Tensor window_reduce(const Tensor& in, int k, Reduce reduce) {
    const int h = in.dim(0), w = in.dim(1), r = k / 2;
    Tensor out({h, w, 1});
    std::vector<float> vals;
    vals.reserve(static_cast<size_t>(k) * k);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            vals.clear();
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int yy = std::clamp(y + dy, 0, h - 1);
                    const int xx = std::clamp(x + dx, 0, w - 1);
                    vals.push_back(in.at(yy, xx, 0));
                }
            out.at(y, x, 0) = reduce(vals);
        }
    }
    return out;
}

Tensor median_filter(const Tensor& in, int k) {
    return window_reduce(in, k, [](std::vector<float>& v) {
        std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
        return v[v.size() / 2];
    });
}

Tensor erode(const Tensor& in, int k) {
    return window_reduce(in, k, [](std::vector<float>& v) {
        return *std::min_element(v.begin(), v.end());
    });
}

Tensor dilate(const Tensor& in, int k) {
    return window_reduce(in, k, [](std::vector<float>& v) {
        return *std::max_element(v.begin(), v.end());
    });
}

Tensor gaussian_blur(const Tensor& in, int k, float sigma) {
    const int h = in.dim(0), w = in.dim(1), r = k / 2;
    std::vector<double> weights(static_cast<size_t>(k) * k);
    double sum = 0.0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            const double wgt = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
            weights[static_cast<size_t>(dy + r) * k + (dx + r)] = wgt;
            sum += wgt;
        }
    for (auto& wgt : weights) wgt /= sum;
    Tensor out({h, w, 1});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int yy = std::clamp(y + dy, 0, h - 1);
                    const int xx = std::clamp(x + dx, 0, w - 1);
                    acc += weights[static_cast<size_t>(dy + r) * k + (dx + r)] *
                           in.at(yy, xx, 0);
                }
            out.at(y, x, 0) = static_cast<float>(acc);
        }
    clip01(out);
    return out;
}

// k equal-width levels on [0,1]
Tensor quantize(const Tensor& in, int levels) {
    Tensor out = in;
    for (auto& v : out.data) {
        int idx = static_cast<int>(v * static_cast<float>(levels));
        idx = std::min(idx, levels - 1);
        v = static_cast<float>(idx) / static_cast<float>(levels - 1);
    }
    return out;
}

// local 3x3 Shannon entropy over an 8-bin intensity histogram, scaled to [0,1]
Tensor entropy_filter(const Tensor& in, int k) {
    return window_reduce(in, k, [](std::vector<float>& v) {
        int hist[8] = {};
        for (float x : v) {
            int b = static_cast<int>(x * 8.0f);
            b = b > 7 ? 7 : (b < 0 ? 0 : b);
            ++hist[b];
        }
        double ent = 0.0;
        for (int c : hist) {
            if (c == 0) continue;
            const double p = static_cast<double>(c) / static_cast<double>(v.size());
            ent -= p * std::log2(p);
        }
        return static_cast<float>(ent / 3.0);
    });
}

}  // namespace

Tensor apply(const TransformSpec& spec, const Tensor& image) {
    check_image(image);
    g_apply_calls.fetch_add(1, std::memory_order_relaxed);
    const int off = spec.offset;
    switch (spec.kind) {
        case Kind::identity: return image;
        case Kind::shift_up: return circular_shift(image, off, 0);
        case Kind::shift_down: return circular_shift(image, -off, 0);
        case Kind::shift_left: return circular_shift(image, 0, off);
        case Kind::shift_right: return circular_shift(image, 0, -off);
        case Kind::shift_top_left: return circular_shift(image, off, off);
        case Kind::shift_top_right: return circular_shift(image, off, -off);
        case Kind::shift_bottom_left: return circular_shift(image, -off, off);
        case Kind::shift_bottom_right: return circular_shift(image, -off, -off);
        case Kind::flip_horizontal: return flip_h(image);
        case Kind::flip_vertical: return flip_v(image);
        case Kind::flip_both: return rot180(image);
        case Kind::rotate_90: return rot90(image);
        case Kind::rotate_180: return rot180(image);
        case Kind::rotate_270: return rot270(image);
        case Kind::gaussian_noise: return add_gaussian_noise(spec, image);
        case Kind::salt_pepper_noise: return add_salt_pepper(spec, image);
        case Kind::median_filter: return median_filter(image, spec.ksize);
        case Kind::gaussian_blur: return gaussian_blur(image, spec.ksize, spec.sigma);
        case Kind::erosion: return erode(image, spec.ksize);
        case Kind::dilation: return dilate(image, spec.ksize);
        case Kind::quantize_4: return quantize(image, 4);
        case Kind::quantize_8: return quantize(image, 8);
        case Kind::entropy_normalize: return entropy_filter(image, spec.ksize);
    }
    throw std::invalid_argument("unknown transform kind for spec '" + spec.id + "'");
}

Tensor reset(const TransformSpec& spec, const Tensor& image) {
    check_image(image);
    if (!spec.reversible)
        throw std::invalid_argument("reset called on irreversible transform '" +
                                    spec.id + "'");
    const int off = spec.offset;
    switch (spec.kind) {
        case Kind::shift_up: return circular_shift(image, -off, 0);
        case Kind::shift_down: return circular_shift(image, off, 0);
        case Kind::shift_left: return circular_shift(image, 0, -off);
        case Kind::shift_right: return circular_shift(image, 0, off);
        case Kind::shift_top_left: return circular_shift(image, -off, -off);
        case Kind::shift_top_right: return circular_shift(image, -off, off);
        case Kind::shift_bottom_left: return circular_shift(image, off, -off);
        case Kind::shift_bottom_right: return circular_shift(image, off, off);
        case Kind::flip_horizontal: return flip_h(image);
        case Kind::flip_vertical: return flip_v(image);
        case Kind::flip_both: return rot180(image);
        case Kind::rotate_90: return rot270(image);
        case Kind::rotate_180: return rot180(image);
        case Kind::rotate_270: return rot90(image);
        default:
            throw std::invalid_argument("reset: '" + spec.id + "' has no exact inverse");
    }
}

Tensor to_original(const TransformSpec& spec, const Tensor& image) {
    if (spec.kind == Kind::identity) return image;
    return reset(spec, image);
}

namespace {

TransformSpec rev(const std::string& id, Kind kind) {
    TransformSpec s;
    s.id = id;
    s.kind = kind;
    s.reversible = true;
    return s;
}

TransformSpec irr(const std::string& id, Kind kind, float sigma = 0.0f,
                  float density = 0.0f, int ksize = 3) {
    TransformSpec s;
    s.id = id;
    s.kind = kind;
    s.sigma = sigma;
    s.density = density;
    s.ksize = ksize;
    s.seed = fnv1a(id.data(), id.size());
    s.reversible = false;
    return s;
}

}  // namespace

std::vector<TransformSpec> registry(bool include_irreversible) {
    std::vector<TransformSpec> out = {
        rev("flip-both", Kind::flip_both),
        rev("flip-horizontal", Kind::flip_horizontal),
        rev("flip-vertical", Kind::flip_vertical),
        rev("rotate-180", Kind::rotate_180),
        rev("rotate-270", Kind::rotate_270),
        rev("rotate-90", Kind::rotate_90),
        rev("shift-bottom-left", Kind::shift_bottom_left),
        rev("shift-bottom-right", Kind::shift_bottom_right),
        rev("shift-down", Kind::shift_down),
        rev("shift-left", Kind::shift_left),
        rev("shift-right", Kind::shift_right),
        rev("shift-top-left", Kind::shift_top_left),
        rev("shift-top-right", Kind::shift_top_right),
        rev("shift-up", Kind::shift_up),
    };
    if (include_irreversible) {
        out.push_back(irr("gaussian-noise-05", Kind::gaussian_noise, 0.05f));
        out.push_back(irr("gaussian-noise-10", Kind::gaussian_noise, 0.10f));
        out.push_back(irr("salt-pepper-05", Kind::salt_pepper_noise, 0.0f, 0.05f));
        out.push_back(irr("salt-pepper-10", Kind::salt_pepper_noise, 0.0f, 0.10f));
        out.push_back(irr("median-3", Kind::median_filter, 0.0f, 0.0f, 3));
        out.push_back(irr("median-5", Kind::median_filter, 0.0f, 0.0f, 5));
        out.push_back(irr("blur-3", Kind::gaussian_blur, 0.5f, 0.0f, 3));
        out.push_back(irr("blur-5", Kind::gaussian_blur, 1.0f, 0.0f, 5));
        out.push_back(irr("blur-7", Kind::gaussian_blur, 2.0f, 0.0f, 7));
        out.push_back(irr("erosion-3", Kind::erosion, 0.0f, 0.0f, 3));
        out.push_back(irr("dilation-3", Kind::dilation, 0.0f, 0.0f, 3));
        out.push_back(irr("quantize-4", Kind::quantize_4));
        out.push_back(irr("quantize-8", Kind::quantize_8));
        out.push_back(irr("entropy-3", Kind::entropy_normalize, 0.0f, 0.0f, 3));
    }
    return out;
}

TransformSpec identity_spec() {
    TransformSpec s;
    s.id = "original";
    s.kind = Kind::identity;
    s.reversible = false;  // the 14 shift/flip/rotate kinds are the reversible set
    return s;
}

TransformSpec spec_by_id(const std::string& id) {
    if (id == "original" || id == "identity") return identity_spec();
    for (const auto& s : registry(true))
        if (s.id == id) return s;
    throw std::invalid_argument("unknown transform id '" + id + "'");
}

uint64_t apply_call_count() { return g_apply_calls.load(std::memory_order_relaxed); }
void reset_apply_call_count() { g_apply_calls.store(0, std::memory_order_relaxed); }

}  // namespace gauntlet::transforms
