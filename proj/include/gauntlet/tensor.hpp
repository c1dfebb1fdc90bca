#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace gauntlet {

// Dense row-major float32 tensor. Value semantics throughout; every layer and
// attack works on copies or const references, never shared mutable state.
struct Tensor {
    std::vector<int> dims;
    std::vector<float> data;

    Tensor() = default;

    explicit Tensor(std::vector<int> d) : dims(std::move(d)) {
        data.assign(static_cast<size_t>(numel_of(dims)), 0.0f);
    }

    Tensor(std::vector<int> d, std::vector<float> values)
        : dims(std::move(d)), data(std::move(values)) {
        if (static_cast<int64_t>(data.size()) != numel_of(dims))
            throw std::invalid_argument("tensor data length does not match dims");
    }

    static int64_t numel_of(const std::vector<int>& d) {
        int64_t n = 1;
        for (int e : d) {
            if (e <= 0) throw std::invalid_argument("tensor extents must be positive");
            n *= e;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(dims.size()); }
    int dim(int i) const { return dims.at(static_cast<size_t>(i)); }

    float& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // Row-major accessors for the ranks used in this project.
    float& at(int i) { return data[static_cast<size_t>(i)]; }
    float at(int i) const { return data[static_cast<size_t>(i)]; }

    float& at(int y, int x, int c) {
        return data[(static_cast<size_t>(y) * dims[1] + x) * dims[2] + c];
    }
    float at(int y, int x, int c) const {
        return data[(static_cast<size_t>(y) * dims[1] + x) * dims[2] + c];
    }

    float& at(int a, int b, int c, int d) {
        return data[((static_cast<size_t>(a) * dims[1] + b) * dims[2] + c) * dims[3] + d];
    }
    float at(int a, int b, int c, int d) const {
        return data[((static_cast<size_t>(a) * dims[1] + b) * dims[2] + c) * dims[3] + d];
    }

    bool same_shape(const Tensor& o) const { return dims == o.dims; }

    bool all_finite() const;

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < dims.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(dims[i]);
        }
        return s + "]";
    }
};

// L2 norm accumulated in double, fixed index order.
double l2_norm(const Tensor& t);
double l2_distance(const Tensor& a, const Tensor& b);
double linf_distance(const Tensor& a, const Tensor& b);

}  // namespace gauntlet
