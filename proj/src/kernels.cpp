#include "gauntlet/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "gauntlet/tensor.hpp"

namespace gauntlet {

bool Tensor::all_finite() const {
    for (float v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

double l2_norm(const Tensor& t) {
    double s = 0.0;
    for (float v : t.data) s += static_cast<double>(v) * v;
    return std::sqrt(s);
}

double l2_distance(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double linf_distance(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = std::fabs(static_cast<double>(a.data[i]) - b.data[i]);
        if (d > m) m = d;
    }
    return m;
}

}  // namespace gauntlet

namespace gauntlet::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__AVX2__)
    return true;  // compiled for AVX2 unconditionally
#elif defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Backend pick_default() {
    if (const char* env = std::getenv("GAUNTLET_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
        if (std::strcmp(env, "avx2") == 0) {
            if (!avx2_available())
                throw std::runtime_error("GAUNTLET_KERNELS=avx2 but AVX2 is unavailable");
            return Backend::avx2;
        }
        // anything else, including "auto", falls through
    }
    return avx2_available() ? Backend::avx2 : Backend::scalar;
}

Backend& active() {
    static Backend b = pick_default();
    return b;
}

}  // namespace

bool avx2_available() {
#if defined(GAUNTLET_AVX2_COMPILED)
    return cpu_has_avx2();
#else
    return false;
#endif
}

#if !defined(GAUNTLET_AVX2_COMPILED)
const Ops& avx2_ops() {
    throw std::runtime_error("AVX2 kernels were not compiled into this binary");
}
#endif

const Ops& ops() {
    return active() == Backend::avx2 ? avx2_ops() : scalar_ops();
}

Backend active_backend() { return active(); }

void set_backend(Backend b) {
    if (b == Backend::avx2 && !avx2_available())
        throw std::runtime_error("AVX2 kernel backend unavailable on this machine");
    active() = b;
}

std::string backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

}  // namespace gauntlet::kernels
