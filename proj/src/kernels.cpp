#include "gwkg/kernels.hpp"

#include <cstdlib>

namespace gwkg::kernels {

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double dist2_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

const Ops kScalar{"scalar", dot_scalar, dist2_scalar, axpy_scalar, sum_scalar};

bool cpu_has_avx2() {
#if defined(GWKG_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Ops* resolve(const std::string& name) {
    if (name == "scalar") return &kScalar;
#ifdef GWKG_HAVE_AVX2
    if (name == "avx2") return cpu_has_avx2() ? &avx2() : nullptr;
#endif
    if (name == "auto") {
#ifdef GWKG_HAVE_AVX2
        if (cpu_has_avx2()) return &avx2();
#endif
        return &kScalar;
    }
    return nullptr;
}

const Ops* initial() {
    const char* env = std::getenv("GWKG_KERNELS");
    if (env) {
        if (const Ops* ops = resolve(env)) return ops;
    }
    return resolve("auto");
}

const Ops*& active_slot() {
    static const Ops* slot = initial();
    return slot;
}

} // namespace

const Ops& scalar() { return kScalar; }

const Ops& active() { return *active_slot(); }

bool select(const std::string& name) {
    const Ops* ops = resolve(name);
    if (!ops) return false;
    active_slot() = ops;
    return true;
}

} // namespace gwkg::kernels
