#pragma once
// Vectorized arithmetic primitives used by the numeric modules (PCA, k-means,
// GCN training, similarity scoring). A scalar reference implementation is
// always available; an AVX2 variant is compiled on x86-64 and picked at
// runtime when the CPU supports it. The choice can be pinned with the
// GWKG_KERNELS environment variable (auto | scalar | avx2).

#include <cstddef>
#include <string>

namespace gwkg::kernels {

struct Ops {
    const char* name;
    // sum_i x[i] * y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);
    // sum_i (x[i] - y[i])^2
    double (*dist2)(const double* x, const double* y, std::size_t n);
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // sum_i x[i]
    double (*sum)(const double* x, std::size_t n);
};

const Ops& scalar();
#ifdef GWKG_HAVE_AVX2
const Ops& avx2();
#endif

// The set selected for this process. Stable for the lifetime of the process
// so repeated runs on one machine are bit-reproducible.
const Ops& active();

// Force a set by name ("scalar", "avx2", "auto"). Returns false if the name
// is unknown or the CPU lacks support. Intended for tests and diagnostics.
bool select(const std::string& name);

inline double dot(const double* x, const double* y, std::size_t n) {
    return active().dot(x, y, n);
}
inline double dist2(const double* x, const double* y, std::size_t n) {
    return active().dist2(x, y, n);
}
inline void axpy(double a, const double* x, double* y, std::size_t n) {
    active().axpy(a, x, y, n);
}
inline double sum(const double* x, std::size_t n) {
    return active().sum(x, n);
}

} // namespace gwkg::kernels
