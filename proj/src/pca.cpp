#include "gwkg/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gwkg/io_util.hpp"
#include "gwkg/kernels.hpp"

namespace gwkg::vocab {

namespace detail {

EigenSym jacobi_eigensym(Matrix a) {
    if (a.rows() != a.cols()) throw Error("jacobi_eigensym: matrix must be square");
    const std::size_t n = a.rows();
    Matrix v = Matrix::identity(n);

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a(i, i)));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) scale = std::max(scale, std::abs(a(i, j)));
    const double stop = std::max(scale, 1.0) * 1e-14;

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
        if (off <= stop) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= stop * 1e-2) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p);
                    const double aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i);
                    const double aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p);
                    const double viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    EigenSym out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        out.values[r] = a(order[r], order[r]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(r, i) = v(i, order[r]);
    }
    return out;
}

} // namespace detail

namespace {

void fix_sign(double* component, std::size_t dim) {
    for (std::size_t i = 0; i < dim; ++i) {
        if (component[i] != 0.0) {
            if (component[i] < 0.0) {
                for (std::size_t j = 0; j < dim; ++j) component[j] = -component[j];
            }
            return;
        }
    }
}

} // namespace

PcaProjection fit_pca(const std::vector<Descriptor>& vectors, std::size_t target_dim) {
    const std::size_t n = vectors.size();
    if (n < 2) throw Error("fit_pca: need at least 2 vectors");
    const std::size_t dim = vectors.front().size();
    for (const auto& v : vectors) {
        if (v.size() != dim) throw Error("fit_pca: inconsistent input dims");
    }
    if (target_dim < 1 || target_dim > std::min(n - 1, dim)) {
        throw Error("fit_pca: target_dim " + std::to_string(target_dim) +
                    " out of range [1, min(count-1, dim)] = [1, " +
                    std::to_string(std::min(n - 1, dim)) + "]");
    }

    PcaProjection proj;
    proj.mean.assign(dim, 0.0);
    for (const auto& v : vectors) kernels::axpy(1.0, v.data(), proj.mean.data(), dim);
    for (double& m : proj.mean) m /= static_cast<double>(n);

    Matrix centered(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) centered(i, j) = vectors[i][j] - proj.mean[j];
    }

    double total_variance = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total_variance += kernels::dot(centered.row(i), centered.row(i), dim);
    }
    total_variance /= static_cast<double>(n);
    if (total_variance <= 0.0) throw Error("fit_pca: degenerate input (all vectors identical)");

    proj.components = Matrix(target_dim, dim);
    const double rank_floor = total_variance * 1e-12;

    if (dim <= n) {
        // Covariance route: eigenvectors of (1/n) Xc^T Xc.
        Matrix cov(dim, dim);
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = centered.row(i);
            for (std::size_t r = 0; r < dim; ++r) {
                kernels::axpy(xi[r] / static_cast<double>(n), xi, cov.row(r), dim);
            }
        }
        const auto eig = detail::jacobi_eigensym(std::move(cov));
        for (std::size_t r = 0; r < target_dim; ++r) {
            if (eig.values[r] <= rank_floor) {
                throw Error("fit_pca: input rank below target_dim");
            }
            std::copy(eig.vectors.row(r), eig.vectors.row(r) + dim, proj.components.row(r));
        }
    } else {
        // Gram route for wide data: eigenvectors of (1/n) Xc Xc^T lift to
        // covariance eigenvectors as Xc^T v / sqrt(n * lambda).
        Matrix gram(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i; j < n; ++j) {
                const double g = kernels::dot(centered.row(i), centered.row(j), dim) /
                                 static_cast<double>(n);
                gram(i, j) = g;
                gram(j, i) = g;
            }
        }
        const auto eig = detail::jacobi_eigensym(std::move(gram));
        for (std::size_t r = 0; r < target_dim; ++r) {
            if (eig.values[r] <= rank_floor) {
                throw Error("fit_pca: input rank below target_dim");
            }
            double* comp = proj.components.row(r);
            for (std::size_t i = 0; i < n; ++i) {
                kernels::axpy(eig.vectors(r, i), centered.row(i), comp, dim);
            }
            const double norm = std::sqrt(kernels::dot(comp, comp, dim));
            for (std::size_t j = 0; j < dim; ++j) comp[j] /= norm;
        }
    }

    for (std::size_t r = 0; r < target_dim; ++r) fix_sign(proj.components.row(r), dim);
    return proj;
}

Descriptor apply_pca(const PcaProjection& proj, const Descriptor& v) {
    if (proj.is_identity()) {
        if (v.size() != proj.identity_dim) throw Error("apply_pca: dim mismatch");
        return v;
    }
    if (v.size() != proj.mean.size()) {
        throw Error("apply_pca: dim mismatch (got " + std::to_string(v.size()) + ", expected " +
                    std::to_string(proj.mean.size()) + ")");
    }
    const std::size_t dim = v.size();
    Descriptor centered(dim);
    for (std::size_t i = 0; i < dim; ++i) centered[i] = v[i] - proj.mean[i];
    Descriptor out(proj.components.rows());
    for (std::size_t r = 0; r < proj.components.rows(); ++r) {
        out[r] = kernels::dot(proj.components.row(r), centered.data(), dim);
    }
    return out;
}

Descriptor reconstruct_pca(const PcaProjection& proj, const Descriptor& projected) {
    if (proj.is_identity()) return projected;
    if (projected.size() != proj.components.rows()) throw Error("reconstruct_pca: dim mismatch");
    Descriptor out = proj.mean;
    for (std::size_t r = 0; r < proj.components.rows(); ++r) {
        kernels::axpy(projected[r], proj.components.row(r), out.data(), out.size());
    }
    return out;
}

} // namespace gwkg::vocab
