#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gwkg/io_util.hpp"
#include "gwkg/pca.hpp"
#include "gwkg/rng.hpp"

using gwkg::Matrix;
using gwkg::vocab::apply_pca;
using gwkg::vocab::fit_pca;
using gwkg::vocab::PcaProjection;
using gwkg::vocab::reconstruct_pca;
using Descriptor = gwkg::data::Descriptor;

namespace {

// Test-side oracle: classic Jacobi eigenvalue iteration, written
// independently of the library implementation. Returns all eigenvalues of
// the 1/n covariance of `points`, descending.
std::vector<double> oracle_covariance_spectrum(const std::vector<Descriptor>& points) {
    const std::size_t n = points.size();
    const std::size_t d = points.front().size();
    std::vector<double> mean(d, 0.0);
    for (const auto& p : points)
        for (std::size_t j = 0; j < d; ++j) mean[j] += p[j] / static_cast<double>(n);

    std::vector<std::vector<double>> a(d, std::vector<double>(d, 0.0));
    for (const auto& p : points) {
        for (std::size_t r = 0; r < d; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
                a[r][c] += (p[r] - mean[r]) * (p[c] - mean[c]) / static_cast<double>(n);
            }
        }
    }

    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-26) break;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double phi = 0.5 * std::atan2(2.0 * a[p][q], a[q][q] - a[p][p]);
                const double c = std::cos(phi);
                const double s = std::sin(phi);
                for (std::size_t i = 0; i < d; ++i) {
                    const double aip = a[i][p], aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const double api = a[p][i], aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
            }
        }
    }
    std::vector<double> values(d);
    for (std::size_t i = 0; i < d; ++i) values[i] = a[i][i];
    std::sort(values.rbegin(), values.rend());
    return values;
}

std::vector<Descriptor> random_points(std::uint64_t seed, std::size_t n, std::size_t d) {
    gwkg::Rng rng(seed);
    // Anisotropic scales so the spectrum is well spread.
    std::vector<double> scales(d);
    for (std::size_t j = 0; j < d; ++j) scales[j] = 0.25 + 2.0 * rng.uniform01();
    std::vector<Descriptor> pts(n, Descriptor(d));
    for (auto& p : pts)
        for (std::size_t j = 0; j < d; ++j) p[j] = rng.gaussian(0.5 * j, scales[j]);
    return pts;
}

double dot(const Descriptor& a, const Descriptor& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

} // namespace

TEST_CASE("variance confined to the first axis") {
    const std::vector<Descriptor> pts{{1, 0}, {-1, 0}, {2, 0}, {-2, 0}};
    const PcaProjection proj = fit_pca(pts, 1);
    CHECK(proj.components(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(proj.components(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(proj.mean == Descriptor{0.0, 0.0});
}

TEST_CASE("full-dim projection is a rotation with zero reconstruction error") {
    const auto pts = random_points(7, 12, 4);
    const PcaProjection proj = fit_pca(pts, 4);
    for (const auto& p : pts) {
        const Descriptor back = reconstruct_pca(proj, apply_pca(proj, p));
        double err = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) err += (back[j] - p[j]) * (back[j] - p[j]);
        CHECK(err < 1e-18);
    }
}

TEST_CASE("reconstruction error equals count * discarded eigenvalue mass") {
    SUBCASE("covariance route (50x8, target 3)") {
        const auto pts = random_points(42, 50, 8);
        const PcaProjection proj = fit_pca(pts, 3);
        double recon_err = 0.0;
        for (const auto& p : pts) {
            const Descriptor back = reconstruct_pca(proj, apply_pca(proj, p));
            for (std::size_t j = 0; j < p.size(); ++j) {
                recon_err += (back[j] - p[j]) * (back[j] - p[j]);
            }
        }
        const auto spectrum = oracle_covariance_spectrum(pts);
        double discarded = 0.0;
        for (std::size_t i = 3; i < spectrum.size(); ++i) discarded += spectrum[i];
        CHECK(recon_err == doctest::Approx(50.0 * discarded).epsilon(1e-6));
    }
    SUBCASE("gram route (6x10, target 3)") {
        const auto pts = random_points(1234, 6, 10);
        const PcaProjection proj = fit_pca(pts, 3);
        double recon_err = 0.0;
        for (const auto& p : pts) {
            const Descriptor back = reconstruct_pca(proj, apply_pca(proj, p));
            for (std::size_t j = 0; j < p.size(); ++j) {
                recon_err += (back[j] - p[j]) * (back[j] - p[j]);
            }
        }
        const auto spectrum = oracle_covariance_spectrum(pts);
        double discarded = 0.0;
        for (std::size_t i = 3; i < spectrum.size(); ++i) discarded += spectrum[i];
        CHECK(recon_err == doctest::Approx(6.0 * discarded).epsilon(1e-6));
    }
}

TEST_CASE("components are orthonormal") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const auto pts = random_points(seed, 30, 6);
        const PcaProjection proj = fit_pca(pts, 4);
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                double ip = 0.0;
                for (std::size_t c = 0; c < 6; ++c) ip += proj.components(i, c) * proj.components(j, c);
                CHECK(std::abs(ip - (i == j ? 1.0 : 0.0)) < 1e-6);
            }
        }
    }
}

TEST_CASE("apply matches direct dot products and is linear after centering") {
    const auto pts = random_points(99, 20, 5);
    const PcaProjection proj = fit_pca(pts, 3);

    SUBCASE("mean maps to zero") {
        const Descriptor out = apply_pca(proj, proj.mean);
        for (double v : out) CHECK(std::abs(v) < 1e-12);
    }
    SUBCASE("mean plus component 0 maps to e0") {
        Descriptor v = proj.mean;
        for (std::size_t j = 0; j < v.size(); ++j) v[j] += proj.components(0, j);
        const Descriptor out = apply_pca(proj, v);
        CHECK(out[0] == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(std::abs(out[1]) < 1e-10);
        CHECK(std::abs(out[2]) < 1e-10);
    }
    SUBCASE("coordinates are dot products with components") {
        gwkg::Rng rng(5);
        for (int rep = 0; rep < 5; ++rep) {
            Descriptor v(5);
            for (double& x : v) x = rng.uniform(-2.0, 2.0);
            const Descriptor out = apply_pca(proj, v);
            Descriptor centered(5);
            for (std::size_t j = 0; j < 5; ++j) centered[j] = v[j] - proj.mean[j];
            for (std::size_t r = 0; r < 3; ++r) {
                Descriptor comp(proj.components.row(r), proj.components.row(r) + 5);
                CHECK(out[r] == doctest::Approx(dot(comp, centered)).epsilon(1e-12));
            }
        }
    }
    SUBCASE("apply(x + y - mean) = apply(x) + apply(y)") {
        const Descriptor x = pts[0];
        const Descriptor y = pts[1];
        Descriptor combo(5);
        for (std::size_t j = 0; j < 5; ++j) combo[j] = x[j] + y[j] - proj.mean[j];
        const Descriptor lhs = apply_pca(proj, combo);
        const Descriptor ax = apply_pca(proj, x);
        const Descriptor ay = apply_pca(proj, y);
        for (std::size_t r = 0; r < 3; ++r) {
            CHECK(lhs[r] == doctest::Approx(ax[r] + ay[r]).epsilon(1e-9));
        }
    }
}

TEST_CASE("error paths and determinism") {
    const std::vector<Descriptor> same{{1, 2}, {1, 2}, {1, 2}};
    CHECK_THROWS_AS(fit_pca(same, 1), gwkg::Error);
    const auto pts = random_points(11, 10, 4);
    CHECK_THROWS_AS(fit_pca(pts, 0), gwkg::Error);
    CHECK_THROWS_AS(fit_pca(pts, 5), gwkg::Error);
    CHECK_THROWS_AS(fit_pca({pts[0]}, 1), gwkg::Error);
    CHECK_THROWS_AS(apply_pca(fit_pca(pts, 2), Descriptor{1.0}), gwkg::Error);

    const PcaProjection a = fit_pca(pts, 3);
    const PcaProjection b = fit_pca(pts, 3);
    CHECK(a.mean == b.mean);
    CHECK(a.components == b.components);
}

TEST_CASE("component signs are pinned by the first nonzero coordinate") {
    // Negating the whole dataset flips every raw eigenvector; the sign rule
    // must bring both fits to identical components.
    const auto pts = random_points(64, 24, 5);
    std::vector<Descriptor> negated = pts;
    for (auto& p : negated)
        for (double& x : p) x = -x;

    const PcaProjection a = fit_pca(pts, 3);
    const PcaProjection b = fit_pca(negated, 3);
    for (std::size_t r = 0; r < 3; ++r) {
        // First nonzero coordinate positive on both.
        for (std::size_t j = 0; j < 5; ++j) {
            if (a.components(r, j) != 0.0) {
                CHECK(a.components(r, j) > 0.0);
                break;
            }
        }
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(a.components(r, j) == doctest::Approx(b.components(r, j)).epsilon(1e-9));
        }
    }
}

TEST_CASE("identity projection passes vectors through") {
    const PcaProjection id = PcaProjection::identity(3);
    const Descriptor v{1.5, -2.0, 0.25};
    CHECK(apply_pca(id, v) == v);
    CHECK_THROWS_AS(apply_pca(id, Descriptor{1.0}), gwkg::Error);
}
