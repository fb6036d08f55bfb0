#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gwkg/kernels.hpp"
#include "gwkg/kmeans.hpp"
#include "gwkg/matrix.hpp"
#include "gwkg/rng.hpp"

namespace k = gwkg::kernels;

namespace {

std::vector<double> random_vec(gwkg::Rng& rng, std::size_t n, double lo = -3.0, double hi = 3.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

} // namespace

TEST_CASE("scalar kernels match hand values") {
    const std::vector<double> x{1.0, 2.0, 3.0};
    const std::vector<double> y{4.0, 5.0, 6.0};
    CHECK(k::scalar().dot(x.data(), y.data(), 3) == 32.0);
    CHECK(k::scalar().dist2(x.data(), y.data(), 3) == 27.0);
    CHECK(k::scalar().sum(x.data(), 3) == 6.0);

    std::vector<double> acc{1.0, 1.0, 1.0};
    k::scalar().axpy(2.0, x.data(), acc.data(), 3);
    CHECK(acc == std::vector<double>{3.0, 5.0, 7.0});

    CHECK(k::scalar().dot(x.data(), y.data(), 0) == 0.0);
    CHECK(k::scalar().sum(x.data(), 0) == 0.0);
}

#ifdef GWKG_HAVE_AVX2
TEST_CASE("avx2 kernels agree with the scalar reference") {
    if (!k::select("avx2")) {
        MESSAGE("cpu lacks avx2; skipping");
        return;
    }
    const k::Ops& simd = k::avx2();
    const k::Ops& ref = k::scalar();
    gwkg::Rng rng(20240811);

    // Every tail length around the 4- and 8-lane boundaries plus large sizes.
    std::vector<std::size_t> sizes;
    for (std::size_t n = 0; n <= 33; ++n) sizes.push_back(n);
    sizes.insert(sizes.end(), {64, 127, 128, 1000, 4097});

    for (std::size_t n : sizes) {
        for (int rep = 0; rep < 10; ++rep) {
            const auto x = random_vec(rng, n);
            const auto y = random_vec(rng, n);

            const double d_ref = ref.dot(x.data(), y.data(), n);
            const double d_simd = simd.dot(x.data(), y.data(), n);
            CHECK(d_simd == doctest::Approx(d_ref).epsilon(1e-12));

            const double e_ref = ref.dist2(x.data(), y.data(), n);
            const double e_simd = simd.dist2(x.data(), y.data(), n);
            CHECK(e_simd == doctest::Approx(e_ref).epsilon(1e-12));

            const double s_ref = ref.sum(x.data(), n);
            const double s_simd = simd.sum(x.data(), n);
            CHECK(s_simd == doctest::Approx(s_ref).epsilon(1e-12));

            auto acc_ref = y;
            auto acc_simd = y;
            ref.axpy(0.37, x.data(), acc_ref.data(), n);
            simd.axpy(0.37, x.data(), acc_simd.data(), n);
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(acc_simd[i] == doctest::Approx(acc_ref[i]).epsilon(1e-14));
            }
        }
    }
    k::select("auto");
}

TEST_CASE("avx2 dist2 is exact on integer-valued data") {
    if (!k::select("avx2")) return;
    std::vector<double> x(19), y(19);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = static_cast<double>(i);
        y[i] = static_cast<double>(2 * i % 7);
    }
    CHECK(k::avx2().dist2(x.data(), y.data(), x.size()) ==
          k::scalar().dist2(x.data(), y.data(), x.size()));
    k::select("auto");
}
#endif

#ifdef GWKG_HAVE_AVX2
TEST_CASE("whole algorithms agree across kernel sets") {
    if (!k::select("avx2")) return;
    gwkg::Rng rng(55);
    std::vector<gwkg::data::Descriptor> pts;
    for (int blob = 0; blob < 4; ++blob) {
        for (int i = 0; i < 40; ++i) {
            gwkg::data::Descriptor p(6);
            for (std::size_t j = 0; j < 6; ++j) p[j] = rng.gaussian(blob * 10.0, 0.5);
            pts.push_back(p);
        }
    }
    gwkg::Matrix a(37, 19), b(19, 23);
    for (std::size_t i = 0; i < 37 * 19; ++i) a.data()[i] = rng.gaussian(0.0, 1.0);
    for (std::size_t i = 0; i < 19 * 23; ++i) b.data()[i] = rng.gaussian(0.0, 1.0);

    REQUIRE(k::select("avx2"));
    const auto vocab_simd = gwkg::vocab::kmeans_fit(pts, 4, {.seed = 3});
    const gwkg::Matrix prod_simd = gwkg::matmul(a, b);

    REQUIRE(k::select("scalar"));
    const auto vocab_ref = gwkg::vocab::kmeans_fit(pts, 4, {.seed = 3});
    const gwkg::Matrix prod_ref = gwkg::matmul(a, b);
    k::select("auto");

    REQUIRE(vocab_simd.k == vocab_ref.k);
    for (std::size_t c = 0; c < 4; ++c) {
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(vocab_simd.centroids(c, j) ==
                  doctest::Approx(vocab_ref.centroids(c, j)).epsilon(1e-9));
        }
    }
    CHECK(vocab_simd.inertia == doctest::Approx(vocab_ref.inertia).epsilon(1e-12));
    for (std::size_t i = 0; i < 37 * 23; ++i) {
        CHECK(prod_simd.data()[i] == doctest::Approx(prod_ref.data()[i]).epsilon(1e-12));
    }
}
#endif

TEST_CASE("kernel selection") {
    CHECK(k::select("scalar"));
    CHECK(std::string(k::active().name) == "scalar");
    CHECK_FALSE(k::select("bogus"));
    CHECK(std::string(k::active().name) == "scalar");
    CHECK(k::select("auto"));
}
