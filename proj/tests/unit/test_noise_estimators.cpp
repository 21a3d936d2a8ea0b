#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "oracles/oracles.hpp"
#include "sparsenorm/errors.hpp"
#include "sparsenorm/gaussian_models.hpp"
#include "sparsenorm/noise_estimators.hpp"
#include "sparsenorm/rng.hpp"
#include "sparsenorm/special_functions.hpp"

using namespace sparsenorm;

namespace {

NormalizedSample from_squares(const std::vector<double>& squares) {
    std::vector<double> yt;
    for (double q : squares) yt.push_back(std::sqrt(q));
    return NormalizedSample::from_normalized(yt);
}

std::vector<double> iid_normals(std::size_t d, double sigma, SeedPath path) {
    RandomStream r(path, Stream::Noise);
    std::vector<double> v(d);
    for (auto& x : v) x = sigma * r.normal();
    return v;
}

}  // namespace

TEST_CASE("empirical cdf") {
    const auto s = from_squares({1, 4, 9});
    CHECK(empirical_cdf_sq(s, 4) == doctest::Approx(2.0 / 3.0));
    CHECK(empirical_cdf_sq(s, 0.5) == 0.0);
    CHECK(empirical_cdf_sq(s, 9) == 1.0);
}

TEST_CASE("dyadic threshold reference cases") {
    CHECK(dyadic_threshold(from_squares({0.3, 0.9, 2.0})) == 1.0);
    CHECK(dyadic_threshold(from_squares({4, 4, 4})) == 4.0);
    CHECK(dyadic_threshold(from_squares({0.6, 5, 7})) == 8.0);
    CHECK_THROWS_AS(dyadic_threshold(from_squares({0, 0, 0})), DegenerateSampleError);
    CHECK_THROWS_AS(dyadic_threshold(from_squares({0, 0, 5})), DegenerateSampleError);
    CHECK_THROWS_AS(dyadic_threshold(from_squares({1, 2}), NoiseOptions{1.0}), DomainError);
    CHECK(dyadic_threshold(from_squares({0.1, 0.2, 0.3, 3.0}), NoiseOptions{0.9}) == 4.0);
}

TEST_CASE("dyadic threshold matches grid search") {
    RandomStream r(SeedPath{23, 0}, Stream::Auxiliary);
    int ties = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t d = 1 + r.below(40);
        std::vector<double> yt(d);
        const int mode = trial % 4;
        for (auto& v : yt) {
            if (mode == 0) {
                v = r.normal();
            } else if (mode == 1) {
                // exact powers of two, so ties at the threshold are common
                v = std::ldexp(1.0, static_cast<int>(r.below(9)) - 4);
            } else if (mode == 2) {
                v = std::ldexp(r.normal(), static_cast<int>(r.below(400)) - 200);
            } else {
                v = (r.uniform() < 0.2 ? 0.0 : 1.0) * std::sqrt(std::ldexp(1.0, int(r.below(7)) - 3));
            }
        }
        const auto sample = NormalizedSample::from_normalized(yt);
        const std::size_t k = (d + 1) / 2;
        if (sample.order_statistic(k) == 0.0) {
            CHECK_THROWS_AS(dyadic_threshold(sample), DegenerateSampleError);
            continue;
        }
        const double t = dyadic_threshold(sample);
        const double m = sample.order_statistic(k);
        int e = 0;
        if (std::frexp(m, &e) == 0.5) ++ties;
        CHECK(t == oracle::dyadic_grid_search(yt, 0.5, -1100, 1100));
    }
    CHECK(ties > 1000);
}

TEST_CASE("sigma_sq_S at a fixed t") {
    const auto s = from_squares({1, 4, 9});
    const auto e = sigma_sq_S_at(s, 1.0);
    CHECK(*e.f_hat_at_t == doctest::Approx(1.0 / 3.0));
    CHECK(e.value == doctest::Approx(1.0 / chi1_quantile(1.0 / 3.0)).epsilon(1e-14));
    CHECK(e.value == doctest::Approx(5.39).epsilon(1e-3));
    const auto below = sigma_sq_S_at(s, 0.5);
    CHECK(below.sentinel);
    CHECK(std::isinf(below.value));
    CHECK(sigma_sq_S_at(s, 9.0).value == 0.0);
    CHECK_THROWS_AS(sigma_sq_S_at(s, 0.0), DomainError);
    CHECK_THROWS_AS(sigma_sq_S_at(s, -1.0), DomainError);
}

TEST_CASE("sigma_sq_S reference and equivariance") {
    const auto e = sigma_sq_S(from_squares({0.3, 0.9, 2.0}));
    CHECK(*e.t_hat == 1.0);
    CHECK(*e.f_hat_at_t == doctest::Approx(2.0 / 3.0));
    CHECK(e.value == doctest::Approx(1.0684).epsilon(1e-3));
    CHECK_FALSE(e.sentinel);

    const auto yt = iid_normals(501, 1.3, SeedPath{8, 0});
    const auto base = NormalizedSample::from_normalized(yt);
    const double t0 = dyadic_threshold(base);
    const double v0 = sigma_sq_S(base).value;
    for (int k = -4; k <= 4; ++k) {
        auto scaled = yt;
        // 2^{k/2}; for odd k the square of the factor is 2^k up to rounding,
        // so only even k is checked bit-exactly on the estimate.
        const double f = std::sqrt(std::ldexp(1.0, k));
        for (auto& v : scaled) v *= f;
        const auto s = NormalizedSample::from_normalized(scaled);
        CAPTURE(k);
        if (k % 2 == 0) {
            CHECK(dyadic_threshold(s) == std::ldexp(t0, k));
            CHECK(sigma_sq_S(s).value == std::ldexp(v0, k));
        } else {
            CHECK(dyadic_threshold(s) == std::ldexp(t0, k));
            CHECK(sigma_sq_S(s).value == doctest::Approx(std::ldexp(v0, k)).epsilon(1e-13));
        }
    }
}

TEST_CASE("cosine moment") {
    CHECK(cosine_moment(NormalizedSample::from_normalized({0.0, 0.0}), 3.0) == 1.0);
    CHECK(cosine_moment(NormalizedSample::from_normalized({std::numbers::pi, 0.0}), 1.0) ==
          doctest::Approx(0.0));
    CHECK(cosine_moment(NormalizedSample::from_normalized({1.0, -7.0, 40.0}), 1e-12) ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(cosine_moment(NormalizedSample::from_normalized({1.0}), 0.0), DomainError);
}

TEST_CASE("sigma_tilde_D formula") {
    const double t = 2.0, lambda = 0.4;
    CHECK(sigma_tilde_sq_D(t, lambda, std::exp(-lambda / 2)) == doctest::Approx(t).epsilon(1e-14));
    CHECK(sigma_tilde_sq_D(t, lambda, 1.0) == 0.0);
    CHECK(std::isinf(sigma_tilde_sq_D(t, lambda, 0.0)));
    CHECK(sigma_tilde_sq_D(t, lambda, -0.5) == sigma_tilde_sq_D(t, lambda, 0.5));
    CHECK(cosine_lambda(1, 10.0) == doctest::Approx(1.0 / 6.0));
    CHECK(cosine_lambda(1000, 10.0) == doctest::Approx(std::log(100.0) / 6.0));
}

TEST_CASE("sigma_sq_D composition") {
    const auto s = from_squares({0.3, 0.9, 2.0, 0.01, 5.0});
    const auto e = sigma_sq_D(s, 50, 2.0);
    const double S = sigma_sq_S(s).value;
    CHECK(e.method == NoiseMethod::D);
    CHECK(e.value == std::min(*e.sigma_tilde_sq, 2.0 * S));
    CHECK(*e.lambda == doctest::Approx(std::max(1.0, std::log(25.0)) / 6.0));
}

TEST_CASE("sigma_sq_eta") {
    const auto e = sigma_sq_eta(from_squares({0.3, 0.9, 2.0}), 0.5);
    CHECK(*e.median_square == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(e.value == doctest::Approx(0.9 / chi1_quantile(0.975)).epsilon(1e-14));
    CHECK(e.value == doctest::Approx(0.1791).epsilon(1e-3));
    const auto flat = sigma_sq_eta(from_squares({2.0, 2.0, 2.0, 2.0}), 0.1);
    CHECK(flat.value == doctest::Approx(2.0 / chi1_quantile(1 - 0.005)).epsilon(1e-14));
    CHECK(median_square(from_squares({5, 1, 3, 2})) == doctest::Approx(2.0));
    CHECK_THROWS_AS(sigma_sq_eta(from_squares({1}), 1.0), DomainError);
}

TEST_CASE("rate psi tilde") {
    CHECK(rate_psi_tilde(1, 100, 10.0) == doctest::Approx(0.1));
    CHECK(rate_psi_tilde(50, 100, 10.0) == doctest::Approx(50.0 / (100 * std::log(5.0))));
    CHECK(rate_psi_tilde(10, 100, 10.0) == doctest::Approx(0.1));
}

TEST_CASE("bit-equal with literal transcriptions") {
    RandomStream r(SeedPath{29, 0}, Stream::Auxiliary);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t d = 1 + r.below(12);
        std::vector<double> y(d), diag(d);
        for (std::size_t i = 0; i < d; ++i) {
            diag[i] = 0.05 + 0.95 * r.uniform();
            y[i] = (r.uniform() < 0.2 ? 20.0 : 1.0) * r.normal();
        }
        const auto yt = oracle::normalize(y, diag);
        const auto sample = NormalizedSample::from_observations(y, diag);
        const std::size_t s = 1 + r.below(d);
        const double fc = 0.5 + 3.0 * r.uniform();
        CHECK(sigma_sq_S(sample).value == oracle::sigma_sq_S(yt));
        CHECK(sigma_sq_D(sample, s, fc).value == oracle::sigma_sq_D(yt, s, fc));
        CHECK(sigma_sq_eta(sample, 0.2).value == oracle::sigma_sq_eta(yt, 0.2));
    }
}

TEST_CASE("threshold brackets the noise level") {
    for (double sigma : {0.25, 1.0, 17.0}) {
        int inside = 0;
        for (std::uint64_t r = 0; r < 1000; ++r) {
            const auto sample = NormalizedSample::from_normalized(iid_normals(10000, sigma, SeedPath{31, r}));
            const double t = dyadic_threshold(sample);
            inside += (t >= sigma * sigma / 3 && t <= 1.5 * sigma * sigma) ? 1 : 0;
        }
        CAPTURE(sigma);
        CHECK(inside >= 990);
    }
}

TEST_CASE("sigma_sq_S is consistent under pure noise") {
    double total = 0.0;
    for (std::uint64_t r = 0; r < 500; ++r) {
        const auto sample = NormalizedSample::from_normalized(iid_normals(10000, 1.0, SeedPath{37, r}));
        total += std::fabs(sigma_sq_S(sample).value - 1.0);
    }
    CHECK(total / 500 <= 0.05);
}

TEST_CASE("sigma_sq_D under pure noise in the dense regime") {
    const std::size_t d = 10000, s = d / 200;
    const double fc = 100.0;
    double total = 0.0;
    for (std::uint64_t r = 0; r < 500; ++r) {
        const auto sample = NormalizedSample::from_normalized(iid_normals(d, 1.0, SeedPath{41, r}));
        total += std::fabs(sigma_sq_D(sample, s, fc).value - 1.0);
    }
    CHECK(total / 500 <= 10.0 * rate_psi_tilde(s, d, fc));
}

TEST_CASE("sigma_sq_eta lands in its bracket") {
    for (double eta : {0.1, 0.5}) {
        const double lo = chi1_quantile(eta / 20) / chi1_quantile(1 - eta / 20);
        int inside = 0;
        for (std::uint64_t r = 0; r < 2000; ++r) {
            const auto sample = NormalizedSample::from_normalized(iid_normals(10000, 1.0, SeedPath{43, r}));
            const double v = sigma_sq_eta(sample, eta).value;
            inside += (v > lo && v < 1.0) ? 1 : 0;
        }
        CAPTURE(eta);
        CHECK(inside >= 2000 * (1 - eta / 4));
    }
}

TEST_CASE("sigma_sq_S is robust to sparse contamination") {
    const std::size_t d = 10000, s = d / 100;
    double clean = 0.0, dirty = 0.0;
    for (std::uint64_t r = 0; r < 300; ++r) {
        auto yt = iid_normals(d, 1.0, SeedPath{47, r});
        clean += std::fabs(sigma_sq_S(NormalizedSample::from_normalized(yt)).value - 1.0);
        for (std::size_t i = 0; i < s; ++i) yt[i] += 1e6;
        dirty += std::fabs(sigma_sq_S(NormalizedSample::from_normalized(yt)).value - 1.0);
    }
    CHECK((dirty - clean) / 300 <= 10.0 * double(s) / double(d));
}

TEST_CASE("construction checks") {
    CHECK_THROWS_AS(NormalizedSample::from_normalized({}), DomainError);
    CHECK_THROWS_AS(NormalizedSample::from_normalized({1.0, NAN}), DomainError);
    const std::vector<double> y{1.0, 2.0}, bad{1.0, 0.0}, shorter{1.0};
    CHECK_THROWS_AS(NormalizedSample::from_observations(y, bad), DomainError);
    CHECK_THROWS_AS(NormalizedSample::from_observations(y, shorter), DimensionError);
}
