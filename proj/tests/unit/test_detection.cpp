#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "sparsenorm/detection.hpp"
#include "sparsenorm/errors.hpp"
#include "sparsenorm/known_sigma.hpp"

using namespace sparsenorm;

TEST_CASE("test statistic against threshold") {
    const std::vector<double> y(3, 0.0), diag(3, 1.0);
    for (double gamma : {1.0, 1.4, 1.42, 2.0}) {
        const auto out = run_test(y, diag, 1.0, 2, 1.5, gamma);
        CHECK(out.statistic == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
        CHECK(out.threshold == doctest::Approx(gamma * std::sqrt(1.5)).epsilon(1e-15));
        CHECK(out.reject == (std::sqrt(3.0) > gamma * std::sqrt(1.5)));
    }
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_FALSE(run_test(y, diag, 1.0, 2, 1.5, inf).reject);
    CHECK(run_test(y, diag, 1.0, 2, 1.5, 1e-300).reject);
    CHECK_THROWS_AS(run_test(y, diag, 1.0, 2, 1.5, 0.0), DomainError);
}

TEST_CASE("threshold and radius") {
    CHECK(detection_threshold(1.0, 1.0, 5, 4.0) == 2.0);
    CHECK(separation_radius(1.0, 1.0, 2, 4.0) == doctest::Approx(2.0 * std::sqrt(2.0 * std::log(5.0))).epsilon(1e-15));
    CHECK(separation_radius(3.0, 2.0, 2, 4.0) == doctest::Approx(12.0 * std::sqrt(2.0 * std::log(5.0))).epsilon(1e-15));
}

namespace {

RiskRequest basic_request(std::size_t d, double radius, double gamma, std::size_t reps) {
    RiskRequest req;
    const auto model = make_covariance(family::Identity{}, d);
    req.nulls = {model};
    req.sigma = 1.0;
    req.s = 5;
    req.rho = model.frobenius();
    req.gamma = gamma;
    req.radius = radius;
    req.replications = reps;
    req.seed = 7;
    if (radius > 0.0)
        req.alternatives = {{make_signal(d, 5, SignalShape::Flat, radius, SeedPath{1, 0}), model}};
    return req;
}

}  // namespace

TEST_CASE("risk conventions") {
    auto req = basic_request(200, 0.0, std::numeric_limits<double>::infinity(), 200);
    auto risk = estimate_risk(req);
    CHECK(risk.alternative_empty);
    CHECK(risk.type1 == 0.0);
    CHECK(risk.type2 == 0.0);
    CHECK(risk.replications == 200);

    req = basic_request(200, 50.0, std::numeric_limits<double>::infinity(), 200);
    risk = estimate_risk(req);
    CHECK(risk.type1 == 0.0);
    CHECK(risk.type2 == 1.0);
    // A vanishing threshold rejects whenever the statistic is positive.
    req.gamma = 1e-300;
    risk = estimate_risk(req);
    CHECK(risk.type2 == 0.0);
    CHECK(risk.total == risk.type1);
}

TEST_CASE("risk at small and large radius") {
    const double phi_root = std::sqrt(rate_phi(5, 1000.0));
    auto tiny = estimate_risk(basic_request(1000, 1e-6, 1.0, 400));
    CHECK(tiny.total == doctest::Approx(1.0).epsilon(0.15));
    auto wide = estimate_risk(basic_request(1000, 10.0 * phi_root, 1.0, 400));
    CHECK(wide.total <= 0.05);
}

TEST_CASE("risk validation") {
    auto req = basic_request(100, 3.0, 1.0, 10);
    req.radius = 4.0;
    CHECK_THROWS_AS(estimate_risk(req), DomainError);
    req = basic_request(100, 3.0, 1.0, 10);
    req.rho = 1.0;
    CHECK_THROWS_AS(estimate_risk(req), DomainError);
}

TEST_CASE("risk is identical across thread counts") {
    auto req = basic_request(300, 6.0, 1.0, 300);
    req.threads = 1;
    const auto a = estimate_risk(req);
    req.threads = 4;
    const auto b = estimate_risk(req);
    CHECK(a.type1 == b.type1);
    CHECK(a.type2 == b.type2);
    CHECK(a.null_rates == b.null_rates);
    CHECK(a.alt_rates == b.alt_rates);
}

TEST_CASE("radius sweep") {
    SweepRequest req;
    const auto model = make_covariance(family::Identity{}, 500);
    req.nulls = {model};
    req.alt_models = {model};
    req.s = 5;
    req.rho = model.frobenius();
    req.gamma = 1.0;
    req.radii = {20.0, 2.0, 8.0};
    req.replications = 200;
    req.seed = 3;
    const auto table = radius_sweep(req);
    REQUIRE(table.rows.size() == 3);
    CHECK(table.rows[0].radius == 2.0);
    CHECK(table.rows[2].radius == 20.0);
    CHECK(table.type2_monotone);
    CHECK(table.rows[0].risk.type1 == table.rows[2].risk.type1);
    CHECK(table.rows[2].risk.type2 <= table.rows[0].risk.type2);
}

TEST_CASE("gamma calibration") {
    GammaCalibrationRequest req;
    const auto model = make_covariance(family::Identity{}, 400);
    req.nulls = {model};
    req.alt_models = {model};
    req.radius_multiples = {1.0, 4.0};
    req.s = 4;
    req.rho = model.frobenius();
    req.eta = 0.1;
    req.replications = 200;
    req.seed = 9;
    const auto cal = calibrate_gamma(req);
    CHECK(cal.scaled_mse.size() == 3);
    double worst = 0.0;
    for (double v : cal.scaled_mse) worst = std::max(worst, v);
    CHECK(cal.c_star == doctest::Approx(2.0 * worst));
    CHECK(cal.gamma == doctest::Approx(std::sqrt(cal.c_star / 0.1)));
}
