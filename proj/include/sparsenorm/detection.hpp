#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sparsenorm/gaussian_models.hpp"

namespace sparsenorm {

struct TestOutcome {
    bool reject = false;
    double statistic = 0.0;
    double threshold = 0.0;
};

// Rejects when the known-sigma norm estimate (with rho in place of the
// Frobenius norm) strictly exceeds gamma sigma sqrt(phi(s, rho^2)).
TestOutcome run_test(std::span<const double> y, std::span<const double> diag, double sigma,
                     std::size_t s, double rho, double gamma);

// gamma sigma sqrt(phi(s, rho^2))
double detection_threshold(double gamma, double sigma, std::size_t s, double rho);

// 2 gamma sigma sqrt(phi(s, rho^2))
double separation_radius(double gamma, double sigma, std::size_t s, double rho);

struct AltInstance {
    SignalSpec signal;
    CovarianceModel model;
};

// Suprema are maxima over the finite families handed in.
struct RiskEstimate {
    double type1 = 0.0;
    double type2 = 0.0;
    double total = 0.0;
    double type1_se = 0.0;
    double type2_se = 0.0;
    std::size_t replications = 0;
    bool alternative_empty = false;
    std::size_t worst_null = 0;
    std::size_t worst_alt = 0;
    std::vector<double> null_rates;  // rejection frequency per null model
    std::vector<double> alt_rates;   // acceptance frequency per alternative
};

struct RiskRequest {
    std::vector<CovarianceModel> nulls;
    std::vector<AltInstance> alternatives;
    double sigma = 1.0;
    std::size_t s = 1;
    double rho = 1.0;
    double gamma = 1.0;
    double radius = 0.0;  // every alternative must have ||theta||_2 >= radius
    std::size_t replications = 100;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

// Monte Carlo estimate of sup type I + sup type II. Throws DomainError when
// an alternative violates the radius or Frobenius constraint.
RiskEstimate estimate_risk(const RiskRequest& request);

// Test statistic for each replicate of one configuration. The noise for
// replicate r comes from SeedPath{config_seed, r}.
std::vector<double> simulate_statistics(const SignalSpec& signal, const CovarianceModel& model,
                                        double sigma, std::size_t s, double rho,
                                        std::size_t replications, std::uint64_t config_seed,
                                        unsigned threads);

struct SweepRequest {
    std::vector<CovarianceModel> nulls;
    std::vector<CovarianceModel> alt_models;
    SignalShape shape = SignalShape::Flat;
    std::vector<double> radii;   // absolute ||theta||_2 values
    double sigma = 1.0;
    std::size_t s = 1;
    double rho = 1.0;
    double gamma = 1.0;
    std::size_t replications = 100;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

struct SweepRow {
    double radius = 0.0;
    RiskEstimate risk;
};

struct SweepTable {
    std::vector<SweepRow> rows;       // in ascending radius order
    bool type2_monotone = true;       // non-increasing within 2 standard errors
};

// One RiskEstimate per radius. Null statistics are shared across rows.
SweepTable radius_sweep(const SweepRequest& request);

// Chebyshev calibration: C* = 2 max E[(N - ||theta||)^2] / (sigma^2 phi(s, rho^2))
// over the nulls and over flat alternatives at the given multiples of
// sigma sqrt(phi); gamma = sqrt(C* / eta) bounds the total risk by eta.
struct GammaCalibration {
    double gamma = 0.0;
    double c_star = 0.0;
    std::vector<double> scaled_mse;  // nulls first, then alternatives per multiple
};

struct GammaCalibrationRequest {
    std::vector<CovarianceModel> nulls;
    std::vector<CovarianceModel> alt_models;
    std::vector<double> radius_multiples;
    double sigma = 1.0;
    std::size_t s = 1;
    double rho = 1.0;
    double eta = 0.05;
    std::size_t replications = 200;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

GammaCalibration calibrate_gamma(const GammaCalibrationRequest& request);

}  // namespace sparsenorm
