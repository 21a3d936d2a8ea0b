#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sparsenorm/config.hpp"
#include "sparsenorm/detection.hpp"
#include "sparsenorm/gaussian_models.hpp"

namespace sparsenorm {

// Named rate used to normalize a cell's risk.
struct RateValue {
    std::string name;
    double value = 0.0;
};

// Hard-coded estimator -> rate mapping.
//   n-hat -> psi; n-tilde -> phi_rho; n-star, n-star-eta, n-star-star -> psi_star;
//   n-star-rho, n-star-eta-rho -> phi_star_rho; sigma-* -> psi_tilde.
RateValue rate_for(const std::string& estimator, std::size_t s, const CovarianceModel& model,
                   double rho);

bool is_noise_estimator(const std::string& estimator);

// Applies a named estimator to one observation. Norm estimators return an
// estimate of ||theta||_2, noise estimators an estimate of sigma^2.
double apply_estimator(const EstimatorSpec& spec, std::span<const double> y,
                       const CovarianceModel& model, std::size_t s, double sigma, double rho);

struct RiskSummary {
    std::string experiment_id;
    std::string estimator;
    std::size_t d = 0;
    std::size_t s = 0;
    double sigma = 1.0;
    std::string family;
    std::string family_params;  // includes "signal=<shape>"
    double norm2_target = 0.0;  // absolute ||theta||_2
    std::size_t replications = 0;
    double mean_sq_err = 0.0;
    double scaled_risk = 0.0;
    std::string rate_name;
    double rate_value = 0.0;
    double std_err = 0.0;
    std::uint64_t seed = 0;
};

// Runs every grid cell. Each replicate's loss is stored by index and summed
// in order with compensated summation, so the output does not depend on
// the thread count.
//
// Norm estimators: loss (T - ||theta||)^2, scaled_risk = mean / (sigma^2 rate).
// Noise estimators: loss (T / sigma^2 - 1)^2, scaled_risk = sqrt(mean) / rate.
std::vector<RiskSummary> run_experiment(const ExperimentConfig& config);

// Per-replicate losses for one cell (exposed for tests).
std::vector<double> cell_losses(const ExperimentConfig& config, std::size_t d, std::size_t s,
                                double sigma, const CovarianceModel& model, SignalShape shape,
                                double norm2, std::uint64_t cell_seed);

const std::vector<std::string>& csv_columns();
std::string to_csv(const std::vector<RiskSummary>& rows);
std::string to_json(const ExperimentConfig& config, const std::vector<RiskSummary>& rows);

// Rate curves ------------------------------------------------------------------

struct RateSeries {
    std::string label;
    std::vector<double> s;
    std::vector<double> empirical;    // mean_sq_err / sigma^2 (or its root for noise estimators)
    std::vector<double> theoretical;  // named rate
    double fitted_constant = 0.0;     // geometric mean of empirical / theoretical
    double ratio_band = 0.0;          // max ratio / min ratio over the s grid
};

struct RateCurve {
    std::vector<RiskSummary> rows;
    std::vector<RateSeries> series;
    std::string svg;
};

// Runs the experiment and groups rows into one series per
// (d, sigma, family, signal, norm2) with s on the x axis.
RateCurve rate_curve(const ExperimentConfig& config);

// Log-log plot of empirical points and fitted theoretical curves.
std::string render_rate_svg(const std::vector<RateSeries>& series, const std::string& title);

std::string to_json(const ExperimentConfig& config, const RateCurve& curve);

// Detection sweeps -----------------------------------------------------------------

struct PowerTable {
    std::vector<double> radii;  // absolute
    SweepTable sweep;
    double rho = 0.0;
    double threshold = 0.0;
};

// test-power: uses grid.d[0], grid.s[0], grid.sigma[0] and the power.* keys.
PowerTable run_power(const ExperimentConfig& config);
std::string to_csv(const PowerTable& table);
std::string to_json(const ExperimentConfig& config, const PowerTable& table);

// Output helpers -------------------------------------------------------------------

// Writes via a temporary file and rename. Throws IoError.
void write_text_file(const std::string& path, const std::string& content);

}  // namespace sparsenorm
