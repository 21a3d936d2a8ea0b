#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "sparsenorm/known_sigma.hpp"
#include "sparsenorm/noise_estimators.hpp"

namespace sparsenorm {

// Parameters shared by the unknown-noise estimators.
struct AdaptiveConfig {
    std::size_t s = 1;
    std::vector<double> diag;           // sigma_i^2, all > 0
    double frob = 1.0;                  // ||Sigma||_F or an upper bound rho
    std::optional<double> frob_corr;    // ||Sigma~||_F; falls back to frob
    std::optional<double> eta;          // required by the eta variants
    NoiseOptions noise;

    double effective_frob_corr() const { return frob_corr.value_or(frob); }
    void validate(std::size_t d) const;
};

struct AdaptiveEstimate {
    double q = 0.0;
    double norm = 0.0;
    Regime regime = Regime::Sparse;
    NoiseEstimate noise;                 // S in the sparse branch, D in the dense one
    std::optional<NoiseEstimate> noise_eta;
    double tau = 0.0;
    double alpha = 0.0;
    std::size_t kept = 0;
};

// Raw formulas with the noise level supplied by the caller.
// sum_i y_i^2 1{|y_i| > scale sigma_i tau} - sigma_sq alpha sum_i sigma_i^2
double q_star_sparse_formula(std::span<const double> y, std::span<const double> diag,
                             double scale, double tau, double sigma_sq, double alpha,
                             std::size_t* kept = nullptr);
// sum_i (y_i^2 - sigma_sq sigma_i^2)
double q_star_dense_formula(std::span<const double> y, std::span<const double> diag,
                            double sigma_sq);

// Q*: thresholded with sigma_S in the sparse regime, centered with sigma_D otherwise.
AdaptiveEstimate estimate_star(std::span<const double> y, const AdaptiveConfig& config);
double estimate_Q_star(std::span<const double> y, const AdaptiveConfig& config);
double estimate_norm_star(std::span<const double> y, const AdaptiveConfig& config);

// Q*_eta. Sparse regime only; throws RegimeError when s > frob.
AdaptiveEstimate estimate_star_eta(std::span<const double> y, const AdaptiveConfig& config);
double estimate_Q_star_eta(std::span<const double> y, const AdaptiveConfig& config);
double estimate_norm_star_eta(std::span<const double> y, const AdaptiveConfig& config);

// N* when s > frob, N*_eta otherwise.
AdaptiveEstimate estimate_star_star(std::span<const double> y, const AdaptiveConfig& config);
double estimate_norm_star_star(std::span<const double> y, const AdaptiveConfig& config);

// Bound variants: frob is replaced by rho.
double estimate_norm_star_rho(std::span<const double> y, AdaptiveConfig config, double rho);
double estimate_norm_star_eta_rho(std::span<const double> y, AdaptiveConfig config, double rho);

// 3 sqrt((q_{1-eta/20} / q_{eta/20}) log(1 + frob^2 / s^2))
double tau_eta(std::size_t s, double frob, double eta);

// phi*(s, frob^2), branching on s <= frob.
double rate_psi_star(std::size_t s, double frob);

}  // namespace sparsenorm
