#pragma once

#include <cstddef>
#include <span>

namespace sparsenorm {

// Sparse regime s <= ||Sigma||_F (or s <= rho), dense otherwise.
enum class Regime { Sparse, Dense };

const char* to_string(Regime regime);

inline Regime regime_for(std::size_t s, double frob) {
    return static_cast<double>(s) <= frob ? Regime::Sparse : Regime::Dense;
}

// Rate functions -------------------------------------------------------------

// s log(1 + t / s^2) if s <= sqrt(t), sqrt(t) otherwise.
double rate_phi(double s, double t);

// s log(1 + t / s^2) if s <= sqrt(t), s / max(1, log(s / sqrt(t))) otherwise.
double rate_phi_star(double s, double t);

// Scalars that the rates depend on.
struct RateInputs {
    std::size_t s = 1;
    std::size_t d = 1;
    double frob = 1.0;       // ||Sigma||_F, or an upper bound rho
    double frob_corr = 1.0;  // ||Sigma~||_F of the correlation matrix
    double lambda_max = 1.0;
};

// phi(s, ||Sigma||_F^2).
double rate_psi(const RateInputs& in);
// min(lambda_max(Sigma), s).
double rate_psi_bar(const RateInputs& in);

// Known-sigma estimators -------------------------------------------------------

struct KnownSigmaEstimate {
    double q = 0.0;     // estimate of ||theta||_2^2
    double norm = 0.0;  // sqrt(|q|)
    Regime regime = Regime::Sparse;
    double tau = 0.0;   // threshold multiplier (sparse regime only)
    double beta = 1.0;  // E[Z^2 | |Z| >= tau] (sparse regime only)
    std::size_t kept = 0;  // coordinates passing the threshold
};

// Thresholded quadratic estimator with known noise level.
//
// Sparse regime (s <= frob):
//   sum_i (y_i^2 - sigma^2 sigma_i^2 beta) 1{|y_i| > sigma sigma_i tau},
//   tau = 3 sqrt(log(1 + frob^2 / s^2)).
// Dense regime: sum_i (y_i^2 - sigma^2 sigma_i^2).
//
// `diag` holds the variances sigma_i^2. The comparison is strict, so a
// coordinate with sigma_i = 0 is kept whenever y_i != 0.
KnownSigmaEstimate estimate_known_sigma(std::span<const double> y, std::span<const double> diag,
                                        double sigma, std::size_t s, double frob);

double estimate_Q_known(std::span<const double> y, std::span<const double> diag, double sigma,
                        std::size_t s, double frob);

double estimate_norm_known(std::span<const double> y, std::span<const double> diag, double sigma,
                           std::size_t s, double frob);

// Same estimator with ||Sigma||_F replaced by an upper bound rho.
double estimate_norm_known_rho(std::span<const double> y, std::span<const double> diag,
                               double sigma, std::size_t s, double rho);

}  // namespace sparsenorm
