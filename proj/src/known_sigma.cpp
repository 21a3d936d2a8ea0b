#include "sparsenorm/known_sigma.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sparsenorm/errors.hpp"
#include "sparsenorm/special_functions.hpp"

namespace sparsenorm {
namespace {

void check_rate_args(double s, double t) {
    if (!(s >= 1.0) || !std::isfinite(s)) {
        throw DomainError("rate: s must be finite and >= 1");
    }
    if (!(t > 0.0) || !std::isfinite(t)) {
        throw DomainError("rate: t must be finite and > 0");
    }
}

// Shared first branch, with sqrt(t) passed in so callers holding ||Sigma||_F
// branch on s <= ||Sigma||_F without re-rounding through t.
double sparse_branch(double s, double t) {
    return s * std::log1p(t / (s * s));
}

}  // namespace

const char* to_string(Regime regime) {
    return regime == Regime::Sparse ? "sparse" : "dense";
}

double rate_phi(double s, double t) {
    check_rate_args(s, t);
    const double root = std::sqrt(t);
    return s <= root ? sparse_branch(s, t) : root;
}

double rate_phi_star(double s, double t) {
    check_rate_args(s, t);
    const double root = std::sqrt(t);
    return s <= root ? sparse_branch(s, t) : s / std::max(1.0, std::log(s / root));
}

double rate_psi(const RateInputs& in) {
    const double s = static_cast<double>(in.s);
    check_rate_args(s, in.frob * in.frob);
    return s <= in.frob ? sparse_branch(s, in.frob * in.frob) : in.frob;
}

double rate_psi_bar(const RateInputs& in) {
    if (in.s < 1) {
        throw DomainError("rate_psi_bar: s must be >= 1");
    }
    return std::min(in.lambda_max, static_cast<double>(in.s));
}

KnownSigmaEstimate estimate_known_sigma(std::span<const double> y, std::span<const double> diag,
                                        double sigma, std::size_t s, double frob) {
    if (y.size() != diag.size()) {
        throw DimensionError("known-sigma estimator: y has length " + std::to_string(y.size()) +
                             " but diag has length " + std::to_string(diag.size()));
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw DomainError("known-sigma estimator: sigma must be finite and > 0");
    }
    if (s < 1) {
        throw DomainError("known-sigma estimator: s must be >= 1");
    }
    if (!(frob > 0.0) || !std::isfinite(frob)) {
        throw DomainError("known-sigma estimator: Frobenius norm (or rho) must be finite and > 0");
    }

    KnownSigmaEstimate out;
    out.regime = regime_for(s, frob);
    const double sigma_sq = sigma * sigma;
    double q = 0.0;
    if (out.regime == Regime::Sparse) {
        const double sd = static_cast<double>(s);
        out.tau = 3.0 * std::sqrt(std::log1p(frob * frob / (sd * sd)));
        out.beta = truncated_moments(out.tau).beta;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (std::fabs(y[i]) > sigma * std::sqrt(diag[i]) * out.tau) {
                q += y[i] * y[i] - sigma_sq * diag[i] * out.beta;
                ++out.kept;
            }
        }
    } else {
        for (std::size_t i = 0; i < y.size(); ++i) {
            q += y[i] * y[i] - sigma_sq * diag[i];
        }
        out.kept = y.size();
    }
    out.q = q;
    out.norm = std::sqrt(std::fabs(q));
    return out;
}

double estimate_Q_known(std::span<const double> y, std::span<const double> diag, double sigma,
                        std::size_t s, double frob) {
    return estimate_known_sigma(y, diag, sigma, s, frob).q;
}

double estimate_norm_known(std::span<const double> y, std::span<const double> diag, double sigma,
                           std::size_t s, double frob) {
    return estimate_known_sigma(y, diag, sigma, s, frob).norm;
}

double estimate_norm_known_rho(std::span<const double> y, std::span<const double> diag,
                               double sigma, std::size_t s, double rho) {
    return estimate_known_sigma(y, diag, sigma, s, rho).norm;
}

}  // namespace sparsenorm
