#include "sparsenorm/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sparsenorm/errors.hpp"
#include "sparsenorm/special_functions.hpp"

namespace sparsenorm {
namespace {

double tau_sparse(std::size_t s, double frob) {
    const double sd = static_cast<double>(s);
    return 3.0 * std::sqrt(std::log1p(frob * frob / (sd * sd)));
}

double sum_diag(std::span<const double> diag) {
    double total = 0.0;
    for (double v : diag) total += v;
    return total;
}

NormalizedSample normalized(std::span<const double> y, const AdaptiveConfig& config) {
    return NormalizedSample::from_observations(y, config.diag);
}

void require_finite_noise(const NoiseEstimate& est) {
    if (est.sentinel || !std::isfinite(est.value)) {
        throw DegenerateSampleError("noise estimate is infinite (no square falls below t_hat)");
    }
}

}  // namespace

void AdaptiveConfig::validate(std::size_t d) const {
    if (s < 1) throw DomainError("adaptive estimator: s must be >= 1");
    if (!(frob > 0.0) || !std::isfinite(frob)) {
        throw DomainError("adaptive estimator: frob (or rho) must be finite and > 0");
    }
    if (frob_corr && (!(*frob_corr > 0.0) || !std::isfinite(*frob_corr))) {
        throw DomainError("adaptive estimator: frob_corr must be finite and > 0");
    }
    if (eta && !(*eta > 0.0 && *eta < 1.0)) {
        throw DomainError("adaptive estimator: eta must lie in (0, 1)");
    }
    if (diag.size() != d) {
        throw DimensionError("adaptive estimator: y has length " + std::to_string(d) +
                             " but diag has length " + std::to_string(diag.size()));
    }
}

double q_star_sparse_formula(std::span<const double> y, std::span<const double> diag,
                             double scale, double tau, double sigma_sq, double alpha,
                             std::size_t* kept) {
    double kept_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (std::fabs(y[i]) > scale * std::sqrt(diag[i]) * tau) {
            kept_sum += y[i] * y[i];
            ++count;
        }
    }
    if (kept) *kept = count;
    return kept_sum - sigma_sq * alpha * sum_diag(diag);
}

double q_star_dense_formula(std::span<const double> y, std::span<const double> diag,
                            double sigma_sq) {
    double q = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        q += y[i] * y[i] - sigma_sq * diag[i];
    }
    return q;
}

AdaptiveEstimate estimate_star(std::span<const double> y, const AdaptiveConfig& config) {
    config.validate(y.size());
    const NormalizedSample sample = normalized(y, config);
    AdaptiveEstimate out;
    out.regime = regime_for(config.s, config.frob);
    if (out.regime == Regime::Sparse) {
        out.noise = sigma_sq_S(sample, config.noise);
        require_finite_noise(out.noise);
        out.tau = tau_sparse(config.s, config.frob);
        out.alpha = truncated_moments(out.tau).alpha;
        out.q = q_star_sparse_formula(y, config.diag, std::sqrt(out.noise.value), out.tau,
                                      out.noise.value, out.alpha, &out.kept);
    } else {
        out.noise = sigma_sq_D(sample, config.s, config.effective_frob_corr(), config.noise);
        require_finite_noise(out.noise);
        out.q = q_star_dense_formula(y, config.diag, out.noise.value);
        out.kept = y.size();
    }
    out.norm = std::sqrt(std::fabs(out.q));
    return out;
}

double estimate_Q_star(std::span<const double> y, const AdaptiveConfig& config) {
    return estimate_star(y, config).q;
}

double estimate_norm_star(std::span<const double> y, const AdaptiveConfig& config) {
    return estimate_star(y, config).norm;
}

double tau_eta(std::size_t s, double frob, double eta) {
    if (!(eta > 0.0 && eta < 1.0)) throw DomainError("tau_eta: eta must lie in (0, 1)");
    const double ratio = chi1_quantile(1.0 - eta / 20.0) / chi1_quantile(eta / 20.0);
    const double sd = static_cast<double>(s);
    return 3.0 * std::sqrt(ratio * std::log1p(frob * frob / (sd * sd)));
}

AdaptiveEstimate estimate_star_eta(std::span<const double> y, const AdaptiveConfig& config) {
    config.validate(y.size());
    if (!config.eta) throw DomainError("eta variant requested without eta");
    if (regime_for(config.s, config.frob) != Regime::Sparse) {
        throw RegimeError("eta variant is defined only for s <= frob");
    }
    const NormalizedSample sample = normalized(y, config);
    AdaptiveEstimate out;
    out.regime = Regime::Sparse;
    out.noise = sigma_sq_S(sample, config.noise);
    require_finite_noise(out.noise);
    out.noise_eta = sigma_sq_eta(sample, *config.eta);
    out.tau = tau_eta(config.s, config.frob, *config.eta);
    out.alpha = truncated_moments(out.tau).alpha;
    const double scale =
        std::max(std::sqrt(out.noise.value), std::sqrt(out.noise_eta->value));
    out.q = q_star_sparse_formula(y, config.diag, scale, out.tau, out.noise.value, out.alpha,
                                  &out.kept);
    out.norm = std::sqrt(std::fabs(out.q));
    return out;
}

double estimate_Q_star_eta(std::span<const double> y, const AdaptiveConfig& config) {
    return estimate_star_eta(y, config).q;
}

double estimate_norm_star_eta(std::span<const double> y, const AdaptiveConfig& config) {
    return estimate_star_eta(y, config).norm;
}

AdaptiveEstimate estimate_star_star(std::span<const double> y, const AdaptiveConfig& config) {
    if (static_cast<double>(config.s) > config.frob) return estimate_star(y, config);
    return estimate_star_eta(y, config);
}

double estimate_norm_star_star(std::span<const double> y, const AdaptiveConfig& config) {
    return estimate_star_star(y, config).norm;
}

double estimate_norm_star_rho(std::span<const double> y, AdaptiveConfig config, double rho) {
    config.frob = rho;
    return estimate_norm_star(y, config);
}

double estimate_norm_star_eta_rho(std::span<const double> y, AdaptiveConfig config, double rho) {
    config.frob = rho;
    return estimate_norm_star_eta(y, config);
}

double rate_psi_star(std::size_t s, double frob) {
    const double sd = static_cast<double>(s);
    if (s < 1) throw DomainError("rate_psi_star: s must be >= 1");
    if (!(frob > 0.0) || !std::isfinite(frob)) {
        throw DomainError("rate_psi_star: frob must be finite and > 0");
    }
    if (sd <= frob) return sd * std::log1p(frob * frob / (sd * sd));
    return sd / std::max(1.0, std::log(sd / frob));
}

}  // namespace sparsenorm
