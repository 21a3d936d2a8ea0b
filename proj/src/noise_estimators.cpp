#include "sparsenorm/noise_estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sparsenorm/errors.hpp"
#include "sparsenorm/special_functions.hpp"

namespace sparsenorm {

NormalizedSample::NormalizedSample(std::vector<double> y_tilde) : y_tilde_(std::move(y_tilde)) {
    if (y_tilde_.empty()) {
        throw DomainError("normalized sample must be non-empty");
    }
    sorted_squares_.resize(y_tilde_.size());
    for (std::size_t i = 0; i < y_tilde_.size(); ++i) {
        if (!std::isfinite(y_tilde_[i])) {
            throw DomainError("normalized sample contains a non-finite value");
        }
        sorted_squares_[i] = y_tilde_[i] * y_tilde_[i];
    }
    std::sort(sorted_squares_.begin(), sorted_squares_.end());
}

NormalizedSample NormalizedSample::from_observations(std::span<const double> y,
                                                     std::span<const double> diag) {
    if (y.size() != diag.size()) {
        throw DimensionError("normalized sample: y and diag lengths differ");
    }
    std::vector<double> y_tilde(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(diag[i] > 0.0)) {
            throw DomainError("normalized sample: every variance sigma_i^2 must be > 0");
        }
        y_tilde[i] = y[i] / std::sqrt(diag[i]);
    }
    return NormalizedSample(std::move(y_tilde));
}

NormalizedSample NormalizedSample::from_normalized(std::vector<double> y_tilde) {
    return NormalizedSample(std::move(y_tilde));
}

double NormalizedSample::order_statistic(std::size_t k) const {
    if (k < 1 || k > sorted_squares_.size()) {
        throw DomainError("order statistic index out of range");
    }
    return sorted_squares_[k - 1];
}

const char* to_string(NoiseMethod method) {
    switch (method) {
        case NoiseMethod::S:
            return "S";
        case NoiseMethod::D:
            return "D";
        case NoiseMethod::Eta:
            return "eta";
    }
    return "?";
}

double empirical_cdf_sq(const NormalizedSample& sample, double t) {
    const auto sq = sample.sorted_squares();
    const auto count = std::upper_bound(sq.begin(), sq.end(), t) - sq.begin();
    return static_cast<double>(count) / static_cast<double>(sq.size());
}

double dyadic_threshold(const NormalizedSample& sample, const NoiseOptions& options) {
    if (!(options.median_level > 0.0 && options.median_level < 1.0)) {
        throw DomainError("dyadic threshold level must lie in (0, 1)");
    }
    const double d = static_cast<double>(sample.size());
    const auto k = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(options.median_level * d)), 1, sample.size());
    const double m = sample.order_statistic(k);
    if (m == 0.0) {
        throw DegenerateSampleError("degenerate sample: median of squared observations is zero");
    }
    int exponent = 0;
    const double mantissa = std::frexp(m, &exponent);
    return mantissa == 0.5 ? m : std::ldexp(1.0, exponent);
}

NoiseEstimate sigma_sq_S_at(const NormalizedSample& sample, double t) {
    if (!(t > 0.0) || !std::isfinite(t)) {
        throw DomainError("sigma_sq_S_at: t must be finite and > 0");
    }
    NoiseEstimate est;
    est.method = NoiseMethod::S;
    est.t_hat = t;
    const double p = empirical_cdf_sq(sample, t);
    est.f_hat_at_t = p;
    if (p == 0.0) {
        est.sentinel = true;
        est.value = std::numeric_limits<double>::infinity();
    } else if (p == 1.0) {
        est.value = 0.0;
    } else {
        est.value = t / chi1_quantile(p);
    }
    return est;
}

NoiseEstimate sigma_sq_S(const NormalizedSample& sample, const NoiseOptions& options) {
    return sigma_sq_S_at(sample, dyadic_threshold(sample, options));
}

double cosine_moment(const NormalizedSample& sample, double u) {
    if (!(u > 0.0) || !std::isfinite(u)) {
        throw DomainError("cosine_moment: u must be finite and > 0");
    }
    double total = 0.0;
    for (double v : sample.y_tilde()) {
        total += std::cos(u * v);
    }
    return total / static_cast<double>(sample.size());
}

double cosine_lambda(std::size_t s, double frob_corr) {
    if (s < 1) {
        throw DomainError("cosine_lambda: s must be >= 1");
    }
    if (!(frob_corr > 0.0) || !std::isfinite(frob_corr)) {
        throw DomainError("cosine_lambda: frob_corr must be finite and > 0");
    }
    return std::max(1.0, std::log(static_cast<double>(s) / frob_corr)) / 6.0;
}

double sigma_tilde_sq_D(double t_hat, double lambda, double phi_hat) {
    const double magnitude = std::fabs(phi_hat);
    if (magnitude == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return -(2.0 * t_hat / lambda) * std::log(magnitude);
}

NoiseEstimate sigma_sq_D(const NormalizedSample& sample, std::size_t s, double frob_corr,
                         const NoiseOptions& options) {
    const double lambda = cosine_lambda(s, frob_corr);
    const NoiseEstimate sparse = sigma_sq_S(sample, options);
    const double t_hat = *sparse.t_hat;
    const double phi_hat = cosine_moment(sample, std::sqrt(lambda / t_hat));

    NoiseEstimate est = sparse;
    est.method = NoiseMethod::D;
    est.lambda = lambda;
    est.cosine_moment = phi_hat;
    est.sigma_tilde_sq = sigma_tilde_sq_D(t_hat, lambda, phi_hat);
    est.value = std::min(*est.sigma_tilde_sq, 2.0 * sparse.value);
    est.sentinel = false;
    return est;
}

double median_square(const NormalizedSample& sample) {
    return sample.order_statistic((sample.size() + 1) / 2);
}

NoiseEstimate sigma_sq_eta(const NormalizedSample& sample, double eta) {
    if (!(eta > 0.0 && eta < 1.0)) {
        throw DomainError("sigma_sq_eta: eta must lie in (0, 1)");
    }
    NoiseEstimate est;
    est.method = NoiseMethod::Eta;
    est.median_square = median_square(sample);
    est.value = *est.median_square / chi1_quantile(1.0 - eta / 20.0);
    return est;
}

double rate_psi_tilde(std::size_t s, std::size_t d, double frob_corr) {
    if (s < 1 || d < 1) {
        throw DomainError("rate_psi_tilde: s and d must be >= 1");
    }
    if (!(frob_corr > 0.0) || !std::isfinite(frob_corr)) {
        throw DomainError("rate_psi_tilde: frob_corr must be finite and > 0");
    }
    const double sd = static_cast<double>(s);
    const double dd = static_cast<double>(d);
    if (sd <= frob_corr) {
        return frob_corr / dd;
    }
    return sd / (dd * std::max(1.0, std::log(sd / frob_corr)));
}

}  // namespace sparsenorm
