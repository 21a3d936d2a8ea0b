#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace sparsenorm {

// Normalized observations Y_i / sigma_i together with their sorted squares.
// Immutable once built.
class NormalizedSample {
public:
    // Requires min_i sigma_i^2 > 0.
    static NormalizedSample from_observations(std::span<const double> y,
                                              std::span<const double> diag);
    static NormalizedSample from_normalized(std::vector<double> y_tilde);

    std::span<const double> y_tilde() const noexcept { return y_tilde_; }
    std::span<const double> sorted_squares() const noexcept { return sorted_squares_; }
    std::size_t size() const noexcept { return y_tilde_.size(); }

    // k-th smallest square, k in [1, size()].
    double order_statistic(std::size_t k) const;

private:
    explicit NormalizedSample(std::vector<double> y_tilde);

    std::vector<double> y_tilde_;
    std::vector<double> sorted_squares_;
};

enum class NoiseMethod { S, D, Eta };

const char* to_string(NoiseMethod method);

// Estimate of sigma^2 plus the intermediate quantities that produced it.
struct NoiseEstimate {
    double value = 0.0;  // +infinity when `sentinel` is set
    NoiseMethod method = NoiseMethod::S;
    std::optional<double> t_hat;
    std::optional<double> f_hat_at_t;
    bool sentinel = false;

    // Method D only.
    std::optional<double> sigma_tilde_sq;  // cosine-moment estimate before the min with 2 S
    std::optional<double> lambda;
    std::optional<double> cosine_moment;
    // Method Eta only.
    std::optional<double> median_square;
};

// Tuning shared by the noise estimators. `median_level` is the constant in
// the dyadic threshold rule min{t = 2^l : F(t) >= level}; 0.5 by default.
struct NoiseOptions {
    double median_level = 0.5;
};

// (1/d) #{i : y~_i^2 <= t}.
double empirical_cdf_sq(const NormalizedSample& sample, double t);

// Smallest power of two t with empirical_cdf_sq(t) >= level. Computed from
// the ceil(level d)-th order statistic m as 2^ceil(log2 m).
// Throws DegenerateSampleError if m == 0.
double dyadic_threshold(const NormalizedSample& sample, const NoiseOptions& options = {});

// t / F^{-1}(F_hat(t)) with F the chi-square(1) CDF. F_hat(t) = 0 gives the
// +infinity sentinel; F_hat(t) = 1 gives 0.
NoiseEstimate sigma_sq_S_at(const NormalizedSample& sample, double t);

// sigma_sq_S_at evaluated at the dyadic threshold.
NoiseEstimate sigma_sq_S(const NormalizedSample& sample, const NoiseOptions& options = {});

// (1/d) sum_i cos(u y~_i).
double cosine_moment(const NormalizedSample& sample, double u);

// lambda = max(1, log(s / frob_corr)) / 6.
double cosine_lambda(std::size_t s, double frob_corr);

// -(2 t / lambda) log|phi_hat|, +infinity when phi_hat == 0.
double sigma_tilde_sq_D(double t_hat, double lambda, double phi_hat);

// min(sigma_tilde_sq_D, 2 sigma_sq_S) with the cosine moment taken at
// u = sqrt(lambda / t_hat).
NoiseEstimate sigma_sq_D(const NormalizedSample& sample, std::size_t s, double frob_corr,
                         const NoiseOptions& options = {});

// Exact empirical median of the squares, min{t : F_hat(t) >= 0.5}.
double median_square(const NormalizedSample& sample);

// median_square / q_{1 - eta/20}, q the chi-square(1) quantile.
NoiseEstimate sigma_sq_eta(const NormalizedSample& sample, double eta);

// Minimax rate for estimating sigma^2:
// frob_corr / d if s <= frob_corr, s / (d max(1, log(s / frob_corr))) otherwise.
double rate_psi_tilde(std::size_t s, std::size_t d, double frob_corr);

}  // namespace sparsenorm
