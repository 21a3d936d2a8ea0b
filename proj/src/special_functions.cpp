#include "sparsenorm/special_functions.hpp"

#include <array>
#include <cmath>
#include <string>

#include "sparsenorm/errors.hpp"

namespace sparsenorm {
namespace {

constexpr double kInvSqrtPi = 0.56418958354775628695;
constexpr double kSqrtHalfPi = 1.25331413731550025121;

// Acklam's rational approximation, relative error below 1.15e-9.
constexpr std::array<double, 6> kA = {-3.969683028665376e+01, 2.209460984245205e+02,
                                      -2.759285104469687e+02, 1.383577518672690e+02,
                                      -3.066479806614716e+01, 2.506628277459239e+00};
constexpr std::array<double, 5> kB = {-5.447609879822406e+01, 1.615858368580409e+02,
                                      -1.556989798598866e+02, 6.680131188771972e+01,
                                      -1.328068155288572e+01};
constexpr std::array<double, 6> kC = {-7.784894002430293e-03, -3.223964580411365e-01,
                                      -2.400758277161838e+00, -2.549732539343734e+00,
                                      4.374664141464968e+00,  2.938163982698783e+00};
constexpr std::array<double, 4> kD = {7.784695709041462e-03, 3.224671290700398e-01,
                                      2.445134137142996e+00, 3.754408661907416e+00};
constexpr double kLowBreak = 0.02425;

double acklam_lower(double p) {
    if (p < kLowBreak) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((kC[0] * q + kC[1]) * q + kC[2]) * q + kC[3]) * q + kC[4]) * q + kC[5]) /
               ((((kD[0] * q + kD[1]) * q + kD[2]) * q + kD[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((kA[0] * r + kA[1]) * r + kA[2]) * r + kA[3]) * r + kA[4]) * r + kA[5]) * q /
           (((((kB[0] * r + kB[1]) * r + kB[2]) * r + kB[3]) * r + kB[4]) * r + 1.0);
}

// Quantile for p in (0, 0.5]; the result is <= 0 and Phi is evaluated in its
// accurate (lower) tail during the correction.
double lower_quantile(double p) {
    if (p == 0.5) {
        return 0.0;
    }
    double x = acklam_lower(p);
    if (std::fabs(x) < 37.0) {
        const double e = std_normal_cdf(x) - p;
        const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    } else {
        // exp(x^2/2) overflows here; use Phi(x) = phi(x) R(-x) with R the Mills ratio.
        for (int it = 0; it < 2; ++it) {
            const double u = mills_ratio(-x) - std::exp(std::log(p * kSqrt2Pi) + 0.5 * x * x);
            x -= u / (1.0 + 0.5 * x * u);
        }
    }
    return x;
}

}  // namespace

double std_normal_pdf(double x) noexcept {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x / kSqrt2);
}

double std_normal_sf(double x) {
    return 0.5 * std::erfc(x / kSqrt2);
}

double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("std_normal_quantile: p must lie in (0, 1), got " + std::to_string(p));
    }
    if (p <= 0.5) {
        return lower_quantile(p);
    }
    // 1 - p is exact for p in [0.5, 1).
    return -lower_quantile(1.0 - p);
}

double erfcx(double x) {
    if (std::isnan(x)) {
        return x;
    }
    if (x < 5.0) {
        return std::exp(x * x) * std::erfc(x);
    }
    // Continued fraction erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
    double tail = x;
    for (int n = 60; n >= 1; --n) {
        tail = x + (0.5 * n) / tail;
    }
    return kInvSqrtPi / tail;
}

double mills_ratio(double t) {
    return kSqrtHalfPi * erfcx(t / kSqrt2);
}

double chi1_cdf(double x) {
    if (!(x >= 0.0)) {
        throw DomainError("chi1_cdf: x must be >= 0, got " + std::to_string(x));
    }
    return std::erf(std::sqrt(0.5 * x));
}

double chi1_quantile(double p) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw DomainError("chi1_quantile: p must lie in [0, 1), got " + std::to_string(p));
    }
    if (p == 0.0) {
        return 0.0;
    }
    double z = 0.0;
    if (p < 0.5) {
        // Newton on erf(z / sqrt 2) = p keeps full relative precision as p -> 0.
        z = std_normal_quantile(0.5 + 0.5 * p);
        for (int it = 0; it < 2; ++it) {
            const double g = std::erf(z / kSqrt2) - p;
            z -= g / (2.0 * std_normal_pdf(z));
        }
    } else {
        z = -std_normal_quantile(0.5 * (1.0 - p));
    }
    return z * z;
}

TruncatedMoments truncated_moments(double tau) {
    if (!(tau >= 0.0) || !std::isfinite(tau)) {
        throw DomainError("truncated_moments: tau must be finite and >= 0, got " +
                          std::to_string(tau));
    }
    const double ratio = mills_ratio(tau);
    TruncatedMoments m;
    m.tau = tau;
    m.alpha = 2.0 * std_normal_pdf(tau) * (tau + ratio);
    m.beta = 1.0 + tau / ratio;
    return m;
}

}  // namespace sparsenorm
