#pragma once

// Scalar special functions of the standard normal and chi-square(1) laws.
// Every function here is pure and thread-safe.

namespace sparsenorm {

inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kSqrt2Pi = 2.50662827463100050242;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Standard normal density.
double std_normal_pdf(double x) noexcept;

// Standard normal CDF Phi(x). Accurate in both tails.
double std_normal_cdf(double x);

// Upper tail 1 - Phi(x), computed without cancellation.
double std_normal_sf(double x);

// Inverse of Phi on (0, 1). Rational approximation followed by a
// Halley correction on the tail that carries the relative precision.
// Throws DomainError outside (0, 1).
double std_normal_quantile(double p);

// exp(x^2) * erfc(x), finite for all x >= 0.
double erfcx(double x);

// Mills ratio R(t) = (1 - Phi(t)) / phi(t) for t >= 0.
double mills_ratio(double t);

// CDF of chi-square with one degree of freedom: 2 Phi(sqrt(x)) - 1.
double chi1_cdf(double x);

// Quantile of chi-square(1) on [0, 1). chi1_quantile(0) == 0.
double chi1_quantile(double p);

struct TruncatedMoments {
    double tau = 0.0;
    double alpha = 1.0;  // E[Z^2 1{|Z| >= tau}]
    double beta = 1.0;   // E[Z^2 | |Z| >= tau]
};

// Truncated second moments of a standard normal at threshold tau >= 0.
// Uses the scaled complementary error function, so large tau never yields
// 0/0 in beta; alpha underflows to 0 gracefully.
TruncatedMoments truncated_moments(double tau);

}  // namespace sparsenorm
