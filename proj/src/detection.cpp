#include "sparsenorm/detection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sparsenorm/errors.hpp"
#include "sparsenorm/known_sigma.hpp"
#include "sparsenorm/parallel.hpp"

namespace sparsenorm {
namespace {

// Seed tags keep null, alternative and signal draws apart.
constexpr std::uint64_t kNullTag = 0x100000;
constexpr std::uint64_t kAltTag = 0x200000;
constexpr std::uint64_t kSignalTag = 0x300000;

double frac_above(const std::vector<double>& stats, double threshold) {
    std::size_t count = 0;
    for (double v : stats) count += v > threshold ? 1 : 0;
    return static_cast<double>(count) / static_cast<double>(stats.size());
}

double binomial_se(double p, std::size_t n) {
    return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

void check_common(double sigma, std::size_t s, double rho, std::size_t replications) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("sigma must be finite and > 0");
    if (s < 1) throw DomainError("s must be >= 1");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("rho must be finite and > 0");
    if (replications < 1) throw DomainError("replications must be >= 1");
}

// Assembles sup type I + sup type II from per-configuration statistics.
RiskEstimate assemble(const std::vector<std::vector<double>>& null_stats,
                      const std::vector<std::vector<double>>& alt_stats, double threshold,
                      std::size_t replications) {
    RiskEstimate out;
    out.replications = replications;
    for (std::size_t j = 0; j < null_stats.size(); ++j) {
        out.null_rates.push_back(frac_above(null_stats[j], threshold));
        if (out.null_rates.back() > out.type1) {
            out.type1 = out.null_rates.back();
            out.worst_null = j;
        }
    }
    for (std::size_t j = 0; j < alt_stats.size(); ++j) {
        out.alt_rates.push_back(1.0 - frac_above(alt_stats[j], threshold));
        if (out.alt_rates.back() > out.type2) {
            out.type2 = out.alt_rates.back();
            out.worst_alt = j;
        }
    }
    out.alternative_empty = alt_stats.empty();
    out.total = out.type1 + out.type2;
    out.type1_se = binomial_se(out.type1, replications);
    out.type2_se = binomial_se(out.type2, replications);
    return out;
}

}  // namespace

double detection_threshold(double gamma, double sigma, std::size_t s, double rho) {
    if (!(gamma > 0.0)) throw DomainError("gamma must be > 0");
    return gamma * sigma * std::sqrt(rate_phi(static_cast<double>(s), rho * rho));
}

TestOutcome run_test(std::span<const double> y, std::span<const double> diag, double sigma,
                     std::size_t s, double rho, double gamma) {
    TestOutcome out;
    out.statistic = estimate_norm_known_rho(y, diag, sigma, s, rho);
    out.threshold = detection_threshold(gamma, sigma, s, rho);
    out.reject = out.statistic > out.threshold;
    return out;
}

double separation_radius(double gamma, double sigma, std::size_t s, double rho) {
    if (!(sigma > 0.0)) throw DomainError("sigma must be > 0");
    if (!(rho > 0.0)) throw DomainError("rho must be > 0");
    return 2.0 * detection_threshold(gamma, sigma, s, rho);
}

std::vector<double> simulate_statistics(const SignalSpec& signal, const CovarianceModel& model,
                                        double sigma, std::size_t s, double rho,
                                        std::size_t replications, std::uint64_t config_seed,
                                        unsigned threads) {
    if (signal.dim() != model.dim()) {
        throw DimensionError("signal dimension " + std::to_string(signal.dim()) +
                             " does not match covariance dimension " +
                             std::to_string(model.dim()));
    }
    std::vector<double> stats(replications);
    parallel_for(replications, threads, [&](std::size_t r) {
        std::vector<double> y(model.dim());
        observe_into(signal, model, sigma, SeedPath{config_seed, r}, y);
        stats[r] = estimate_norm_known_rho(y, model.diag(), sigma, s, rho);
    });
    return stats;
}

RiskEstimate estimate_risk(const RiskRequest& req) {
    check_common(req.sigma, req.s, req.rho, req.replications);
    for (std::size_t j = 0; j < req.alternatives.size(); ++j) {
        const auto& alt = req.alternatives[j];
        if (alt.signal.norm2() < req.radius * (1.0 - 1e-12)) {
            throw DomainError("alternative " + std::to_string(j) + " has ||theta||_2 below the radius");
        }
        if (alt.model.frobenius() > req.rho * (1.0 + 1e-12)) {
            throw DomainError("alternative " + std::to_string(j) +
                              " has a Frobenius norm above rho");
        }
    }
    std::vector<std::vector<double>> null_stats, alt_stats;
    for (std::size_t j = 0; j < req.nulls.size(); ++j) {
        const auto& model = req.nulls[j];
        null_stats.push_back(simulate_statistics(SignalSpec(model.dim(), {}, {}), model, req.sigma,
                                                 req.s, req.rho, req.replications,
                                                 derive_seed(req.seed, kNullTag + j), req.threads));
    }
    for (std::size_t j = 0; j < req.alternatives.size(); ++j) {
        const auto& alt = req.alternatives[j];
        alt_stats.push_back(simulate_statistics(alt.signal, alt.model, req.sigma, req.s, req.rho,
                                                req.replications,
                                                derive_seed(req.seed, kAltTag + j), req.threads));
    }
    return assemble(null_stats, alt_stats,
                    detection_threshold(req.gamma, req.sigma, req.s, req.rho), req.replications);
}

SweepTable radius_sweep(const SweepRequest& req) {
    check_common(req.sigma, req.s, req.rho, req.replications);
    if (req.radii.empty()) throw DomainError("radius grid must be nonempty");
    std::vector<double> radii = req.radii;
    std::sort(radii.begin(), radii.end());
    for (const auto& m : req.alt_models) {
        if (m.frobenius() > req.rho * (1.0 + 1e-12)) {
            throw DomainError("alternative covariance has a Frobenius norm above rho");
        }
    }

    std::vector<std::vector<double>> null_stats;
    for (std::size_t j = 0; j < req.nulls.size(); ++j) {
        const auto& model = req.nulls[j];
        null_stats.push_back(simulate_statistics(SignalSpec(model.dim(), {}, {}), model, req.sigma,
                                                 req.s, req.rho, req.replications,
                                                 derive_seed(req.seed, kNullTag + j), req.threads));
    }
    const double threshold = detection_threshold(req.gamma, req.sigma, req.s, req.rho);

    SweepTable table;
    for (std::size_t k = 0; k < radii.size(); ++k) {
        std::vector<std::vector<double>> alt_stats;
        for (std::size_t j = 0; j < req.alt_models.size(); ++j) {
            const auto& model = req.alt_models[j];
            // Same support and signs at every radius; only the scale moves.
            const SignalSpec signal = make_signal(model.dim(), req.s, req.shape, radii[k],
                                                  SeedPath{derive_seed(req.seed, kSignalTag), j});
            alt_stats.push_back(simulate_statistics(signal, model, req.sigma, req.s, req.rho,
                                                    req.replications,
                                                    derive_seed(req.seed, kAltTag + j),
                                                    req.threads));
        }
        table.rows.push_back({radii[k], assemble(null_stats, alt_stats, threshold,
                                                 req.replications)});
    }
    for (std::size_t k = 1; k < table.rows.size(); ++k) {
        const auto& prev = table.rows[k - 1].risk;
        const auto& cur = table.rows[k].risk;
        const double slack = 2.0 * std::hypot(prev.type2_se, cur.type2_se);
        if (cur.type2 > prev.type2 + slack) table.type2_monotone = false;
    }
    return table;
}

GammaCalibration calibrate_gamma(const GammaCalibrationRequest& req) {
    check_common(req.sigma, req.s, req.rho, req.replications);
    if (!(req.eta > 0.0 && req.eta < 1.0)) throw DomainError("eta must lie in (0, 1)");
    const double unit = req.sigma * std::sqrt(rate_phi(static_cast<double>(req.s), req.rho * req.rho));
    const double denom = unit * unit;

    auto scaled_mse = [&](const SignalSpec& signal, const CovarianceModel& model,
                          std::uint64_t seed) {
        const auto stats = simulate_statistics(signal, model, req.sigma, req.s, req.rho,
                                               req.replications, seed, req.threads);
        double total = 0.0;
        for (double v : stats) total += (v - signal.norm2()) * (v - signal.norm2());
        return total / static_cast<double>(stats.size()) / denom;
    };

    GammaCalibration out;
    for (std::size_t j = 0; j < req.nulls.size(); ++j) {
        const auto& model = req.nulls[j];
        out.scaled_mse.push_back(scaled_mse(SignalSpec(model.dim(), {}, {}), model,
                                            derive_seed(req.seed, kNullTag + j)));
    }
    for (std::size_t k = 0; k < req.radius_multiples.size(); ++k) {
        for (std::size_t j = 0; j < req.alt_models.size(); ++j) {
            const auto& model = req.alt_models[j];
            const SignalSpec signal =
                make_signal(model.dim(), req.s, SignalShape::Flat, req.radius_multiples[k] * unit,
                            SeedPath{derive_seed(req.seed, kSignalTag), j});
            out.scaled_mse.push_back(
                scaled_mse(signal, model, derive_seed(req.seed, kAltTag + 1000 * k + j)));
        }
    }
    double worst = 0.0;
    for (double v : out.scaled_mse) worst = std::max(worst, v);
    out.c_star = 2.0 * worst;
    out.gamma = std::sqrt(out.c_star / req.eta);
    return out;
}

}  // namespace sparsenorm
