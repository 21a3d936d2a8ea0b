// Acceptance run: one PASS/FAIL line per criterion. Tolerances are fixed here.
// Exits 0 once every criterion has been evaluated; the lines carry the verdict.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "oracles/oracles.hpp"
#include "sparsenorm/adaptive.hpp"
#include "sparsenorm/config.hpp"
#include "sparsenorm/detection.hpp"
#include "sparsenorm/errors.hpp"
#include "sparsenorm/gaussian_models.hpp"
#include "sparsenorm/harness.hpp"
#include "sparsenorm/identities.hpp"
#include "sparsenorm/known_sigma.hpp"
#include "sparsenorm/noise_estimators.hpp"
#include "sparsenorm/rng.hpp"
#include "sparsenorm/special_functions.hpp"

using namespace sparsenorm;

namespace {

// Pinned tolerances.
constexpr double kTruncMomentTol = 1e-10;     // relative, max(1, |reference|)
constexpr double kRoundTripTol = 1e-8;        // absolute on x
constexpr double kPermutationTol = 1e-13;     // relative
constexpr double kHomogeneityTol = 1e-13;     // relative, non-dyadic factors
constexpr double kRiskBand = 3.0;             // cells vs calibrated constant
constexpr double kRateRatioBand = 10.0;
constexpr double kTypeOneLevel = 0.05;
constexpr double kPower = 0.9;

struct Verdict {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

void add(Verdict& v, bool ok, const std::string& what) {
    v.pass = v.pass && ok;
    if (!v.detail.empty()) v.detail += "; ";
    v.detail += what + (ok ? "" : " [fail]");
}

std::vector<double> iid(std::size_t d, double sigma, SeedPath path) {
    RandomStream r(path, Stream::Noise);
    std::vector<double> out(d);
    for (auto& x : out) x = sigma * r.normal();
    return out;
}

// --- 1, 2 -------------------------------------------------------------------

IdentityReport identity_report() {
    IdentityOptions opt;
    opt.seed = 2024;
    opt.pair_replications = 1000000;
    opt.vector_replications = 100000;
    opt.bound_vector_replications = 1000000;
    return verify_identities(opt);
}

Verdict rows_verdict(const IdentityReport& rep, const std::vector<std::string>& labels) {
    Verdict v;
    for (const auto& row : rep.rows) {
        if (std::find(labels.begin(), labels.end(), row.label) == labels.end()) continue;
        std::size_t failed = 0;
        double worst = 0.0;
        for (const auto& c : row.cases) {
            failed += c.pass ? 0 : 1;
            const double r = c.kind == CheckKind::Equality
                                 ? std::fabs(c.estimate - c.target) / std::max(c.tolerance, 1e-300)
                                 : std::fabs(c.estimate) / (rep.slack * c.target);
            worst = std::max(worst, r);
        }
        add(v, failed == 0, row.label + " " + std::to_string(row.cases.size() - failed) + "/" +
                                std::to_string(row.cases.size()) + fmt(" worst %.3g of allowance", worst));
    }
    return v;
}

// --- 3 -------------------------------------------------------------------------

Verdict criterion3() {
    Verdict v;
    double worst = 0.0;
    for (double tau : {0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0}) {
        const auto lib = truncated_moments(tau);
        const auto ref = oracle::truncated_moments_quad(tau);
        worst = std::max(worst, std::fabs(lib.alpha - ref.alpha) / std::max(1.0, std::fabs(ref.alpha)));
        worst = std::max(worst, std::fabs(lib.beta - ref.beta) / std::max(1.0, std::fabs(ref.beta)));
    }
    add(v, worst <= kTruncMomentTol, fmt("truncated moments max rel err %.2e", worst));

    double x_err = 0.0, x_at = 0.0, p_err = 0.0;
    const double lo = std::log(1e-6), hi = std::log(40.0);
    for (int i = 0; i < 200; ++i) {
        const double x = std::exp(lo + (hi - lo) * i / 199.0);
        const double e = std::fabs(chi1_quantile(chi1_cdf(x)) - x);
        if (e > x_err) {
            x_err = e;
            x_at = x;
        }
        const double p = chi1_cdf(x);
        if (p < 1.0) p_err = std::max(p_err, std::fabs(chi1_cdf(chi1_quantile(p)) - p));
    }
    add(v, x_err <= kRoundTripTol,
        fmt("x->x round trip on [1e-6,40] max err %.2e", x_err) + fmt(" at x=%.4g", x_at));
    add(v, p_err <= kRoundTripTol, fmt("p->p round trip max err %.2e", p_err));

    bool strict = true;
    for (int i = 1; i <= 400; ++i) {
        const double tau = 0.025 * i;
        strict = strict && truncated_moments(tau).beta < tau * tau + tau + 1.0;
    }
    const bool at_zero = truncated_moments(0.0).beta <= 1.0;
    add(v, strict, "beta < tau^2+tau+1 on tau in (0,10]");
    add(v, at_zero, "beta(0) = 1 attains the bound at tau = 0");
    return v;
}

// --- 4 -------------------------------------------------------------------------

Verdict criterion4() {
    Verdict v;
    for (double sigma : {0.25, 1.0, 17.0}) {
        int inside = 0;
        for (std::uint64_t r = 0; r < 1000; ++r) {
            const auto s = NormalizedSample::from_normalized(iid(10000, sigma, SeedPath{401, r}));
            const double t = dyadic_threshold(s);
            inside += (t >= sigma * sigma / 3.0 && t <= 1.5 * sigma * sigma) ? 1 : 0;
        }
        add(v, inside >= 990, fmt("sigma=%g", sigma) + " bracketed " + std::to_string(inside) + "/1000");
    }
    RandomStream r(SeedPath{402, 0}, Stream::Auxiliary);
    int mismatches = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t d = 1 + r.below(64);
        std::vector<double> yt(d);
        for (auto& y : yt) {
            switch (trial % 3) {
                case 0: y = r.normal(); break;
                case 1: y = std::ldexp(1.0, static_cast<int>(r.below(13)) - 6); break;
                default: y = std::ldexp(r.normal(), static_cast<int>(r.below(600)) - 300); break;
            }
            if (y == 0.0) y = 1.0;
        }
        const double closed = dyadic_threshold(NormalizedSample::from_normalized(yt));
        mismatches += closed == oracle::dyadic_grid_search(yt, 0.5, -1100, 1100) ? 0 : 1;
    }
    add(v, mismatches == 0, "closed form vs grid search: " + std::to_string(mismatches) + " mismatches in 10000");
    return v;
}

// --- 5 -------------------------------------------------------------------------

Verdict criterion5() {
    Verdict v;
    const std::size_t d = 10000;
    double total = 0.0;
    for (std::uint64_t r = 0; r < 500; ++r)
        total += std::fabs(sigma_sq_S(NormalizedSample::from_normalized(iid(d, 1.0, SeedPath{501, r}))).value - 1.0);
    const double bound = 10.0 * std::sqrt(double(d)) / double(d);
    add(v, total / 500 <= bound, fmt("pure noise mean|S-1| %.4f", total / 500) + fmt(" <= %.2f", bound));

    const std::size_t s = 500;
    const double frob_corr = std::sqrt(double(d));
    double err_s = 0.0, err_d = 0.0;
    for (std::uint64_t r = 0; r < 500; ++r) {
        auto y = iid(d, 1.0, SeedPath{502, r});
        for (std::size_t i = 0; i < s; ++i) y[i * (d / s)] += 5.0;
        const auto sample = NormalizedSample::from_normalized(y);
        err_s += std::fabs(sigma_sq_S(sample).value - 1.0);
        err_d += std::fabs(sigma_sq_D(sample, s, frob_corr).value - 1.0);
    }
    const double ratio = err_s / err_d;
    add(v, ratio >= 1.2,
        fmt("s=500 spikes of 5 sigma: mean|S-1| %.4f", err_s / 500) + fmt(", mean|D-1| %.4f", err_d / 500) +
            fmt(", S/D %.3f (need >= 1.2)", ratio));
    return v;
}

// --- 6 -------------------------------------------------------------------------

Verdict criterion6() {
    Verdict v;
    const std::size_t d = 10000, s = 50;
    const std::vector<double> etas{0.1, 0.5};
    std::vector<int> inside(etas.size(), 0);
    for (std::uint64_t r = 0; r < 2000; ++r) {
        auto y = iid(d, 1.0, SeedPath{601, r});
        for (std::size_t i = 0; i < s; ++i) y[i * (d / s)] += 5.0;
        const auto sample = NormalizedSample::from_normalized(y);
        for (std::size_t k = 0; k < etas.size(); ++k) {
            const double eta = etas[k];
            const double lo = chi1_quantile(eta / 20) / chi1_quantile(1 - eta / 20);
            const double val = sigma_sq_eta(sample, eta).value;
            inside[k] += (val > lo && val < 1.0) ? 1 : 0;
        }
    }
    for (std::size_t k = 0; k < etas.size(); ++k) {
        const double need = 2000 * (1 - etas[k] / 4);
        add(v, inside[k] >= need, fmt("eta=%g", etas[k]) + " covered " + std::to_string(inside[k]) + "/2000");
    }
    return v;
}

// --- 7, 8 ------------------------------------------------------------------------

double cell_risk(const std::vector<RiskSummary>& rows, std::size_t s, double sigma, double norm_units,
                 double rate_value) {
    for (const auto& r : rows)
        if (r.s == s && r.sigma == sigma &&
            std::fabs(r.norm2_target - norm_units * sigma * std::sqrt(rate_value)) <= 1e-9 * (1 + r.norm2_target))
            return r.scaled_risk;
    return NAN;
}

Verdict criterion7() {
    Verdict v;
    const auto config = parse_config_text(
        "experiment.id = known\nexperiment.seed = 701\nexperiment.replications = 300\n"
        "estimator.name = n-hat\ngrid.d = 10000\ngrid.s = 1, 10, 100, 1000\n"
        "grid.norm2 = 0, 1, 10\ngrid.norm2_units = rate\n");
    const auto rows = run_experiment(config);
    double c_cal = NAN;
    for (const auto& r : rows)
        if (r.s == 10 && r.norm2_target == 0.0) c_cal = r.scaled_risk;
    double worst = 0.0;
    std::vector<double> sup_by_s;
    for (std::size_t s : {1u, 10u, 100u, 1000u}) {
        double sup = 0.0;
        for (const auto& r : rows)
            if (r.s == s) sup = std::max(sup, r.scaled_risk);
        sup_by_s.push_back(sup);
        worst = std::max(worst, sup);
    }
    add(v, worst <= kRiskBand * c_cal,
        fmt("C_cal(s=10, theta=0) = %.3g", c_cal) + fmt(", max cell %.3g", worst) +
            fmt(", allowed %.3g", kRiskBand * c_cal));
    const double hi = *std::max_element(sup_by_s.begin(), sup_by_s.end());
    const double lo = *std::min_element(sup_by_s.begin(), sup_by_s.end());
    std::string per_s = "sup over norms by s:";
    for (double x : sup_by_s) per_s += fmt(" %.3g", x);
    add(v, hi / lo <= kRateRatioBand, per_s + fmt(", max/min %.3g", hi / lo));
    return v;
}

Verdict criterion8() {
    Verdict v;
    const std::string base =
        "estimator.name = n-star-star\nestimator.eta = 0.2\nexperiment.replications = 300\n"
        "grid.d = 10000\ngrid.norm2_units = rate\n";
    const auto calib = run_experiment(parse_config_text(
        base + "experiment.id = calib\nexperiment.seed = 801\ngrid.s = 1000\ngrid.sigma = 1\ngrid.norm2 = 0\n"));
    const double c_cal = calib.at(0).scaled_risk;
    const auto rows = run_experiment(parse_config_text(
        base + "experiment.id = adaptive\nexperiment.seed = 802\ngrid.s = 10, 1000\ngrid.sigma = 0.5, 2\n"
               "grid.norm2 = 0, 1, 10\n"));
    double worst = 0.0;
    std::string cells;
    for (const auto& r : rows) {
        worst = std::max(worst, r.scaled_risk);
    }
    for (std::size_t s : {10u, 1000u}) {
        double sup = 0.0;
        for (const auto& r : rows)
            if (r.s == s) sup = std::max(sup, r.scaled_risk);
        cells += fmt(" s=%g:", double(s)) + fmt("%.3g", sup);
    }
    add(v, worst <= kRiskBand * c_cal,
        fmt("C_cal(s=1000, theta=0, sigma=1) = %.3g", c_cal) + fmt(", max cell %.3g", worst) +
            fmt(", allowed %.3g;", kRiskBand * c_cal) + cells);
    return v;
}

// --- 9 -------------------------------------------------------------------------

bool rel_close(double a, double b, double tol) {
    return std::fabs(a - b) <= tol * std::max(std::fabs(a), std::fabs(b)) || a == b;
}

Verdict criterion9() {
    Verdict v;
    RandomStream r(SeedPath{901, 0}, Stream::Auxiliary);
    const std::size_t d = 300;
    std::vector<double> y(d), diag(d);
    for (std::size_t i = 0; i < d; ++i) {
        diag[i] = 0.2 + 0.8 * r.uniform();
        y[i] = (i % 37 == 0 ? 9.0 : 0.0) + std::sqrt(diag[i]) * r.normal();
    }
    const double frob = 12.0;

    // Known sigma: c-homogeneity.
    int dyadic_fail = 0, general_fail = 0;
    for (std::size_t s : {3u, 40u}) {
        const double base = estimate_Q_known(y, diag, 1.0, s, frob);
        for (int k = -6; k <= 6; ++k) {
            const double c = std::ldexp(1.0, k);
            auto cy = y;
            for (auto& x : cy) x *= c;
            dyadic_fail += estimate_Q_known(cy, diag, c, s, frob) == c * c * base ? 0 : 1;
        }
        for (double c : {0.37, 1.9, 3.3, 17.25, 1e-3, 250.0}) {
            auto cy = y;
            for (auto& x : cy) x *= c;
            general_fail += rel_close(estimate_Q_known(cy, diag, c, s, frob), c * c * base, kHomogeneityTol) ? 0 : 1;
        }
    }
    add(v, dyadic_fail == 0, "known-sigma exact for c = 2^k: " + std::to_string(dyadic_fail) + " failures");
    add(v, general_fail == 0, "known-sigma other c within 1e-13: " + std::to_string(general_fail) + " failures");

    // Adaptive: 2^{k/2} equivariance.
    AdaptiveConfig cfg;
    cfg.diag = diag;
    cfg.frob = frob;
    cfg.eta = 0.2;
    int even_fail = 0, odd_fail = 0;
    for (std::size_t s : {3u, 40u}) {
        cfg.s = s;
        const double q0 = estimate_Q_star(y, cfg);
        const double q0_eta = s <= frob ? estimate_Q_star_eta(y, cfg) : 0.0;
        for (int k = -4; k <= 4; ++k) {
            const double f = k % 2 == 0 ? std::ldexp(1.0, k / 2) : std::sqrt(std::ldexp(1.0, k));
            auto sy = y;
            for (auto& x : sy) x *= f;
            const double q = estimate_Q_star(sy, cfg);
            const double q_eta = s <= frob ? estimate_Q_star_eta(sy, cfg) : 0.0;
            if (k % 2 == 0) {
                even_fail += (q == std::ldexp(q0, k) && q_eta == std::ldexp(q0_eta, k)) ? 0 : 1;
            } else {
                odd_fail += (rel_close(q, std::ldexp(q0, k), kHomogeneityTol) &&
                             rel_close(q_eta, std::ldexp(q0_eta, k), kHomogeneityTol))
                                ? 0
                                : 1;
            }
        }
    }
    add(v, even_fail == 0, "adaptive exact for even k: " + std::to_string(even_fail) + " failures");
    add(v, odd_fail == 0, "adaptive odd k within 1e-13: " + std::to_string(odd_fail) + " failures");

    // Permutation invariance.
    int perm_fail = 0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::size_t> idx(d);
        for (std::size_t i = 0; i < d; ++i) idx[i] = i;
        for (std::size_t i = d - 1; i > 0; --i) std::swap(idx[i], idx[r.below(i + 1)]);
        std::vector<double> py(d), pd(d);
        for (std::size_t i = 0; i < d; ++i) {
            py[i] = y[idx[i]];
            pd[i] = diag[idx[i]];
        }
        for (std::size_t s : {3u, 40u}) {
            perm_fail += rel_close(estimate_Q_known(py, pd, 1.0, s, frob), estimate_Q_known(y, diag, 1.0, s, frob),
                                   kPermutationTol)
                             ? 0
                             : 1;
            cfg.s = s;
            AdaptiveConfig pc = cfg;
            pc.diag = pd;
            perm_fail += rel_close(estimate_Q_star(py, pc), estimate_Q_star(y, cfg), kPermutationTol) ? 0 : 1;
        }
    }
    add(v, perm_fail == 0, "permutations within 1e-13: " + std::to_string(perm_fail) + " failures");

    // Literal transcriptions, bit for bit.
    int oracle_fail = 0, evaluated = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + r.below(12);
        std::vector<double> yy(n), dd(n);
        for (std::size_t i = 0; i < n; ++i) {
            dd[i] = 0.05 + 0.95 * r.uniform();
            yy[i] = (r.uniform() < 0.25 ? 12.0 : 1.0) * r.normal();
        }
        const std::size_t s = 1 + r.below(n);
        const double fr = 0.5 + 6.0 * r.uniform();
        const double fc = 0.5 + 6.0 * r.uniform();
        const double sigma = 0.2 + 2.0 * r.uniform();
        const double eta = 0.05 + 0.9 * r.uniform();
        const auto yt = oracle::normalize(yy, dd);
        const auto sample = NormalizedSample::from_normalized(yt);
        AdaptiveConfig c;
        c.s = s;
        c.diag = dd;
        c.frob = fr;
        c.frob_corr = fc;
        c.eta = eta;
        bool ok = estimate_Q_known(yy, dd, sigma, s, fr) == oracle::Q_known(yy, dd, sigma, s, fr);
        ok = ok && sigma_sq_S(sample).value == oracle::sigma_sq_S(yt);
        ok = ok && sigma_sq_D(sample, s, fc).value == oracle::sigma_sq_D(yt, s, fc);
        ok = ok && sigma_sq_eta(sample, eta).value == oracle::sigma_sq_eta(yt, eta);
        try {
            ok = ok && estimate_Q_star(yy, c) == oracle::Q_star(yy, dd, s, fr, fc);
            if (double(s) <= fr) ok = ok && estimate_Q_star_eta(yy, c) == oracle::Q_star_eta(yy, dd, s, fr, eta);
        } catch (const DegenerateSampleError&) {
            // the transcription returns +inf noise here; nothing to compare
        }
        ++evaluated;
        oracle_fail += ok ? 0 : 1;
    }
    add(v, oracle_fail == 0, "transcription bit-equality: " + std::to_string(oracle_fail) + " mismatches in " +
                                 std::to_string(evaluated));
    return v;
}

// --- 10 ------------------------------------------------------------------------

Verdict criterion10() {
    Verdict v;
    const std::size_t d = 10000, s = 10;
    const double rho = 2.0 * std::sqrt(double(d));
    const auto r = static_cast<std::size_t>(std::floor(rho * rho / (2.0 * double(d))));
    const auto identity = make_covariance(family::Identity{}, d);
    const auto equi = make_covariance(family::Equicorrelation{0.3}, d);
    const auto blocks = make_covariance(family::BlockOnes{r, d / r}, d);

    GammaCalibrationRequest cal;
    cal.nulls = {identity, equi, blocks};
    cal.alt_models = {identity, blocks};
    cal.radius_multiples = {1.0, 4.0, 16.0};
    cal.s = s;
    cal.rho = rho;
    cal.eta = kTypeOneLevel;
    cal.replications = 500;
    cal.seed = 1001;
    const auto g = calibrate_gamma(cal);

    const double radius = separation_radius(g.gamma, 1.0, s, rho);
    RiskRequest req;
    req.nulls = cal.nulls;
    for (std::size_t j = 0; j < cal.alt_models.size(); ++j)
        req.alternatives.push_back(
            {make_signal(d, s, SignalShape::Flat, radius, SeedPath{1002, j}), cal.alt_models[j]});
    req.s = s;
    req.rho = rho;
    req.gamma = g.gamma;
    req.radius = radius;
    req.replications = 500;
    req.seed = 1003;
    const auto risk = estimate_risk(req);
    add(v, risk.type1 <= kTypeOneLevel,
        fmt("gamma %.3g", g.gamma) + fmt(" (C* %.3g)", g.c_star) + fmt(", type I %.4f", risk.type1));
    add(v, 1.0 - risk.type2 >= kPower, fmt("power %.4f at 2 gamma sigma sqrt(phi)", 1.0 - risk.type2) +
                                           fmt(" = %.4g", radius));

    SweepRequest sweep;
    sweep.nulls = cal.nulls;
    sweep.alt_models = cal.alt_models;
    const double unit = std::sqrt(rate_phi(double(s), rho * rho));
    sweep.radii = {0.25 * unit, 0.5 * unit, unit, 2.0 * unit, radius};
    sweep.s = s;
    sweep.rho = rho;
    sweep.gamma = g.gamma;
    sweep.replications = 500;
    sweep.seed = 1004;
    const auto table = radius_sweep(sweep);
    std::string t2 = "type II over sweep:";
    for (const auto& row : table.rows) t2 += fmt(" %.3f", row.risk.type2);
    add(v, table.type2_monotone, t2);
    return v;
}

// --- 11 ------------------------------------------------------------------------

Verdict criterion11() {
    Verdict v;
    const std::string text =
        "experiment.id = repro\nexperiment.seed = 1101\nexperiment.replications = 64\n"
        "estimator.name = n-star-star\nestimator.eta = 0.2\ngrid.d = 2000\ngrid.s = 3, 60\n"
        "grid.family = identity, ar1:0.5, equicorrelation:0.01\ngrid.norm2 = 0, 2\ngrid.norm2_units = rate\n"
        "power.rho = 2*sqrt(d)\npower.radii = 0.5, 3\n";
    std::string csv[3], json[3], curve_json[3], svg[3], power[3];
    const unsigned threads[3] = {1, 2, 7};
    for (int i = 0; i < 3; ++i) {
        auto c = parse_config_text(text);
        c.threads = threads[i];
        const auto rows = run_experiment(c);
        csv[i] = to_csv(rows);
        json[i] = to_json(c, rows);
        auto rc = rate_curve(c);
        curve_json[i] = to_json(c, rc);
        svg[i] = rc.svg;
        power[i] = to_csv(run_power(c));
    }
    auto same = [](const std::string* a) { return a[0] == a[1] && a[1] == a[2]; };
    add(v, same(csv), "simulate csv");
    add(v, same(json), "simulate json");
    add(v, same(curve_json) && same(svg), "rate-curve json/svg");
    add(v, same(power), "test-power csv");
    v.detail += " (threads 1, 2, 7)";
    return v;
}

}  // namespace

int main() {
    using clock = std::chrono::steady_clock;
    int failed = 0;
    auto report = [&](int id, const std::function<Verdict()>& fn) {
        const auto t0 = clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(clock::now() - t0).count();
        failed += v.pass ? 0 : 1;
        std::printf("criterion %2d: %s  %s  (%.1fs)\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
        std::fflush(stdout);
    };

    IdentityReport identities;
    report(1, [&] {
        identities = identity_report();
        return rows_verdict(identities, {"pair-squares", "vector-norm-variance"});
    });
    report(2, [&] {
        return rows_verdict(identities, {"pair-thresholded", "pair-indicator", "pair-cosine", "vector-thresholded", "vector-indicator", "vector-cosine"});
    });
    report(3, criterion3);
    report(4, criterion4);
    report(5, criterion5);
    report(6, criterion6);
    report(7, criterion7);
    report(8, criterion8);
    report(9, criterion9);
    report(10, criterion10);
    report(11, criterion11);
    std::printf("%d of 11 criteria passed\n", 11 - failed);
    return 0;
}
