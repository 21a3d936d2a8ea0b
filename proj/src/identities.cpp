#include "sparsenorm/identities.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

#include "sparsenorm/errors.hpp"
#include "sparsenorm/format.hpp"
#include "sparsenorm/gaussian_models.hpp"
#include "sparsenorm/parallel.hpp"
#include "sparsenorm/rng.hpp"
#include "sparsenorm/special_functions.hpp"

namespace sparsenorm {
namespace {

using Pair = std::pair<std::size_t, std::size_t>;

// Running means of every statistic plus co-moments for the requested pairs.
struct Accumulator {
    double n = 0.0;
    std::vector<double> mean;
    std::vector<double> comoment;

    Accumulator(std::size_t nstats, std::size_t npairs) : mean(nstats, 0.0), comoment(npairs, 0.0) {}

    void add(const std::vector<double>& x, const std::vector<Pair>& pairs, std::vector<double>& delta) {
        n += 1.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            delta[k] = x[k] - mean[k];
            mean[k] += delta[k] / n;
        }
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            comoment[p] += delta[pairs[p].first] * (x[pairs[p].second] - mean[pairs[p].second]);
        }
    }

    void merge(const Accumulator& o, const std::vector<Pair>& pairs) {
        if (o.n == 0.0) return;
        const double total = n + o.n;
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            const double dx = o.mean[pairs[p].first] - mean[pairs[p].first];
            const double dy = o.mean[pairs[p].second] - mean[pairs[p].second];
            comoment[p] += o.comoment[p] + dx * dy * n * o.n / total;
        }
        for (std::size_t k = 0; k < mean.size(); ++k) {
            mean[k] += (o.mean[k] - mean[k]) * o.n / total;
        }
        n = total;
    }

    double cov(std::size_t p) const { return comoment[p] / (n - 1.0); }
};

// Covariances for each pair over n replicates, with batch-means standard
// errors. fill(r, stats) writes the statistics of replicate r.
template <class Fill>
std::vector<MomentEstimate> batched(std::size_t n, std::size_t batches, unsigned threads,
                                    std::size_t nstats, const std::vector<Pair>& pairs, Fill fill) {
    if (batches < 2 || n < 2 * batches) throw DomainError("need at least two replicates per batch");
    std::vector<Accumulator> parts(batches, Accumulator(nstats, pairs.size()));
    parallel_for(batches, threads, [&](std::size_t b) {
        std::vector<double> stats(nstats), delta(nstats);
        const std::size_t begin = n * b / batches, end = n * (b + 1) / batches;
        for (std::size_t r = begin; r < end; ++r) {
            fill(r, stats);
            parts[b].add(stats, pairs, delta);
        }
    });
    Accumulator total(nstats, pairs.size());
    for (const auto& part : parts) total.merge(part, pairs);

    std::vector<MomentEstimate> out(pairs.size());
    const double nb = static_cast<double>(batches);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        double m = 0.0, ss = 0.0;
        for (const auto& part : parts) m += part.cov(p);
        m /= nb;
        for (const auto& part : parts) ss += (part.cov(p) - m) * (part.cov(p) - m);
        out[p].value = total.cov(p);
        out[p].std_err = std::sqrt(ss / (nb - 1.0) / nb);
    }
    return out;
}

IdentityCase equality(std::string params, MomentEstimate m, double target, double tol) {
    IdentityCase c;
    c.params = std::move(params);
    c.kind = CheckKind::Equality;
    c.estimate = m.value;
    c.std_err = m.std_err;
    c.target = target;
    c.tolerance = tol;
    c.pass = std::fabs(m.value - target) <= tol;
    return c;
}

IdentityCase bound(std::string params, MomentEstimate m, double envelope, double slack) {
    IdentityCase c;
    c.params = std::move(params);
    c.kind = CheckKind::Bound;
    c.estimate = m.value;
    c.std_err = m.std_err;
    c.target = envelope;
    c.pass = std::fabs(m.value) <= slack * envelope;
    return c;
}

std::string kv(const char* k, double v) { return std::string(k) + "=" + format_number(v); }

void finish(IdentityRow& row) {
    row.pass = true;
    for (const auto& c : row.cases) row.pass = row.pass && c.pass;
}

}  // namespace

bool IdentityReport::pass() const {
    for (const auto& r : rows) if (!r.pass) return false;
    return true;
}

MomentEstimate batch_covariance(const std::vector<double>& x, const std::vector<double>& y,
                                std::size_t batches) {
    if (x.size() != y.size()) throw DimensionError("batch_covariance: lengths differ");
    return batched(x.size(), batches, 1, 2, {{0, 1}}, [&](std::size_t r, std::vector<double>& st) {
        st[0] = x[r];
        st[1] = y[r];
    })[0];
}

IdentityReport verify_identities(const IdentityOptions& opt) {
    if (opt.pair_replications < 1 || opt.vector_replications < 1) {
        throw DomainError("verify_identities: replications must be >= 1");
    }
    IdentityReport report;
    report.seed = opt.seed;
    report.pair_replications = opt.pair_replications;
    report.vector_replications = opt.vector_replications;
    report.slack = opt.slack;

    const std::vector<double> nus_eq{0.0, 0.3, 0.7, 1.0};
    const std::vector<double> nus{0.0, 0.3, 0.7};
    const std::vector<double> taus{1.0, 2.0, 3.0};
    const double mu1 = 0.5, mu2 = -0.3, s1 = 1.0, s2 = 0.8;

    // Pair statistics: squares first, then thresholded, indicator and cosine over (nu, tau).
    std::vector<double> betas;
    for (double t : taus) betas.push_back(truncated_moments(t).beta);
    const std::size_t n_i = nus_eq.size();
    const std::size_t n_grid = nus.size() * taus.size();
    const std::size_t nstats = 2 * (n_i + 3 * n_grid);
    std::vector<Pair> pairs;
    for (std::size_t k = 0; k < nstats / 2; ++k) pairs.push_back({2 * k, 2 * k + 1});

    const std::uint64_t pair_seed = derive_seed(opt.seed, 1);
    const auto pair_est = batched(
        opt.pair_replications, opt.batches, opt.threads, nstats, pairs,
        [&](std::size_t r, std::vector<double>& st) {
            RandomStream rng(SeedPath{pair_seed, r}, Stream::Noise);
            const double zeta = rng.normal();
            const double z = rng.normal();
            std::size_t k = 0;
            for (double nu : nus_eq) {
                const double eta = nu * zeta + std::sqrt(1.0 - nu * nu) * z;
                st[k++] = zeta * zeta;
                st[k++] = eta * eta;
            }
            for (int part = 0; part < 3; ++part) {
                for (double nu : nus) {
                    const double eta = nu * zeta + std::sqrt(1.0 - nu * nu) * z;
                    for (std::size_t j = 0; j < taus.size(); ++j) {
                        const double tau = taus[j];
                        if (part == 0) {
                            st[k++] = std::fabs(zeta) > tau ? zeta * zeta - betas[j] : 0.0;
                            st[k++] = std::fabs(eta) > tau ? eta * eta - betas[j] : 0.0;
                        } else if (part == 1) {
                            st[k++] = zeta * zeta <= tau ? 1.0 : 0.0;
                            st[k++] = eta * eta <= tau ? 1.0 : 0.0;
                        } else {
                            st[k++] = std::cos(tau * (mu1 + s1 * zeta));
                            st[k++] = std::cos(tau * (mu2 + s2 * eta));
                        }
                    }
                }
            }
        });

    std::size_t p = 0;
    IdentityRow li{"pair-squares", "Cov[zeta^2, eta^2] = 2 nu^2", {}, true};
    for (double nu : nus_eq) {
        const auto m = pair_est[p++];
        li.cases.push_back(equality(kv("nu", nu), m, 2.0 * nu * nu, 4.0 * m.std_err));
    }
    IdentityRow lii{"pair-thresholded",
                    "Cov[(zeta^2 - beta) 1{|zeta| > tau}, (eta^2 - beta) 1{|eta| > tau}] <= C nu^2 tau^4 exp(-tau^2/2)",
                    {}, true};
    IdentityRow liii{"pair-indicator",
                     "|Cov[1{zeta^2 <= tau}, 1{eta^2 <= tau}]| <= C nu^2 (tau^2 + 1) exp(-tau/3)", {}, true};
    IdentityRow liv{"pair-cosine",
                    "|Cov[cos(t(mu1 + s1 zeta)), cos(t(mu2 + s2 eta))]| <= C (|nu^2 cos(t mu1) cos(t mu2)| + |nu sin(t mu1) sin(t mu2)|)",
                    {}, true};
    IdentityRow* pair_rows[3] = {&lii, &liii, &liv};
    for (int part = 0; part < 3; ++part) {
        for (double nu : nus) {
            for (double tau : taus) {
                const auto m = pair_est[p++];
                const std::string params = kv("nu", nu) + ";" + kv(part == 2 ? "t" : "tau", tau);
                if (nu == 0.0) {
                    pair_rows[part]->cases.push_back(equality(params, m, 0.0, 4.0 * m.std_err));
                    continue;
                }
                double envelope = 0.0;
                if (part == 0) {
                    envelope = nu * nu * std::pow(tau, 4) * std::exp(-tau * tau / 2.0);
                } else if (part == 1) {
                    envelope = nu * nu * (tau * tau + 1.0) * std::exp(-tau / 3.0);
                } else {
                    envelope = std::fabs(nu * nu * std::cos(tau * mu1) * std::cos(tau * mu2)) +
                               std::fabs(nu * std::sin(tau * mu1) * std::sin(tau * mu2));
                }
                pair_rows[part]->cases.push_back(bound(params, m, envelope, opt.slack));
            }
        }
    }

    // ||eps||^2 = 2 ||Sigma||_F^2 across structured families.
    const std::size_t d = opt.dim;
    IdentityRow pi{"vector-norm-variance", "Var(||eps||_2^2) = 2 ||Sigma||_F^2 (3% relative)", {}, true};
    const std::vector<std::pair<std::string, FamilyDescriptor>> fams{
        {"identity", family::Identity{}},
        {"equicorrelation:0.5", family::Equicorrelation{0.5}},
        {"ar1:0.9", family::AR1{0.9}},
        {"block_ones:5:8", family::BlockOnes{5, 8}},
    };
    for (std::size_t m = 0; m < fams.size(); ++m) {
        const auto model = make_covariance(fams[m].second, d);
        const std::uint64_t seed = derive_seed(opt.seed, 10 + m);
        const auto est = batched(opt.vector_replications, opt.batches, opt.threads, 1, {{0, 0}},
                                 [&](std::size_t r, std::vector<double>& st) {
                                     thread_local std::vector<double> eps;
                                     eps.resize(d);
                                     model.sample_noise(SeedPath{seed, r}, eps);
                                     double q = 0.0;
                                     for (double v : eps) q += v * v;
                                     st[0] = q;
                                 })[0];
        const double f = model.frobenius();
        const double target = 2.0 * f * f;
        pi.cases.push_back(equality(fams[m].first + ";d=" + std::to_string(d), est, target, 0.03 * target));
    }

    // Vector bounds on Equicorrelation(nu).
    const std::size_t bound_reps =
        opt.bound_vector_replications ? opt.bound_vector_replications : opt.vector_replications;
    const std::size_t spikes = 5;
    IdentityRow pii{"vector-thresholded",
                    "Var[sum (eps_i^2 - sigma_i^2 beta) 1{|eps_i| > sigma_i tau}] <= C ||Sigma||_F^2 tau^4 exp(-tau^2/2); "
                    "Var[sum eps_i^2 1{...}] <= C ||Sigma||_F^2 tau^8 exp(-tau^2/3)",
                    {}, true};
    IdentityRow piii{"vector-indicator",
                     "Var[sum 1{eps_i^2 <= sigma_i^2 tau}] <= C ||Sigma~||_F^2 (tau^2 + 1) exp(-tau/3)", {}, true};
    IdentityRow piv{"vector-cosine",
                    "Var[sum cos(t(mu_i + eps_i))] <= C (||Sigma~||_F^2 + s ||Sigma~||_F), s = 5 spikes mu = 1",
                    {}, true};
    const std::vector<double> prop_nus{0.3, 0.7};
    for (std::size_t k = 0; k < prop_nus.size(); ++k) {
        const double nu = prop_nus[k];
        const auto model = make_covariance(family::Equicorrelation{nu}, d);
        const auto diag = model.diag();
        const std::uint64_t seed = derive_seed(opt.seed, 20 + k);
        const std::size_t nst = 4 * taus.size();
        std::vector<Pair> diag_pairs;
        for (std::size_t j = 0; j < nst; ++j) diag_pairs.push_back({j, j});
        const auto est = batched(
            bound_reps, opt.batches, opt.threads, nst, diag_pairs,
            [&](std::size_t r, std::vector<double>& st) {
                thread_local std::vector<double> eps;
                eps.resize(d);
                model.sample_noise(SeedPath{seed, r}, eps);
                for (std::size_t j = 0; j < taus.size(); ++j) {
                    const double tau = taus[j];
                    double a = 0.0, b = 0.0, c = 0.0, cs = 0.0;
                    for (std::size_t i = 0; i < d; ++i) {
                        const double e2 = eps[i] * eps[i];
                        const double sd = std::sqrt(diag[i]);
                        if (std::fabs(eps[i]) > sd * tau) {
                            a += e2 - diag[i] * betas[j];
                            b += e2;
                        }
                        if (e2 <= diag[i] * tau) c += 1.0;
                        cs += std::cos(tau * ((i < spikes ? 1.0 : 0.0) + eps[i]));
                    }
                    st[4 * j] = a;
                    st[4 * j + 1] = b;
                    st[4 * j + 2] = c;
                    st[4 * j + 3] = cs;
                }
            });
        const double f2 = model.frobenius() * model.frobenius();
        const double fc = model.frobenius_corr();
        for (std::size_t j = 0; j < taus.size(); ++j) {
            const double tau = taus[j];
            const std::string params = kv("nu", nu) + ";" + kv("tau", tau) + ";d=" + std::to_string(d);
            pii.cases.push_back(bound(params + ";centered", est[4 * j],
                                      f2 * std::pow(tau, 4) * std::exp(-tau * tau / 2.0), opt.slack));
            pii.cases.push_back(bound(params + ";raw", est[4 * j + 1],
                                      f2 * std::pow(tau, 8) * std::exp(-tau * tau / 3.0), opt.slack));
            piii.cases.push_back(bound(params, est[4 * j + 2],
                                       fc * fc * (tau * tau + 1.0) * std::exp(-tau / 3.0), opt.slack));
            piv.cases.push_back(bound(kv("nu", nu) + ";" + kv("t", tau) + ";d=" + std::to_string(d),
                                      est[4 * j + 3],
                                      fc * fc + static_cast<double>(spikes) * fc, opt.slack));
        }
    }

    for (IdentityRow* row : {&li, &lii, &liii, &liv, &pi, &pii, &piii, &piv}) {
        finish(*row);
        report.rows.push_back(std::move(*row));
    }
    return report;
}

std::string to_csv(const IdentityReport& report) {
    std::ostringstream out;
    out << "label,params,kind,estimate,std_err,target,tolerance,pass\n";
    for (const auto& row : report.rows) {
        for (const auto& c : row.cases) {
            out << row.label << ',' << c.params << ','
                << (c.kind == CheckKind::Equality ? "equality" : "bound") << ','
                << format_number(c.estimate) << ',' << format_number(c.std_err) << ','
                << format_number(c.target) << ',' << format_number(c.tolerance) << ','
                << (c.pass ? "true" : "false") << '\n';
        }
    }
    return out.str();
}

std::string to_json(const IdentityReport& report) {
    nlohmann::ordered_json doc;
    doc["seed"] = report.seed;
    doc["pair_replications"] = report.pair_replications;
    doc["vector_replications"] = report.vector_replications;
    doc["slack"] = report.slack;
    doc["pass"] = report.pass();
    doc["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : report.rows) {
        nlohmann::ordered_json j;
        j["label"] = row.label;
        j["description"] = row.description;
        j["pass"] = row.pass;
        j["cases"] = nlohmann::ordered_json::array();
        for (const auto& c : row.cases) {
            nlohmann::ordered_json cj;
            cj["params"] = c.params;
            cj["kind"] = c.kind == CheckKind::Equality ? "equality" : "bound";
            cj["estimate"] = c.estimate;
            cj["std_err"] = c.std_err;
            cj["target"] = c.target;
            cj["tolerance"] = c.tolerance;
            cj["pass"] = c.pass;
            j["cases"].push_back(cj);
        }
        doc["rows"].push_back(j);
    }
    return doc.dump(2) + "\n";
}

}  // namespace sparsenorm
