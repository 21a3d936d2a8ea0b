#include "sparsenorm/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "sparsenorm/adaptive.hpp"
#include "sparsenorm/config.hpp"
#include "sparsenorm/errors.hpp"
#include "sparsenorm/format.hpp"
#include "sparsenorm/harness.hpp"
#include "sparsenorm/identities.hpp"
#include "sparsenorm/known_sigma.hpp"
#include "sparsenorm/noise_estimators.hpp"

namespace sparsenorm {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

struct EstimateFlags {
    std::string method;
    std::string adaptive;
    std::string sigma_method;
    std::optional<double> eta, sigma, frob, rho, frob_corr;
    std::optional<std::size_t> s;
    std::string data, values, diag = "unit", out;
    int column = -1;
    bool json = false;
};

struct RunFlags {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::size_t> replications;
};

struct IdentityFlags {
    std::string out;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::size_t replications = 1000000;
    std::size_t vector_replications = 100000;
};

// Tracks files written by one command so they can be removed on failure.
class OutputSet {
public:
    explicit OutputSet(std::string dir) : dir_(std::move(dir)) {}

    void write(const std::string& name, const std::string& content) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory '" + dir_ + "': " + ec.message());
        const std::string path = (fs::path(dir_) / name).string();
        write_text_file(path, content);
        written_.push_back(path);
    }

    void rollback() {
        for (const auto& p : written_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
        written_.clear();
    }

    const std::vector<std::string>& written() const { return written_; }

private:
    std::string dir_;
    std::vector<std::string> written_;
};

std::vector<double> parse_inline(const std::string& text) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw ConfigParseError("--values: empty item");
        const std::string tok = item.substr(b, e - b + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size()) throw ConfigParseError("--values: cannot parse '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

std::string resolve_method(const EstimateFlags& f) {
    int given = !f.method.empty() + !f.adaptive.empty() + !f.sigma_method.empty();
    if (given != 1) {
        throw ConfigValidationError("exactly one of --method, --adaptive, --sigma-method is required");
    }
    if (!f.method.empty()) {
        const auto& names = known_estimators();
        if (std::find(names.begin(), names.end(), f.method) == names.end()) {
            throw ConfigValidationError("--method: unknown estimator '" + f.method + "'");
        }
        return f.method;
    }
    if (!f.adaptive.empty()) {
        if (f.adaptive == "star") return "n-star";
        if (f.adaptive == "star-eta") return "n-star-eta";
        if (f.adaptive == "star-star") return "n-star-star";
        throw ConfigValidationError("--adaptive: expected star, star-eta or star-star");
    }
    if (f.sigma_method == "S") return "sigma-S";
    if (f.sigma_method == "D") return "sigma-D";
    if (f.sigma_method == "eta") return "sigma-eta";
    throw ConfigValidationError("--sigma-method: expected S, D or eta");
}

template <class T>
const T& need(const std::optional<T>& v, const char* flag, const std::string& method) {
    if (!v) throw ConfigValidationError(std::string("missing ") + flag + " (required by " + method + ")");
    return *v;
}

void put_noise(ordered_json& j, const NoiseEstimate& n, const std::string& prefix) {
    j[prefix + "sigma_sq"] = std::isfinite(n.value) ? ordered_json(n.value) : ordered_json("inf");
    if (n.t_hat) j[prefix + "t_hat"] = *n.t_hat;
    if (n.f_hat_at_t) j[prefix + "f_hat_at_t"] = *n.f_hat_at_t;
    if (n.sigma_tilde_sq) {
        j[prefix + "sigma_tilde_sq"] =
            std::isfinite(*n.sigma_tilde_sq) ? ordered_json(*n.sigma_tilde_sq) : ordered_json("inf");
    }
    if (n.lambda) j[prefix + "lambda"] = *n.lambda;
    if (n.cosine_moment) j[prefix + "cosine_moment"] = *n.cosine_moment;
    if (n.median_square) j[prefix + "median_square"] = *n.median_square;
}

int cmd_estimate(const EstimateFlags& f, std::ostream& out) {
    const std::string method = resolve_method(f);
    if (f.data.empty() == f.values.empty()) {
        throw ConfigValidationError("exactly one of --data or --values is required");
    }
    if (f.s && *f.s < 1) throw ConfigValidationError("--s must be >= 1");
    if (f.sigma && !(*f.sigma > 0.0)) throw ConfigValidationError("--sigma must be > 0");
    if (f.eta && !(*f.eta > 0.0 && *f.eta < 1.0)) throw ConfigValidationError("--eta must lie in (0, 1)");
    for (auto [v, name] : {std::pair{f.frob, "--frob"}, {f.rho, "--rho"}, {f.frob_corr, "--frob-corr"}}) {
        if (v && !(*v > 0.0)) throw ConfigValidationError(std::string(name) + " must be > 0");
    }

    const std::vector<double> y = f.data.empty() ? parse_inline(f.values) : read_vector_file(f.data, f.column);
    if (y.empty()) throw ConfigValidationError("input vector is empty");
    std::vector<double> diag;
    if (f.diag == "unit") {
        diag.assign(y.size(), 1.0);
    } else {
        diag = read_vector_file(f.diag);
        if (diag.size() != y.size()) {
            throw ConfigValidationError("--diag has " + std::to_string(diag.size()) +
                                        " entries but the data has " + std::to_string(y.size()));
        }
    }

    ordered_json j;
    j["estimator"] = method;
    j["d"] = y.size();
    if (method == "n-hat" || method == "n-tilde") {
        const double sigma = need(f.sigma, "--sigma", method);
        const std::size_t s = need(f.s, "--s", method);
        const double bound = method == "n-hat" ? need(f.frob, "--frob", method) : need(f.rho, "--rho", method);
        const auto est = estimate_known_sigma(y, diag, sigma, s, bound);
        j["value"] = est.norm;
        j["q"] = est.q;
        j["regime"] = to_string(est.regime);
        if (est.regime == Regime::Sparse) {
            j["tau"] = est.tau;
            j["beta"] = est.beta;
        }
        j["kept"] = est.kept;
    } else if (method.rfind("sigma-", 0) == 0) {
        const auto sample = NormalizedSample::from_observations(y, diag);
        NoiseEstimate est;
        if (method == "sigma-S") {
            est = sigma_sq_S(sample);
        } else if (method == "sigma-D") {
            const std::size_t s = need(f.s, "--s", method);
            const double fc = f.frob_corr ? *f.frob_corr : need(f.frob, "--frob-corr or --frob", method);
            est = sigma_sq_D(sample, s, fc);
        } else {
            est = sigma_sq_eta(sample, need(f.eta, "--eta", method));
        }
        j["value"] = std::isfinite(est.value) ? ordered_json(est.value) : ordered_json("inf");
        j["sentinel"] = est.sentinel;
        put_noise(j, est, "");
    } else {
        AdaptiveConfig cfg;
        cfg.s = need(f.s, "--s", method);
        cfg.diag = diag;
        cfg.eta = f.eta;
        cfg.frob_corr = f.frob_corr;
        const bool rho_variant = method.size() > 4 && method.compare(method.size() - 4, 4, "-rho") == 0;
        cfg.frob = rho_variant ? need(f.rho, "--rho", method) : need(f.frob, "--frob", method);
        if (method.find("eta") != std::string::npos || method == "n-star-star") need(f.eta, "--eta", method);
        AdaptiveEstimate est;
        if (method == "n-star" || method == "n-star-rho") est = estimate_star(y, cfg);
        else if (method == "n-star-star") est = estimate_star_star(y, cfg);
        else est = estimate_star_eta(y, cfg);
        j["value"] = est.norm;
        j["q"] = est.q;
        j["regime"] = to_string(est.regime);
        j["variant"] = est.noise_eta ? "eta" : "star";
        if (est.regime == Regime::Sparse) {
            j["tau"] = est.tau;
            j["alpha"] = est.alpha;
        }
        j["kept"] = est.kept;
        put_noise(j, est.noise, "noise_");
        if (est.noise_eta) put_noise(j, *est.noise_eta, "noise_eta_");
    }

    if (f.json) {
        out << j.dump(2) << '\n';
    } else {
        for (auto it = j.begin(); it != j.end(); ++it) {
            out << it.key() << ": "
                << (it->is_string() ? it->get<std::string>()
                    : it->is_number_float() ? format_number(it->get<double>())
                                            : it->dump())
                << '\n';
        }
    }
    if (!f.out.empty()) {
        OutputSet outputs(f.out);
        outputs.write("estimate.json", j.dump(2) + "\n");
    }
    return kExitOk;
}

ExperimentConfig load_config(const RunFlags& f) {
    if (f.config.empty()) throw ConfigValidationError("--config is required");
    ExperimentConfig c = parse_config_file(f.config);
    if (f.seed) c.seed = *f.seed;
    if (f.threads) c.threads = *f.threads;
    if (f.replications) c.replications = *f.replications;
    if (!f.out.empty()) c.output.dir = f.out;
    c.validate();
    return c;
}

int cmd_simulate(const RunFlags& f, std::ostream& out) {
    const ExperimentConfig c = load_config(f);
    const auto rows = run_experiment(c);
    OutputSet outputs(c.output.dir);
    try {
        if (c.output.csv) outputs.write(c.output_stem() + ".csv", to_csv(rows));
        if (c.output.json) outputs.write(c.output_stem() + ".json", to_json(c, rows));
    } catch (...) {
        outputs.rollback();
        throw;
    }
    for (const auto& r : rows) {
        out << r.estimator << " d=" << r.d << " s=" << r.s << " sigma=" << format_number(r.sigma)
            << " " << r.family << " norm=" << format_number(r.norm2_target)
            << " mse=" << format_number(r.mean_sq_err) << " scaled=" << format_number(r.scaled_risk)
            << " (" << r.rate_name << ")\n";
    }
    return kExitOk;
}

int cmd_rate_curve(const RunFlags& f, std::ostream& out) {
    const ExperimentConfig c = load_config(f);
    const auto curve = rate_curve(c);
    OutputSet outputs(c.output.dir);
    try {
        if (c.output.csv) outputs.write(c.output_stem() + ".csv", to_csv(curve.rows));
        if (c.output.json) outputs.write(c.output_stem() + ".json", to_json(c, curve));
        if (c.output.svg) outputs.write(c.output_stem() + ".svg", curve.svg);
    } catch (...) {
        outputs.rollback();
        throw;
    }
    for (const auto& s : curve.series) {
        out << s.label << ": constant=" << format_number(s.fitted_constant)
            << " ratio_band=" << format_number(s.ratio_band) << '\n';
    }
    return kExitOk;
}

int cmd_test_power(const RunFlags& f, std::ostream& out) {
    const ExperimentConfig c = load_config(f);
    const auto table = run_power(c);
    OutputSet outputs(c.output.dir);
    try {
        if (c.output.csv) outputs.write(c.output_stem() + "_power.csv", to_csv(table));
        if (c.output.json) outputs.write(c.output_stem() + "_power.json", to_json(c, table));
    } catch (...) {
        outputs.rollback();
        throw;
    }
    for (const auto& row : table.sweep.rows) {
        out << "radius=" << format_number(row.radius) << " type1=" << format_number(row.risk.type1)
            << " type2=" << format_number(row.risk.type2) << " total=" << format_number(row.risk.total)
            << '\n';
    }
    out << "type2 monotone: " << (table.sweep.type2_monotone ? "yes" : "no") << '\n';
    return kExitOk;
}

int cmd_verify(const IdentityFlags& f, std::ostream& out) {
    if (f.replications < 100000) throw ConfigValidationError("--replications must be >= 100000");
    if (f.vector_replications < 1000) throw ConfigValidationError("--vector-replications must be >= 1000");
    IdentityOptions opt;
    opt.seed = f.seed;
    opt.threads = f.threads;
    opt.pair_replications = f.replications;
    opt.vector_replications = f.vector_replications;
    const auto report = verify_identities(opt);
    if (!f.out.empty()) {
        OutputSet outputs(f.out);
        try {
            outputs.write("identities.csv", to_csv(report));
            outputs.write("identities.json", to_json(report));
        } catch (...) {
            outputs.rollback();
            throw;
        }
    }
    for (const auto& row : report.rows) {
        out << (row.pass ? "PASS " : "FAIL ") << row.label << "  " << row.description << '\n';
    }
    return kExitOk;
}

}  // namespace

std::vector<double> read_vector_file(const std::string& path, int column) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<double> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::string field = line;
        if (column >= 0) {
            std::stringstream ss(line);
            std::string cell;
            int idx = 0;
            bool found = false;
            while (std::getline(ss, cell, ',')) {
                if (idx++ == column) {
                    field = cell;
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw ConfigParseError(path + ":" + std::to_string(lineno) + ": no column " +
                                       std::to_string(column));
            }
        }
        std::istringstream fs_(field);
        double v = 0.0;
        std::string rest;
        if (!(fs_ >> v) || (fs_ >> rest)) {
            throw ConfigParseError(path + ":" + std::to_string(lineno) + ": cannot parse '" + field + "'");
        }
        out.push_back(v);
    }
    return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Norm and noise-level estimation for sparse vectors in correlated Gaussian noise",
                 "sparsenorm"};
    app.require_subcommand(1);

    EstimateFlags ef;
    auto* est = app.add_subcommand("estimate", "apply one estimator to a data vector");
    est->add_option("--method", ef.method, "n-hat, n-tilde, n-star, n-star-eta, n-star-star, n-star-rho, n-star-eta-rho, sigma-S, sigma-D, sigma-eta");
    est->add_option("--adaptive", ef.adaptive, "star, star-eta or star-star");
    est->add_option("--sigma-method", ef.sigma_method, "S, D or eta");
    est->add_option("--eta", ef.eta, "confidence parameter in (0, 1)");
    est->add_option("--sigma", ef.sigma, "known noise level");
    est->add_option("--s", ef.s, "sparsity");
    est->add_option("--frob", ef.frob, "Frobenius norm of the covariance");
    est->add_option("--rho", ef.rho, "upper bound on the Frobenius norm");
    est->add_option("--frob-corr", ef.frob_corr, "Frobenius norm of the correlation matrix");
    est->add_option("--data", ef.data, "file with one value per line (or CSV with --column)");
    est->add_option("--column", ef.column, "0-based CSV column of --data");
    est->add_option("--values", ef.values, "inline comma-separated vector");
    est->add_option("--diag", ef.diag, "file of variances sigma_i^2, or 'unit'");
    est->add_option("--out", ef.out, "directory for estimate.json");
    est->add_flag("--json", ef.json, "print JSON instead of key: value lines");

    RunFlags rf;
    auto add_run = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", rf.config, "experiment file (key = value lines)");
        sub->add_option("--out", rf.out, "output directory (overrides output.dir)");
        sub->add_option("--seed", rf.seed, "overrides experiment.seed");
        sub->add_option("--threads", rf.threads, "overrides experiment.threads (0 = all cores)");
        sub->add_option("--replications", rf.replications, "overrides experiment.replications");
        return sub;
    };
    auto* sim = add_run("simulate", "Monte Carlo risk of one estimator over a grid");
    auto* curve = add_run("rate-curve", "risk against s with the theoretical rate, as CSV/JSON/SVG");
    auto* power = add_run("test-power", "detection risk over a radius grid");

    IdentityFlags idf;
    auto* ver = app.add_subcommand("verify-identities", "Monte Carlo check of the covariance identities and bounds");
    ver->add_option("--seed", idf.seed, "seed");
    ver->add_option("--threads", idf.threads, "worker threads (0 = all cores)");
    ver->add_option("--replications", idf.replications, "pairs for the bivariate checks (>= 1e5)");
    ver->add_option("--vector-replications", idf.vector_replications, "draws for the d = 50 checks");
    ver->add_option("--out", idf.out, "directory for identities.csv/json");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitParse;
    }

    try {
        if (*est) return cmd_estimate(ef, out);
        if (*sim) return cmd_simulate(rf, out);
        if (*curve) return cmd_rate_curve(rf, out);
        if (*power) return cmd_test_power(rf, out);
        if (*ver) return cmd_verify(idf, out);
        err << "error: no subcommand\n";
        return kExitParse;
    } catch (const ConfigParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return kExitParse;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const ConfigValidationError& e) {
        err << "invalid input: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << '\n';
        return kExitValidation;
    } catch (const RegimeError& e) {
        err << "invalid input: " << e.what() << '\n';
        return kExitValidation;
    } catch (const DegenerateSampleError& e) {
        err << "invalid input: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}

}  // namespace sparsenorm
