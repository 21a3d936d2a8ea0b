#include "sparsenorm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "sparsenorm/adaptive.hpp"
#include "sparsenorm/errors.hpp"
#include "sparsenorm/format.hpp"
#include "sparsenorm/known_sigma.hpp"
#include "sparsenorm/noise_estimators.hpp"
#include "sparsenorm/parallel.hpp"

namespace sparsenorm {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::uint64_t kSignalChild = 0x5167;

// Neumaier's variant of Kahan summation.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::fabs(sum_) >= std::fabs(v)) comp_ += (sum_ - t) + v;
        else comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string params_with_signal(const CovarianceModel& model, SignalShape shape) {
    const std::string base = model.family_params();
    return (base.empty() ? "" : base + ";") + "signal=" + to_string(shape);
}

double resolve_rho(const EstimatorSpec& spec, const CovarianceModel& model) {
    return spec.rho ? spec.rho->resolve(model.dim()) : model.frobenius();
}

ordered_json config_echo(const ExperimentConfig& config) {
    // Thread count and output directory do not influence results and are left
    // out so outputs stay byte-identical across them.
    ordered_json echo = ordered_json::object();
    for (const auto& [k, v] : config.resolved()) {
        if (k == "experiment.threads" || k == "output.dir") continue;
        echo[k] = v;
    }
    return echo;
}

ordered_json json_number(double v) {
    if (std::isfinite(v)) return v;
    return format_number(v);
}

}  // namespace

bool is_noise_estimator(const std::string& estimator) {
    return estimator.rfind("sigma-", 0) == 0;
}

RateValue rate_for(const std::string& estimator, std::size_t s, const CovarianceModel& model,
                   double rho) {
    const double sd = static_cast<double>(s);
    if (estimator == "n-hat") {
        RateInputs in;
        in.s = s;
        in.d = model.dim();
        in.frob = model.frobenius();
        in.frob_corr = model.frobenius_corr();
        in.lambda_max = model.lambda_max();
        return {"psi", rate_psi(in)};
    }
    if (estimator == "n-tilde") return {"phi_rho", rate_phi(sd, rho * rho)};
    if (estimator == "n-star" || estimator == "n-star-eta" || estimator == "n-star-star") {
        return {"psi_star", rate_psi_star(s, model.frobenius())};
    }
    if (estimator == "n-star-rho" || estimator == "n-star-eta-rho") {
        return {"phi_star_rho", rate_phi_star(sd, rho * rho)};
    }
    if (is_noise_estimator(estimator)) {
        return {"psi_tilde", rate_psi_tilde(s, model.dim(), model.frobenius_corr())};
    }
    throw ConfigValidationError("unknown estimator '" + estimator + "'");
}

double apply_estimator(const EstimatorSpec& spec, std::span<const double> y,
                       const CovarianceModel& model, std::size_t s, double sigma, double rho) {
    const auto diag = model.diag();
    const std::string& name = spec.name;
    if (name == "n-hat") return estimate_norm_known(y, diag, sigma, s, model.frobenius());
    if (name == "n-tilde") return estimate_norm_known_rho(y, diag, sigma, s, rho);
    if (is_noise_estimator(name)) {
        const auto sample = NormalizedSample::from_observations(y, diag);
        if (name == "sigma-S") return sigma_sq_S(sample, spec.noise).value;
        if (name == "sigma-D") {
            return sigma_sq_D(sample, s, model.frobenius_corr(), spec.noise).value;
        }
        if (name == "sigma-eta") {
            if (!spec.eta) throw ConfigValidationError("sigma-eta requires eta");
            return sigma_sq_eta(sample, *spec.eta).value;
        }
    }
    AdaptiveConfig cfg;
    cfg.s = s;
    cfg.diag.assign(diag.begin(), diag.end());
    cfg.frob = model.frobenius();
    cfg.frob_corr = model.frobenius_corr();
    cfg.eta = spec.eta;
    cfg.noise = spec.noise;
    if (name == "n-star") return estimate_norm_star(y, cfg);
    if (name == "n-star-eta") return estimate_norm_star_eta(y, cfg);
    if (name == "n-star-star") return estimate_norm_star_star(y, cfg);
    cfg.frob_corr.reset();
    if (name == "n-star-rho") return estimate_norm_star_rho(y, cfg, rho);
    if (name == "n-star-eta-rho") return estimate_norm_star_eta_rho(y, cfg, rho);
    throw ConfigValidationError("unknown estimator '" + name + "'");
}

std::vector<double> cell_losses(const ExperimentConfig& config, std::size_t d, std::size_t s,
                                double sigma, const CovarianceModel& model, SignalShape shape,
                                double norm2, std::uint64_t cell_seed) {
    const SignalSpec signal =
        make_signal(d, s, shape, norm2, SeedPath{derive_seed(cell_seed, kSignalChild), 0});
    const double rho = resolve_rho(config.estimator, model);
    const bool noise = is_noise_estimator(config.estimator.name);
    const double truth = signal.norm2();
    const double sigma_sq = sigma * sigma;
    std::vector<double> losses(config.replications);
    parallel_for(config.replications, config.threads, [&](std::size_t r) {
        std::vector<double> y(d);
        observe_into(signal, model, sigma, SeedPath{cell_seed, r}, y);
        const double est = apply_estimator(config.estimator, y, model, s, sigma, rho);
        const double err = noise ? est / sigma_sq - 1.0 : est - truth;
        losses[r] = err * err;
    });
    return losses;
}

std::vector<RiskSummary> run_experiment(const ExperimentConfig& config) {
    config.validate();
    const bool noise = is_noise_estimator(config.estimator.name);
    const bool eta_only_sparse =
        config.estimator.name == "n-star-eta" || config.estimator.name == "n-star-eta-rho";

    std::vector<RiskSummary> rows;
    std::uint64_t cell_index = 0;
    for (std::size_t d : config.grid.d) {
        for (std::size_t s : config.grid.s) {
            for (double sigma : config.grid.sigma) {
                for (const auto& fam : config.grid.family) {
                    const CovarianceModel model = parse_family(fam, d);
                    if (model.dim() != d) {
                        throw ConfigValidationError("family '" + fam + "' has dimension " +
                                                    std::to_string(model.dim()) + ", grid d = " +
                                                    std::to_string(d));
                    }
                    const double rho = resolve_rho(config.estimator, model);
                    if (eta_only_sparse) {
                        const double bound = config.estimator.name == "n-star-eta" ? model.frobenius() : rho;
                        if (static_cast<double>(s) > bound) {
                            throw ConfigValidationError(
                                "estimator '" + config.estimator.name +
                                "' is defined only for s <= frob (or rho); got s = " +
                                std::to_string(s));
                        }
                    }
                    const RateValue rate = rate_for(config.estimator.name, s, model, rho);
                    for (SignalShape shape : config.grid.signal) {
                        for (double target : config.grid.norm2) {
                            const double norm2 = config.grid.norm2_units == NormUnits::Rate
                                                     ? target * sigma * std::sqrt(rate.value)
                                                     : target;
                            const std::uint64_t cell_seed = derive_seed(config.seed, cell_index++);
                            const auto losses =
                                cell_losses(config, d, s, sigma, model, shape, norm2, cell_seed);

                            CompensatedSum sum;
                            for (double l : losses) sum.add(l);
                            const double n = static_cast<double>(losses.size());
                            const double mean = sum.value() / n;
                            CompensatedSum dev;
                            for (double l : losses) dev.add((l - mean) * (l - mean));
                            const double var = losses.size() > 1 ? dev.value() / (n - 1.0) : 0.0;

                            RiskSummary row;
                            row.experiment_id = config.id;
                            row.estimator = config.estimator.name;
                            row.d = d;
                            row.s = s;
                            row.sigma = sigma;
                            row.family = model.family_name();
                            row.family_params = params_with_signal(model, shape);
                            row.norm2_target = norm2;
                            row.replications = losses.size();
                            row.mean_sq_err = mean;
                            row.rate_name = rate.name;
                            row.rate_value = rate.value;
                            row.scaled_risk = noise ? std::sqrt(mean) / rate.value
                                                    : mean / (sigma * sigma * rate.value);
                            row.std_err = std::sqrt(var / n);
                            row.seed = config.seed;
                            rows.push_back(std::move(row));
                        }
                    }
                }
            }
        }
    }
    return rows;
}

const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols{
        "experiment_id", "estimator",    "d",           "s",         "sigma",
        "family",        "family_params", "norm2_target", "replications", "mean_sq_err",
        "scaled_risk",   "rate_name",    "rate_value",  "std_err",   "seed"};
    return cols;
}

std::string to_csv(const std::vector<RiskSummary>& rows) {
    std::ostringstream out;
    const auto& cols = csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : rows) {
        out << csv_field(r.experiment_id) << ',' << r.estimator << ',' << r.d << ',' << r.s << ','
            << format_number(r.sigma) << ',' << r.family << ',' << csv_field(r.family_params) << ','
            << format_number(r.norm2_target) << ',' << r.replications << ','
            << format_number(r.mean_sq_err) << ',' << format_number(r.scaled_risk) << ','
            << r.rate_name << ',' << format_number(r.rate_value) << ','
            << format_number(r.std_err) << ',' << r.seed << '\n';
    }
    return out.str();
}

static ordered_json record_json(const RiskSummary& r) {
    ordered_json j;
    j["experiment_id"] = r.experiment_id;
    j["estimator"] = r.estimator;
    j["d"] = r.d;
    j["s"] = r.s;
    j["sigma"] = json_number(r.sigma);
    j["family"] = r.family;
    j["family_params"] = r.family_params;
    j["norm2_target"] = json_number(r.norm2_target);
    j["replications"] = r.replications;
    j["mean_sq_err"] = json_number(r.mean_sq_err);
    j["scaled_risk"] = json_number(r.scaled_risk);
    j["rate_name"] = r.rate_name;
    j["rate_value"] = json_number(r.rate_value);
    j["std_err"] = json_number(r.std_err);
    j["seed"] = r.seed;
    return j;
}

std::string to_json(const ExperimentConfig& config, const std::vector<RiskSummary>& rows) {
    ordered_json doc;
    doc["config"] = config_echo(config);
    doc["records"] = ordered_json::array();
    for (const auto& r : rows) doc["records"].push_back(record_json(r));
    return doc.dump(2) + "\n";
}

namespace {

// In rate units the absolute target changes with s, so series are keyed on
// the configured multiple instead.
std::string norm_label(const ExperimentConfig& config, const RiskSummary& r) {
    if (config.grid.norm2_units == NormUnits::Absolute) return format_number(r.norm2_target);
    const double unit = r.sigma * std::sqrt(r.rate_value);
    double best = config.grid.norm2.front();
    for (double k : config.grid.norm2)
        if (std::fabs(k * unit - r.norm2_target) < std::fabs(best * unit - r.norm2_target)) best = k;
    return format_number(best) + "*sigma*sqrt(rate)";
}

}  // namespace

RateCurve rate_curve(const ExperimentConfig& config) {
    RateCurve curve;
    curve.rows = run_experiment(config);
    const bool noise = is_noise_estimator(config.estimator.name);
    std::vector<std::string> keys;
    std::map<std::string, std::size_t> index;
    for (const auto& r : curve.rows) {
        const std::string key = "d=" + std::to_string(r.d) + " sigma=" + format_number(r.sigma) +
                                " " + r.family + (r.family_params.empty() ? "" : "(" + r.family_params + ")") +
                                " norm=" + norm_label(config, r);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, curve.series.size()).first;
            curve.series.push_back({});
            curve.series.back().label = key;
        }
        auto& series = curve.series[it->second];
        series.s.push_back(static_cast<double>(r.s));
        const double emp = noise ? std::sqrt(r.mean_sq_err) : r.mean_sq_err / (r.sigma * r.sigma);
        series.empirical.push_back(emp);
        series.theoretical.push_back(r.rate_value);
    }
    for (auto& series : curve.series) {
        double log_sum = 0.0, lo = 0.0, hi = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < series.s.size(); ++i) {
            if (!(series.empirical[i] > 0.0) || !(series.theoretical[i] > 0.0)) continue;
            const double ratio = series.empirical[i] / series.theoretical[i];
            log_sum += std::log(ratio);
            lo = count ? std::min(lo, ratio) : ratio;
            hi = count ? std::max(hi, ratio) : ratio;
            ++count;
        }
        series.fitted_constant = count ? std::exp(log_sum / static_cast<double>(count)) : 0.0;
        series.ratio_band = count ? hi / lo : 0.0;
    }
    curve.svg = render_rate_svg(curve.series, config.id + " (" + config.estimator.name + ")");
    return curve;
}

std::string render_rate_svg(const std::vector<RateSeries>& series, const std::string& title) {
    const double width = 760, height = 500;
    const double left = 80, right = 250, top = 50, bottom = 60;
    const double plot_w = width - left - right, plot_h = height - top - bottom;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    auto fitted = [](const RateSeries& s, std::size_t i) {
        return (s.fitted_constant > 0.0 ? s.fitted_constant : 1.0) * s.theoretical[i];
    };
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.s.size(); ++i) {
            if (!(s.s[i] > 0.0)) continue;
            xmin = std::min(xmin, s.s[i]);
            xmax = std::max(xmax, s.s[i]);
            for (double v : {s.empirical[i], fitted(s, i)}) {
                if (v > 0.0 && std::isfinite(v)) {
                    ymin = std::min(ymin, v);
                    ymax = std::max(ymax, v);
                }
            }
        }
    }
    if (!(xmin <= xmax)) xmin = 1, xmax = 10;
    if (!(ymin <= ymax)) ymin = 1, ymax = 10;
    const double lx0 = std::floor(std::log10(xmin)), lx1 = std::max(lx0 + 1, std::ceil(std::log10(xmax)));
    const double ly0 = std::floor(std::log10(ymin)), ly1 = std::max(ly0 + 1, std::ceil(std::log10(ymax)));
    auto px = [&](double x) { return left + (std::log10(x) - lx0) / (lx1 - lx0) * plot_w; };
    auto py = [&](double y) { return top + plot_h - (std::log10(y) - ly0) / (ly1 - ly0) * plot_h; };
    auto f = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << left << "\" y=\"28\" font-size=\"15\">" << title << "</text>\n";
    o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\""
      << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double e = lx0; e <= lx1; e += 1) {
        const double x = left + (e - lx0) / (lx1 - lx0) * plot_w;
        o << "<line x1=\"" << f(x) << "\" y1=\"" << top << "\" x2=\"" << f(x) << "\" y2=\""
          << top + plot_h << "\" stroke=\"#ddd\"/>\n";
        o << "<text x=\"" << f(x) << "\" y=\"" << top + plot_h + 18
          << "\" text-anchor=\"middle\">1e" << static_cast<int>(e) << "</text>\n";
    }
    for (double e = ly0; e <= ly1; e += 1) {
        const double y = top + plot_h - (e - ly0) / (ly1 - ly0) * plot_h;
        o << "<line x1=\"" << left << "\" y1=\"" << f(y) << "\" x2=\"" << left + plot_w
          << "\" y2=\"" << f(y) << "\" stroke=\"#ddd\"/>\n";
        o << "<text x=\"" << left - 8 << "\" y=\"" << f(y + 4)
          << "\" text-anchor=\"end\">1e" << static_cast<int>(e) << "</text>\n";
    }
    o << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 15
      << "\" text-anchor=\"middle\">sparsity s</text>\n";
    o << "<text x=\"20\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
      << top + plot_h / 2 << ")\">risk / sigma^2</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = palette[k % 8];
        std::string emp, theo;
        for (std::size_t i = 0; i < s.s.size(); ++i) {
            if (!(s.s[i] > 0.0)) continue;
            if (s.empirical[i] > 0.0) emp += f(px(s.s[i])) + "," + f(py(s.empirical[i])) + " ";
            if (fitted(s, i) > 0.0) theo += f(px(s.s[i])) + "," + f(py(fitted(s, i))) + " ";
        }
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-dasharray=\"6,4\" points=\""
          << theo << "\"/>\n";
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"" << emp << "\"/>\n";
        for (std::size_t i = 0; i < s.s.size(); ++i) {
            if (s.s[i] > 0.0 && s.empirical[i] > 0.0) {
                o << "<circle cx=\"" << f(px(s.s[i])) << "\" cy=\"" << f(py(s.empirical[i]))
                  << "\" r=\"3\" fill=\"" << color << "\"/>\n";
            }
        }
        const double ly = top + 14 + 34.0 * static_cast<double>(k);
        const double lx = left + plot_w + 12;
        o << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 22 << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\"/>\n";
        o << "<text x=\"" << lx + 28 << "\" y=\"" << ly + 4 << "\" font-size=\"10\">" << s.label
          << "</text>\n";
        o << "<text x=\"" << lx + 28 << "\" y=\"" << ly + 17 << "\" font-size=\"10\">dashed: "
          << format_number(s.fitted_constant) << " x rate</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string to_json(const ExperimentConfig& config, const RateCurve& curve) {
    ordered_json doc;
    doc["config"] = config_echo(config);
    doc["records"] = ordered_json::array();
    for (const auto& r : curve.rows) doc["records"].push_back(record_json(r));
    doc["series"] = ordered_json::array();
    for (const auto& s : curve.series) {
        ordered_json j;
        j["label"] = s.label;
        j["s"] = s.s;
        ordered_json emp = ordered_json::array(), theo = ordered_json::array();
        for (double v : s.empirical) emp.push_back(json_number(v));
        for (double v : s.theoretical) theo.push_back(json_number(v));
        j["empirical"] = emp;
        j["theoretical"] = theo;
        j["fitted_constant"] = json_number(s.fitted_constant);
        j["ratio_band"] = json_number(s.ratio_band);
        doc["series"].push_back(j);
    }
    return doc.dump(2) + "\n";
}

PowerTable run_power(const ExperimentConfig& config) {
    config.validate();
    if (!config.power.rho) throw ConfigValidationError("test-power requires power.rho");
    const std::size_t d = config.grid.d.front();
    const std::size_t s = config.grid.s.front();
    const double sigma = config.grid.sigma.front();
    PowerTable table;
    table.rho = config.power.rho->resolve(d);

    SweepRequest req;
    for (const auto& f : config.power.nulls) req.nulls.push_back(parse_family(f, d));
    for (const auto& f : config.power.alternatives) req.alt_models.push_back(parse_family(f, d));
    for (const auto& m : req.nulls) {
        if (m.dim() != d) throw ConfigValidationError("power.nulls: dimension mismatch");
    }
    for (const auto& m : req.alt_models) {
        if (m.dim() != d) throw ConfigValidationError("power.alternatives: dimension mismatch");
        if (m.frobenius() > table.rho * (1.0 + 1e-12)) {
            throw ConfigValidationError("power.alternatives: family " + m.family_name() + " (" +
                                        m.family_params() + ") has Frobenius norm above rho");
        }
    }
    const double unit = sigma * std::sqrt(rate_phi(static_cast<double>(s), table.rho * table.rho));
    for (double r : config.power.radii) {
        table.radii.push_back(config.power.radius_units == NormUnits::Rate ? r * unit : r);
    }
    req.shape = config.power.shape;
    req.radii = table.radii;
    req.sigma = sigma;
    req.s = s;
    req.rho = table.rho;
    req.gamma = config.power.gamma;
    req.replications = config.replications;
    req.seed = config.seed;
    req.threads = config.threads;
    table.sweep = radius_sweep(req);
    std::sort(table.radii.begin(), table.radii.end());
    table.threshold = detection_threshold(config.power.gamma, sigma, s, table.rho);
    return table;
}

std::string to_csv(const PowerTable& table) {
    std::ostringstream out;
    out << "radius,threshold,type1,type2,total,type1_se,type2_se,replications,alternative_empty\n";
    for (const auto& row : table.sweep.rows) {
        const auto& r = row.risk;
        out << format_number(row.radius) << ',' << format_number(table.threshold) << ','
            << format_number(r.type1) << ',' << format_number(r.type2) << ','
            << format_number(r.total) << ',' << format_number(r.type1_se) << ','
            << format_number(r.type2_se) << ',' << r.replications << ','
            << (r.alternative_empty ? "true" : "false") << '\n';
    }
    return out.str();
}

std::string to_json(const ExperimentConfig& config, const PowerTable& table) {
    ordered_json doc;
    doc["config"] = config_echo(config);
    doc["rho"] = json_number(table.rho);
    doc["threshold"] = json_number(table.threshold);
    doc["type2_monotone"] = table.sweep.type2_monotone;
    doc["note"] = "suprema are maxima over the tested families";
    doc["rows"] = ordered_json::array();
    for (const auto& row : table.sweep.rows) {
        ordered_json j;
        j["radius"] = json_number(row.radius);
        j["type1"] = json_number(row.risk.type1);
        j["type2"] = json_number(row.risk.type2);
        j["total"] = json_number(row.risk.total);
        j["type1_se"] = json_number(row.risk.type1_se);
        j["type2_se"] = json_number(row.risk.type2_se);
        j["replications"] = row.risk.replications;
        j["alternative_empty"] = row.risk.alternative_empty;
        j["null_rejection_rates"] = row.risk.null_rates;
        j["alt_acceptance_rates"] = row.risk.alt_rates;
        doc["rows"].push_back(j);
    }
    return doc.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp + "' for writing");
        out << content;
        out.flush();
        if (!out) {
            std::remove(tmp.c_str());
            throw IoError("failed writing '" + tmp + "'");
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw IoError("cannot rename '" + tmp + "' to '" + path + "'");
    }
}

}  // namespace sparsenorm
