#include "sparsenorm/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "sparsenorm/errors.hpp"
#include "sparsenorm/format.hpp"

namespace sparsenorm {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.push_back("");
    return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
    throw ConfigParseError("key '" + key + "': cannot parse '" + value + "' as " + what);
}

double to_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        bad_value(key, text, "a number");
    }
    return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        bad_value(key, text, "a non-negative integer");
    }
    return v;
}

template <class T, class F>
std::vector<T> to_list(const std::string& key, const std::string& value, F convert) {
    std::vector<T> out;
    for (const auto& item : split(value, ',')) {
        if (item.empty()) throw ConfigParseError("key '" + key + "': empty list item");
        out.push_back(convert(key, item));
    }
    return out;
}

NormUnits to_units(const std::string& key, const std::string& value) {
    if (value == "absolute") return NormUnits::Absolute;
    if (value == "rate") return NormUnits::Rate;
    bad_value(key, value, "'absolute' or 'rate'");
}

const char* units_name(NormUnits u) { return u == NormUnits::Absolute ? "absolute" : "rate"; }

SignalShape to_shape(const std::string& key, const std::string& value) {
    try {
        return parse_signal_shape(value);
    } catch (const std::exception&) {
        bad_value(key, value, "a signal shape (flat, single-spike, geometric)");
    }
}

template <class T, class F>
std::string join(const std::vector<T>& items, F fmt) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += fmt(items[i]);
    }
    return out;
}

std::vector<double> read_numbers(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(to_double(path, tok));
    return out;
}

bool is_eta_variant(const std::string& name) {
    return name == "n-star-eta" || name == "n-star-star" || name == "n-star-eta-rho" ||
           name == "sigma-eta";
}

bool needs_rho(const std::string& name) {
    return name == "n-tilde" || name == "n-star-rho" || name == "n-star-eta-rho";
}

}  // namespace

double ScaledValue::resolve(std::size_t d) const {
    return per_sqrt_d ? value * std::sqrt(static_cast<double>(d)) : value;
}

std::string ScaledValue::to_string() const {
    return per_sqrt_d ? format_number(value) + "*sqrt(d)" : format_number(value);
}

ScaledValue parse_scaled_value(const std::string& text) {
    const std::string t = trim(text);
    const std::string suffix = "*sqrt(d)";
    ScaledValue out;
    if (t.size() > suffix.size() && t.compare(t.size() - suffix.size(), suffix.size(), suffix) == 0) {
        out.per_sqrt_d = true;
        out.value = to_double("value", trim(t.substr(0, t.size() - suffix.size())));
    } else {
        out.value = to_double("value", t);
    }
    return out;
}

const std::vector<std::string>& known_estimators() {
    static const std::vector<std::string> names{
        "n-hat",      "n-tilde",        "n-star",  "n-star-eta", "n-star-star",
        "n-star-rho", "n-star-eta-rho", "sigma-S", "sigma-D",    "sigma-eta"};
    return names;
}

void apply_config_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
    auto sizes = [](const std::string& k, const std::string& v) {
        return static_cast<std::size_t>(to_u64(k, v));
    };
    auto strings = [](const std::string&, const std::string& v) { return v; };

    if (key == "experiment.id") {
        c.id = value;
    } else if (key == "experiment.seed") {
        c.seed = to_u64(key, value);
    } else if (key == "experiment.replications") {
        c.replications = static_cast<std::size_t>(to_u64(key, value));
    } else if (key == "experiment.threads") {
        c.threads = static_cast<unsigned>(to_u64(key, value));
    } else if (key == "estimator.name") {
        c.estimator.name = value;
    } else if (key == "estimator.eta") {
        c.estimator.eta = to_double(key, value);
    } else if (key == "estimator.rho") {
        try {
            c.estimator.rho = parse_scaled_value(value);
        } catch (const ConfigParseError&) {
            bad_value(key, value, "a number or 'K*sqrt(d)'");
        }
    } else if (key == "estimator.median_level") {
        c.estimator.noise.median_level = to_double(key, value);
    } else if (key == "grid.d") {
        c.grid.d = to_list<std::size_t>(key, value, sizes);
    } else if (key == "grid.s") {
        c.grid.s = to_list<std::size_t>(key, value, sizes);
    } else if (key == "grid.sigma") {
        c.grid.sigma = to_list<double>(key, value, to_double);
    } else if (key == "grid.family") {
        c.grid.family = to_list<std::string>(key, value, strings);
    } else if (key == "grid.signal") {
        c.grid.signal = to_list<SignalShape>(key, value, to_shape);
    } else if (key == "grid.norm2") {
        c.grid.norm2 = to_list<double>(key, value, to_double);
    } else if (key == "grid.norm2_units") {
        c.grid.norm2_units = to_units(key, value);
    } else if (key == "output.dir") {
        c.output.dir = value;
    } else if (key == "output.stem") {
        c.output.stem = value;
    } else if (key == "output.formats") {
        c.output.csv = c.output.json = c.output.svg = false;
        for (const auto& f : split(value, ',')) {
            if (f == "csv") c.output.csv = true;
            else if (f == "json") c.output.json = true;
            else if (f == "svg") c.output.svg = true;
            else bad_value(key, f, "one of csv, json, svg");
        }
    } else if (key == "power.gamma") {
        c.power.gamma = to_double(key, value);
    } else if (key == "power.rho") {
        try {
            c.power.rho = parse_scaled_value(value);
        } catch (const ConfigParseError&) {
            bad_value(key, value, "a number or 'K*sqrt(d)'");
        }
    } else if (key == "power.radii") {
        c.power.radii = to_list<double>(key, value, to_double);
    } else if (key == "power.radius_units") {
        c.power.radius_units = to_units(key, value);
    } else if (key == "power.nulls") {
        c.power.nulls = to_list<std::string>(key, value, strings);
    } else if (key == "power.alternatives") {
        c.power.alternatives = to_list<std::string>(key, value, strings);
    } else if (key == "power.shape") {
        c.power.shape = to_shape(key, value);
    } else {
        throw ConfigParseError("unknown key '" + key + "'");
    }
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig config;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigParseError("line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigParseError("line " + std::to_string(lineno) + ": empty key");
        if (!seen.insert(key).second) {
            throw ConfigParseError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
        try {
            apply_config_key(config, key, value);
        } catch (const ConfigParseError& e) {
            throw ConfigParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return config;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigValidationError(msg); };
    if (id.empty()) fail("experiment.id must be nonempty");
    if (replications < 1) fail("experiment.replications must be >= 1");
    const auto& names = known_estimators();
    if (std::find(names.begin(), names.end(), estimator.name) == names.end()) {
        fail("estimator.name '" + estimator.name + "' is not a known estimator");
    }
    if (is_eta_variant(estimator.name) && !estimator.eta) {
        fail("estimator '" + estimator.name + "' requires estimator.eta");
    }
    if (estimator.eta && !(*estimator.eta > 0.0 && *estimator.eta < 1.0)) {
        fail("estimator.eta must lie in (0, 1)");
    }
    if (needs_rho(estimator.name) && !estimator.rho) {
        fail("estimator '" + estimator.name + "' requires estimator.rho");
    }
    if (estimator.rho && !(estimator.rho->value > 0.0)) fail("estimator.rho must be > 0");
    if (!(estimator.noise.median_level > 0.0 && estimator.noise.median_level < 1.0)) {
        fail("estimator.median_level must lie in (0, 1)");
    }
    if (grid.d.empty() || grid.s.empty() || grid.sigma.empty() || grid.family.empty() ||
        grid.signal.empty() || grid.norm2.empty()) {
        fail("every grid list must be nonempty");
    }
    for (auto d : grid.d) if (d < 1) fail("grid.d entries must be >= 1");
    for (auto s : grid.s) {
        if (s < 1) fail("grid.s entries must be >= 1");
        for (auto d : grid.d) if (s > d) fail("grid.s entries must not exceed grid.d");
    }
    for (auto v : grid.sigma) if (!(v > 0.0) || !std::isfinite(v)) fail("grid.sigma entries must be > 0");
    for (auto v : grid.norm2) if (!(v >= 0.0) || !std::isfinite(v)) fail("grid.norm2 entries must be >= 0");
    if (!(power.gamma > 0.0)) fail("power.gamma must be > 0");
    if (power.rho && !(power.rho->value > 0.0)) fail("power.rho must be > 0");
    if (power.radii.empty()) fail("power.radii must be nonempty");
    for (auto v : power.radii) if (!(v >= 0.0)) fail("power.radii entries must be >= 0");
    if (power.nulls.empty()) fail("power.nulls must be nonempty");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::resolved() const {
    auto num = [](double v) { return format_number(v); };
    auto sz = [](std::size_t v) { return std::to_string(v); };
    auto str = [](const std::string& v) { return v; };
    auto shape = [](SignalShape v) { return to_string(v); };
    std::string formats;
    if (output.csv) formats += "csv";
    if (output.json) formats += formats.empty() ? "json" : ",json";
    if (output.svg) formats += formats.empty() ? "svg" : ",svg";
    return {
        {"experiment.id", id},
        {"experiment.seed", std::to_string(seed)},
        {"experiment.replications", std::to_string(replications)},
        {"experiment.threads", std::to_string(threads)},
        {"estimator.name", estimator.name},
        {"estimator.eta", estimator.eta ? num(*estimator.eta) : ""},
        {"estimator.rho", estimator.rho ? estimator.rho->to_string() : ""},
        {"estimator.median_level", num(estimator.noise.median_level)},
        {"grid.d", join(grid.d, sz)},
        {"grid.s", join(grid.s, sz)},
        {"grid.sigma", join(grid.sigma, num)},
        {"grid.family", join(grid.family, str)},
        {"grid.signal", join(grid.signal, shape)},
        {"grid.norm2", join(grid.norm2, num)},
        {"grid.norm2_units", units_name(grid.norm2_units)},
        {"output.dir", output.dir},
        {"output.stem", output_stem()},
        {"output.formats", formats},
        {"power.gamma", num(power.gamma)},
        {"power.rho", power.rho ? power.rho->to_string() : ""},
        {"power.radii", join(power.radii, num)},
        {"power.radius_units", units_name(power.radius_units)},
        {"power.nulls", join(power.nulls, str)},
        {"power.alternatives", join(power.alternatives, str)},
        {"power.shape", to_string(power.shape)},
    };
}

CovarianceModel parse_family(const std::string& spec, std::size_t d) {
    const auto parts = split(spec, ':');
    const std::string& kind = parts.empty() ? spec : parts[0];
    auto arity = [&](std::size_t n) {
        if (parts.size() != n) {
            throw ConfigValidationError("family '" + spec + "': expected " +
                                        std::to_string(n - 1) + " parameter(s)");
        }
    };
    auto number = [&](std::size_t i) {
        try {
            return to_double("family", parts[i]);
        } catch (const ConfigParseError&) {
            throw ConfigValidationError("family '" + spec + "': bad parameter '" + parts[i] + "'");
        }
    };
    if (kind == "identity") {
        arity(1);
        return make_covariance(family::Identity{}, d);
    }
    if (kind == "equicorrelation") {
        arity(2);
        return make_covariance(family::Equicorrelation{number(1)}, d);
    }
    if (kind == "block_ones") {
        arity(3);
        const double r = number(1), p = number(2);
        if (r < 1 || p < 1 || r != std::floor(r) || p != std::floor(p)) {
            throw ConfigValidationError("family '" + spec + "': r and p must be positive integers");
        }
        return make_covariance(
            family::BlockOnes{static_cast<std::size_t>(r), static_cast<std::size_t>(p)}, d);
    }
    if (kind == "ar1") {
        arity(2);
        return make_covariance(family::AR1{number(1)}, d);
    }
    if (kind == "diagonal") {
        if (parts.size() == 4 && parts[1] == "linear") {
            const double lo = number(2), hi = number(3);
            std::vector<double> w(d);
            for (std::size_t i = 0; i < d; ++i) {
                w[i] = d == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(d - 1);
            }
            return make_covariance(family::DiagonalScaled{std::move(w)}, d);
        }
        if (parts.size() >= 3 && parts[1] == "file") {
            const std::string path = spec.substr(spec.find("file:") + 5);
            auto w = read_numbers(path);
            if (w.size() != d) {
                throw ConfigValidationError("family '" + spec + "': file holds " +
                                            std::to_string(w.size()) + " weights, d = " +
                                            std::to_string(d));
            }
            return make_covariance(family::DiagonalScaled{std::move(w)}, d);
        }
        throw ConfigValidationError("family '" + spec +
                                    "': expected diagonal:linear:LO:HI or diagonal:file:PATH");
    }
    if (kind == "dense") {
        if (parts.size() < 2) throw ConfigValidationError("family '" + spec + "': missing path");
        const std::string path = spec.substr(6);
        const auto values = read_numbers(path);
        if (values.size() != d * d) {
            throw ConfigValidationError("family '" + spec + "': file holds " +
                                        std::to_string(values.size()) + " entries, expected d^2 = " +
                                        std::to_string(d * d));
        }
        Eigen::MatrixXd m(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) m(i, j) = values[i * d + j];
        return make_covariance(family::DenseExplicit{std::move(m)}, d);
    }
    throw ConfigValidationError("unknown covariance family '" + spec + "'");
}

}  // namespace sparsenorm
