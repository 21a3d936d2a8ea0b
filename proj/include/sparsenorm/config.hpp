#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sparsenorm/gaussian_models.hpp"
#include "sparsenorm/noise_estimators.hpp"

namespace sparsenorm {

// A length that is either absolute or a multiple of sqrt(d), written
// "200" or "2*sqrt(d)".
struct ScaledValue {
    double value = 0.0;
    bool per_sqrt_d = false;

    double resolve(std::size_t d) const;
    std::string to_string() const;
};

ScaledValue parse_scaled_value(const std::string& text);

// How grid.norm2 / power.radii are interpreted: as ||theta||_2 directly, or
// as multiples of sigma sqrt(rate) for the cell's named rate.
enum class NormUnits { Absolute, Rate };

struct EstimatorSpec {
    std::string name = "n-hat";
    std::optional<double> eta;
    std::optional<ScaledValue> rho;
    NoiseOptions noise;
};

struct GridSpec {
    std::vector<std::size_t> d{1000};
    std::vector<std::size_t> s{10};
    std::vector<double> sigma{1.0};
    std::vector<std::string> family{"identity"};
    std::vector<SignalShape> signal{SignalShape::Flat};
    std::vector<double> norm2{0.0};
    NormUnits norm2_units = NormUnits::Absolute;
};

struct OutputSpec {
    std::string dir = ".";
    std::string stem;  // file name stem; defaults to experiment.id
    bool csv = true;
    bool json = true;
    bool svg = true;
};

struct PowerSpec {
    double gamma = 1.0;
    std::optional<ScaledValue> rho;
    std::vector<double> radii{1.0, 2.0, 4.0};
    NormUnits radius_units = NormUnits::Rate;
    std::vector<std::string> nulls{"identity"};
    std::vector<std::string> alternatives{"identity"};
    SignalShape shape = SignalShape::Flat;
};

struct ExperimentConfig {
    std::string id = "experiment";
    std::uint64_t seed = 1;
    std::size_t replications = 100;
    unsigned threads = 0;
    EstimatorSpec estimator;
    GridSpec grid;
    OutputSpec output;
    PowerSpec power;

    // Semantic checks; throws ConfigValidationError.
    void validate() const;
    // Every key with its resolved value, in a fixed order.
    std::vector<std::pair<std::string, std::string>> resolved() const;
    std::string output_stem() const { return output.stem.empty() ? id : output.stem; }
};

// Parses "section.key = value" lines. '#' starts a comment, lists are
// comma-separated, repeated keys are an error. Throws ConfigParseError.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Applies one key to a config; shared by the parser and CLI overrides.
void apply_config_key(ExperimentConfig& config, const std::string& key, const std::string& value);

// Family strings: identity, equicorrelation:G, block_ones:R:P, ar1:RHO,
// diagonal:linear:LO:HI, diagonal:file:PATH, dense:PATH.
CovarianceModel parse_family(const std::string& spec, std::size_t d);

// Estimator names accepted by the harness and the CLI.
const std::vector<std::string>& known_estimators();

}  // namespace sparsenorm
