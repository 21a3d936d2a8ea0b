#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sparsenorm {

enum class CheckKind { Equality, Bound };

// One Monte Carlo check. Equalities pass when |estimate - target| is within
// `tolerance`; bounds pass when |estimate| <= slack * target.
struct IdentityCase {
    std::string params;
    CheckKind kind = CheckKind::Equality;
    double estimate = 0.0;
    double std_err = 0.0;
    double target = 0.0;     // exact value or envelope
    double tolerance = 0.0;  // equality cases only
    bool pass = false;
};

struct IdentityRow {
    std::string label;        // e.g. "pair-squares"
    std::string description;
    std::vector<IdentityCase> cases;
    bool pass = true;
};

struct IdentityReport {
    std::uint64_t seed = 0;
    std::size_t pair_replications = 0;    // bivariate checks
    std::size_t vector_replications = 0;  // d-dimensional checks
    double slack = 100.0;
    std::vector<IdentityRow> rows;
    bool pass() const;
};

struct IdentityOptions {
    std::uint64_t seed = 1;
    std::size_t pair_replications = 1000000;
    std::size_t vector_replications = 100000;
    // Replicates for the vector-valued bound checks; 0 means vector_replications.
    std::size_t bound_vector_replications = 0;
    double slack = 100.0;
    std::size_t dim = 50;
    unsigned threads = 0;
    std::size_t batches = 100;
};

// Eight rows: four pair-* checks on correlated standard normal pairs and
// four vector-* checks on d-dimensional Gaussian vectors.
IdentityReport verify_identities(const IdentityOptions& options);

// Covariance and its batch-means standard error from paired samples.
struct MomentEstimate {
    double value = 0.0;
    double std_err = 0.0;
};
MomentEstimate batch_covariance(const std::vector<double>& x, const std::vector<double>& y,
                                std::size_t batches);

std::string to_csv(const IdentityReport& report);
std::string to_json(const IdentityReport& report);

}  // namespace sparsenorm
