#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sparsenorm/rng.hpp"

namespace sparsenorm {

// ---------------------------------------------------------------------------
// Covariance families

namespace family {

struct Identity {};

// (1 - gamma) I + gamma 1 1^T, gamma in [0, 1].
struct Equicorrelation {
    double gamma = 0.0;
};

// diag(1_{r x r}, ..., 1_{r x r}, I_{d - r p}) with p all-ones blocks.
struct BlockOnes {
    std::size_t r = 1;
    std::size_t p = 1;
};

// Sigma_ij = rho^{|i - j|}, rho in (-1, 1).
struct AR1 {
    double rho = 0.0;
};

// diag(weights); weights are the variances sigma_i^2 and lie in (0, 1].
struct DiagonalScaled {
    std::vector<double> weights;
};

// Arbitrary symmetric PSD matrix, d <= 5000.
struct DenseExplicit {
    Eigen::MatrixXd matrix;
};

}  // namespace family

using FamilyDescriptor = std::variant<family::Identity, family::Equicorrelation, family::BlockOnes,
                                      family::AR1, family::DiagonalScaled, family::DenseExplicit>;

// Largest dimension for which a covariance may be materialized densely.
inline constexpr std::size_t kMaxDenseDim = 5000;

// Immutable structured covariance matrix with cached scalars and an exact
// sampler for N(0, Sigma). Copies share state and are cheap.
class CovarianceModel {
public:
    // Validates parameters and computes cached scalars. `dim` is ignored for
    // DiagonalScaled and DenseExplicit, whose size is implied.
    static CovarianceModel make(const FamilyDescriptor& descriptor, std::size_t dim);

    std::size_t dim() const noexcept;
    const FamilyDescriptor& descriptor() const noexcept;

    // Per-coordinate variances sigma_i^2.
    std::span<const double> diag() const noexcept;
    double frobenius() const noexcept;
    // Frobenius norm of the correlation matrix Sigma_ij / (sigma_i sigma_j).
    // Coordinates with zero variance contribute nothing.
    double frobenius_corr() const noexcept;
    double lambda_max() const noexcept;
    double min_variance() const noexcept;
    double max_variance() const noexcept;

    // Assumption checks: max sigma_i^2 <= 1, and min sigma_i^2 >= floor.
    bool satisfies_max_variance_bound() const noexcept { return max_variance() <= 1.0; }
    bool satisfies_min_variance_floor(double floor) const noexcept {
        return min_variance() >= floor;
    }

    // Short family identifier, e.g. "equicorrelation".
    std::string family_name() const;
    // Parameters as "key=value" pairs joined by ';', e.g. "gamma=0.5".
    std::string family_params() const;

    // Dense Sigma. Throws DomainError if dim() > kMaxDenseDim.
    Eigen::MatrixXd materialize() const;

    // Writes one draw of eps ~ N(0, Sigma) into `out` (size dim()).
    void sample_noise(const SeedPath& path, std::span<double> out) const;
    std::vector<double> sample_noise(const SeedPath& path) const;

    struct State;

private:
    explicit CovarianceModel(std::shared_ptr<const State> state) : state_(std::move(state)) {}
    std::shared_ptr<const State> state_;
};

// Convenience overload.
inline CovarianceModel make_covariance(const FamilyDescriptor& descriptor, std::size_t dim) {
    return CovarianceModel::make(descriptor, dim);
}

// ---------------------------------------------------------------------------
// Signals

enum class SignalShape { Flat, SingleSpike, Geometric };

std::string to_string(SignalShape shape);
SignalShape parse_signal_shape(const std::string& name);

// s-sparse mean vector stored by support and values.
class SignalSpec {
public:
    SignalSpec() = default;
    SignalSpec(std::size_t dim, std::vector<std::size_t> support, std::vector<double> values);

    std::size_t dim() const noexcept { return dim_; }
    std::span<const std::size_t> support() const noexcept { return support_; }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t sparsity() const noexcept { return support_.size(); }
    double norm2() const noexcept { return norm2_; }

    std::vector<double> dense() const;
    // out[i] = theta_i for all i.
    void write_dense(std::span<double> out) const;

private:
    std::size_t dim_ = 0;
    std::vector<std::size_t> support_;
    std::vector<double> values_;
    double norm2_ = 0.0;
};

// Random support drawn without replacement and values scaled so that
// ||theta||_2 equals `norm2_target`. s = 0 or a zero target give theta = 0.
SignalSpec make_signal(std::size_t dim, std::size_t s, SignalShape shape, double norm2_target,
                       const SeedPath& path);

// ---------------------------------------------------------------------------
// Observations

struct Observation {
    std::vector<double> y;
    SignalSpec signal;
    CovarianceModel model;
    double sigma = 1.0;
    SeedPath seed_path;
};

// y = theta + sigma * eps with eps drawn from `model` at `path`.
Observation observe(const SignalSpec& signal, const CovarianceModel& model, double sigma,
                    const SeedPath& path);

// Allocation-free variant of observe(); writes y into `out`.
void observe_into(const SignalSpec& signal, const CovarianceModel& model, double sigma,
                  const SeedPath& path, std::span<double> out);

}  // namespace sparsenorm
