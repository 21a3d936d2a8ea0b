#include "sparsenorm/gaussian_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "sparsenorm/errors.hpp"

namespace sparsenorm {

struct CovarianceModel::State {
    FamilyDescriptor descriptor;
    std::size_t dim = 0;
    std::vector<double> diag;
    double frobenius = 0.0;
    double frobenius_corr = 0.0;
    double lambda_max = 0.0;
    double min_variance = 0.0;
    double max_variance = 0.0;
    // DenseExplicit only: Sigma = factor * factor^T.
    Eigen::MatrixXd factor;
};

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string format_number(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

// Number of eigenvalues strictly below x of the symmetric tridiagonal matrix
// (diag a, off-diagonal b), by the Sturm sequence of LDL^T pivots.
std::size_t sturm_count(const std::vector<double>& a, const std::vector<double>& b, double x) {
    std::size_t count = 0;
    double q = a[0] - x;
    for (std::size_t i = 0;; ++i) {
        if (q == 0.0) {
            q = -1e-300;
        }
        if (q < 0.0) {
            ++count;
        }
        if (i + 1 == a.size()) {
            break;
        }
        q = (a[i + 1] - x) - b[i] * b[i] / q;
    }
    return count;
}

// Largest eigenvalue of the AR(1) correlation matrix. Its inverse is
// tridiagonal, so lambda_max = 1 / lambda_min(inverse), found by bisection.
double ar1_lambda_max(double rho, std::size_t d) {
    if (d == 1 || rho == 0.0) {
        return 1.0;
    }
    const double scale = 1.0 / (1.0 - rho * rho);
    std::vector<double> a(d, (1.0 + rho * rho) * scale);
    a.front() = scale;
    a.back() = scale;
    std::vector<double> b(d - 1, -rho * scale);
    // Spectrum of the inverse lies in [(1-|rho|)/(1+|rho|), (1+|rho|)/(1-|rho|)].
    double lo = 0.5 * (1.0 - std::fabs(rho)) / (1.0 + std::fabs(rho));
    double hi = 2.0 * (1.0 + std::fabs(rho)) / (1.0 - std::fabs(rho));
    for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi;
         ++it) {
        const double mid = 0.5 * (lo + hi);
        if (sturm_count(a, b, mid) >= 1) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return 1.0 / (0.5 * (lo + hi));
}

// Squared Frobenius norm of the AR(1) matrix: d + 2 sum_k (d - k) rho^{2k}.
double ar1_frobenius_sq(double rho, std::size_t d) {
    const double r2 = rho * rho;
    double total = static_cast<double>(d);
    double power = 1.0;
    for (std::size_t k = 1; k < d; ++k) {
        power *= r2;
        if (power < 1e-300) {
            break;
        }
        total += 2.0 * static_cast<double>(d - k) * power;
    }
    return total;
}

void require(bool ok, const std::string& message) {
    if (!ok) {
        throw DomainError(message);
    }
}

}  // namespace

CovarianceModel CovarianceModel::make(const FamilyDescriptor& descriptor, std::size_t dim) {
    auto state = std::make_shared<State>();
    state->descriptor = descriptor;

    std::visit(
        Overloaded{
            [&](const family::Identity&) {
                require(dim >= 1, "covariance dimension must be >= 1");
                state->dim = dim;
                state->diag.assign(dim, 1.0);
                state->frobenius = std::sqrt(static_cast<double>(dim));
                state->frobenius_corr = state->frobenius;
                state->lambda_max = 1.0;
            },
            [&](const family::Equicorrelation& f) {
                require(dim >= 1, "covariance dimension must be >= 1");
                require(f.gamma >= 0.0 && f.gamma <= 1.0, "equicorrelation gamma must lie in [0, 1]");
                const double dd = static_cast<double>(dim);
                state->dim = dim;
                state->diag.assign(dim, 1.0);
                state->frobenius = std::sqrt(dd + f.gamma * f.gamma * dd * (dd - 1.0));
                state->frobenius_corr = state->frobenius;
                state->lambda_max = 1.0 - f.gamma + f.gamma * dd;
            },
            [&](const family::BlockOnes& f) {
                require(f.r >= 1 && f.p >= 1, "block_ones needs r >= 1 and p >= 1");
                require(f.r * f.p <= dim, "block_ones needs r * p <= d");
                const double r = static_cast<double>(f.r);
                state->dim = dim;
                state->diag.assign(dim, 1.0);
                state->frobenius =
                    std::sqrt(static_cast<double>(f.p) * r * r + static_cast<double>(dim - f.r * f.p));
                state->frobenius_corr = state->frobenius;
                state->lambda_max = r;
            },
            [&](const family::AR1& f) {
                require(dim >= 1, "covariance dimension must be >= 1");
                require(f.rho > -1.0 && f.rho < 1.0, "ar1 rho must lie in (-1, 1)");
                state->dim = dim;
                state->diag.assign(dim, 1.0);
                state->frobenius = std::sqrt(ar1_frobenius_sq(f.rho, dim));
                state->frobenius_corr = state->frobenius;
                state->lambda_max = ar1_lambda_max(f.rho, dim);
            },
            [&](const family::DiagonalScaled& f) {
                require(!f.weights.empty(), "diagonal weights must be non-empty");
                for (double w : f.weights) {
                    require(w > 0.0 && w <= 1.0, "diagonal weights must lie in (0, 1]");
                }
                state->dim = f.weights.size();
                state->diag = f.weights;
                double sq = 0.0;
                for (double w : f.weights) {
                    sq += w * w;
                }
                state->frobenius = std::sqrt(sq);
                state->frobenius_corr = std::sqrt(static_cast<double>(state->dim));
                state->lambda_max = *std::max_element(f.weights.begin(), f.weights.end());
            },
            [&](const family::DenseExplicit& f) {
                const auto& m = f.matrix;
                require(m.rows() >= 1 && m.rows() == m.cols(), "dense covariance must be square");
                require(static_cast<std::size_t>(m.rows()) <= kMaxDenseDim,
                        "dense covariance larger than 5000 x 5000");
                const double scale = m.cwiseAbs().maxCoeff();
                require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(scale, 1.0),
                        "dense covariance must be symmetric");
                const std::size_t n = static_cast<std::size_t>(m.rows());
                state->dim = n;
                state->diag.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    state->diag[i] = m(i, i);
                    require(state->diag[i] >= 0.0, "dense covariance has a negative variance");
                }
                state->frobenius = m.norm();
                double corr_sq = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    for (std::size_t i = 0; i < n; ++i) {
                        const double v = state->diag[i] * state->diag[j];
                        if (v > 0.0) {
                            corr_sq += m(i, j) * m(i, j) / v;
                        }
                    }
                }
                state->frobenius_corr = std::sqrt(corr_sq);

                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
                require(eig.info() == Eigen::Success, "eigendecomposition failed");
                Eigen::VectorXd values = eig.eigenvalues();
                const double top = values.maxCoeff();
                state->lambda_max = top;
                const double floor = -1e-10 * std::max(top, 0.0);
                for (Eigen::Index k = 0; k < values.size(); ++k) {
                    if (values[k] < floor || (top <= 0.0 && values[k] < 0.0)) {
                        throw DomainError("dense covariance is not positive semidefinite (eigenvalue " +
                                          format_number(values[k]) + ")");
                    }
                    values[k] = std::max(values[k], 0.0);
                }
                state->factor = eig.eigenvectors() * values.cwiseSqrt().asDiagonal();
            },
        },
        descriptor);

    const auto [lo, hi] = std::minmax_element(state->diag.begin(), state->diag.end());
    state->min_variance = *lo;
    state->max_variance = *hi;
    return CovarianceModel(std::move(state));
}

std::size_t CovarianceModel::dim() const noexcept { return state_->dim; }
const FamilyDescriptor& CovarianceModel::descriptor() const noexcept { return state_->descriptor; }
std::span<const double> CovarianceModel::diag() const noexcept { return state_->diag; }
double CovarianceModel::frobenius() const noexcept { return state_->frobenius; }
double CovarianceModel::frobenius_corr() const noexcept { return state_->frobenius_corr; }
double CovarianceModel::lambda_max() const noexcept { return state_->lambda_max; }
double CovarianceModel::min_variance() const noexcept { return state_->min_variance; }
double CovarianceModel::max_variance() const noexcept { return state_->max_variance; }

std::string CovarianceModel::family_name() const {
    return std::visit(Overloaded{
                          [](const family::Identity&) { return std::string("identity"); },
                          [](const family::Equicorrelation&) { return std::string("equicorrelation"); },
                          [](const family::BlockOnes&) { return std::string("block_ones"); },
                          [](const family::AR1&) { return std::string("ar1"); },
                          [](const family::DiagonalScaled&) { return std::string("diagonal"); },
                          [](const family::DenseExplicit&) { return std::string("dense"); },
                      },
                      state_->descriptor);
}

std::string CovarianceModel::family_params() const {
    return std::visit(
        Overloaded{
            [](const family::Identity&) { return std::string(); },
            [](const family::Equicorrelation& f) { return "gamma=" + format_number(f.gamma); },
            [](const family::BlockOnes& f) {
                return "r=" + std::to_string(f.r) + ";p=" + std::to_string(f.p);
            },
            [](const family::AR1& f) { return "rho=" + format_number(f.rho); },
            [](const family::DiagonalScaled& f) {
                return "n=" + std::to_string(f.weights.size());
            },
            [](const family::DenseExplicit& f) {
                return "n=" + std::to_string(f.matrix.rows());
            },
        },
        state_->descriptor);
}

Eigen::MatrixXd CovarianceModel::materialize() const {
    const std::size_t d = dim();
    if (d > kMaxDenseDim) {
        throw DomainError("refusing to materialize a covariance larger than 5000 x 5000");
    }
    const auto n = static_cast<Eigen::Index>(d);
    return std::visit(
        Overloaded{
            [&](const family::Identity&) -> Eigen::MatrixXd { return Eigen::MatrixXd::Identity(n, n); },
            [&](const family::Equicorrelation& f) -> Eigen::MatrixXd {
                Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, n, f.gamma);
                m.diagonal().setOnes();
                return m;
            },
            [&](const family::BlockOnes& f) -> Eigen::MatrixXd {
                Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
                const auto r = static_cast<Eigen::Index>(f.r);
                for (std::size_t b = 0; b < f.p; ++b) {
                    m.block(static_cast<Eigen::Index>(b) * r, static_cast<Eigen::Index>(b) * r, r, r)
                        .setOnes();
                }
                return m;
            },
            [&](const family::AR1& f) -> Eigen::MatrixXd {
                Eigen::MatrixXd m(n, n);
                for (Eigen::Index i = 0; i < n; ++i) {
                    for (Eigen::Index j = 0; j < n; ++j) {
                        m(i, j) = std::pow(f.rho, static_cast<double>(std::abs(i - j)));
                    }
                }
                return m;
            },
            [&](const family::DiagonalScaled& f) -> Eigen::MatrixXd {
                return Eigen::Map<const Eigen::VectorXd>(f.weights.data(), n).asDiagonal();
            },
            [&](const family::DenseExplicit& f) -> Eigen::MatrixXd { return f.matrix; },
        },
        state_->descriptor);
}

void CovarianceModel::sample_noise(const SeedPath& path, std::span<double> out) const {
    const std::size_t d = dim();
    if (out.size() != d) {
        throw DimensionError("sample_noise: output length differs from model dimension");
    }
    RandomStream rng(path, Stream::Noise);
    std::visit(
        Overloaded{
            [&](const family::Identity&) {
                for (auto& v : out) {
                    v = rng.normal();
                }
            },
            [&](const family::Equicorrelation& f) {
                const double shared = std::sqrt(f.gamma) * rng.normal();
                const double own = std::sqrt(1.0 - f.gamma);
                for (auto& v : out) {
                    v = own * rng.normal() + shared;
                }
            },
            [&](const family::BlockOnes& f) {
                std::size_t i = 0;
                for (std::size_t b = 0; b < f.p; ++b) {
                    const double w = rng.normal();
                    for (std::size_t k = 0; k < f.r; ++k) {
                        out[i++] = w;
                    }
                }
                for (; i < d; ++i) {
                    out[i] = rng.normal();
                }
            },
            [&](const family::AR1& f) {
                const double innovation = std::sqrt(1.0 - f.rho * f.rho);
                out[0] = rng.normal();
                for (std::size_t i = 1; i < d; ++i) {
                    out[i] = f.rho * out[i - 1] + innovation * rng.normal();
                }
            },
            [&](const family::DiagonalScaled& f) {
                for (std::size_t i = 0; i < d; ++i) {
                    out[i] = std::sqrt(f.weights[i]) * rng.normal();
                }
            },
            [&](const family::DenseExplicit&) {
                Eigen::VectorXd z(static_cast<Eigen::Index>(d));
                for (Eigen::Index i = 0; i < z.size(); ++i) {
                    z[i] = rng.normal();
                }
                Eigen::Map<Eigen::VectorXd>(out.data(), z.size()).noalias() = state_->factor * z;
            },
        },
        state_->descriptor);
}

std::vector<double> CovarianceModel::sample_noise(const SeedPath& path) const {
    std::vector<double> out(dim());
    sample_noise(path, out);
    return out;
}

// ---------------------------------------------------------------------------

std::string to_string(SignalShape shape) {
    switch (shape) {
        case SignalShape::Flat:
            return "flat";
        case SignalShape::SingleSpike:
            return "single-spike";
        case SignalShape::Geometric:
            return "geometric";
    }
    return "unknown";
}

SignalShape parse_signal_shape(const std::string& name) {
    if (name == "flat") return SignalShape::Flat;
    if (name == "single-spike" || name == "spike") return SignalShape::SingleSpike;
    if (name == "geometric") return SignalShape::Geometric;
    throw DomainError("unknown signal shape '" + name + "'");
}

SignalSpec::SignalSpec(std::size_t dim, std::vector<std::size_t> support, std::vector<double> values)
    : dim_(dim), support_(std::move(support)), values_(std::move(values)) {
    if (support_.size() != values_.size()) {
        throw DimensionError("signal support and values differ in length");
    }
    for (std::size_t k = 0; k < support_.size(); ++k) {
        if (support_[k] >= dim_ || (k > 0 && support_[k] <= support_[k - 1])) {
            throw DomainError("signal support must be strictly increasing and inside [0, d)");
        }
    }
    double sq = 0.0;
    for (double v : values_) {
        sq += v * v;
    }
    norm2_ = std::sqrt(sq);
}

std::vector<double> SignalSpec::dense() const {
    std::vector<double> out(dim_);
    write_dense(out);
    return out;
}

void SignalSpec::write_dense(std::span<double> out) const {
    if (out.size() != dim_) {
        throw DimensionError("signal dimension differs from output length");
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < support_.size(); ++k) {
        out[support_[k]] = values_[k];
    }
}

SignalSpec make_signal(std::size_t dim, std::size_t s, SignalShape shape, double norm2_target,
                       const SeedPath& path) {
    if (dim == 0) {
        throw DomainError("make_signal: d must be >= 1");
    }
    if (s > dim) {
        throw DomainError("make_signal: s = " + std::to_string(s) + " exceeds d = " +
                          std::to_string(dim));
    }
    if (!(norm2_target >= 0.0) || !std::isfinite(norm2_target)) {
        throw DomainError("make_signal: norm2 target must be finite and >= 0");
    }
    if (s == 0 || norm2_target == 0.0) {
        return SignalSpec(dim, {}, {});
    }
    const std::size_t count = shape == SignalShape::SingleSpike ? 1 : s;

    // Floyd's algorithm: uniform subset of size `count` without replacement.
    RandomStream rng(path, Stream::Signal);
    std::vector<std::size_t> picked;
    picked.reserve(count);
    std::unordered_set<std::size_t> seen;
    for (std::size_t j = dim - count; j < dim; ++j) {
        const std::size_t t = static_cast<std::size_t>(rng.below(j + 1));
        const std::size_t choice = seen.contains(t) ? j : t;
        seen.insert(choice);
        picked.push_back(choice);
    }
    std::sort(picked.begin(), picked.end());

    std::vector<double> magnitude(count, 1.0);
    if (shape == SignalShape::Geometric) {
        for (std::size_t k = 0; k < count; ++k) {
            magnitude[k] = std::ldexp(1.0, -static_cast<int>(std::min<std::size_t>(k, 1000)));
        }
    }
    double sq = 0.0;
    for (double m : magnitude) {
        sq += m * m;
    }
    const double scale = norm2_target / std::sqrt(sq);
    std::vector<double> values(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double sign = (rng.next_u64() >> 63) ? -1.0 : 1.0;
        values[k] = sign * scale * magnitude[k];
    }
    return SignalSpec(dim, std::move(picked), std::move(values));
}

// ---------------------------------------------------------------------------

void observe_into(const SignalSpec& signal, const CovarianceModel& model, double sigma,
                  const SeedPath& path, std::span<double> out) {
    if (signal.dim() != model.dim() || out.size() != model.dim()) {
        throw DimensionError("observe: signal, model and output dimensions must agree");
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw DomainError("observe: sigma must be finite and > 0");
    }
    model.sample_noise(path, out);
    for (auto& v : out) {
        v *= sigma;
    }
    const auto support = signal.support();
    const auto values = signal.values();
    for (std::size_t k = 0; k < support.size(); ++k) {
        out[support[k]] += values[k];
    }
}

Observation observe(const SignalSpec& signal, const CovarianceModel& model, double sigma,
                    const SeedPath& path) {
    Observation obs{std::vector<double>(model.dim()), signal, model, sigma, path};
    observe_into(signal, model, sigma, path, obs.y);
    return obs;
}

}  // namespace sparsenorm
