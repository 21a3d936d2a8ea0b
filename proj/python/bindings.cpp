#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sparsenorm/adaptive.hpp"
#include "sparsenorm/config.hpp"
#include "sparsenorm/detection.hpp"
#include "sparsenorm/errors.hpp"
#include "sparsenorm/gaussian_models.hpp"
#include "sparsenorm/harness.hpp"
#include "sparsenorm/known_sigma.hpp"
#include "sparsenorm/noise_estimators.hpp"
#include "sparsenorm/special_functions.hpp"

namespace py = pybind11;
using namespace sparsenorm;

namespace {

using Vec = std::vector<double>;

Vec unit_or(const std::optional<Vec>& diag, std::size_t d) {
    return diag ? *diag : Vec(d, 1.0);
}

py::array_t<double> to_array(const Vec& v) {
    return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::dict noise_dict(const NoiseEstimate& n) {
    py::dict out;
    out["value"] = n.value;
    out["method"] = to_string(n.method);
    out["sentinel"] = n.sentinel;
    if (n.t_hat) out["t_hat"] = *n.t_hat;
    if (n.f_hat_at_t) out["f_hat_at_t"] = *n.f_hat_at_t;
    if (n.sigma_tilde_sq) out["sigma_tilde_sq"] = *n.sigma_tilde_sq;
    if (n.lambda) out["lambda"] = *n.lambda;
    if (n.cosine_moment) out["cosine_moment"] = *n.cosine_moment;
    if (n.median_square) out["median_square"] = *n.median_square;
    return out;
}

AdaptiveConfig adaptive_config(std::size_t d, std::size_t s, double frob,
                               const std::optional<Vec>& diag, std::optional<double> frob_corr,
                               std::optional<double> eta) {
    AdaptiveConfig cfg;
    cfg.s = s;
    cfg.diag = unit_or(diag, d);
    cfg.frob = frob;
    cfg.frob_corr = frob_corr;
    cfg.eta = eta;
    return cfg;
}

py::dict adaptive_dict(const AdaptiveEstimate& e) {
    py::dict out;
    out["q"] = e.q;
    out["norm"] = e.norm;
    out["regime"] = to_string(e.regime);
    out["tau"] = e.tau;
    out["alpha"] = e.alpha;
    out["kept"] = e.kept;
    out["noise"] = noise_dict(e.noise);
    if (e.noise_eta) out["noise_eta"] = noise_dict(*e.noise_eta);
    return out;
}

}  // namespace

PYBIND11_MODULE(_sparsenorm, m) {
    m.doc() = "Norm and noise-level estimation for sparse vectors in correlated Gaussian noise";

    py::register_exception<DegenerateSampleError>(m, "DegenerateSampleError", PyExc_RuntimeError);
    py::register_exception<RegimeError>(m, "RegimeError", PyExc_ValueError);
    py::register_exception<ConfigParseError>(m, "ConfigParseError", PyExc_ValueError);

    // special functions
    m.def("std_normal_cdf", &std_normal_cdf, py::arg("x"));
    m.def("std_normal_quantile", &std_normal_quantile, py::arg("p"));
    m.def("chi1_cdf", &chi1_cdf, py::arg("x"));
    m.def("chi1_quantile", &chi1_quantile, py::arg("p"));
    m.def("mills_ratio", &mills_ratio, py::arg("t"));
    m.def("truncated_moments", [](double tau) {
        const auto t = truncated_moments(tau);
        return py::make_tuple(t.alpha, t.beta);
    }, py::arg("tau"), "(alpha, beta) = (E[Z^2 1{|Z| >= tau}], E[Z^2 | |Z| >= tau])");

    // rates
    m.def("rate_phi", &rate_phi, py::arg("s"), py::arg("t"));
    m.def("rate_phi_star", &rate_phi_star, py::arg("s"), py::arg("t"));
    m.def("rate_psi_star", &rate_psi_star, py::arg("s"), py::arg("frob"));
    m.def("rate_psi_tilde", &rate_psi_tilde, py::arg("s"), py::arg("d"), py::arg("frob_corr"));

    // covariance models and sampling
    py::class_<CovarianceModel>(m, "CovarianceModel")
        .def_static("from_spec", &parse_family, py::arg("spec"), py::arg("d"),
                    "Build from a family string such as 'equicorrelation:0.5'.")
        .def_static("dense", [](const Eigen::MatrixXd& mat) {
            return make_covariance(family::DenseExplicit{mat}, static_cast<std::size_t>(mat.rows()));
        }, py::arg("matrix"))
        .def_property_readonly("dim", &CovarianceModel::dim)
        .def_property_readonly("frobenius", &CovarianceModel::frobenius)
        .def_property_readonly("frobenius_corr", &CovarianceModel::frobenius_corr)
        .def_property_readonly("lambda_max", &CovarianceModel::lambda_max)
        .def_property_readonly("family_name", &CovarianceModel::family_name)
        .def_property_readonly("family_params", &CovarianceModel::family_params)
        .def_property_readonly("diag", [](const CovarianceModel& c) {
            return to_array(Vec(c.diag().begin(), c.diag().end()));
        })
        .def("sample_noise", [](const CovarianceModel& c, std::uint64_t seed, std::uint64_t replicate) {
            return to_array(c.sample_noise(SeedPath{seed, replicate}));
        }, py::arg("seed"), py::arg("replicate") = 0);

    m.def("make_signal", [](std::size_t d, std::size_t s, const std::string& shape, double norm,
                            std::uint64_t seed, std::uint64_t replicate) {
        return to_array(make_signal(d, s, parse_signal_shape(shape), norm, SeedPath{seed, replicate}).dense());
    }, py::arg("d"), py::arg("s"), py::arg("shape") = "flat", py::arg("norm") = 1.0,
       py::arg("seed") = 0, py::arg("replicate") = 0);

    m.def("observe", [](const Vec& theta, const CovarianceModel& model, double sigma,
                        std::uint64_t seed, std::uint64_t replicate) {
        std::vector<std::size_t> support;
        Vec values;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            if (theta[i] != 0.0) {
                support.push_back(i);
                values.push_back(theta[i]);
            }
        }
        const SignalSpec signal(theta.size(), support, values);
        return to_array(observe(signal, model, sigma, SeedPath{seed, replicate}).y);
    }, py::arg("theta"), py::arg("model"), py::arg("sigma"), py::arg("seed") = 0,
       py::arg("replicate") = 0);

    // known sigma
    m.def("estimate_known_sigma", [](const Vec& y, double sigma, std::size_t s, double frob,
                                     const std::optional<Vec>& diag) {
        const auto e = estimate_known_sigma(y, unit_or(diag, y.size()), sigma, s, frob);
        py::dict out;
        out["q"] = e.q;
        out["norm"] = e.norm;
        out["regime"] = to_string(e.regime);
        out["tau"] = e.tau;
        out["beta"] = e.beta;
        out["kept"] = e.kept;
        return out;
    }, py::arg("y"), py::arg("sigma"), py::arg("s"), py::arg("frob"), py::arg("diag") = py::none());
    m.def("estimate_norm_known", [](const Vec& y, double sigma, std::size_t s, double frob,
                                    const std::optional<Vec>& diag) {
        return estimate_norm_known(y, unit_or(diag, y.size()), sigma, s, frob);
    }, py::arg("y"), py::arg("sigma"), py::arg("s"), py::arg("frob"), py::arg("diag") = py::none());

    // noise level
    m.def("sigma_sq_S", [](const Vec& y, const std::optional<Vec>& diag) {
        return noise_dict(sigma_sq_S(NormalizedSample::from_observations(y, unit_or(diag, y.size()))));
    }, py::arg("y"), py::arg("diag") = py::none());
    m.def("sigma_sq_D", [](const Vec& y, std::size_t s, double frob_corr, const std::optional<Vec>& diag) {
        return noise_dict(sigma_sq_D(NormalizedSample::from_observations(y, unit_or(diag, y.size())), s, frob_corr));
    }, py::arg("y"), py::arg("s"), py::arg("frob_corr"), py::arg("diag") = py::none());
    m.def("sigma_sq_eta", [](const Vec& y, double eta, const std::optional<Vec>& diag) {
        return noise_dict(sigma_sq_eta(NormalizedSample::from_observations(y, unit_or(diag, y.size())), eta));
    }, py::arg("y"), py::arg("eta"), py::arg("diag") = py::none());
    m.def("dyadic_threshold", [](const Vec& y, const std::optional<Vec>& diag) {
        return dyadic_threshold(NormalizedSample::from_observations(y, unit_or(diag, y.size())));
    }, py::arg("y"), py::arg("diag") = py::none());

    // unknown sigma
    m.def("estimate_star", [](const Vec& y, std::size_t s, double frob, const std::optional<Vec>& diag,
                              std::optional<double> frob_corr) {
        return adaptive_dict(estimate_star(y, adaptive_config(y.size(), s, frob, diag, frob_corr, std::nullopt)));
    }, py::arg("y"), py::arg("s"), py::arg("frob"), py::arg("diag") = py::none(),
       py::arg("frob_corr") = py::none());
    m.def("estimate_star_eta", [](const Vec& y, std::size_t s, double frob, double eta,
                                  const std::optional<Vec>& diag) {
        return adaptive_dict(estimate_star_eta(y, adaptive_config(y.size(), s, frob, diag, std::nullopt, eta)));
    }, py::arg("y"), py::arg("s"), py::arg("frob"), py::arg("eta"), py::arg("diag") = py::none());
    m.def("estimate_star_star", [](const Vec& y, std::size_t s, double frob, double eta,
                                   const std::optional<Vec>& diag, std::optional<double> frob_corr) {
        return adaptive_dict(estimate_star_star(y, adaptive_config(y.size(), s, frob, diag, frob_corr, eta)));
    }, py::arg("y"), py::arg("s"), py::arg("frob"), py::arg("eta"), py::arg("diag") = py::none(),
       py::arg("frob_corr") = py::none());

    // detection
    m.def("run_test", [](const Vec& y, double sigma, std::size_t s, double rho, double gamma,
                         const std::optional<Vec>& diag) {
        const auto t = run_test(y, unit_or(diag, y.size()), sigma, s, rho, gamma);
        return py::make_tuple(t.reject, t.statistic, t.threshold);
    }, py::arg("y"), py::arg("sigma"), py::arg("s"), py::arg("rho"), py::arg("gamma"),
       py::arg("diag") = py::none(), "(reject, statistic, threshold)");
    m.def("separation_radius", &separation_radius, py::arg("gamma"), py::arg("sigma"), py::arg("s"),
          py::arg("rho"));

    // experiments
    m.def("run_experiment_csv", [](const std::string& config_text) {
        const auto config = parse_config_text(config_text);
        py::gil_scoped_release release;
        return to_csv(run_experiment(config));
    }, py::arg("config_text"), "Run a key = value experiment and return the CSV text.");
}
