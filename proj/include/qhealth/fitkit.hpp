#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qhealth/common.hpp"

namespace qhealth {

/// Curve models fitted from characterization experiments.
///   ExpDecay: A exp(-t/T) + B                      params (A, B, T)
///   Ramsey:   A exp(-t/T) cos(w t + phi) + B       params (A, B, T, w, phi)
///   RBDecay:  A p^m + B                            params (A, B, p)
enum class CurveModel { ExpDecay, Ramsey, RBDecay };

std::string_view to_string(CurveModel m) noexcept;
CurveModel parse_curve_model(std::string_view token);
std::vector<std::string_view> parameter_names(CurveModel m);
Eigen::Index parameter_count(CurveModel m) noexcept;

/// Model value at x. `params` must have parameter_count(model) entries.
template <typename Derived>
typename Derived::Scalar model_value(CurveModel model, const Eigen::MatrixBase<Derived>& params,
                                     typename Derived::Scalar x) {
    using std::cos;
    using std::exp;
    using std::pow;
    switch (model) {
    case CurveModel::ExpDecay: return params(0) * exp(-x / params(2)) + params(1);
    case CurveModel::Ramsey:
        return params(0) * exp(-x / params(2)) * cos(params(3) * x + params(4)) + params(1);
    case CurveModel::RBDecay: return params(0) * pow(params(2), x) + params(1);
    }
    return typename Derived::Scalar(0);
}

/// Analytic gradient of model_value with respect to the parameters.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
model_gradient(CurveModel model, const Eigen::MatrixBase<Derived>& params,
               typename Derived::Scalar x) {
    using Scalar = typename Derived::Scalar;
    using std::cos;
    using std::exp;
    using std::pow;
    using std::sin;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> g(params.size());
    switch (model) {
    case CurveModel::ExpDecay: {
        const Scalar e = exp(-x / params(2));
        g << e, Scalar(1), params(0) * e * x / (params(2) * params(2));
        break;
    }
    case CurveModel::Ramsey: {
        const Scalar e = exp(-x / params(2));
        const Scalar arg = params(3) * x + params(4);
        const Scalar c = cos(arg);
        const Scalar s = sin(arg);
        g << e * c, Scalar(1), params(0) * e * c * x / (params(2) * params(2)),
            -params(0) * e * s * x, -params(0) * e * s;
        break;
    }
    case CurveModel::RBDecay: {
        const Scalar pm = pow(params(2), x);
        const Scalar dp = x == Scalar(0) ? Scalar(0) : x * pow(params(2), x - Scalar(1));
        g << pm, Scalar(1), params(0) * dp;
        break;
    }
    }
    return g;
}

/// Model evaluated at every x.
Vec model_curve(CurveModel model, const Vec& params, std::span<const double> xs);

struct FitResult {
    CurveModel model = CurveModel::ExpDecay;
    Vec params;
    /// Parameter covariance s^2 (J^T J)^-1 with s^2 = SSR / (n - k).
    Mat covariance;
    double residual_rms = 0.0;
    /// Residual RMS at the initial guess.
    double initial_rms = 0.0;
    bool converged = false;
    int iterations = 0;

    double param(std::string_view name) const;
};

struct FitOptions {
    int max_iterations = 200;
    double step_tolerance = 1e-8;
    double initial_damping = 1e-3;
};

/// Damped Gauss-Newton (Levenberg-Marquardt) fit of A exp(-t/T) + B.
/// Throws DataError on fewer than 4 points, non-increasing ts, probabilities
/// outside [0,1] or constant ps.
FitResult fit_exp_decay(std::span<const double> ts, std::span<const double> ps,
                        const FitOptions& options = {});

/// Damped-cosine fit with the initial frequency taken from the periodogram peak.
/// Curves without a detectable oscillation come back with converged = false.
FitResult fit_ramsey(std::span<const double> ts, std::span<const double> ps,
                     const FitOptions& options = {});

/// A p^m + B with p kept in (0, 1] through a logistic parameterization.
/// A constant survival curve yields the identity fit p = 1.
FitResult fit_rb_decay(std::span<const double> ms, std::span<const double> ps,
                       const FitOptions& options = {});

FitResult fit_curve(CurveModel model, std::span<const double> xs, std::span<const double> ys,
                    const FitOptions& options = {});

/// Average single-qubit gate fidelity (1 + p) / 2.
double fidelity_1q(double p);
/// Two-qubit gate fidelity (1 + 3p) / 4.
double fidelity_2q(double p);
/// (P(0|0) + P(1|1)) / 2.
double readout_fidelity(double p00, double p11);

/// Pure dephasing time from 1/T2 = 1/(2 T1) + 1/Tphi; nullopt when T2 >= 2 T1.
std::optional<double> pure_dephasing_time(double t1, double t2);

/// T2echo / T1, or nullopt when the ratio exceeds 2.
std::optional<double> t2_over_t1(double t1, double t2echo);

}  // namespace qhealth
