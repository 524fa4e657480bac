#include "qhealth/fitkit.hpp"

#include <algorithm>
#include <complex>
#include <numeric>
#include <string>

namespace qhealth {

namespace {

constexpr std::array<std::string_view, 3> kModelNames = {"exp", "ramsey", "rb"};

// RB fits run in (A, B, logit p) so that p never leaves (0, 1).
struct Parameterization {
    CurveModel model;

    bool logistic() const noexcept { return model == CurveModel::RBDecay; }

    Vec to_internal(const Vec& ext) const {
        Vec in = ext;
        if (logistic()) in(2) = std::log(ext(2) / (1.0 - ext(2)));
        return in;
    }

    Vec to_external(const Vec& in) const {
        Vec ext = in;
        if (logistic()) ext(2) = 1.0 / (1.0 + std::exp(-in(2)));
        return ext;
    }

    // d external / d internal, diagonal.
    Vec chain(const Vec& in) const {
        Vec d = Vec::Ones(in.size());
        if (logistic()) {
            const double p = 1.0 / (1.0 + std::exp(-in(2)));
            d(2) = p * (1.0 - p);
        }
        return d;
    }
};

struct Problem {
    CurveModel model;
    std::span<const double> xs;
    std::span<const double> ys;

    Vec residuals(const Vec& ext) const {
        Vec r(static_cast<Eigen::Index>(xs.size()));
        for (std::size_t i = 0; i < xs.size(); ++i)
            r(static_cast<Eigen::Index>(i)) = model_value(model, ext, xs[i]) - ys[i];
        return r;
    }

    Mat jacobian(const Vec& ext) const {
        Mat j(static_cast<Eigen::Index>(xs.size()), ext.size());
        for (std::size_t i = 0; i < xs.size(); ++i)
            j.row(static_cast<Eigen::Index>(i)) = model_gradient(model, ext, xs[i]).transpose();
        return j;
    }
};

bool finite(const Vec& v) { return v.allFinite(); }

Mat psd_covariance(const Mat& jac, double ssr, Eigen::Index n, Eigen::Index k) {
    const Mat jtj = jac.transpose() * jac;
    Eigen::SelfAdjointEigenSolver<Mat> es(jtj);
    const Vec evals = es.eigenvalues();
    const double cutoff = std::max(1e-14 * evals.cwiseAbs().maxCoeff(), 1e-300);
    Vec inv = Vec::Zero(evals.size());
    for (Eigen::Index i = 0; i < evals.size(); ++i)
        if (evals(i) > cutoff) inv(i) = 1.0 / evals(i);
    const double s2 = n > k ? ssr / static_cast<double>(n - k) : 0.0;
    Mat cov = s2 * es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (cov + cov.transpose());
}

FitResult levenberg_marquardt(const Problem& prob, const Vec& initial, const FitOptions& opt) {
    const Parameterization param{prob.model};
    Vec theta = param.to_internal(initial);
    Vec ext = param.to_external(theta);
    Vec r = prob.residuals(ext);
    double ssr = r.squaredNorm();
    const auto n = static_cast<Eigen::Index>(prob.xs.size());

    FitResult res;
    res.model = prob.model;
    res.initial_rms = std::sqrt(ssr / static_cast<double>(n));

    double lambda = opt.initial_damping;
    bool converged = false;
    int it = 0;
    for (; it < opt.max_iterations && !converged; ++it) {
        const Mat jac = prob.jacobian(ext) * param.chain(theta).asDiagonal();
        const Mat jtj = jac.transpose() * jac;
        const Vec grad = jac.transpose() * r;
        Vec diag = jtj.diagonal().cwiseMax(1e-12 * std::max(1.0, jtj.diagonal().maxCoeff()));

        while (true) {
            Mat damped = jtj;
            damped.diagonal() += lambda * diag;
            const Vec step = damped.ldlt().solve(-grad);
            const double rel_step = step.norm() / (theta.norm() + opt.step_tolerance);
            const Vec trial = theta + step;
            const Vec trial_ext = param.to_external(trial);
            Vec trial_r;
            double trial_ssr = std::numeric_limits<double>::infinity();
            if (finite(step) && finite(trial_ext)) {
                trial_r = prob.residuals(trial_ext);
                if (finite(trial_r)) trial_ssr = trial_r.squaredNorm();
            }
            if (trial_ssr < ssr) {
                theta = trial;
                ext = trial_ext;
                r = trial_r;
                ssr = trial_ssr;
                lambda = std::max(lambda / 10.0, 1e-15);
                converged = rel_step < opt.step_tolerance;
                break;
            }
            lambda *= 10.0;
            // No downhill step exists at this resolution: we sit on the optimum.
            if (!finite(step) || rel_step < opt.step_tolerance || lambda > 1e16) {
                converged = finite(step) && (rel_step < opt.step_tolerance || lambda > 1e16);
                break;
            }
        }
    }

    res.params = ext;
    res.iterations = it;
    res.converged = converged;
    res.residual_rms = std::sqrt(ssr / static_cast<double>(n));
    res.covariance = psd_covariance(prob.jacobian(ext), ssr, n, ext.size());
    return res;
}

void check_probabilities(std::span<const double> ps) {
    for (double p : ps)
        if (!(p >= 0.0 && p <= 1.0)) throw DataError("probabilities must lie in [0,1]");
}

void check_lengths(std::span<const double> xs, std::span<const double> ys, std::size_t min_points) {
    if (xs.size() != ys.size()) throw DataError("x and y lengths differ");
    if (xs.size() < min_points)
        throw DataError("need at least " + std::to_string(min_points) + " points, got " +
                        std::to_string(xs.size()));
}

void check_increasing(std::span<const double> xs) {
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (!(xs[i] > xs[i - 1])) throw DataError("x values must be strictly increasing");
}

double spread(std::span<const double> ys) {
    const auto [lo, hi] = std::minmax_element(ys.begin(), ys.end());
    return *hi - *lo;
}

double wrap_phase(double phi) {
    phi = std::remainder(phi, 2.0 * std::numbers::pi);
    if (phi <= -std::numbers::pi) phi += 2.0 * std::numbers::pi;
    return phi;
}

// Canonical Ramsey parameters: A > 0, w >= 0, phi in (-pi, pi].
Vec canonical_ramsey(Vec p) {
    if (p(3) < 0) {
        p(3) = -p(3);
        p(4) = -p(4);
    }
    if (p(0) < 0) {
        p(0) = -p(0);
        p(4) += std::numbers::pi;
    }
    p(4) = wrap_phase(p(4));
    return p;
}

}  // namespace

std::string_view to_string(CurveModel m) noexcept { return kModelNames[static_cast<std::size_t>(m)]; }

CurveModel parse_curve_model(std::string_view token) {
    for (std::size_t i = 0; i < kModelNames.size(); ++i)
        if (kModelNames[i] == token) return static_cast<CurveModel>(i);
    throw UsageError("unknown curve model '" + std::string(token) + "' (expected exp, ramsey or rb)");
}

std::vector<std::string_view> parameter_names(CurveModel m) {
    switch (m) {
    case CurveModel::ExpDecay: return {"A", "B", "T"};
    case CurveModel::Ramsey: return {"A", "B", "T", "omega", "phi"};
    case CurveModel::RBDecay: return {"A", "B", "p"};
    }
    return {};
}

Eigen::Index parameter_count(CurveModel m) noexcept { return m == CurveModel::Ramsey ? 5 : 3; }

Vec model_curve(CurveModel model, const Vec& params, std::span<const double> xs) {
    if (params.size() != parameter_count(model)) throw UsageError("wrong parameter count");
    Vec out(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i)
        out(static_cast<Eigen::Index>(i)) = model_value(model, params, xs[i]);
    return out;
}

double FitResult::param(std::string_view name) const {
    const auto names = parameter_names(model);
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return params(static_cast<Eigen::Index>(i));
    throw UsageError("no parameter named '" + std::string(name) + "'");
}

FitResult fit_exp_decay(std::span<const double> ts, std::span<const double> ps, const FitOptions& options) {
    check_lengths(ts, ps, 4);
    check_increasing(ts);
    check_probabilities(ps);
    if (spread(ps) <= 1e-15) throw DataError("degenerate data: constant probabilities");

    const auto [lo, hi] = std::minmax_element(ps.begin(), ps.end());
    Vec init(3);
    init << *hi - *lo, *lo, (ts.back() - ts.front()) / 3.0;
    if (ps.front() < ps.back()) init << *lo - *hi, *hi, init(2);  // rising curve
    return levenberg_marquardt({CurveModel::ExpDecay, ts, ps}, init, options);
}

FitResult fit_ramsey(std::span<const double> ts, std::span<const double> ps, const FitOptions& options) {
    check_lengths(ts, ps, 8);
    check_increasing(ts);
    check_probabilities(ps);

    const auto n = ts.size();
    const double span = ts.back() - ts.front();
    const double mean = std::accumulate(ps.begin(), ps.end(), 0.0) / static_cast<double>(n);

    // Periodogram of the mean-removed curve on a grid 8x finer than 2*pi/span,
    // up to the Nyquist frequency of the median sample spacing.
    std::vector<double> gaps(n - 1);
    for (std::size_t i = 1; i < n; ++i) gaps[i - 1] = ts[i] - ts[i - 1];
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
    const double nyquist = std::numbers::pi / gaps[gaps.size() / 2];
    const double dw = 2.0 * std::numbers::pi / (8.0 * span);
    std::vector<double> power;
    std::vector<std::complex<double>> coeff;
    for (double w = 0.0; w <= nyquist + 1e-12; w += dw) {
        std::complex<double> s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += (ps[i] - mean) * std::polar(1.0, -w * (ts[i] - ts.front()));
        coeff.push_back(s);
        power.push_back(std::norm(s));
    }
    const auto peak = static_cast<std::size_t>(std::max_element(power.begin(), power.end()) - power.begin());
    const double w0 = static_cast<double>(peak) * dw;
    std::vector<double> sorted_power = power;
    std::nth_element(sorted_power.begin(), sorted_power.begin() + static_cast<std::ptrdiff_t>(sorted_power.size() / 2),
                     sorted_power.end());
    const double floor = sorted_power[sorted_power.size() / 2];

    FitResult res;
    res.model = CurveModel::Ramsey;
    Vec init(5);
    // phase of the coefficient is referenced to ts.front(); shift to t = 0
    const double phi0 = wrap_phase(std::arg(coeff[peak]) - w0 * ts.front());
    init << 0.5 * spread(ps), mean, span / 3.0, w0, phi0;

    const bool detectable = w0 * span >= 2.0 * std::numbers::pi && power[peak] > 4.0 * floor &&
                            spread(ps) > 1e-15;
    if (!detectable) {
        res.params = init;
        res.covariance = Mat::Zero(5, 5);
        res.residual_rms = res.initial_rms =
            std::sqrt((model_curve(CurveModel::Ramsey, init, ts) - Eigen::Map<const Vec>(ps.data(), static_cast<Eigen::Index>(n)))
                          .squaredNorm() / static_cast<double>(n));
        res.converged = false;
        return res;
    }

    // The envelope is poorly constrained by the periodogram; start from a few
    // decay times and keep the best optimum.
    const Problem prob{CurveModel::Ramsey, ts, ps};
    std::optional<FitResult> best;
    for (const double t_frac : {1.0 / 3.0, 1.0 / 10.0, 1.0}) {
        Vec start = init;
        start(2) = span * t_frac;
        FitResult fit = levenberg_marquardt(prob, start, options);
        if (!best || fit.residual_rms < best->residual_rms) best = std::move(fit);
    }
    FitResult out = std::move(*best);
    // Report against the periodogram guess (the first start).
    out.initial_rms = std::sqrt(prob.residuals(init).squaredNorm() / static_cast<double>(n));
    const Vec before = out.params;
    out.params = canonical_ramsey(out.params);
    if ((before - out.params).cwiseAbs().maxCoeff() > 0) {
        // Sign flips leave the curve unchanged; recompute covariance in the canonical chart.
        const Vec r = model_curve(CurveModel::Ramsey, out.params, ts) -
                      Eigen::Map<const Vec>(ps.data(), static_cast<Eigen::Index>(n));
        out.covariance = psd_covariance(prob.jacobian(out.params), r.squaredNorm(),
                                        static_cast<Eigen::Index>(n), 5);
    }
    return out;
}

FitResult fit_rb_decay(std::span<const double> ms, std::span<const double> ps, const FitOptions& options) {
    check_lengths(ms, ps, 4);
    check_probabilities(ps);
    std::vector<double> sorted(ms.begin(), ms.end());
    for (double m : sorted)
        if (!(m >= 1.0) || m != std::floor(m)) throw DataError("sequence lengths must be integers >= 1");
    std::sort(sorted.begin(), sorted.end());
    if (std::unique(sorted.begin(), sorted.end()) - sorted.begin() < 4)
        throw DataError("need at least 4 distinct sequence lengths");

    if (spread(ps) <= 1e-15) {
        // Flat curve: no decay, amplitude unidentifiable and pinned to zero.
        FitResult res;
        res.model = CurveModel::RBDecay;
        res.params = Vec(3);
        res.params << 0.0, ps.front(), 1.0;
        res.covariance = Mat::Zero(3, 3);
        res.converged = true;
        return res;
    }

    // Order by sequence length for the initializer only.
    std::vector<std::size_t> order(ms.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return ms[i] < ms[j]; });
    const double b0 = ps[order.back()];
    const double a0 = ps[order.front()] - b0;
    double p0 = 0.9;
    {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int cnt = 0;
        for (auto i : order) {
            const double y = (ps[i] - b0) / a0;
            if (a0 != 0.0 && y > 0.0) {
                const double ly = std::log(y);
                sx += ms[i];
                sy += ly;
                sxx += ms[i] * ms[i];
                sxy += ms[i] * ly;
                ++cnt;
            }
        }
        const double den = cnt * sxx - sx * sx;
        if (cnt >= 2 && den > 0) p0 = std::exp((cnt * sxy - sx * sy) / den);
    }
    p0 = std::clamp(p0, 0.01, 1.0 - 1e-6);
    Vec init(3);
    init << a0, b0, p0;
    return levenberg_marquardt({CurveModel::RBDecay, ms, ps}, init, options);
}

FitResult fit_curve(CurveModel model, std::span<const double> xs, std::span<const double> ys,
                    const FitOptions& options) {
    switch (model) {
    case CurveModel::ExpDecay: return fit_exp_decay(xs, ys, options);
    case CurveModel::Ramsey: return fit_ramsey(xs, ys, options);
    case CurveModel::RBDecay: return fit_rb_decay(xs, ys, options);
    }
    throw UsageError("unknown model");
}

double fidelity_1q(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("RB decay rate must lie in [0,1]");
    return (1.0 + p) / 2.0;
}

double fidelity_2q(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("RB decay rate must lie in [0,1]");
    return (1.0 + 3.0 * p) / 4.0;
}

double readout_fidelity(double p00, double p11) {
    if (!(p00 >= 0.0 && p00 <= 1.0 && p11 >= 0.0 && p11 <= 1.0))
        throw DataError("assignment probabilities must lie in [0,1]");
    return (p00 + p11) / 2.0;
}

std::optional<double> pure_dephasing_time(double t1, double t2) {
    if (!(t1 > 0.0 && t2 > 0.0)) throw DataError("coherence times must be positive");
    const double rate = 1.0 / t2 - 1.0 / (2.0 * t1);
    if (!(rate > 0.0)) return std::nullopt;
    return 1.0 / rate;
}

std::optional<double> t2_over_t1(double t1, double t2echo) {
    if (!(t1 > 0.0)) throw DataError("T1 must be positive");
    const double ratio = t2echo / t1;
    if (ratio > 2.0) return std::nullopt;
    return ratio;
}

}  // namespace qhealth
