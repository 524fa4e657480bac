#include "qhealth/xcorr.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>

namespace qhealth {

std::string_view to_string(DependenceMethod m) noexcept {
    switch (m) {
        case DependenceMethod::Pearson: return "pearson";
        case DependenceMethod::Spearman: return "spearman";
        case DependenceMethod::DistanceCorr: return "dcor";
        case DependenceMethod::MutualInfo: return "mi";
    }
    return "?";
}

DependenceMethod parse_method(std::string_view token) {
    for (auto m : kAllMethods)
        if (to_string(m) == token) return m;
    throw UsageError("unknown dependence method '" + std::string(token) + "'");
}

Vec midranks(const Vec& xs) {
    const auto n = xs.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return xs(a) < xs(b); });
    Vec ranks(n);
    for (Eigen::Index i = 0; i < n;) {
        Eigen::Index j = i;
        while (j + 1 < n && xs(order[static_cast<std::size_t>(j + 1)]) == xs(order[static_cast<std::size_t>(i)])) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (auto t = i; t <= j; ++t) ranks(order[static_cast<std::size_t>(t)]) = r;
        i = j + 1;
    }
    return ranks;
}

double spearman(const Vec& xs, const Vec& ys) {
    if (xs.size() != ys.size()) throw DataError("spearman: length mismatch");
    return pearson(midranks(xs), midranks(ys));
}

namespace {

Mat centred_distances(const Vec& xs) {
    const auto n = xs.size();
    Mat d(n, n);
    for (Eigen::Index j = 0; j < n; ++j) d.col(j) = (xs.array() - xs(j)).abs();
    const Vec row_mean = d.rowwise().mean();
    const double grand = row_mean.mean();
    // d is symmetric, so column means equal row means.
    d.colwise() -= row_mean;
    d.rowwise() -= row_mean.transpose();
    d.array() += grand;
    return d;
}

}  // namespace

double distance_correlation(const Vec& xs, const Vec& ys, Eigen::Index max_n) {
    if (xs.size() != ys.size()) throw DataError("distance_correlation: length mismatch");
    if (xs.size() < 4) throw DataError("distance_correlation needs at least 4 points");
    if (xs.size() > max_n)
        throw UsageError("distance_correlation: n=" + std::to_string(xs.size()) + " exceeds cap " +
                         std::to_string(max_n));
    const Mat a = centred_distances(xs);
    const Mat b = centred_distances(ys);
    const double vx = a.squaredNorm();
    const double vy = b.squaredNorm();
    if (!(vx > 0.0) || !(vy > 0.0)) throw DataError("distance_correlation: constant input");
    const double cov = a.cwiseProduct(b).sum();
    return std::clamp(std::sqrt(std::max(cov, 0.0) / std::sqrt(vx * vy)), 0.0, 1.0);
}

std::vector<int> quantile_bins(const Vec& xs, int n_bins) {
    const Vec r = midranks(xs);
    const double n = static_cast<double>(xs.size());
    std::vector<int> bins(static_cast<std::size_t>(xs.size()));
    for (Eigen::Index i = 0; i < xs.size(); ++i)
        bins[static_cast<std::size_t>(i)] =
            std::min(n_bins - 1, static_cast<int>(std::floor((r(i) - 0.5) * n_bins / n)));
    return bins;
}

double mutual_information(const Vec& xs, const Vec& ys, int n_bins) {
    if (xs.size() != ys.size()) throw DataError("mutual_information: length mismatch");
    if (n_bins < 2) throw UsageError("mutual_information needs at least 2 bins");
    if (xs.size() < 2) throw DataError("mutual_information needs at least 2 points");
    if (xs.maxCoeff() == xs.minCoeff() || ys.maxCoeff() == ys.minCoeff())
        throw DataError("mutual_information: degenerate (all-equal) input");
    const auto bx = quantile_bins(xs, n_bins);
    const auto by = quantile_bins(ys, n_bins);
    Mat joint = Mat::Zero(n_bins, n_bins);
    for (std::size_t i = 0; i < bx.size(); ++i) joint(bx[i], by[i]) += 1.0;
    joint /= static_cast<double>(xs.size());
    const Vec px = joint.rowwise().sum();
    const Vec py = joint.colwise().sum().transpose();
    double mi = 0.0;
    for (int i = 0; i < n_bins; ++i)
        for (int j = 0; j < n_bins; ++j)
            if (joint(i, j) > 0.0) mi += joint(i, j) * std::log(joint(i, j) / (px(i) * py(j)));
    return std::max(mi, 0.0);
}

int default_mi_bins(Eigen::Index n) {
    return std::clamp(static_cast<int>(std::floor(std::sqrt(static_cast<double>(n) / 5.0))), 2, 16);
}

double dependence(DependenceMethod method, const Vec& xs, const Vec& ys) {
    switch (method) {
        case DependenceMethod::Pearson: return pearson(xs, ys);
        case DependenceMethod::Spearman: return spearman(xs, ys);
        case DependenceMethod::DistanceCorr: return distance_correlation(xs, ys);
        case DependenceMethod::MutualInfo: return mutual_information(xs, ys, default_mi_bins(xs.size()));
    }
    throw UsageError("unknown dependence method");
}

CorrMatrix metric_correlation_matrix(const Dataset& ds, DependenceMethod method, DayWindow window,
                                     std::span<const MetricKind> metrics) {
    if (window.to < window.from) throw UsageError("window end precedes start");
    const auto k = static_cast<Eigen::Index>(metrics.size());
    std::vector<std::map<int, double>> means(metrics.size());
    for (std::size_t m = 0; m < metrics.size(); ++m) {
        const auto s = daily_mean(ds, metrics[m], window);
        if (s.size() < 20)
            throw DataError("insufficient window: " + std::string(to_string(metrics[m])) + " has " +
                            std::to_string(s.size()) + " daily means in [" + std::to_string(window.from) + ", " +
                            std::to_string(window.to) + "], need 20");
        for (std::size_t i = 0; i < s.size(); ++i) means[m].emplace(s.days[i], s.values[i]);
    }

    CorrMatrix out;
    out.metric_order.assign(metrics.begin(), metrics.end());
    out.method = method;
    out.window = window;
    out.values = Mat::Zero(k, k);
    out.n_days = Eigen::MatrixXi::Zero(k, k);

    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = i; j < k; ++j) pairs.emplace_back(i, j);

    parallel_for(pairs.size(), [&](std::size_t p) {
        const auto [i, j] = pairs[p];
        std::vector<double> xv, yv;
        for (const auto& [day, x] : means[static_cast<std::size_t>(i)]) {
            const auto& other = means[static_cast<std::size_t>(j)];
            if (auto it = other.find(day); it != other.end()) {
                xv.push_back(x);
                yv.push_back(it->second);
            }
        }
        if (xv.size() < 20)
            throw DataError("insufficient window: only " + std::to_string(xv.size()) + " shared days for " +
                            std::string(to_string(metrics[static_cast<std::size_t>(i)])) + "/" +
                            std::string(to_string(metrics[static_cast<std::size_t>(j)])));
        const Vec x = standardize(Eigen::Map<const Vec>(xv.data(), static_cast<Eigen::Index>(xv.size())));
        const Vec y = standardize(Eigen::Map<const Vec>(yv.data(), static_cast<Eigen::Index>(yv.size())));
        double v = 0.0;
        if (i == j && method != DependenceMethod::MutualInfo)
            v = 1.0;
        else
            v = dependence(method, x, y);
        out.values(i, j) = v;
        out.values(j, i) = v;
        out.n_days(i, j) = static_cast<int>(xv.size());
        out.n_days(j, i) = static_cast<int>(xv.size());
    });
    return out;
}

}  // namespace qhealth
