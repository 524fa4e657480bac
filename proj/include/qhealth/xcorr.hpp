#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "qhealth/caldata.hpp"
#include "qhealth/common.hpp"

namespace qhealth {

enum class DependenceMethod : std::uint8_t { Pearson, Spearman, DistanceCorr, MutualInfo };

std::string_view to_string(DependenceMethod m) noexcept;
/// Accepts pearson, spearman, dcor, mi.
DependenceMethod parse_method(std::string_view token);

inline constexpr DependenceMethod kAllMethods[] = {DependenceMethod::Pearson, DependenceMethod::Spearman,
                                                   DependenceMethod::DistanceCorr, DependenceMethod::MutualInfo};

/// (x - mean) / std with the population std, so the output has unit variance.
template <typename Derived>
Vec standardize(const Eigen::MatrixBase<Derived>& xs) {
    const auto n = xs.size();
    if (n < 2) throw DataError("standardize needs at least 2 points");
    const double mean = xs.mean();
    const Vec centred = xs.array() - mean;
    const double sd = std::sqrt(centred.squaredNorm() / static_cast<double>(n));
    if (!(sd > 0.0) || sd <= 1e-14 * std::abs(mean)) throw DataError("zero-variance input cannot be standardized");
    return centred / sd;
}

template <typename DX, typename DY>
double pearson(const Eigen::MatrixBase<DX>& xs, const Eigen::MatrixBase<DY>& ys) {
    if (xs.size() != ys.size()) throw DataError("pearson: length mismatch");
    const Vec zx = standardize(xs);
    const Vec zy = standardize(ys);
    return std::clamp(zx.dot(zy) / static_cast<double>(xs.size()), -1.0, 1.0);
}

/// Average ranks (1-based) with ties sharing their mean rank.
Vec midranks(const Vec& xs);

double spearman(const Vec& xs, const Vec& ys);

/// Biased (V-statistic) distance correlation. Inputs longer than max_n are
/// rejected to bound the O(n^2) memory.
double distance_correlation(const Vec& xs, const Vec& ys, Eigen::Index max_n = 8192);

/// Equal-frequency bin index per point: floor((midrank - 0.5) * n_bins / n).
std::vector<int> quantile_bins(const Vec& xs, int n_bins);

/// Plug-in MI in nats on the n_bins x n_bins equal-frequency histogram.
double mutual_information(const Vec& xs, const Vec& ys, int n_bins);

/// floor(sqrt(n / 5)) clamped to [2, 16].
int default_mi_bins(Eigen::Index n);

double dependence(DependenceMethod method, const Vec& xs, const Vec& ys);

struct CorrMatrix {
    std::vector<MetricKind> metric_order;
    DependenceMethod method = DependenceMethod::Pearson;
    Mat values;
    DayWindow window;
    /// Days that entered each pair's estimate.
    Eigen::MatrixXi n_days;
};

/// Pairwise dependence of the standardized daily-mean series of every metric
/// in `metrics`. A day enters a pair only when both metrics have a mean.
CorrMatrix metric_correlation_matrix(const Dataset& ds, DependenceMethod method, DayWindow window,
                                     std::span<const MetricKind> metrics = kAllMetrics);

}  // namespace qhealth
