#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "qhealth/caldata.hpp"
#include "qhealth/common.hpp"

namespace qhealth {

struct AcfResult {
    std::vector<int> lags;
    Vec values;
    /// 95% white-noise band, 1.96 / sqrt(n).
    double ci_halfwidth = 0.0;
    /// Points actually used (the longest gap-free run).
    int n_effective = 0;
};

/// Sample ACF r(l) = sum (x_t - m)(x_{t+l} - m) / sum (x_t - m)^2 for l = 0..max_lag.
/// Throws DataError when fewer than max_lag + 10 points or zero variance.
AcfResult acf(std::span<const double> xs, int max_lag);

/// ACF over the longest run of consecutive days.
AcfResult acf(const MetricSeries& series, int max_lag);

/// Values of the longest run of consecutive days (first run wins ties).
std::vector<double> longest_contiguous_run(const MetricSeries& series);

struct AcfLagRow {
    MetricKind metric = MetricKind::T1;
    std::vector<int> lags;
    /// Cross-target mean and population std of r(lag).
    Vec mean;
    Vec std;
    int n_targets = 0;
    /// Targets dropped because their series was too short or constant.
    int excluded = 0;
};

/// One row per metric. Per-target failures are counted, never fatal.
std::vector<AcfLagRow> acf_lag_table(const Dataset& ds, std::span<const MetricKind> metrics,
                                     std::span<const int> lags = std::vector<int>{1, 7, 14});

struct SummaryStats {
    double mean = 0.0;
    double std = 0.0;  // population convention
    double min = 0.0;
    double max = 0.0;
    double skewness = 0.0;
    int n = 0;
    /// Fraction of points more than 3 std below the mean.
    double lower_tail_frac = 0.0;
};

SummaryStats summary(std::span<const double> xs);
SummaryStats summary(const MetricSeries& series);

struct Histogram {
    std::vector<double> edges;
    std::vector<long> counts;
    std::vector<double> density;
};

/// Equal-width bins over [min, max], last bin closed on the right. A zero
/// range is padded to [v - 0.5, v + 0.5].
Histogram histogram(std::span<const double> xs, int n_bins);

/// Freedman-Diaconis bin count, clamped to [10, 100].
int default_bin_count(std::span<const double> xs);

/// Targets by descending std (population); ties by ascending target.
std::vector<std::pair<TargetId, double>> instability_ranking(const Dataset& ds, MetricKind metric);

struct DropFlag {
    int day = 0;
    double z_score = 0.0;
};

/// Days whose value lies below the rolling median (31-day window centred on
/// the day) by more than z_threshold robust sigmas (1.4826 MAD). Needs >= 20 points.
std::vector<DropFlag> drop_detector(const MetricSeries& series, double z_threshold);

}  // namespace qhealth
