#include "qhealth/tempstats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qhealth {

namespace {

double median_of(std::vector<double> v) {
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

double population_std(std::span<const double> xs) {
    const double n = static_cast<double>(xs.size());
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / n);
}

}  // namespace

AcfResult acf(std::span<const double> xs, int max_lag) {
    if (max_lag < 1) throw UsageError("max_lag must be >= 1");
    const auto n = static_cast<int>(xs.size());
    if (n < max_lag + 10)
        throw DataError("series too short for ACF: " + std::to_string(n) + " points, need " +
                        std::to_string(max_lag + 10));
    const Eigen::Map<const Vec> x(xs.data(), n);
    const Vec centred = x.array() - x.mean();
    const double denom = centred.squaredNorm();
    if (!(denom > 0.0)) throw DataError("zero-variance series has no ACF");

    AcfResult r;
    r.n_effective = n;
    r.ci_halfwidth = 1.96 / std::sqrt(static_cast<double>(n));
    r.values.resize(max_lag + 1);
    for (int lag = 0; lag <= max_lag; ++lag) {
        r.lags.push_back(lag);
        r.values(lag) = lag == 0 ? 1.0 : centred.head(n - lag).dot(centred.tail(n - lag)) / denom;
    }
    return r;
}

std::vector<double> longest_contiguous_run(const MetricSeries& series) {
    std::size_t best_start = 0, best_len = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= series.size(); ++i) {
        const bool breaks = i == series.size() || (i > start && series.days[i] != series.days[i - 1] + 1);
        if (breaks) {
            if (i - start > best_len) {
                best_len = i - start;
                best_start = start;
            }
            start = i;
        }
    }
    return {series.values.begin() + static_cast<std::ptrdiff_t>(best_start),
            series.values.begin() + static_cast<std::ptrdiff_t>(best_start + best_len)};
}

AcfResult acf(const MetricSeries& series, int max_lag) {
    const auto run = longest_contiguous_run(series);
    return acf(std::span<const double>(run), max_lag);
}

std::vector<AcfLagRow> acf_lag_table(const Dataset& ds, std::span<const MetricKind> metrics,
                                     std::span<const int> lags) {
    if (lags.empty()) throw UsageError("no lags requested");
    const int max_lag = *std::max_element(lags.begin(), lags.end());
    std::vector<AcfLagRow> rows;
    for (const auto metric : metrics) {
        AcfLagRow row;
        row.metric = metric;
        row.lags.assign(lags.begin(), lags.end());
        std::vector<Vec> per_target;
        for (const auto& t : ds.targets(metric)) {
            try {
                const auto r = acf(series(ds, t, metric), max_lag);
                Vec v(static_cast<Eigen::Index>(lags.size()));
                for (std::size_t i = 0; i < lags.size(); ++i) v(static_cast<Eigen::Index>(i)) = r.values(lags[i]);
                per_target.push_back(std::move(v));
            } catch (const DataError&) {
                ++row.excluded;
            }
        }
        row.n_targets = static_cast<int>(per_target.size());
        const auto k = static_cast<Eigen::Index>(lags.size());
        row.mean = Vec::Constant(k, std::numeric_limits<double>::quiet_NaN());
        row.std = row.mean;
        if (!per_target.empty()) {
            Vec sum = Vec::Zero(k);
            for (const auto& v : per_target) sum += v;
            row.mean = sum / static_cast<double>(per_target.size());
            Vec ss = Vec::Zero(k);
            for (const auto& v : per_target) ss += (v - row.mean).cwiseAbs2();
            row.std = (ss / static_cast<double>(per_target.size())).cwiseSqrt();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

SummaryStats summary(std::span<const double> xs) {
    if (xs.size() < 2) throw DataError("summary needs at least 2 points");
    SummaryStats s;
    s.n = static_cast<int>(xs.size());
    const double n = static_cast<double>(xs.size());
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    s.min = *lo;
    s.max = *hi;
    double m2 = 0.0, m3 = 0.0;
    for (double x : xs) {
        const double d = x - s.mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    s.std = std::sqrt(m2);
    s.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    // Summation error can push the mean a hair outside [min, max] for constant input.
    s.mean = std::clamp(s.mean, s.min, s.max);
    long below = 0;
    if (s.std > 0.0)
        for (double x : xs) below += x < s.mean - 3.0 * s.std ? 1 : 0;
    s.lower_tail_frac = static_cast<double>(below) / n;
    return s;
}

SummaryStats summary(const MetricSeries& series) { return summary(std::span<const double>(series.values)); }

Histogram histogram(std::span<const double> xs, int n_bins) {
    if (xs.empty()) throw DataError("histogram of empty input");
    if (n_bins < 2) throw UsageError("histogram needs at least 2 bins");
    auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / n_bins;
    Histogram h;
    h.edges.resize(static_cast<std::size_t>(n_bins) + 1);
    for (int i = 0; i <= n_bins; ++i) h.edges[static_cast<std::size_t>(i)] = lo + width * i;
    h.edges.back() = hi;
    h.counts.assign(static_cast<std::size_t>(n_bins), 0);
    for (double x : xs) {
        auto bin = static_cast<int>(std::floor((x - lo) / width));
        bin = std::clamp(bin, 0, n_bins - 1);
        ++h.counts[static_cast<std::size_t>(bin)];
    }
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        h.density.push_back(static_cast<double>(h.counts[i]) / (n * (h.edges[i + 1] - h.edges[i])));
    return h;
}

int default_bin_count(std::span<const double> xs) {
    if (xs.size() < 4) return 10;
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    const auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(v.size() - 1);
        const auto i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return i + 1 < v.size() ? v[i] * (1 - frac) + v[i + 1] * frac : v[i];
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    const double range = v.back() - v.front();
    if (!(iqr > 0.0) || !(range > 0.0)) return 10;
    const double width = 2.0 * iqr / std::cbrt(static_cast<double>(v.size()));
    return std::clamp(static_cast<int>(std::ceil(range / width)), 10, 100);
}

std::vector<std::pair<TargetId, double>> instability_ranking(const Dataset& ds, MetricKind metric) {
    std::vector<std::pair<TargetId, double>> out;
    for (const auto& t : ds.targets(metric)) {
        const auto s = series(ds, t, metric);
        if (s.size() < 2) continue;
        out.emplace_back(t, population_std(s.values));
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });
    return out;
}

std::vector<DropFlag> drop_detector(const MetricSeries& series, double z_threshold) {
    if (series.size() < 20) throw DataError("drop detector needs at least 20 points");
    constexpr int kHalfWindow = 15;
    std::vector<DropFlag> flags;
    std::vector<double> window;
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const int day = series.days[i];
        while (series.days[lo] < day - kHalfWindow) ++lo;
        while (hi < series.size() && series.days[hi] <= day + kHalfWindow) ++hi;
        window.assign(series.values.begin() + static_cast<std::ptrdiff_t>(lo),
                      series.values.begin() + static_cast<std::ptrdiff_t>(hi));
        const double med = median_of(window);
        for (auto& v : window) v = std::abs(v - med);
        const double mad = median_of(window);
        // A zero MAD still has to give a finite, scale-covariant z.
        const double scale = std::max({1.4826 * mad, 1e-12 * std::abs(med), 1e-300});
        const double z = (series.values[i] - med) / scale;
        if (series.values[i] < med && z < -z_threshold) flags.push_back({day, z});
    }
    return flags;
}

}  // namespace qhealth
