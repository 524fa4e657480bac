#include <doctest.h>

#include <cmath>
#include <numeric>

#include "qhealth/common.hpp"
#include "qhealth/tempstats.hpp"

using namespace qhealth;

namespace {

// Direct evaluation of the sample ACF definition.
double naive_acf(const std::vector<double>& x, int lag) {
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        den += (x[t] - m) * (x[t] - m);
        if (t + static_cast<std::size_t>(lag) < x.size()) num += (x[t] - m) * (x[t + static_cast<std::size_t>(lag)] - m);
    }
    return num / den;
}

MetricSeries make_series(std::vector<int> days, std::vector<double> values) {
    MetricSeries s;
    s.target = TargetId::qubit(0);
    s.metric = MetricKind::T1;
    s.days = std::move(days);
    s.values = std::move(values);
    return s;
}

}  // namespace

TEST_SUITE("tempstats") {

TEST_CASE("acf matches the direct formula") {
    Rng rng(5);
    std::vector<double> x(80);
    double prev = 0.0;
    for (auto& v : x) v = prev = 0.6 * prev + rng.normal();
    const auto r = acf(x, 12);
    CHECK(r.values(0) == doctest::Approx(1.0));
    CHECK(r.n_effective == 80);
    CHECK(r.ci_halfwidth == doctest::Approx(1.96 / std::sqrt(80.0)));
    for (int l = 0; l <= 12; ++l) CHECK(r.values(l) == doctest::Approx(naive_acf(x, l)).epsilon(1e-12));
    for (int l = 0; l <= 12; ++l) CHECK(std::abs(r.values(l)) <= 1.0 + 1e-12);
}

TEST_CASE("acf is invariant to affine rescaling") {
    Rng rng(8);
    std::vector<double> x(60), y(60);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal() + 0.1 * static_cast<double>(i);
        y[i] = 3.5 * x[i] - 20.0;
    }
    const auto a = acf(x, 10), b = acf(y, 10);
    for (int l = 0; l <= 10; ++l) CHECK(a.values(l) == doctest::Approx(b.values(l)).epsilon(1e-12));
}

TEST_CASE("acf rejects short or constant input") {
    CHECK_THROWS_AS(acf(std::vector<double>(39, 1.0), 30), DataError);
    CHECK_THROWS_AS(acf(std::vector<double>(50, 2.0), 30), DataError);
}

TEST_CASE("series acf uses the longest gap-free run") {
    std::vector<int> days;
    std::vector<double> vals;
    Rng rng(2);
    for (int d = 0; d < 15; ++d) days.push_back(d), vals.push_back(rng.normal());
    for (int d = 20; d < 70; ++d) days.push_back(d), vals.push_back(rng.normal());
    const auto s = make_series(days, vals);
    const auto run = longest_contiguous_run(s);
    REQUIRE(run.size() == 50);
    CHECK(run.front() == vals[15]);
    CHECK(acf(s, 5).n_effective == 50);
}

TEST_CASE("summary statistics") {
    const std::vector<double> x = {1, 2, 3, 4, 10};
    const auto s = summary(x);
    CHECK(s.n == 5);
    CHECK(s.mean == doctest::Approx(4.0));
    CHECK(s.std == doctest::Approx(std::sqrt(10.0)));
    // Population skewness: mean((x - m)^3) / std^3 = 36 / 10^1.5.
    CHECK(s.skewness == doctest::Approx(36.0 / std::pow(10.0, 1.5)));
    CHECK(s.min == 1.0);
    CHECK(s.max == 10.0);

    std::vector<double> tail(1000, 1.0);
    for (int i = 0; i < 1000; i += 2) tail[static_cast<std::size_t>(i)] = -1.0;
    tail[0] = -40.0;
    CHECK(summary(tail).lower_tail_frac == doctest::Approx(0.001));
}

TEST_CASE("histogram") {
    Rng rng(1);
    std::vector<double> x(517);
    for (auto& v : x) v = rng.normal();
    const auto h = histogram(x, 13);
    CHECK(h.edges.size() == 14);
    CHECK(std::accumulate(h.counts.begin(), h.counts.end(), 0L) == 517);
    double area = 0.0;
    for (std::size_t b = 0; b < h.counts.size(); ++b) area += h.density[b] * (h.edges[b + 1] - h.edges[b]);
    CHECK(area == doctest::Approx(1.0));

    const auto flat = histogram(std::vector<double>(4, 2.0), 10);
    CHECK(flat.edges.front() == 1.5);
    CHECK(flat.edges.back() == 2.5);
    CHECK(std::accumulate(flat.counts.begin(), flat.counts.end(), 0L) == 4);

    // The maximum lands in the last bin.
    const auto two = histogram(std::vector<double>{0.0, 1.0}, 2);
    CHECK(two.counts == std::vector<long>{1, 1});

    CHECK(default_bin_count(std::vector<double>{1, 2}) == 10);
    std::vector<double> many(100000);
    for (auto& v : many) v = rng.normal();
    CHECK(default_bin_count(many) == 100);
}

TEST_CASE("instability ranking orders by std") {
    std::vector<CalibrationRecord> rs;
    const double spread[] = {1.0, 5.0, 3.0};
    for (int q = 0; q < 3; ++q)
        for (int d = 0; d < 4; ++d) {
            CalibrationRecord r;
            r.day = d;
            r.target = TargetId::qubit(q);
            r.metric = MetricKind::T1;
            r.value = 40.0 + ((d % 2) ? spread[q] : -spread[q]);
            rs.push_back(r);
        }
    const auto rank = instability_ranking(Dataset(rs), MetricKind::T1);
    REQUIRE(rank.size() == 3);
    CHECK(rank[0].first == TargetId::qubit(1));
    CHECK(rank[0].second == doctest::Approx(5.0));
    CHECK(rank[1].first == TargetId::qubit(2));
    CHECK(rank[2].first == TargetId::qubit(0));
}

TEST_CASE("drop detector flags dips but not spikes") {
    Rng rng(4);
    std::vector<int> days;
    std::vector<double> vals;
    for (int d = 0; d < 120; ++d) {
        days.push_back(d);
        vals.push_back(40.0 + rng.normal());
    }
    vals[60] = 25.0;
    vals[90] = 60.0;
    const auto flags = drop_detector(make_series(days, vals), 4.0);
    REQUIRE(flags.size() == 1);
    CHECK(flags[0].day == 60);
    CHECK(flags[0].z_score < -4.0);
    CHECK_THROWS_AS(drop_detector(make_series({0, 1, 2}, {1, 2, 3}), 4.0), DataError);
}

TEST_CASE("lag table") {
    std::vector<CalibrationRecord> rs;
    Rng rng(6);
    for (int q = 0; q < 4; ++q) {
        double z = 0.0;
        for (int d = 0; d < 200; ++d) {
            z = 0.8 * z + 0.6 * rng.normal();
            CalibrationRecord r;
            r.day = d;
            r.target = TargetId::qubit(q);
            r.metric = MetricKind::T1;
            r.value = q == 3 ? 40.0 : 40.0 + 3.0 * z;
            rs.push_back(r);
        }
    }
    const Dataset ds(rs);
    const MetricKind m[] = {MetricKind::T1, MetricKind::T2Echo};
    const auto table = acf_lag_table(ds, m);
    REQUIRE(table.size() == 2);
    CHECK(table[0].n_targets == 3);
    CHECK(table[0].excluded == 1);
    CHECK(table[0].mean(0) == doctest::Approx(0.8).epsilon(0.15));
    CHECK(table[0].mean(0) > table[0].mean(1));
    CHECK(table[1].n_targets == 0);
}

}
