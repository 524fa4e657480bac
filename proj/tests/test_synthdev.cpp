#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qhealth/common.hpp"
#include "qhealth/synthdev.hpp"
#include "qhealth/tempstats.hpp"

using namespace qhealth;

TEST_SUITE("synthdev") {

TEST_CASE("default corpus shape") {
    const auto sc = default_scenario(7);
    const auto ds = generate_corpus(sc);
    CHECK(ds.size() == 250u * 20u * 5u + 250u * 30u);
    CHECK(ds.day_span().from == 0);
    CHECK(ds.day_span().to == 249);
    CHECK_NOTHROW(ds.check_topology(sc.topology));
    CHECK(sc.family_members(Family::Noisy) == std::vector<int>{0, 2, 3, 4, 5, 9, 10});
    CHECK(sc.family_members(Family::Stable).size() == 13);
}

TEST_CASE("generation is a pure function of the seed") {
    const auto a = generate_corpus(default_scenario(3));
    const auto b = generate_corpus(default_scenario(3));
    const auto c = generate_corpus(default_scenario(4));
    CHECK(a == b);
    CHECK_FALSE(a == c);
}

TEST_CASE("every sample obeys the coherence ordering") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto ds = generate_corpus(default_scenario(seed));
        for (const auto& t : ds.targets(MetricKind::T1)) {
            const auto t1 = series(ds, t, MetricKind::T1);
            const auto t2e = series(ds, t, MetricKind::T2Echo);
            REQUIRE(t1.days == t2e.days);
            for (std::size_t i = 0; i < t1.size(); ++i) CHECK(t2e.values[i] <= 2.0 * t1.values[i]);
        }
    }
}

TEST_CASE("pooled means agree with the analytic expectation") {
    // Average over seeds so the AR(1) drift has room to wash out.
    const auto sc0 = default_scenario(0);
    for (auto m : kAllMetrics) {
        double acc = 0.0;
        const int n_seeds = 12;
        for (int s = 0; s < n_seeds; ++s) {
            const auto ds = generate_corpus(default_scenario(static_cast<std::uint64_t>(100 + s)));
            double sum = 0.0;
            int n = 0;
            for (const auto& r : ds.records())
                if (r.metric == m) {
                    sum += r.value;
                    ++n;
                }
            acc += sum / n;
        }
        const double expected = expected_pooled_mean(sc0, m);
        const double tol = is_fidelity(m) ? 0.3 * (1.0 - expected) : 0.02 * expected;
        CHECK_MESSAGE(std::abs(acc / n_seeds - expected) <= tol, to_string(m));
    }
}

TEST_CASE("warm-up suppression decays linearly") {
    const auto sc = default_scenario(0);
    CHECK(sc.warmup_suppression(129) == 0.0);
    CHECK(sc.warmup_suppression(130) == doctest::Approx(sc.warmup_depth));
    CHECK(sc.warmup_suppression(132) == doctest::Approx(sc.warmup_depth * (1.0 - 2.0 / sc.warmup_recovery_days)));
    CHECK(sc.warmup_suppression(130 + sc.warmup_recovery_days) == 0.0);
}

TEST_CASE("scenario JSON round trip") {
    const auto sc = default_scenario(9);
    const auto back = scenario_from_json(scenario_to_json(sc));
    CHECK(scenario_to_json(back) == scenario_to_json(sc));
    CHECK(generate_corpus(back) == generate_corpus(sc));
    CHECK_THROWS_AS(scenario_from_json("{not json"), DataError);
}

TEST_CASE("scenario validation") {
    auto sc = default_scenario(1);
    sc.profiles.pop_back();
    CHECK_THROWS_AS(sc.validate(), DataError);
    sc = default_scenario(1);
    sc.profiles[0].t2echo_mean = 3.0 * sc.profiles[0].t1_mean;
    CHECK_THROWS_AS(sc.validate(), DataError);
    sc = default_scenario(1);
    sc.f2q_base.pop_back();
    CHECK_THROWS_AS(generate_corpus(sc), DataError);
}

TEST_CASE("a noiseless scenario yields constant series") {
    auto sc = default_scenario(2);
    for (auto& p : sc.profiles) {
        p.drift_rho = 0.0;
        p.drift_sigma = {};
        p.tls_rate = 0.0;
    }
    std::fill(sc.f2q_sigma.begin(), sc.f2q_sigma.end(), 0.0);
    sc.warmup_days.clear();
    sc.coherence_global_weight = 0.0;
    sc.fidelity_global_weight = 0.0;
    const auto ds = generate_corpus(sc);
    for (auto m : kQubitMetrics)
        for (int q = 0; q < 20; ++q) {
            const auto s = series(ds, TargetId::qubit(q), m);
            const double want = sc.profiles[static_cast<std::size_t>(q)].mean(m);
            for (double v : s.values) CHECK(v == doctest::Approx(want));
        }
    for (std::size_t e = 0; e < sc.topology.n_edges(); ++e) {
        const auto [a, b] = sc.topology.edges()[e];
        for (double v : series(ds, TargetId::coupler(a, b), MetricKind::Fidelity2Q).values)
            CHECK(v == doctest::Approx(sc.f2q_base[e]));
    }
}

TEST_CASE("stable couplers outperform couplers touching the noisy family") {
    const auto sc = default_scenario(7);
    const auto ds = generate_corpus(sc);
    double in_stable = 0.0, touching = 0.0;
    int ns = 0, nt = 0;
    for (const auto& [a, b] : sc.topology.edges()) {
        const auto s = series(ds, TargetId::coupler(a, b), MetricKind::Fidelity2Q);
        double mean = 0.0;
        for (double v : s.values) mean += v;
        mean /= static_cast<double>(s.size());
        const bool noisy = sc.profiles[static_cast<std::size_t>(a)].family == Family::Noisy ||
                           sc.profiles[static_cast<std::size_t>(b)].family == Family::Noisy;
        if (noisy)
            touching += mean, ++nt;
        else
            in_stable += mean, ++ns;
    }
    CHECK(in_stable / ns > touching / nt);
}

TEST_CASE("decay curve reference points") {
    Vec e(3), rb(3), ram(5);
    e << 0.9, 0.1, 40.0;
    rb << 0.5, 0.5, 1.0;
    ram << 0.5, 0.5, 4.0, 2 * std::numbers::pi * 0.25, 0.0;
    const std::vector<double> zero = {0.0}, ms = {1, 7, 300}, four = {4.0};
    CHECK(generate_decay_curve(CurveModel::ExpDecay, e, zero, std::nullopt, 0)[0] == doctest::Approx(1.0));
    for (double v : generate_decay_curve(CurveModel::RBDecay, rb, ms, std::nullopt, 0)) CHECK(v == doctest::Approx(1.0));
    CHECK(generate_decay_curve(CurveModel::Ramsey, ram, four, std::nullopt, 0)[0] ==
          doctest::Approx(0.5 + 0.5 * std::exp(-1.0)));
    CHECK(generate_decay_curve(CurveModel::Ramsey, ram, four, std::nullopt, 0)[0] == doctest::Approx(0.6839).epsilon(1e-4));
}

TEST_CASE("decay curves") {
    Vec p(3);
    p << 0.9, 0.05, 20.0;
    std::vector<double> ts;
    for (int i = 0; i < 40; ++i) ts.push_back(i * 2.0);
    const auto exact = generate_decay_curve(CurveModel::ExpDecay, p, ts, std::nullopt, 0);
    const Vec direct = model_curve(CurveModel::ExpDecay, p, ts);
    for (std::size_t i = 0; i < ts.size(); ++i) CHECK(exact[i] == direct(static_cast<Eigen::Index>(i)));

    // Binomial noise: standardized residuals have roughly unit variance.
    const std::int64_t shots = 1000;
    double ss = 0.0;
    int n = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto noisy = generate_decay_curve(CurveModel::ExpDecay, p, ts, shots, seed);
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const double q = exact[i];
            CHECK(noisy[i] * shots == doctest::Approx(std::round(noisy[i] * shots)));
            ss += (noisy[i] - q) * (noisy[i] - q) / (q * (1 - q) / shots);
            ++n;
        }
    }
    CHECK(ss / n == doctest::Approx(1.0).epsilon(0.1));

    Vec bad(3);
    bad << 1.5, 0.0, 10.0;
    CHECK_THROWS_AS(generate_decay_curve(CurveModel::ExpDecay, bad, ts, shots, 0), DataError);
}

}
