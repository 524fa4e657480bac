#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "qhealth/common.hpp"
#include "qhealth/health.hpp"
#include "qhealth/synthdev.hpp"

using namespace qhealth;

namespace {

struct QubitBase {
    double t1 = 50, t2s = 5, t2e = 25, fro = 0.98, f1q = 0.999;
};

// A small device with mildly noisy daily values; `tweak` can rewrite any record.
Dataset device(const DeviceTopology& g, const std::vector<QubitBase>& base, int days, double f2q = 0.99,
               const std::function<void(CalibrationRecord&)>& tweak = {}) {
    Rng rng(77);
    std::vector<CalibrationRecord> rs;
    auto add = [&](int d, TargetId t, MetricKind m, double v) {
        CalibrationRecord r;
        r.day = d;
        r.target = t;
        r.metric = m;
        r.value = v;
        if (tweak) tweak(r);
        rs.push_back(r);
    };
    for (int d = 0; d < days; ++d) {
        for (int q = 0; q < g.n_qubits(); ++q) {
            const auto& b = base[static_cast<std::size_t>(q)];
            const auto t = TargetId::qubit(q);
            add(d, t, MetricKind::T1, b.t1 * (1 + 0.01 * rng.normal()));
            add(d, t, MetricKind::T2Star, b.t2s * (1 + 0.01 * rng.normal()));
            add(d, t, MetricKind::T2Echo, b.t2e * (1 + 0.01 * rng.normal()));
            add(d, t, MetricKind::ReadoutFidelity, b.fro - 0.001 * std::abs(rng.normal()));
            add(d, t, MetricKind::Fidelity1Q, b.f1q - 1e-4 * std::abs(rng.normal()));
        }
        for (const auto& [a, b] : g.edges())
            add(d, TargetId::coupler(a, b), MetricKind::Fidelity2Q, f2q - 1e-3 * std::abs(rng.normal()));
    }
    return Dataset(rs);
}

// Window-mean inputs built straight from the records, for the GHZ oracle.
double mean_of(const Dataset& ds, TargetId t, MetricKind m) {
    double s = 0.0;
    int n = 0;
    for (const auto& r : ds.records())
        if (r.target == t && r.metric == m) s += r.value, ++n;
    return s / n;
}

double ghz_oracle(const Dataset& ds, int root, const std::vector<Edge>& edges, const std::vector<int>& qubits,
                  double t_gate) {
    double f = mean_of(ds, TargetId::qubit(root), MetricKind::Fidelity1Q);
    for (const auto& [a, b] : edges) f *= mean_of(ds, TargetId::coupler(a, b), MetricKind::Fidelity2Q);
    const double t = t_gate * static_cast<double>(qubits.size());
    double rate = 0.0;
    for (int q : qubits) {
        f *= mean_of(ds, TargetId::qubit(q), MetricKind::ReadoutFidelity);
        rate += 1.0 / (2 * mean_of(ds, TargetId::qubit(q), MetricKind::T1)) +
                1.0 / (2 * mean_of(ds, TargetId::qubit(q), MetricKind::T2Echo));
    }
    return f * std::exp(-t * rate);
}

std::vector<std::vector<int>> brute_force_subsets(const DeviceTopology& g, int k) {
    std::vector<std::vector<int>> out;
    const int n = g.n_qubits();
    std::vector<int> pick(static_cast<std::size_t>(k));
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == k) {
            if (g.is_connected_subset(pick)) out.push_back(pick);
            return;
        }
        for (int v = start; v < n; ++v) {
            pick[static_cast<std::size_t>(depth)] = v;
            rec(v + 1, depth + 1);
        }
    };
    rec(0, 0);
    return out;
}

}  // namespace

TEST_SUITE("health") {

TEST_CASE("ramps clamp") {
    const Ramp r{10.0, 60.0};
    CHECK(r(5.0) == 0.0);
    CHECK(r(35.0) == doctest::Approx(0.5));
    CHECK(r(99.0) == 1.0);
    HealthConfig bad;
    bad.w_gate = 0.5;
    CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("scores rank a degraded qubit last") {
    const DeviceTopology g("line", 4, {{0, 1}, {1, 2}, {2, 3}});
    std::vector<QubitBase> base(4);
    base[2] = {15, 2, 6, 0.91, 0.9905};
    const auto ds = device(g, base, 40);
    const auto scores = health_scores(ds, {0, 39});
    REQUIRE(scores.size() == 4);
    for (const auto& s : scores) {
        CHECK(s.score >= 0.0);
        CHECK(s.score <= 1.0);
    }
    const auto worst = std::min_element(scores.begin(), scores.end(),
                                        [](const auto& a, const auto& b) { return a.score < b.score; });
    CHECK(worst->target == TargetId::qubit(2));
    CHECK(scores[0].components.coherence == doctest::Approx(0.5 * (0.8 + 0.8)).epsilon(0.02));
    CHECK_THROWS_AS(health_scores(ds, {0, 12}), DataError);
}

TEST_CASE("low fidelity flag") {
    const DeviceTopology g("pair", 2, {{0, 1}});
    std::vector<QubitBase> base(2);
    base[1].fro = 0.895;
    const auto scores = health_scores(device(g, base, 30), {0, 29});
    CHECK_FALSE(scores[0].has(HealthFlag::LowFidelity));
    CHECK(scores[1].has(HealthFlag::LowFidelity));
}

TEST_CASE("advice rules") {
    const DeviceTopology g("line", 5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
    std::vector<QubitBase> base(5);
    base[4] = {12, 2, 6, 0.91, 0.9902};
    const auto ds = device(g, base, 60, 0.99, [](CalibrationRecord& r) {
        if (!r.target.is_qubit()) return;
        // Qubits 0-3 lose T1 on day 30; qubit 1 also loses T2echo that day.
        if (r.day == 30 && r.target.a < 4 && r.metric == MetricKind::T1) r.value *= 0.5;
        if (r.day == 30 && r.target.a == 1 && r.metric == MetricKind::T2Echo) r.value *= 0.5;
        // Qubit 3 wobbles every day.
        if (r.target.a == 3 && r.metric == MetricKind::Fidelity1Q && r.day % 2) r.value -= 0.004;
    });
    const auto scores = health_scores(ds, {0, 59});
    CHECK(scores[1].has(HealthFlag::TLSSuspect));
    CHECK(scores[1].tls_days == std::vector<int>{30});
    CHECK(scores[3].has(HealthFlag::HighVariance));

    const auto actions = recalibration_advice(scores, nullptr, {});
    std::vector<ActionKind> kinds;
    for (const auto& a : actions) kinds.push_back(a.kind);
    CHECK(std::is_sorted(kinds.begin(), kinds.end()));

    REQUIRE(actions.size() >= 3);
    CHECK(actions[0].kind == ActionKind::GlobalRecalibration);
    CHECK(actions[0].span->from == 30);
    CHECK(actions[0].span->to == 32);
    CHECK(actions[0].targets.size() == 4);

    std::set<int> targeted;
    for (const auto& a : actions)
        if (a.kind == ActionKind::TargetedRecalibration) targeted.insert(a.targets[0].a);
    CHECK(targeted == std::set<int>{1, 4});
    // The day-30 T1 halving also inflates the spread of the dropped qubits, so
    // only require the wobbling qubit to be on the watch list.
    std::set<int> watched;
    for (const auto& a : actions)
        if (a.kind == ActionKind::WatchList) watched.insert(a.targets[0].a);
    CHECK(actions.back().kind == ActionKind::WatchList);
    CHECK(watched.count(3) == 1);
}

TEST_CASE("GHZ estimate matches the closed form") {
    const DeviceTopology g("line", 3, {{0, 1}, {1, 2}});
    std::vector<QubitBase> base(3);
    base[0].f1q = 0.9995;
    base[2] = {30, 3, 12, 0.95, 0.998};
    const auto ds = device(g, base, 20);
    const auto w = ds.day_span();
    const std::vector<int> order = {0, 1, 2};
    const double expected = ghz_oracle(ds, 0, {{0, 1}, {1, 2}}, order, 0.04);
    CHECK(ghz_fidelity_estimate(order, ds, w) == doctest::Approx(expected).epsilon(1e-12));

    const std::vector<int> reversed = {2, 1, 0};
    CHECK(ghz_fidelity_estimate(reversed, ds, w) ==
          doctest::Approx(ghz_oracle(ds, 2, {{0, 1}, {1, 2}}, order, 0.04)).epsilon(1e-12));
    const std::vector<int> broken = {0, 2, 1};
    CHECK_THROWS_AS(ghz_fidelity_estimate(broken, ds, w), DataError);

    // Longer gates only lower the estimate.
    GhzConfig slow;
    slow.t_2q_gate = 0.4;
    CHECK(ghz_fidelity_estimate(order, ds, w, slow) < ghz_fidelity_estimate(order, ds, w));
}

TEST_CASE("connected subsets match brute force") {
    const auto g = default_topology();
    for (int k = 1; k <= 5; ++k) CHECK(connected_subsets(g, k) == brute_force_subsets(g, k));
    const std::vector<int> allowed = {0, 1, 2, 5, 6, 7};
    for (const auto& s : connected_subsets(g, 3, allowed))
        for (int q : s) CHECK(std::find(allowed.begin(), allowed.end(), q) != allowed.end());
}

TEST_CASE("layout search") {
    const auto sc = default_scenario(7);
    const auto ds = generate_corpus(sc);
    const auto in = ghz_inputs(ds, ds.day_span());
    const auto subsets = connected_subsets(sc.topology, 4);
    for (std::size_t i = 0; i < subsets.size(); i += 7) {
        const auto& s = subsets[i];
        // Exhaustive oracle: every ordering that forms a path.
        std::vector<int> perm = s;
        std::optional<double> best;
        do {
            bool chain = true;
            for (std::size_t j = 1; j < perm.size(); ++j) chain = chain && sc.topology.has_edge(perm[j - 1], perm[j]);
            if (chain) {
                const double f = ghz_fidelity_estimate(perm, in);
                if (!best || f > *best) best = f;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        const auto path = best_path(s, sc.topology, in);
        CHECK(path.has_value() == best.has_value());
        if (path) CHECK(path->fidelity == doctest::Approx(*best).epsilon(1e-12));
        // A path is one particular spanning tree, so the tree search never does worse.
        const auto tree = best_tree(s, sc.topology, in);
        REQUIRE(tree);
        if (path) CHECK(tree->fidelity >= path->fidelity - 1e-15);
    }
}

TEST_CASE("recommendations at k = 2 are the best couplers") {
    const auto sc = default_scenario(7);
    const auto ds = generate_corpus(sc);
    const DayWindow w{100, 199};
    const auto in = ghz_inputs(ds, w);
    std::vector<std::pair<double, std::vector<int>>> edges;
    for (const auto& [a, b] : sc.topology.edges()) {
        const double f1 = std::max(*in.f1q[static_cast<std::size_t>(a)], *in.f1q[static_cast<std::size_t>(b)]);
        double f = f1 * *in.coupler(a, b) * *in.readout[static_cast<std::size_t>(a)] *
                   *in.readout[static_cast<std::size_t>(b)];
        double rate = 0.0;
        for (int q : {a, b})
            rate += 0.5 / *in.t1[static_cast<std::size_t>(q)] + 0.5 / *in.t2echo[static_cast<std::size_t>(q)];
        f *= std::exp(-2 * 0.04 * rate);
        edges.push_back({f, {a, b}});
    }
    std::sort(edges.begin(), edges.end(), [](const auto& x, const auto& y) {
        return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    RecommendOptions opts;
    opts.top_n = 30;
    const auto recs = recommend_subsets(ds, sc.topology, 2, w, opts);
    REQUIRE(recs.size() == 30);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        auto q = recs[i].qubits;
        std::sort(q.begin(), q.end());
        CHECK(q == edges[i].second);
        CHECK(recs[i].predicted_ghz_fidelity == doctest::Approx(edges[i].first).epsilon(1e-12));
        CHECK(recs[i].rank == static_cast<int>(i) + 1);
    }
    CHECK_THROWS_AS(recommend_subsets(ds, sc.topology, 8, w), UsageError);
    CHECK_THROWS_AS(recommend_subsets(ds, sc.topology, 0, w), UsageError);
    RecommendOptions greedy;
    greedy.greedy = true;
    const auto big = recommend_subsets(ds, sc.topology, 9, w, greedy);
    REQUIRE_FALSE(big.empty());
    CHECK(sc.topology.is_connected_subset(big[0].qubits));
}

TEST_CASE("cluster validation separates families") {
    const auto sc = default_scenario(7);
    const auto ds = generate_corpus(sc);
    ClusterAssignment planted;
    planted.k = 2;
    for (const auto& p : sc.profiles) planted.labels.push_back(p.family == Family::Noisy ? 1 : 0);
    const auto rep = validate_clusters(planted, ds, sc.topology, 5, ds.day_span());
    REQUIRE(rep.gap.has_value());
    CHECK(*rep.best_label == 0);
    CHECK(*rep.gap > 0.05);
    for (const auto& c : rep.clusters) {
        CHECK(c.min <= c.mean);
        CHECK(c.mean <= c.max);
    }
}

}
