#include "qhealth/health.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>

namespace qhealth {

namespace {

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> window_values(const Dataset& ds, const TargetId& t, MetricKind m, DayWindow w) {
    std::vector<double> out;
    for (const auto i : ds.index(t, m)) {
        const auto& r = ds.records()[i];
        if (w.contains(r.day)) out.push_back(r.value);
    }
    return out;
}

std::optional<double> population_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return std::nullopt;
    const double n = static_cast<double>(xs.size());
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / n);
}

std::vector<int> qubits_in(const Dataset& ds) {
    std::set<int> qs;
    for (auto m : kQubitMetrics)
        for (const auto& t : ds.targets(m))
            if (t.is_qubit()) qs.insert(t.a);
    return {qs.begin(), qs.end()};
}

constexpr MetricKind kDropMetrics[] = {MetricKind::T1, MetricKind::T2Echo, MetricKind::ReadoutFidelity,
                                       MetricKind::Fidelity1Q};

// Stability and variance flags look at the five qubit metrics plus incident F2Q.
constexpr int kSpreadSlots = 6;

}  // namespace

std::string_view to_string(HealthFlag f) noexcept {
    switch (f) {
        case HealthFlag::SuddenDrop: return "SuddenDrop";
        case HealthFlag::HighVariance: return "HighVariance";
        case HealthFlag::LowFidelity: return "LowFidelity";
        case HealthFlag::TLSSuspect: return "TLSSuspect";
    }
    return "?";
}

double Ramp::operator()(double x) const {
    if (!(ceiling > floor)) return x >= ceiling ? 1.0 : 0.0;
    return std::clamp((x - floor) / (ceiling - floor), 0.0, 1.0);
}

void HealthConfig::validate() const {
    for (double w : {w_coherence, w_readout, w_gate, w_stability})
        if (!(w >= 0.0)) throw UsageError("health weights must be nonnegative");
    if (std::abs(w_coherence + w_readout + w_gate + w_stability - 1.0) > 1e-12)
        throw UsageError("health weights must sum to 1");
    for (const Ramp* r : {&t1, &t2echo, &readout, &f1q, &f2q})
        if (!(r->ceiling > r->floor)) throw UsageError("health ramp ceiling must exceed its floor");
}

bool HealthScore::has(HealthFlag f) const { return std::find(flags.begin(), flags.end(), f) != flags.end(); }

std::vector<HealthScore> health_scores(const Dataset& ds, DayWindow window, const HealthConfig& cfg) {
    cfg.validate();
    if (window.length() < 14)
        throw DataError("insufficient window: " + std::to_string(window.length()) + " days, need 14");
    const auto qubits = qubits_in(ds);
    if (qubits.empty()) throw DataError("dataset has no qubit records");
    const auto couplers = ds.targets(MetricKind::Fidelity2Q);

    const auto n = qubits.size();
    std::vector<HealthScore> out(n);
    // spreads[slot][i]: std of qubit i's window series for that slot.
    std::vector<std::vector<std::optional<double>>> spreads(kSpreadSlots, std::vector<std::optional<double>>(n));

    for (std::size_t i = 0; i < n; ++i) {
        const int q = qubits[i];
        const auto qt = TargetId::qubit(q);
        auto& hs = out[i];
        hs.target = qt;
        const auto mean_of = [&](MetricKind m) { return window_mean(ds, qt, m, window); };

        const auto t1 = mean_of(MetricKind::T1);
        const auto t2e = mean_of(MetricKind::T2Echo);
        const auto fro = mean_of(MetricKind::ReadoutFidelity);
        const auto f1q = mean_of(MetricKind::Fidelity1Q);
        if (!t1 && !t2e) throw DataError("no coherence data in window for " + to_string(qt));
        if (!fro) throw DataError("no readout data in window for " + to_string(qt));
        if (!f1q) throw DataError("no single-qubit gate data in window for " + to_string(qt));

        double f2q_sum = 0.0, f2q_spread = 0.0;
        int f2q_n = 0, f2q_spread_n = 0;
        for (const auto& c : couplers) {
            if (!c.touches(q)) continue;
            if (const auto v = window_mean(ds, c, MetricKind::Fidelity2Q, window)) {
                f2q_sum += *v;
                ++f2q_n;
            }
            if (const auto s = population_std(window_values(ds, c, MetricKind::Fidelity2Q, window))) {
                f2q_spread += *s;
                ++f2q_spread_n;
            }
        }
        const std::optional<double> f2q = f2q_n > 0 ? std::optional(f2q_sum / f2q_n) : std::nullopt;

        auto& c = hs.components;
        c.coherence = t1 && t2e ? 0.5 * (cfg.t1(*t1) + cfg.t2echo(*t2e)) : (t1 ? cfg.t1(*t1) : cfg.t2echo(*t2e));
        c.readout = cfg.readout(*fro);
        c.gate = f2q ? 0.5 * (cfg.f1q(*f1q) + cfg.f2q(*f2q)) : cfg.f1q(*f1q);

        const bool low = *fro <= cfg.readout.floor || *f1q <= cfg.f1q.floor || (f2q && *f2q <= cfg.f2q.floor);
        if (low) hs.flags.push_back(HealthFlag::LowFidelity);

        for (int slot = 0; slot < 5; ++slot)
            spreads[static_cast<std::size_t>(slot)][i] =
                population_std(window_values(ds, qt, kQubitMetrics[static_cast<std::size_t>(slot)], window));
        if (f2q_spread_n > 0) spreads[5][i] = f2q_spread / f2q_spread_n;

        for (const auto m : kDropMetrics) {
            const auto s = series(ds, qt, m);
            if (s.size() < 20) continue;
            for (const auto& flag : drop_detector(s, cfg.drop_z))
                if (window.contains(flag.day)) hs.drop_days[m].push_back(flag.day);
        }
        const auto& d1 = hs.drop_days[MetricKind::T1];
        const auto& d2 = hs.drop_days[MetricKind::T2Echo];
        std::set_intersection(d1.begin(), d1.end(), d2.begin(), d2.end(), std::back_inserter(hs.tls_days));
        std::erase_if(hs.drop_days, [](const auto& kv) { return kv.second.empty(); });
    }

    std::vector<double> rank_sum(n, 0.0);
    std::vector<int> rank_count(n, 0);
    std::vector<bool> high_variance(n, false);
    for (const auto& slot : spreads) {
        std::vector<double> present;
        for (const auto& s : slot)
            if (s) present.push_back(*s);
        if (present.empty()) continue;
        const double med = median_of(present);
        std::vector<double> dev;
        for (double s : present) dev.push_back(std::abs(s - med));
        const double threshold = med + cfg.variance_mad_k * 1.4826 * median_of(dev);
        for (std::size_t i = 0; i < n; ++i) {
            if (!slot[i]) continue;
            const auto smaller = std::count_if(present.begin(), present.end(), [&](double s) { return s < *slot[i]; });
            rank_sum[i] += present.size() > 1 ? static_cast<double>(smaller) / static_cast<double>(present.size() - 1)
                                              : 0.0;
            ++rank_count[i];
            if (*slot[i] > threshold) high_variance[i] = true;
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        auto& hs = out[i];
        auto& c = hs.components;
        c.stability = rank_count[i] > 0 ? 1.0 - rank_sum[i] / rank_count[i] : 1.0;
        hs.score = cfg.w_coherence * c.coherence + cfg.w_readout * c.readout + cfg.w_gate * c.gate +
                   cfg.w_stability * c.stability;
        if (high_variance[i]) hs.flags.push_back(HealthFlag::HighVariance);
        if (!hs.drop_days.empty()) hs.flags.push_back(HealthFlag::SuddenDrop);
        if (!hs.tls_days.empty()) hs.flags.push_back(HealthFlag::TLSSuspect);
        std::sort(hs.flags.begin(), hs.flags.end());
    }
    return out;
}

std::string_view to_string(ActionKind k) noexcept {
    switch (k) {
        case ActionKind::GlobalRecalibration: return "global-recalibration";
        case ActionKind::TargetedRecalibration: return "targeted-recalibration";
        case ActionKind::WatchList: return "watch-list";
    }
    return "?";
}

std::vector<RecalibrationAction> recalibration_advice(std::span<const HealthScore> scores, const CorrMatrix* corr,
                                                      std::span<const AcfLagRow> acf_table, const AdviceConfig& cfg) {
    std::vector<RecalibrationAction> actions;
    if (scores.empty()) return actions;
    const auto n = scores.size();

    // (a) device-wide drops.
    std::vector<std::set<int>> drop_days(n);
    std::set<int> candidates;
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& [m, days] : scores[i].drop_days)
            for (int d : days) {
                drop_days[i].insert(d);
                candidates.insert(d);
            }
    // Qubits with a drop in [from, from + span - 1].
    const auto count_from = [&](int from) {
        int hits = 0;
        for (const auto& days : drop_days) {
            const auto it = days.lower_bound(from);
            hits += it != days.end() && *it <= from + cfg.global_span_days - 1 ? 1 : 0;
        }
        return hits;
    };
    const auto count_on = [&](int day) {
        int hits = 0;
        for (const auto& days : drop_days) hits += days.count(day) ? 1 : 0;
        return hits;
    };
    const double needed = cfg.global_fraction * static_cast<double>(n);
    struct Best {
        int from, hits, same_day;
    };
    std::optional<Best> group_best;
    int group_last = 0;
    const auto flush = [&] {
        if (!group_best) return;
        RecalibrationAction a;
        a.kind = ActionKind::GlobalRecalibration;
        a.span = DayWindow{group_best->from, group_best->from + cfg.global_span_days - 1};
        for (std::size_t i = 0; i < n; ++i) {
            const auto it = drop_days[i].lower_bound(a.span->from);
            if (it != drop_days[i].end() && *it <= a.span->to) a.targets.push_back(scores[i].target);
        }
        a.reason = std::to_string(group_best->hits) + " of " + std::to_string(n) + " qubits dropped within days " +
                   std::to_string(a.span->from) + "-" + std::to_string(a.span->to);
        if (corr) {
            double sum = 0.0;
            int pairs = 0;
            for (std::size_t x = 0; x < corr->metric_order.size(); ++x)
                for (std::size_t y = x + 1; y < corr->metric_order.size(); ++y)
                    if (is_fidelity(corr->metric_order[x]) && is_fidelity(corr->metric_order[y])) {
                        sum += std::abs(corr->values(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)));
                        ++pairs;
                    }
            if (pairs > 0)
                a.reason += "; fidelity block mean " + std::string(to_string(corr->method)) + " " +
                            fmt("%.3f", sum / pairs);
        }
        actions.push_back(std::move(a));
        group_best.reset();
    };
    // Qualifying spans that overlap form one event; keep the span with the
    // most qubits, then the most drops on its first day, then the earliest.
    for (int d : candidates) {
        const int hits = count_from(d);
        if (static_cast<double>(hits) < needed) continue;
        if (group_best && d - group_last > cfg.global_span_days - 1) flush();
        const int same_day = count_on(d);
        if (!group_best || hits > group_best->hits || (hits == group_best->hits && same_day > group_best->same_day))
            group_best = Best{d, hits, same_day};
        group_last = d;
    }
    flush();

    // (b) per-qubit recalibration, worst score first.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) {
        if (scores[x].score != scores[y].score) return scores[x].score < scores[y].score;
        return scores[x].target < scores[y].target;
    });
    for (auto i : order) {
        const auto& s = scores[i];
        const bool low = s.score < cfg.targeted_below;
        if (!low && s.tls_days.empty()) continue;
        RecalibrationAction a;
        a.kind = ActionKind::TargetedRecalibration;
        a.targets = {s.target};
        if (low) a.reason = "score " + fmt("%.3f", s.score) + " below " + fmt("%.2f", cfg.targeted_below);
        if (!s.tls_days.empty()) {
            if (!a.reason.empty()) a.reason += "; ";
            a.reason += "T1 and T2ECHO dropped together on day " + std::to_string(s.tls_days.front());
            a.span = DayWindow{s.tls_days.front(), s.tls_days.back()};
        }
        actions.push_back(std::move(a));
    }

    // (c) watch list.
    std::optional<double> persistence;
    for (const auto& row : acf_table)
        if (row.metric == MetricKind::T1 && row.n_targets > 0 && !row.lags.empty() && row.lags.front() == 1)
            persistence = row.mean(0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = scores[i];
        if (!s.has(HealthFlag::HighVariance)) continue;
        RecalibrationAction a;
        a.kind = ActionKind::WatchList;
        a.targets = {s.target};
        a.reason = "variance well above the device median";
        if (persistence) a.reason += "; device T1 lag-1 ACF " + fmt("%.3f", *persistence);
        actions.push_back(std::move(a));
    }
    return actions;
}

// ---------------------------------------------------------------------------

std::string_view to_string(LayoutMode m) noexcept { return m == LayoutMode::Path ? "path" : "tree"; }

LayoutMode parse_layout_mode(std::string_view token) {
    if (token == "path") return LayoutMode::Path;
    if (token == "tree") return LayoutMode::Tree;
    throw UsageError("unknown layout '" + std::string(token) + "' (expected path or tree)");
}

void GhzInputs::require_qubit(int q) const {
    if (q < 0 || q >= n_qubits) throw DataError("qubit " + std::to_string(q) + " has no data");
    const auto i = static_cast<std::size_t>(q);
    if (!t1[i] || !t2echo[i] || !readout[i] || !f1q[i])
        throw DataError("missing metrics in window for qubit " + std::to_string(q));
}

std::optional<double> GhzInputs::coupler(int a, int b) const {
    const auto it = f2q.find({std::min(a, b), std::max(a, b)});
    if (it == f2q.end()) return std::nullopt;
    return it->second;
}

GhzInputs ghz_inputs(const Dataset& ds, DayWindow window) {
    GhzInputs in;
    in.n_qubits = ds.qubit_count();
    const auto n = static_cast<std::size_t>(in.n_qubits);
    in.t1.resize(n);
    in.t2echo.resize(n);
    in.readout.resize(n);
    in.f1q.resize(n);
    for (int q = 0; q < in.n_qubits; ++q) {
        const auto t = TargetId::qubit(q);
        const auto i = static_cast<std::size_t>(q);
        in.t1[i] = window_mean(ds, t, MetricKind::T1, window);
        in.t2echo[i] = window_mean(ds, t, MetricKind::T2Echo, window);
        in.readout[i] = window_mean(ds, t, MetricKind::ReadoutFidelity, window);
        in.f1q[i] = window_mean(ds, t, MetricKind::Fidelity1Q, window);
    }
    for (const auto& c : ds.targets(MetricKind::Fidelity2Q))
        if (const auto v = window_mean(ds, c, MetricKind::Fidelity2Q, window)) in.f2q[{c.a, c.b}] = *v;
    return in;
}

double ghz_layout_estimate(std::span<const int> qubits, const GhzLayout& layout, const GhzInputs& in,
                           const GhzConfig& cfg) {
    const auto k = qubits.size();
    if (k == 0) throw DataError("empty qubit subset");
    std::vector<int> sorted(qubits.begin(), qubits.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw DataError("repeated qubit in subset");
    const auto member = [&](int q) { return std::binary_search(sorted.begin(), sorted.end(), q); };
    if (!member(layout.root)) throw DataError("layout root is not in the subset");
    if (layout.edges.size() != k - 1) throw DataError("layout does not span the subset");

    // Union-find check that the edges form a spanning tree.
    std::vector<int> parent(k);
    std::iota(parent.begin(), parent.end(), 0);
    const auto pos = [&](int q) {
        return static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), q) - sorted.begin());
    };
    const std::function<int(int)> find = [&](int x) { return parent[static_cast<std::size_t>(x)] == x ? x : parent[static_cast<std::size_t>(x)] = find(parent[static_cast<std::size_t>(x)]); };

    double value = 1.0;
    for (const auto& [a, b] : layout.edges) {
        if (!member(a) || !member(b)) throw DataError("layout edge leaves the subset");
        const auto f = in.coupler(a, b);
        if (!f) throw DataError("disconnected subset: qubits " + std::to_string(a) + " and " + std::to_string(b) +
                                " share no coupler");
        const int ra = find(pos(a)), rb = find(pos(b));
        if (ra == rb) throw DataError("layout edges contain a cycle");
        parent[static_cast<std::size_t>(ra)] = rb;
        value *= *f;
    }
    for (int q : sorted) in.require_qubit(q);
    value *= *in.f1q[static_cast<std::size_t>(layout.root)];
    const double t = static_cast<double>(k) * cfg.t_2q_gate;
    double decay = 0.0;
    for (int q : sorted) {
        const auto i = static_cast<std::size_t>(q);
        value *= *in.readout[i];
        decay += t * (0.5 / *in.t1[i] + 0.5 / *in.t2echo[i]);
    }
    return std::clamp(value * std::exp(-decay), 0.0, 1.0);
}

double ghz_fidelity_estimate(std::span<const int> order, const GhzInputs& in, const GhzConfig& cfg) {
    if (order.empty()) throw DataError("empty qubit subset");
    GhzLayout layout{order.front(), {}};
    for (std::size_t i = 1; i < order.size(); ++i) layout.edges.emplace_back(order[i - 1], order[i]);
    return ghz_layout_estimate(order, layout, in, cfg);
}

double ghz_fidelity_estimate(std::span<const int> order, const Dataset& ds, DayWindow window, const GhzConfig& cfg) {
    return ghz_fidelity_estimate(order, ghz_inputs(ds, window), cfg);
}

namespace {

// Coupled pairs inside the subset, as positions into `qubits`.
std::vector<std::vector<int>> induced_adjacency(std::span<const int> qubits, const DeviceTopology& g,
                                                const GhzInputs& in) {
    const auto k = qubits.size();
    std::vector<std::vector<int>> adj(k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            if (i != j && g.has_edge(qubits[i], qubits[j]) && in.coupler(qubits[i], qubits[j]))
                adj[i].push_back(static_cast<int>(j));
    return adj;
}

ScoredLayout finish_path(std::span<const int> qubits, const std::vector<int>& pos_order, const GhzInputs& in,
                         const GhzConfig& cfg) {
    ScoredLayout s;
    for (int p : pos_order) s.order.push_back(qubits[static_cast<std::size_t>(p)]);
    s.layout.root = s.order.front();
    for (std::size_t i = 1; i < s.order.size(); ++i) s.layout.edges.emplace_back(s.order[i - 1], s.order[i]);
    s.fidelity = ghz_layout_estimate(qubits, s.layout, in, cfg);
    return s;
}

}  // namespace

std::optional<ScoredLayout> best_path(std::span<const int> qubits, const DeviceTopology& g, const GhzInputs& in,
                                      const GhzConfig& cfg) {
    const auto k = qubits.size();
    if (k == 0) throw DataError("empty qubit subset");
    for (int q : qubits) in.require_qubit(q);
    const auto adj = induced_adjacency(qubits, g, in);
    const auto f2 = [&](int a, int b) {
        return *in.coupler(qubits[static_cast<std::size_t>(a)], qubits[static_cast<std::size_t>(b)]);
    };
    const auto f1 = [&](int a) { return *in.f1q[static_cast<std::size_t>(qubits[static_cast<std::size_t>(a)])]; };

    // Only F1q(first) and the chain product depend on the order.
    std::vector<int> best_order;
    double best_value = -1.0;
    if (k <= 7) {
        std::vector<int> path;
        std::vector<bool> used(k, false);
        const std::function<void(double)> dfs = [&](double value) {
            if (path.size() == k) {
                if (value > best_value) {
                    best_value = value;
                    best_order = path;
                }
                return;
            }
            for (int nb : adj[static_cast<std::size_t>(path.back())]) {
                if (used[static_cast<std::size_t>(nb)]) continue;
                used[static_cast<std::size_t>(nb)] = true;
                path.push_back(nb);
                dfs(value * f2(path[path.size() - 2], nb));
                path.pop_back();
                used[static_cast<std::size_t>(nb)] = false;
            }
        };
        for (std::size_t s = 0; s < k; ++s) {
            path = {static_cast<int>(s)};
            used.assign(k, false);
            used[s] = true;
            dfs(f1(static_cast<int>(s)));
        }
    } else {
        for (std::size_t s = 0; s < k; ++s) {
            std::vector<int> path{static_cast<int>(s)};
            std::vector<bool> used(k, false);
            used[s] = true;
            double value = f1(static_cast<int>(s));
            while (path.size() < k) {
                int next = -1;
                for (int nb : adj[static_cast<std::size_t>(path.back())])
                    if (!used[static_cast<std::size_t>(nb)] && (next < 0 || f2(path.back(), nb) > f2(path.back(), next)))
                        next = nb;
                if (next < 0) break;
                value *= f2(path.back(), next);
                used[static_cast<std::size_t>(next)] = true;
                path.push_back(next);
            }
            if (path.size() == k && value > best_value) {
                best_value = value;
                best_order = path;
            }
        }
    }
    if (best_order.empty()) return std::nullopt;
    return finish_path(qubits, best_order, in, cfg);
}

std::optional<ScoredLayout> best_tree(std::span<const int> qubits, const DeviceTopology& g, const GhzInputs& in,
                                      const GhzConfig& cfg) {
    const auto k = qubits.size();
    if (k == 0) throw DataError("empty qubit subset");
    for (int q : qubits) in.require_qubit(q);
    std::vector<int> sorted(qubits.begin(), qubits.end());
    std::sort(sorted.begin(), sorted.end());

    int root = sorted.front();
    for (int q : sorted)
        if (*in.f1q[static_cast<std::size_t>(q)] > *in.f1q[static_cast<std::size_t>(root)]) root = q;

    struct Cand {
        double f;
        Edge e;
    };
    std::vector<Cand> cands;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j)
            if (g.has_edge(sorted[i], sorted[j]))
                if (const auto f = in.coupler(sorted[i], sorted[j])) cands.push_back({*f, {sorted[i], sorted[j]}});
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) { return x.f > y.f; });

    std::vector<int> parent(k);
    std::iota(parent.begin(), parent.end(), 0);
    const std::function<int(int)> find = [&](int x) { return parent[static_cast<std::size_t>(x)] == x ? x : parent[static_cast<std::size_t>(x)] = find(parent[static_cast<std::size_t>(x)]); };
    const auto pos = [&](int q) {
        return static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), q) - sorted.begin());
    };
    ScoredLayout s;
    s.layout.root = root;
    for (const auto& c : cands) {
        const int ra = find(pos(c.e.first)), rb = find(pos(c.e.second));
        if (ra == rb) continue;
        parent[static_cast<std::size_t>(ra)] = rb;
        s.layout.edges.push_back(c.e);
    }
    if (s.layout.edges.size() != k - 1) return std::nullopt;

    // Breadth-first order from the root.
    s.order = {root};
    for (std::size_t head = 0; head < s.order.size(); ++head) {
        std::vector<int> next;
        for (const auto& [a, b] : s.layout.edges) {
            const int q = s.order[head];
            const int other = a == q ? b : (b == q ? a : -1);
            if (other >= 0 && std::find(s.order.begin(), s.order.end(), other) == s.order.end()) next.push_back(other);
        }
        std::sort(next.begin(), next.end());
        s.order.insert(s.order.end(), next.begin(), next.end());
    }
    s.fidelity = ghz_layout_estimate(qubits, s.layout, in, cfg);
    return s;
}

std::optional<ScoredLayout> best_layout(std::span<const int> qubits, const DeviceTopology& g, const GhzInputs& in,
                                        const GhzConfig& cfg) {
    return cfg.layout == LayoutMode::Path ? best_path(qubits, g, in, cfg) : best_tree(qubits, g, in, cfg);
}

std::vector<std::vector<int>> connected_subsets(const DeviceTopology& g, int k, std::span<const int> allowed) {
    const int n = g.n_qubits();
    if (k < 1) throw UsageError("subset size must be >= 1");
    std::vector<bool> ok(static_cast<std::size_t>(n), allowed.empty());
    for (int q : allowed) {
        if (q < 0 || q >= n) throw DataError("qubit " + std::to_string(q) + " outside the topology");
        ok[static_cast<std::size_t>(q)] = true;
    }

    // Enumeration by extension: each connected set is produced once, from its
    // smallest node, by only ever adding exclusive neighbours larger than it.
    std::vector<std::vector<std::vector<int>>> per_root(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t root_index) {
        const int root = static_cast<int>(root_index);
        if (!ok[root_index]) return;
        auto& found = per_root[root_index];
        std::vector<int> sub{root};
        std::vector<bool> in_sub(static_cast<std::size_t>(n), false), near(static_cast<std::size_t>(n), false);
        in_sub[root_index] = true;
        near[root_index] = true;
        std::vector<int> ext;
        for (int u : g.neighbors(root))
            if (u > root && ok[static_cast<std::size_t>(u)]) ext.push_back(u);
        for (int u : g.neighbors(root)) near[static_cast<std::size_t>(u)] = true;

        const std::function<void(std::vector<int>, std::vector<bool>)> extend = [&](std::vector<int> ext_set,
                                                                                     std::vector<bool> closed) {
            if (static_cast<int>(sub.size()) == k) {
                auto s = sub;
                std::sort(s.begin(), s.end());
                found.push_back(std::move(s));
                return;
            }
            while (!ext_set.empty()) {
                const int w = ext_set.back();
                ext_set.pop_back();
                auto next_ext = ext_set;
                auto next_closed = closed;
                for (int u : g.neighbors(w)) {
                    const auto ui = static_cast<std::size_t>(u);
                    if (u > root && ok[ui] && !closed[ui]) next_ext.push_back(u);
                    next_closed[ui] = true;
                }
                next_closed[static_cast<std::size_t>(w)] = true;
                sub.push_back(w);
                extend(std::move(next_ext), std::move(next_closed));
                sub.pop_back();
            }
        };
        extend(ext, near);
    });

    std::vector<std::vector<int>> all;
    for (auto& v : per_root)
        for (auto& s : v) all.push_back(std::move(s));
    std::sort(all.begin(), all.end());
    return all;
}

namespace {

std::vector<Edge> induced_edges_of(const std::vector<int>& sorted, const DeviceTopology& g) {
    std::vector<Edge> out;
    for (std::size_t i = 0; i < sorted.size(); ++i)
        for (std::size_t j = i + 1; j < sorted.size(); ++j)
            if (g.has_edge(sorted[i], sorted[j])) out.emplace_back(sorted[i], sorted[j]);
    return out;
}

std::vector<std::vector<int>> greedy_subsets(const DeviceTopology& g, int k, const GhzInputs& in,
                                             const GhzConfig& cfg) {
    std::set<std::vector<int>> out;
    for (int start = 0; start < g.n_qubits(); ++start) {
        std::vector<int> sub{start};
        while (static_cast<int>(sub.size()) < k) {
            std::set<int> frontier;
            for (int q : sub)
                for (int u : g.neighbors(q))
                    if (std::find(sub.begin(), sub.end(), u) == sub.end()) frontier.insert(u);
            int best = -1;
            double best_f = -1.0;
            for (int u : frontier) {
                auto trial = sub;
                trial.push_back(u);
                std::sort(trial.begin(), trial.end());
                const auto s = best_layout(trial, g, in, cfg);
                if (s && s->fidelity > best_f) {
                    best_f = s->fidelity;
                    best = u;
                }
            }
            if (best < 0) break;
            sub.push_back(best);
        }
        if (static_cast<int>(sub.size()) == k) {
            std::sort(sub.begin(), sub.end());
            out.insert(sub);
        }
    }
    return {out.begin(), out.end()};
}

}  // namespace

std::vector<SubsetRecommendation> recommend_subsets(const Dataset& ds, const DeviceTopology& g, int k,
                                                    DayWindow window, const RecommendOptions& opts) {
    if (k < 1 || k > g.n_qubits())
        throw UsageError("k must lie in [1, " + std::to_string(g.n_qubits()) + "], got " + std::to_string(k));
    if (k > 7 && !opts.greedy)
        throw UsageError("exhaustive subset search is limited to k <= 7; use --greedy for k=" + std::to_string(k));
    if (opts.top_n < 1) throw UsageError("top_n must be >= 1");
    ds.check_topology(g);
    const auto in = ghz_inputs(ds, window);
    for (int q = 0; q < g.n_qubits(); ++q) in.require_qubit(q);

    const auto subsets = k > 7 ? greedy_subsets(g, k, in, opts.ghz) : connected_subsets(g, k);
    std::vector<std::optional<ScoredLayout>> scored(subsets.size());
    parallel_for(subsets.size(), [&](std::size_t i) { scored[i] = best_layout(subsets[i], g, in, opts.ghz); });

    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < subsets.size(); ++i)
        if (scored[i]) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(), [&](auto x, auto y) {
        if (scored[x]->fidelity != scored[y]->fidelity) return scored[x]->fidelity > scored[y]->fidelity;
        return subsets[x] < subsets[y];
    });
    std::vector<SubsetRecommendation> out;
    for (std::size_t r = 0; r < idx.size() && static_cast<int>(r) < opts.top_n; ++r) {
        const auto i = idx[r];
        SubsetRecommendation rec;
        rec.qubits = scored[i]->order;
        rec.induced_edges = induced_edges_of(subsets[i], g);
        rec.layout_edges = scored[i]->layout.edges;
        rec.predicted_ghz_fidelity = scored[i]->fidelity;
        rec.rank = static_cast<int>(r) + 1;
        out.push_back(std::move(rec));
    }
    return out;
}

ValidationReport validate_clusters(const ClusterAssignment& assignment, const Dataset& ds, const DeviceTopology& g,
                                   int k_subset, DayWindow window, const GhzConfig& cfg, int max_samples,
                                   std::uint64_t seed) {
    if (static_cast<int>(assignment.labels.size()) != g.n_qubits())
        throw DataError("cluster labels cover " + std::to_string(assignment.labels.size()) + " qubits, topology has " +
                        std::to_string(g.n_qubits()));
    if (k_subset < 1) throw UsageError("subset size must be >= 1");
    if (max_samples < 1) throw UsageError("max_samples must be >= 1");
    const auto in = ghz_inputs(ds, window);

    std::map<int, std::vector<int>> members;
    for (int q = 0; q < g.n_qubits(); ++q) members[assignment.labels[static_cast<std::size_t>(q)]].push_back(q);

    ValidationReport rep;
    rep.k_subset = k_subset;
    for (const auto& [label, qs] : members) {
        ClusterGhzStats st;
        st.label = label;
        st.members = qs;
        if (static_cast<int>(qs.size()) < k_subset) {
            st.note = "cluster has fewer than " + std::to_string(k_subset) + " qubits";
            rep.clusters.push_back(std::move(st));
            continue;
        }
        auto subsets = connected_subsets(g, k_subset, qs);
        if (static_cast<int>(subsets.size()) > max_samples) {
            Rng rng(derive_seed(seed, 0x76616c, static_cast<std::uint64_t>(label)));
            for (std::size_t i = 0; i < static_cast<std::size_t>(max_samples); ++i)
                std::swap(subsets[i], subsets[i + rng.below(subsets.size() - i)]);
            subsets.resize(static_cast<std::size_t>(max_samples));
            std::sort(subsets.begin(), subsets.end());
        }
        std::vector<double> values;
        for (const auto& s : subsets) {
            if (const auto l = best_layout(s, g, in, cfg))
                values.push_back(l->fidelity);
            else
                ++st.n_skipped;
        }
        st.n_subsets = static_cast<int>(values.size());
        if (values.empty()) {
            st.note = subsets.empty() ? "no connected subset of this size" : "no subset admits the layout";
        } else {
            const double n = static_cast<double>(values.size());
            st.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
            double ss = 0.0;
            for (double v : values) ss += (v - st.mean) * (v - st.mean);
            st.std = std::sqrt(ss / n);
            st.min = *std::min_element(values.begin(), values.end());
            st.max = *std::max_element(values.begin(), values.end());
        }
        rep.clusters.push_back(std::move(st));
    }
    const ClusterGhzStats* best = nullptr;
    const ClusterGhzStats* worst = nullptr;
    int evaluated = 0;
    for (const auto& c : rep.clusters) {
        if (c.n_subsets == 0) continue;
        ++evaluated;
        if (!best || c.mean > best->mean) best = &c;
        if (!worst || c.mean < worst->mean) worst = &c;
    }
    if (evaluated >= 2) {
        rep.gap = best->mean - worst->mean;
        rep.best_label = best->label;
        rep.worst_label = worst->label;
    }
    return rep;
}

}  // namespace qhealth
