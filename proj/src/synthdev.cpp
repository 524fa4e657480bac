#include "qhealth/synthdev.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

namespace qhealth {

namespace {

// Substream tags mixed into the scenario seed.
enum : std::uint64_t {
    kStreamProfile = 1,
    kStreamGlobal = 2,
    kStreamTls = 3,
    kStreamQubit = 4,
    kStreamEdge = 5,
    kStreamCurve = 6,
};

const std::vector<int> kNoisyQubits = {0, 2, 3, 4, 5, 9, 10};
const std::vector<int> kUnstableCouplerQubits = {3, 5, 10};

std::size_t metric_slot(MetricKind m) {
    switch (m) {
    case MetricKind::T1: return 0;
    case MetricKind::T2Star: return 1;
    case MetricKind::T2Echo: return 2;
    case MetricKind::ReadoutFidelity: return 3;
    case MetricKind::Fidelity1Q: return 4;
    case MetricKind::Fidelity2Q: break;
    }
    throw UsageError("F2Q is an edge metric");
}

double lognormal_excess(double s) { return std::sqrt(std::expm1(s * s)); }

double tls_occupancy(const QubitProfile& p, double mean_duration) {
    if (p.tls_rate <= 0.0 || p.tls_depth <= 0.0) return 0.0;
    const double x = p.tls_rate * mean_duration;
    return x / (1.0 + x);
}

/// Unit-variance stationary AR(1) driven by caller-supplied innovations.
class Ar1 {
public:
    explicit Ar1(double rho) : rho_(rho), scale_(std::sqrt(1.0 - rho * rho)) {}
    double step(double innovation) {
        z_ = started_ ? rho_ * z_ + scale_ * innovation : innovation;
        started_ = true;
        return z_;
    }

private:
    double rho_;
    double scale_;
    double z_ = 0.0;
    bool started_ = false;
};

std::vector<double> global_factor(std::uint64_t seed, std::uint64_t tag, double rho, int n_days) {
    Rng rng(derive_seed(seed, kStreamGlobal, tag));
    Ar1 ar(rho);
    std::vector<double> g(static_cast<std::size_t>(n_days));
    for (auto& v : g) v = ar.step(rng.normal());
    return g;
}

std::vector<char> tls_states(const QubitProfile& p, double mean_duration, std::uint64_t seed, int q,
                             int n_days) {
    std::vector<char> on(static_cast<std::size_t>(n_days), 0);
    if (p.tls_rate <= 0.0 || p.tls_depth <= 0.0) return on;
    Rng rng(derive_seed(seed, kStreamTls, static_cast<std::uint64_t>(q)));
    const double rate_off = 1.0 / mean_duration;
    bool state = rng.bernoulli(tls_occupancy(p, mean_duration));
    double next = rng.exponential(state ? rate_off : p.tls_rate);
    for (int d = 0; d < n_days; ++d) {
        while (next <= d) {
            state = !state;
            next += rng.exponential(state ? rate_off : p.tls_rate);
        }
        on[static_cast<std::size_t>(d)] = state ? 1 : 0;
    }
    return on;
}

struct DrawSet {
    std::vector<double> innovation;
    std::vector<double> dip_u;
    std::vector<double> dip_mag;
};

DrawSet draw_stream(std::uint64_t stream_seed, int n_days) {
    Rng rng(stream_seed);
    DrawSet d;
    const auto n = static_cast<std::size_t>(n_days);
    d.innovation.resize(n);
    d.dip_u.resize(n);
    d.dip_mag.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.innovation[i] = rng.normal();
        d.dip_u[i] = rng.uniform();
        d.dip_mag[i] = rng.uniform();
    }
    return d;
}

double fidelity_value(double mean, double s, double x, double dip_u, double dip_mag, double suppression,
                      const DeviceScenario& sc) {
    const double infid = 1.0 - mean;
    double base;
    if (dip_u < sc.dip_probability) {
        const double sigma = infid * lognormal_excess(s);
        base = mean - (sc.dip_min_sigma + (sc.dip_max_sigma - sc.dip_min_sigma) * dip_mag) * sigma;
    } else {
        base = 1.0 - infid * std::exp(s * x - 0.5 * s * s);
    }
    return std::clamp(base * (1.0 - suppression), 0.0, 1.0);
}

double mean_over_days(const DeviceScenario& sc, double coherence_share) {
    double acc = 0.0;
    for (int d = 0; d < sc.n_days; ++d) acc += 1.0 - coherence_share * sc.warmup_suppression(d);
    return acc / sc.n_days;
}

// Expected fidelity with the dip mixture, before warm-ups.
double dipped_fidelity_mean(const DeviceScenario& sc, double mean, double s) {
    const double avg_dip = 0.5 * (sc.dip_min_sigma + sc.dip_max_sigma);
    return mean - sc.dip_probability * avg_dip * (1.0 - mean) * lognormal_excess(s);
}

}  // namespace

std::string_view to_string(Family f) noexcept { return f == Family::Stable ? "stable" : "noisy"; }

double QubitProfile::mean(MetricKind m) const {
    switch (m) {
    case MetricKind::T1: return t1_mean;
    case MetricKind::T2Star: return t2star_mean;
    case MetricKind::T2Echo: return t2echo_mean;
    case MetricKind::ReadoutFidelity: return readout_mean;
    case MetricKind::Fidelity1Q: return f1q_mean;
    case MetricKind::Fidelity2Q: break;
    }
    throw UsageError("F2Q is an edge metric");
}

double QubitProfile::sigma(MetricKind m) const { return drift_sigma[metric_slot(m)]; }

void DeviceScenario::validate() const {
    if (n_qubits != topology.n_qubits()) throw DataError("scenario n_qubits differs from topology");
    if (profiles.size() != static_cast<std::size_t>(n_qubits))
        throw DataError("scenario needs one profile per qubit");
    if (f2q_base.size() != topology.n_edges() || f2q_sigma.size() != topology.n_edges())
        throw DataError("scenario needs f2q_base and f2q_sigma for every edge");
    if (n_days < 1) throw DataError("scenario needs at least one day");
    if (!(warmup_depth >= 0.0 && warmup_depth < 1.0)) throw DataError("warmup_depth must lie in [0,1)");
    if (warmup_recovery_days < 1) throw DataError("warmup_recovery_days must be >= 1");
    if (!(tls_mean_duration > 0.0)) throw DataError("tls_mean_duration must be positive");
    if (!(global_rho >= 0.0 && global_rho < 1.0)) throw DataError("global_rho must lie in [0,1)");
    for (double w : {coherence_global_weight, fidelity_global_weight, t1_t2echo_coupling})
        if (!(w >= 0.0 && w <= 1.0)) throw DataError("weights and couplings must lie in [0,1]");
    if (!(dip_probability >= 0.0 && dip_probability <= 1.0 && dip_min_sigma <= dip_max_sigma))
        throw DataError("bad dip mixture");
    for (std::size_t q = 0; q < profiles.size(); ++q) {
        const auto& p = profiles[q];
        const std::string who = "qubit " + std::to_string(q) + ": ";
        if (!(p.t1_mean > 0 && p.t2star_mean > 0 && p.t2echo_mean > 0))
            throw DataError(who + "coherence means must be positive");
        if (p.t2echo_mean > 2.0 * p.t1_mean) throw DataError(who + "t2echo_mean exceeds 2 t1_mean");
        if (p.t2star_mean > p.t2echo_mean) throw DataError(who + "t2star_mean exceeds t2echo_mean");
        if (!(p.readout_mean > 0 && p.readout_mean <= 1 && p.f1q_mean > 0 && p.f1q_mean <= 1))
            throw DataError(who + "fidelity means must lie in (0,1]");
        if (!(p.drift_rho >= 0.0 && p.drift_rho < 1.0)) throw DataError(who + "drift_rho must lie in [0,1)");
        for (double s : p.drift_sigma)
            if (!(s >= 0.0)) throw DataError(who + "drift_sigma must be nonnegative");
        if (!(p.tls_rate >= 0.0 && p.tls_depth >= 0.0 && p.tls_depth < 1.0))
            throw DataError(who + "bad TLS parameters");
    }
    for (std::size_t e = 0; e < f2q_base.size(); ++e)
        if (!(f2q_base[e] > 0.0 && f2q_base[e] <= 1.0 && f2q_sigma[e] >= 0.0))
            throw DataError("edge " + std::to_string(e) + ": bad F2Q parameters");
}

std::vector<int> DeviceScenario::family_members(Family f) const {
    std::vector<int> out;
    for (std::size_t q = 0; q < profiles.size(); ++q)
        if (profiles[q].family == f) out.push_back(static_cast<int>(q));
    return out;
}

double DeviceScenario::warmup_suppression(int day) const {
    double s = 0.0;
    for (int w : warmup_days) {
        const int since = day - w;
        if (since >= 0 && since < warmup_recovery_days)
            s += warmup_depth * (1.0 - static_cast<double>(since) / warmup_recovery_days);
    }
    return std::min(s, 0.999);
}

double expected_pooled_mean(const DeviceScenario& sc, MetricKind metric) {
    double acc = 0.0;
    if (metric == MetricKind::Fidelity2Q) {
        for (std::size_t e = 0; e < sc.f2q_base.size(); ++e)
            acc += dipped_fidelity_mean(sc, sc.f2q_base[e], sc.f2q_sigma[e]);
        return mean_over_days(sc, 1.0) * acc / static_cast<double>(sc.f2q_base.size());
    }
    for (const auto& p : sc.profiles) {
        if (is_fidelity(metric)) {
            acc += dipped_fidelity_mean(sc, p.mean(metric), p.sigma(metric));
        } else {
            const bool tls = metric != MetricKind::T2Star;
            acc += p.mean(metric) * (tls ? 1.0 - p.tls_depth * tls_occupancy(p, sc.tls_mean_duration) : 1.0);
        }
    }
    const double days = mean_over_days(sc, is_fidelity(metric) ? 1.0 : 0.5);
    return days * acc / static_cast<double>(sc.profiles.size());
}

DeviceScenario default_scenario(std::uint64_t seed) {
    DeviceScenario sc;
    sc.topology = default_topology();
    sc.n_qubits = sc.topology.n_qubits();
    sc.n_days = 250;
    sc.seed = seed;
    sc.warmup_days = {130, 180};
    sc.warmup_depth = 0.03;
    sc.warmup_recovery_days = 5;
    sc.tls_mean_duration = 3.0;
    sc.coherence_global_weight = 0.35;
    sc.fidelity_global_weight = 0.8;
    sc.global_rho = 0.2;
    sc.t1_t2echo_coupling = 0.6;

    const auto noisy = [](int q) {
        return std::find(kNoisyQubits.begin(), kNoisyQubits.end(), q) != kNoisyQubits.end();
    };
    const auto unstable_pair = [](int q) {
        return std::find(kUnstableCouplerQubits.begin(), kUnstableCouplerQubits.end(), q) !=
               kUnstableCouplerQubits.end();
    };

    // Family templates. Fidelity means are expressed as raw infidelities and
    // rescaled below; coherence means likewise.
    for (int q = 0; q < sc.n_qubits; ++q) {
        Rng rng(derive_seed(seed, kStreamProfile, static_cast<std::uint64_t>(q)));
        const auto jitter = [&](double rel) { return std::exp(rel * rng.normal()); };
        QubitProfile p;
        if (!noisy(q)) {
            p.family = Family::Stable;
            p.t1_mean = 46.0 * jitter(0.06);
            p.t2echo_mean = 20.0 * jitter(0.06);
            p.t2star_mean = 4.3 * jitter(0.08);
            p.readout_mean = 1.0 - 0.020 * jitter(0.12);
            p.f1q_mean = 1.0 - 0.0010 * jitter(0.12);
            p.drift_rho = 0.0;
            p.drift_sigma = {0.17, 0.45, 0.22, 0.25, 0.45};
            p.tls_rate = 0.02;
            p.tls_depth = 0.3;
        } else {
            p.family = Family::Noisy;
            p.t1_mean = 32.0 * jitter(0.06);
            p.t2echo_mean = 13.5 * jitter(0.06);
            p.t2star_mean = 3.1 * jitter(0.08);
            p.readout_mean = 1.0 - 0.045 * jitter(0.12);
            p.f1q_mean = 1.0 - 0.0030 * jitter(0.12);
            p.drift_rho = 0.02;
            p.drift_sigma = {0.24, 0.55, 0.3, 0.4, 0.65};
            p.tls_rate = 0.03;
            p.tls_depth = 0.35;
        }
        sc.profiles.push_back(p);
    }
    // Qubit 9: degraded readout. Qubit 3: persistently variable single-qubit gates.
    sc.profiles[9].readout_mean = 1.0 - 2.2 * (1.0 - sc.profiles[9].readout_mean);
    sc.profiles[3].drift_sigma[4] = 0.9;

    for (std::size_t e = 0; e < sc.topology.n_edges(); ++e) {
        const auto [a, b] = sc.topology.edges()[e];
        Rng rng(derive_seed(seed, kStreamProfile, 1000 + e));
        const double jitter = std::exp(0.12 * rng.normal());
        // Each endpoint contributes its share of the gate error, so a coupler
        // between the families sits between them.
        const auto share = [&](int q) { return unstable_pair(q) ? 0.011 : noisy(q) ? 0.006 : 0.00325; };
        sc.f2q_base.push_back(1.0 - (share(a) + share(b)) * jitter);
        if (unstable_pair(a) || unstable_pair(b))
            sc.f2q_sigma.push_back(0.75);
        else if (noisy(a) || noisy(b))
            sc.f2q_sigma.push_back(0.55);
        else
            sc.f2q_sigma.push_back(0.4);
    }

    // Rescale so the expected pooled means hit the population targets.
    const PopulationTargets target;
    const auto rescale_time = [&](MetricKind m, double goal, double QubitProfile::*field) {
        const double factor = goal / expected_pooled_mean(sc, m);
        for (auto& p : sc.profiles) p.*field *= factor;
    };
    rescale_time(MetricKind::T1, target.t1, &QubitProfile::t1_mean);
    rescale_time(MetricKind::T2Star, target.t2star, &QubitProfile::t2star_mean);
    rescale_time(MetricKind::T2Echo, target.t2echo, &QubitProfile::t2echo_mean);

    // Expected fidelity is W * (1 - lambda * M) with M the dip-adjusted mean
    // infidelity, so the infidelity scale lambda follows in closed form.
    const double w = mean_over_days(sc, 1.0);
    const auto infidelity_scale = [&](MetricKind m, double goal) {
        const double current = 1.0 - expected_pooled_mean(sc, m) / w;
        return (1.0 - goal / w) / current;
    };
    const double l_ro = infidelity_scale(MetricKind::ReadoutFidelity, target.readout);
    const double l_1q = infidelity_scale(MetricKind::Fidelity1Q, target.f1q);
    const double l_2q = infidelity_scale(MetricKind::Fidelity2Q, target.f2q);
    for (auto& p : sc.profiles) {
        p.readout_mean = 1.0 - l_ro * (1.0 - p.readout_mean);
        p.f1q_mean = 1.0 - l_1q * (1.0 - p.f1q_mean);
    }
    for (auto& f : sc.f2q_base) f = 1.0 - l_2q * (1.0 - f);

    sc.validate();
    return sc;
}

Dataset generate_corpus(const DeviceScenario& sc) {
    sc.validate();
    const int n_days = sc.n_days;
    const auto nd = static_cast<std::size_t>(n_days);
    const auto gc = global_factor(sc.seed, 0, sc.global_rho, n_days);
    const auto gf = global_factor(sc.seed, 1, sc.global_rho, n_days);
    std::vector<double> suppression(nd);
    for (int d = 0; d < n_days; ++d) suppression[static_cast<std::size_t>(d)] = sc.warmup_suppression(d);

    const auto mix = [](double weight, double local, double global) {
        return std::sqrt(1.0 - weight * weight) * local + weight * global;
    };

    std::vector<CalibrationRecord> records;
    records.reserve(nd * (static_cast<std::size_t>(sc.n_qubits) * 5 + sc.topology.n_edges()));

    for (int q = 0; q < sc.n_qubits; ++q) {
        const auto& p = sc.profiles[static_cast<std::size_t>(q)];
        const auto tls = tls_states(p, sc.tls_mean_duration, sc.seed, q, n_days);
        std::array<DrawSet, 5> draws;
        for (std::size_t m = 0; m < 5; ++m)
            draws[m] = draw_stream(derive_seed(sc.seed, kStreamQubit, static_cast<std::uint64_t>(q), m), n_days);
        // T2echo innovations share a component with T1.
        const double c = sc.t1_t2echo_coupling;
        for (std::size_t d = 0; d < nd; ++d)
            draws[2].innovation[d] = c * draws[0].innovation[d] + std::sqrt(1.0 - c * c) * draws[2].innovation[d];

        std::array<Ar1, 5> drift = {Ar1(p.drift_rho), Ar1(p.drift_rho), Ar1(p.drift_rho), Ar1(p.drift_rho),
                                    Ar1(p.drift_rho)};
        const auto target = TargetId::qubit(q);
        for (std::size_t d = 0; d < nd; ++d) {
            const int day = static_cast<int>(d);
            const double tls_factor = tls[d] ? 1.0 - p.tls_depth : 1.0;
            std::array<double, 5> v{};
            for (std::size_t m = 0; m < 5; ++m) {
                const MetricKind kind = kQubitMetrics[m];
                const double s = p.drift_sigma[m];
                const double z = drift[m].step(draws[m].innovation[d]);
                if (is_fidelity(kind)) {
                    const double x = mix(sc.fidelity_global_weight, z, gf[d]);
                    v[m] = fidelity_value(p.mean(kind), s, x, draws[m].dip_u[d], draws[m].dip_mag[d],
                                          suppression[d], sc);
                } else {
                    const double x = mix(sc.coherence_global_weight, z, gc[d]);
                    double t = p.mean(kind) * std::exp(s * x - 0.5 * s * s) * (1.0 - 0.5 * suppression[d]);
                    if (kind != MetricKind::T2Star) t *= tls_factor;
                    v[m] = t;
                }
            }
            v[2] = std::min(v[2], 2.0 * v[0]);
            for (std::size_t m = 0; m < 5; ++m)
                records.push_back({day, target, kQubitMetrics[m], v[m], std::nullopt});
        }
    }

    for (std::size_t e = 0; e < sc.topology.n_edges(); ++e) {
        const auto [a, b] = sc.topology.edges()[e];
        const double rho = 0.5 * (sc.profiles[static_cast<std::size_t>(a)].drift_rho +
                                  sc.profiles[static_cast<std::size_t>(b)].drift_rho);
        const auto draws = draw_stream(derive_seed(sc.seed, kStreamEdge, e), n_days);
        Ar1 drift(rho);
        const auto target = TargetId::coupler(a, b);
        for (std::size_t d = 0; d < nd; ++d) {
            const double x = mix(sc.fidelity_global_weight, drift.step(draws.innovation[d]), gf[d]);
            const double v = fidelity_value(sc.f2q_base[e], sc.f2q_sigma[e], x, draws.dip_u[d], draws.dip_mag[d],
                                            suppression[d], sc);
            records.push_back({static_cast<int>(d), target, MetricKind::Fidelity2Q, v, std::nullopt});
        }
    }
    return Dataset(std::move(records), sc.topology.name());
}

std::vector<double> generate_decay_curve(CurveModel kind, const Vec& params, std::span<const double> xs,
                                         std::optional<std::int64_t> shots, std::uint64_t seed) {
    if (params.size() != parameter_count(kind))
        throw DataError("model " + std::string(to_string(kind)) + " needs " +
                        std::to_string(parameter_count(kind)) + " parameters");
    if (xs.empty()) throw DataError("no sample points");
    if (shots && *shots < 1) throw DataError("shots must be >= 1");
    const Vec exact = model_curve(kind, params, xs);
    for (Eigen::Index i = 0; i < exact.size(); ++i)
        if (!(exact(i) >= -1e-12 && exact(i) <= 1.0 + 1e-12))
            throw DataError("model value " + format_number(exact(i)) + " outside [0,1]; parameters unphysical");
    std::vector<double> out(xs.size());
    Rng rng(derive_seed(seed, kStreamCurve, static_cast<std::uint64_t>(kind)));
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double p = std::clamp(exact(static_cast<Eigen::Index>(i)), 0.0, 1.0);
        if (!shots) {
            out[i] = p;
            continue;
        }
        const std::int64_t n = *shots;
        std::int64_t hits = 0;
        if (n <= 100000) {
            for (std::int64_t k = 0; k < n; ++k) hits += rng.bernoulli(p) ? 1 : 0;
        } else {
            const double nd = static_cast<double>(n);
            const double draw = nd * p + std::sqrt(nd * p * (1.0 - p)) * rng.normal();
            hits = std::clamp<std::int64_t>(std::llround(draw), 0, n);
        }
        out[i] = static_cast<double>(hits) / static_cast<double>(n);
    }
    return out;
}

std::string scenario_to_json(const DeviceScenario& sc) {
    nlohmann::ordered_json doc;
    doc["n_qubits"] = sc.n_qubits;
    doc["n_days"] = sc.n_days;
    doc["seed"] = sc.seed;
    doc["topology"] = nlohmann::ordered_json::parse(sc.topology.to_json());
    doc["warmup_days"] = sc.warmup_days;
    doc["warmup_depth"] = sc.warmup_depth;
    doc["warmup_recovery_days"] = sc.warmup_recovery_days;
    doc["tls_mean_duration"] = sc.tls_mean_duration;
    doc["coherence_global_weight"] = sc.coherence_global_weight;
    doc["fidelity_global_weight"] = sc.fidelity_global_weight;
    doc["global_rho"] = sc.global_rho;
    doc["t1_t2echo_coupling"] = sc.t1_t2echo_coupling;
    doc["dip_probability"] = sc.dip_probability;
    doc["dip_min_sigma"] = sc.dip_min_sigma;
    doc["dip_max_sigma"] = sc.dip_max_sigma;
    doc["f2q_base"] = sc.f2q_base;
    doc["f2q_sigma"] = sc.f2q_sigma;
    auto profiles = nlohmann::ordered_json::array();
    for (const auto& p : sc.profiles) {
        nlohmann::ordered_json j;
        j["family"] = std::string(to_string(p.family));
        j["t1_mean"] = p.t1_mean;
        j["t2star_mean"] = p.t2star_mean;
        j["t2echo_mean"] = p.t2echo_mean;
        j["readout_mean"] = p.readout_mean;
        j["f1q_mean"] = p.f1q_mean;
        j["drift_rho"] = p.drift_rho;
        j["drift_sigma"] = p.drift_sigma;
        j["tls_rate"] = p.tls_rate;
        j["tls_depth"] = p.tls_depth;
        profiles.push_back(std::move(j));
    }
    doc["profiles"] = std::move(profiles);
    return doc.dump(1);
}

DeviceScenario scenario_from_json(std::string_view json_text) {
    DeviceScenario sc;
    try {
        const auto doc = nlohmann::json::parse(json_text);
        sc.topology = parse_topology(doc.at("topology").dump(), false);
        sc.n_qubits = doc.value("n_qubits", sc.topology.n_qubits());
        sc.n_days = doc.at("n_days").get<int>();
        sc.seed = doc.value("seed", std::uint64_t{0});
        sc.warmup_days = doc.value("warmup_days", std::vector<int>{});
        sc.warmup_depth = doc.value("warmup_depth", 0.0);
        sc.warmup_recovery_days = doc.value("warmup_recovery_days", 5);
        sc.tls_mean_duration = doc.value("tls_mean_duration", 3.0);
        sc.coherence_global_weight = doc.value("coherence_global_weight", 0.0);
        sc.fidelity_global_weight = 0.8;
        sc.global_rho = doc.value("global_rho", 0.0);
        sc.t1_t2echo_coupling = doc.value("t1_t2echo_coupling", 0.0);
        sc.dip_probability = doc.value("dip_probability", 0.03);
        sc.dip_min_sigma = doc.value("dip_min_sigma", 5.0);
        sc.dip_max_sigma = doc.value("dip_max_sigma", 15.0);
        sc.f2q_base = doc.at("f2q_base").get<std::vector<double>>();
        sc.f2q_sigma = doc.value("f2q_sigma", std::vector<double>(sc.f2q_base.size(), 0.0));
        for (const auto& j : doc.at("profiles")) {
            QubitProfile p;
            const auto family = j.value("family", std::string("stable"));
            if (family != "stable" && family != "noisy") throw DataError("bad family '" + family + "'");
            p.family = family == "stable" ? Family::Stable : Family::Noisy;
            p.t1_mean = j.at("t1_mean").get<double>();
            p.t2star_mean = j.at("t2star_mean").get<double>();
            p.t2echo_mean = j.at("t2echo_mean").get<double>();
            p.readout_mean = j.at("readout_mean").get<double>();
            p.f1q_mean = j.at("f1q_mean").get<double>();
            p.drift_rho = j.value("drift_rho", 0.0);
            p.drift_sigma = j.value("drift_sigma", std::array<double, 5>{});
            p.tls_rate = j.value("tls_rate", 0.0);
            p.tls_depth = j.value("tls_depth", 0.0);
            sc.profiles.push_back(p);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("scenario: ") + e.what());
    }
    sc.validate();
    return sc;
}

}  // namespace qhealth
