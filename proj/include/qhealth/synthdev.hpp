#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qhealth/caldata.hpp"
#include "qhealth/common.hpp"
#include "qhealth/fitkit.hpp"
#include "qhealth/topology.hpp"

namespace qhealth {

enum class Family : std::uint8_t { Stable, Noisy };

std::string_view to_string(Family f) noexcept;

/// Ground-truth behaviour of one qubit.
///
/// Coherence times are log-normal around their means: T = mean * exp(s z - s^2/2).
/// Fidelities carry log-normal infidelity: F = 1 - (1 - mean) * exp(s z - s^2/2).
/// In both cases z is a unit-variance AR(1) process with coefficient drift_rho
/// and s is the matching entry of drift_sigma (order: T1, T2*, T2echo, FRO, F1Q).
struct QubitProfile {
    Family family = Family::Stable;
    double t1_mean = 40.0;
    double t2star_mean = 4.0;
    double t2echo_mean = 18.0;
    double readout_mean = 0.97;
    double f1q_mean = 0.998;
    double drift_rho = 0.0;
    std::array<double, 5> drift_sigma{};
    /// Telegraph switch-on rate (events per day).
    double tls_rate = 0.0;
    /// Fractional T1/T2echo suppression while a TLS is active, in [0, 1).
    double tls_depth = 0.0;

    double mean(MetricKind m) const;
    double sigma(MetricKind m) const;
};

struct DeviceScenario {
    int n_qubits = 0;
    DeviceTopology topology;
    std::vector<QubitProfile> profiles;
    /// Mean two-qubit fidelity per topology edge (same order as topology.edges()).
    std::vector<double> f2q_base;
    /// Log-infidelity scale per edge.
    std::vector<double> f2q_sigma;
    std::vector<int> warmup_days;
    double warmup_depth = 0.0;
    int warmup_recovery_days = 5;
    int n_days = 250;
    std::uint64_t seed = 0;

    /// Mean TLS active period in days (exponential holding time).
    double tls_mean_duration = 3.0;
    /// Weight of the device-wide AR(1) factors in each series' drift.
    double coherence_global_weight = 0.0;
    double fidelity_global_weight = 0.0;
    double global_rho = 0.0;
    /// Correlation between the T1 and T2echo drift innovations of a qubit.
    double t1_t2echo_coupling = 0.0;
    /// Heavy lower tail of fidelities: probability of a dip of [min, max] sigma.
    double dip_probability = 0.03;
    double dip_min_sigma = 5.0;
    double dip_max_sigma = 15.0;

    /// Throws DataError when profiles or per-edge arrays do not match the topology
    /// or a profile breaks T2* <= T2echo <= 2 T1.
    void validate() const;

    std::vector<int> family_members(Family f) const;
    /// Fractional fidelity suppression from warm-ups on `day`, in [0, 1).
    double warmup_suppression(int day) const;
};

/// 20 qubits on the default topology, 250 days, warm-ups at days 130 and 180,
/// Noisy family {0, 2, 3, 4, 5, 9, 10}. Family means are rescaled so that the
/// expected pooled corpus means equal the reference device statistics.
DeviceScenario default_scenario(std::uint64_t seed);

/// Population statistics default_scenario is tuned to.
struct PopulationTargets {
    double t1 = 40.95;
    double t2star = 3.89;
    double t2echo = 17.7;
    double readout = 0.972;
    double f1q = 0.9983;
    double f2q = 0.9895;
};

/// Analytic expectation of the pooled corpus mean of `metric` (all targets and
/// days), averaging over drift, TLS occupancy, warm-ups and dips. Ignores the
/// T2echo <= 2 T1 clip.
double expected_pooled_mean(const DeviceScenario& sc, MetricKind metric);

/// Deterministic in sc.seed. Every qubit gets T1, T2*, T2echo, FRO and F1Q for
/// every day; every edge gets F2Q.
Dataset generate_corpus(const DeviceScenario& sc);

/// Model curve at xs with binomial sampling noise over `shots` repetitions;
/// nullopt shots returns the exact curve. Throws DataError when the model
/// leaves [0, 1] or params do not match the model.
std::vector<double> generate_decay_curve(CurveModel kind, const Vec& params, std::span<const double> xs,
                                         std::optional<std::int64_t> shots, std::uint64_t seed);

std::string scenario_to_json(const DeviceScenario& sc);
DeviceScenario scenario_from_json(std::string_view json_text);

}  // namespace qhealth
