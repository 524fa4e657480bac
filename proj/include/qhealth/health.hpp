#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qhealth/caldata.hpp"
#include "qhealth/cluster.hpp"
#include "qhealth/common.hpp"
#include "qhealth/tempstats.hpp"
#include "qhealth/topology.hpp"
#include "qhealth/xcorr.hpp"

namespace qhealth {

enum class HealthFlag : std::uint8_t { SuddenDrop, HighVariance, LowFidelity, TLSSuspect };

std::string_view to_string(HealthFlag f) noexcept;

/// Linear map from [floor, ceiling] onto [0, 1], clamped.
struct Ramp {
    double floor = 0.0;
    double ceiling = 1.0;
    double operator()(double x) const;
};

struct HealthConfig {
    double w_coherence = 0.3;
    double w_readout = 0.2;
    double w_gate = 0.3;
    double w_stability = 0.2;
    Ramp t1{10.0, 60.0};
    Ramp t2echo{5.0, 30.0};
    Ramp readout{0.90, 1.0};
    Ramp f1q{0.99, 1.0};
    Ramp f2q{0.95, 1.0};
    double drop_z = 4.0;
    /// HighVariance when a std exceeds median + this many robust sigmas across qubits.
    double variance_mad_k = 3.0;

    /// Throws UsageError unless the weights are nonnegative and sum to 1.
    void validate() const;
};

struct HealthComponents {
    double coherence = 0.0;
    double readout = 0.0;
    double gate = 0.0;
    double stability = 0.0;
};

struct HealthScore {
    TargetId target;
    double score = 0.0;
    HealthComponents components;
    std::vector<HealthFlag> flags;
    /// In-window days flagged by the drop detector, per metric.
    std::map<MetricKind, std::vector<int>> drop_days;
    /// Days on which T1 and T2echo dropped together.
    std::vector<int> tls_days;

    bool has(HealthFlag f) const;
};

/// One score per qubit. Components are window means through the configured
/// ramps; stability is 1 minus the mean normalized rank of the qubit's
/// per-metric std among all qubits. Drops are detected on the full series
/// and kept when they fall inside the window.
std::vector<HealthScore> health_scores(const Dataset& ds, DayWindow window, const HealthConfig& cfg = {});

enum class ActionKind : std::uint8_t { GlobalRecalibration, TargetedRecalibration, WatchList };

std::string_view to_string(ActionKind k) noexcept;

struct RecalibrationAction {
    ActionKind kind = ActionKind::WatchList;
    std::vector<TargetId> targets;
    std::optional<DayWindow> span;
    std::string reason;
};

struct AdviceConfig {
    double global_fraction = 0.6;
    int global_span_days = 3;
    double targeted_below = 0.5;
};

/// Rules, in output order: (a) global recalibration for each 3-day span in
/// which at least 60% of qubits carry a SuddenDrop; (b) targeted
/// recalibration for qubits scoring below 0.5 or with simultaneous T1 and
/// T2echo drops; (c) watch list for HighVariance qubits. The correlation
/// matrix and ACF table annotate the reasons.
std::vector<RecalibrationAction> recalibration_advice(std::span<const HealthScore> scores, const CorrMatrix* corr,
                                                      std::span<const AcfLagRow> acf_table,
                                                      const AdviceConfig& cfg = {});

// ---------------------------------------------------------------------------
// GHZ noise-model estimate

enum class LayoutMode : std::uint8_t { Path, Tree };

std::string_view to_string(LayoutMode m) noexcept;
LayoutMode parse_layout_mode(std::string_view token);

struct GhzConfig {
    /// Duration of one CZ layer in microseconds.
    double t_2q_gate = 0.04;
    LayoutMode layout = LayoutMode::Path;
};

/// Window means the estimator needs.
struct GhzInputs {
    int n_qubits = 0;
    std::vector<std::optional<double>> t1, t2echo, readout, f1q;
    std::map<std::pair<int, int>, double> f2q;

    /// Throws DataError when a qubit lacks one of its metrics.
    void require_qubit(int q) const;
    std::optional<double> coupler(int a, int b) const;
};

GhzInputs ghz_inputs(const Dataset& ds, DayWindow window);

/// Entangling layout: the root gets the Hadamard, each edge one CZ-based CNOT.
struct GhzLayout {
    int root = 0;
    std::vector<Edge> edges;
};

/// F1q(root) * prod F2q(edges) * prod FRO(q) * exp(-sum_q t (1/(2 T1_q) + 1/(2 T2echo_q)))
/// with t = k * t_2q_gate. The layout must span `qubits`.
double ghz_layout_estimate(std::span<const int> qubits, const GhzLayout& layout, const GhzInputs& in,
                           const GhzConfig& cfg = {});

/// Chain preparation along `order`: consecutive qubits must be coupled.
double ghz_fidelity_estimate(std::span<const int> order, const GhzInputs& in, const GhzConfig& cfg = {});
double ghz_fidelity_estimate(std::span<const int> order, const Dataset& ds, DayWindow window,
                             const GhzConfig& cfg = {});

struct ScoredLayout {
    /// Path order, or the tree in breadth-first order from its root.
    std::vector<int> order;
    GhzLayout layout;
    double fidelity = 0.0;
};

/// Best Hamiltonian path of the induced subgraph: exhaustive for k <= 7,
/// greedy highest-F2Q extension from every start otherwise. nullopt when no
/// path is found.
std::optional<ScoredLayout> best_path(std::span<const int> qubits, const DeviceTopology& g, const GhzInputs& in,
                                      const GhzConfig& cfg = {});

/// Root of highest F1q and maximum spanning tree on F2q (exact for any k).
std::optional<ScoredLayout> best_tree(std::span<const int> qubits, const DeviceTopology& g, const GhzInputs& in,
                                      const GhzConfig& cfg = {});

std::optional<ScoredLayout> best_layout(std::span<const int> qubits, const DeviceTopology& g, const GhzInputs& in,
                                        const GhzConfig& cfg = {});

/// Every connected induced subgraph of size k containing only `allowed`
/// nodes (all nodes when empty), each once, as sorted qubit lists in
/// lexicographic order.
std::vector<std::vector<int>> connected_subsets(const DeviceTopology& g, int k, std::span<const int> allowed = {});

struct SubsetRecommendation {
    std::vector<int> qubits;
    std::vector<Edge> induced_edges;
    std::vector<Edge> layout_edges;
    double predicted_ghz_fidelity = 0.0;
    int rank = 0;
};

struct RecommendOptions {
    int top_n = 5;
    /// Needed for k > 7: grow subsets greedily instead of enumerating.
    bool greedy = false;
    GhzConfig ghz;
};

std::vector<SubsetRecommendation> recommend_subsets(const Dataset& ds, const DeviceTopology& g, int k,
                                                    DayWindow window, const RecommendOptions& opts = {});

struct ClusterGhzStats {
    int label = 0;
    std::vector<int> members;
    int n_subsets = 0;
    /// Subsets with no layout of the requested kind.
    int n_skipped = 0;
    double mean = 0.0;
    double std = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::optional<std::string> note;
};

struct ValidationReport {
    int k_subset = 0;
    std::vector<ClusterGhzStats> clusters;
    /// Best minus worst evaluated cluster mean; absent with fewer than two.
    std::optional<double> gap;
    std::optional<int> best_label;
    std::optional<int> worst_label;
};

/// Per-cluster GHZ estimates over connected k-subsets inside each cluster;
/// all of them when there are at most max_samples, a seeded sample otherwise.
ValidationReport validate_clusters(const ClusterAssignment& assignment, const Dataset& ds, const DeviceTopology& g,
                                   int k_subset, DayWindow window, const GhzConfig& cfg = {},
                                   int max_samples = 2000, std::uint64_t seed = 0);

}  // namespace qhealth
