#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "qhealth/caldata.hpp"
#include "qhealth/common.hpp"
#include "qhealth/topology.hpp"

namespace qhealth {

using Walk = std::vector<int>;

struct Node2VecParams {
    double p = 1.0;
    double q = 1.0;
    int walk_length = 20;
    int walks_per_node = 50;
    int dims = 8;
    int window = 5;
    int negatives = 5;
    int epochs = 5;
    double learning_rate = 0.025;
    std::uint64_t seed = 0;
};

struct Embedding {
    int dims = 0;
    /// One row per node.
    Mat vectors;
    Node2VecParams hyperparams;
};

/// Second-order biased walks. From edge (t -> v) the unnormalized weight of
/// neighbor x of v is 1/p if x == t, 1 if x is adjacent to t, else 1/q.
/// Walks are ordered by round, then start node; walk (round r, start s) uses
/// its own substream, so the output does not depend on thread count.
std::vector<Walk> node2vec_walks(const DeviceTopology& g, double p, double q, int walk_length, int walks_per_node,
                                 std::uint64_t seed);

/// Skip-gram with negative sampling over (center, context) pairs within
/// `window`; negatives follow the unigram^0.75 node distribution and the
/// learning rate decays linearly. Nodes are 0..n_nodes-1.
Embedding train_skipgram(const std::vector<Walk>& walks, int n_nodes, int dims, int window, int negatives,
                         int epochs, double learning_rate, std::uint64_t seed);

/// Walks plus training with one parameter set.
Embedding node2vec(const DeviceTopology& g, const Node2VecParams& params);

double cosine_similarity(const Vec& a, const Vec& b);

inline constexpr std::array<MetricKind, 6> kFeatureMetrics = kAllMetrics;

struct QubitFeatures {
    std::vector<std::string> names;
    /// Row q is qubit q: six standardized window means, then the centred embedding.
    Mat values;
};

/// Per-qubit window means of T1, T2*, T2echo, FRO, F1Q and the mean over
/// incident couplers of F2Q, concatenated with the embedding vector. Metric
/// columns are standardized across qubits (a constant one becomes zeros);
/// embedding columns are centred and keep their scale.
QubitFeatures qubit_features(const Dataset& ds, const DeviceTopology& g, const Embedding& emb, DayWindow window);

/// `node,v0,...,v{d-1}`.
void write_embedding_csv(const Embedding& emb, std::ostream& out);

}  // namespace qhealth
