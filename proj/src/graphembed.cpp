#include "qhealth/graphembed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qhealth {

namespace {

constexpr std::uint64_t kStreamWalk = 0x77616c6b;
constexpr std::uint64_t kStreamInit = 0x696e6974;
constexpr std::uint64_t kStreamTrain = 0x74726e;

int pick_weighted(const std::vector<double>& cumulative, Rng& rng) {
    const double u = rng.uniform() * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                     static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
}

double sigmoid(double x) {
    if (x > 30.0) return 1.0;
    if (x < -30.0) return 0.0;
    return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace

std::vector<Walk> node2vec_walks(const DeviceTopology& g, double p, double q, int walk_length, int walks_per_node,
                                 std::uint64_t seed) {
    if (!(p > 0.0) || !(q > 0.0)) throw UsageError("node2vec: p and q must be positive");
    if (walk_length < 2) throw UsageError("node2vec: walk_length must be >= 2");
    if (walks_per_node < 1) throw UsageError("node2vec: walks_per_node must be >= 1");
    const int n = g.n_qubits();
    for (int v = 0; v < n; ++v)
        if (g.degree(v) == 0) throw DataError("node2vec: node " + std::to_string(v) + " has no neighbors");

    std::vector<Walk> walks(static_cast<std::size_t>(n) * static_cast<std::size_t>(walks_per_node));
    parallel_for(walks.size(), [&](std::size_t idx) {
        const auto round = idx / static_cast<std::size_t>(n);
        const int start = static_cast<int>(idx % static_cast<std::size_t>(n));
        Rng rng(derive_seed(seed, kStreamWalk, round, static_cast<std::uint64_t>(start)));
        Walk walk{start};
        walk.reserve(static_cast<std::size_t>(walk_length));
        std::vector<double> cumulative;
        while (static_cast<int>(walk.size()) < walk_length) {
            const int v = walk.back();
            const auto& nbrs = g.neighbors(v);
            if (walk.size() == 1) {
                walk.push_back(nbrs[rng.below(nbrs.size())]);
                continue;
            }
            const int t = walk[walk.size() - 2];
            cumulative.clear();
            double acc = 0.0;
            for (int x : nbrs) {
                acc += x == t ? 1.0 / p : (g.has_edge(x, t) ? 1.0 : 1.0 / q);
                cumulative.push_back(acc);
            }
            walk.push_back(nbrs[static_cast<std::size_t>(pick_weighted(cumulative, rng))]);
        }
        walks[idx] = std::move(walk);
    });
    return walks;
}

Embedding train_skipgram(const std::vector<Walk>& walks, int n_nodes, int dims, int window, int negatives,
                         int epochs, double learning_rate, std::uint64_t seed) {
    if (n_nodes < 1) throw UsageError("skip-gram: no nodes");
    if (dims < 0 || window < 1 || negatives < 0 || epochs < 0 || !(learning_rate > 0.0))
        throw UsageError("skip-gram: invalid hyperparameters");
    if (walks.empty()) throw DataError("skip-gram: no walks");

    std::vector<double> counts(static_cast<std::size_t>(n_nodes), 0.0);
    long long n_tokens = 0;
    for (const auto& w : walks)
        for (int v : w) {
            if (v < 0 || v >= n_nodes) throw DataError("skip-gram: walk node out of range");
            counts[static_cast<std::size_t>(v)] += 1.0;
            ++n_tokens;
        }
    for (int v = 0; v < n_nodes; ++v)
        if (counts[static_cast<std::size_t>(v)] == 0.0)
            throw DataError("skip-gram: node " + std::to_string(v) + " missing from all walks");

    Embedding emb;
    emb.dims = dims;
    emb.hyperparams.dims = dims;
    emb.hyperparams.window = window;
    emb.hyperparams.negatives = negatives;
    emb.hyperparams.epochs = epochs;
    emb.hyperparams.learning_rate = learning_rate;
    emb.hyperparams.seed = seed;

    Rng init(derive_seed(seed, kStreamInit));
    Mat in(n_nodes, dims);
    for (int i = 0; i < n_nodes; ++i)
        for (int d = 0; d < dims; ++d) in(i, d) = (init.uniform() - 0.5) / dims;
    Mat out = Mat::Zero(n_nodes, dims);
    if (dims == 0 || epochs == 0) {
        emb.vectors = std::move(in);
        return emb;
    }

    std::vector<double> noise(counts.size());
    double acc = 0.0;
    for (std::size_t v = 0; v < counts.size(); ++v) noise[v] = acc += std::pow(counts[v], 0.75);

    Rng rng(derive_seed(seed, kStreamTrain));
    const double total = static_cast<double>(n_tokens) * epochs;
    double processed = 0.0;
    Vec grad(dims);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (const auto& walk : walks) {
            const auto len = static_cast<int>(walk.size());
            for (int i = 0; i < len; ++i) {
                const double lr = learning_rate * std::max(1e-4, 1.0 - processed / total);
                processed += 1.0;
                const int center = walk[static_cast<std::size_t>(i)];
                for (int j = std::max(0, i - window); j <= std::min(len - 1, i + window); ++j) {
                    if (j == i) continue;
                    const int context = walk[static_cast<std::size_t>(j)];
                    grad.setZero();
                    for (int s = 0; s <= negatives; ++s) {
                        int target = context;
                        double label = 1.0;
                        if (s > 0) {
                            target = pick_weighted(noise, rng);
                            if (target == context) continue;
                            label = 0.0;
                        }
                        const double g = lr * (label - sigmoid(in.row(center).dot(out.row(target))));
                        grad += g * out.row(target).transpose();
                        out.row(target) += g * in.row(center);
                    }
                    in.row(center) += grad.transpose();
                }
            }
        }
    }
    if (!in.allFinite()) throw NumericalError("skip-gram diverged");
    emb.vectors = std::move(in);
    return emb;
}

Embedding node2vec(const DeviceTopology& g, const Node2VecParams& params) {
    const auto walks = node2vec_walks(g, params.p, params.q, params.walk_length, params.walks_per_node, params.seed);
    auto emb = train_skipgram(walks, g.n_qubits(), params.dims, params.window, params.negatives, params.epochs,
                              params.learning_rate, params.seed);
    emb.hyperparams = params;
    return emb;
}

double cosine_similarity(const Vec& a, const Vec& b) {
    const double na = a.norm(), nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) return 0.0;
    return a.dot(b) / (na * nb);
}

QubitFeatures qubit_features(const Dataset& ds, const DeviceTopology& g, const Embedding& emb, DayWindow window) {
    const int n = g.n_qubits();
    if (emb.vectors.rows() != n || emb.vectors.cols() != emb.dims)
        throw DataError("embedding does not match topology (" + std::to_string(emb.vectors.rows()) + " rows, " +
                        std::to_string(n) + " qubits)");
    QubitFeatures f;
    for (auto m : kFeatureMetrics) f.names.emplace_back(to_string(m));
    for (int d = 0; d < emb.dims; ++d) f.names.push_back("v" + std::to_string(d));
    f.values.resize(n, 6 + emb.dims);

    for (int q = 0; q < n; ++q) {
        for (int c = 0; c < 5; ++c) {
            const auto m = kFeatureMetrics[static_cast<std::size_t>(c)];
            const auto v = window_mean(ds, TargetId::qubit(q), m, window);
            if (!v) throw DataError("missing " + std::string(to_string(m)) + " for qubit " + std::to_string(q));
            f.values(q, c) = *v;
        }
        double sum = 0.0;
        int count = 0;
        for (int nb : g.neighbors(q)) {
            const auto v = window_mean(ds, TargetId::coupler(q, nb), MetricKind::Fidelity2Q, window);
            if (!v) continue;
            sum += *v;
            ++count;
        }
        if (count == 0) throw DataError("missing F2Q on every coupler of qubit " + std::to_string(q));
        f.values(q, 5) = sum / count;
    }
    if (emb.dims > 0) f.values.rightCols(emb.dims) = emb.vectors;

    // Metric columns are standardized. Embedding columns are only centred:
    // rescaling each skip-gram dimension separately would distort the
    // embedding geometry and let 8 topology columns outweigh 6 metric ones.
    for (Eigen::Index c = 0; c < f.values.cols(); ++c) {
        auto col = f.values.col(c);
        const double mean = col.mean();
        col.array() -= mean;
        if (c >= static_cast<Eigen::Index>(kFeatureMetrics.size())) continue;
        const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n));
        if (sd > 1e-12 * std::max(1.0, std::abs(mean)))
            col /= sd;
        else
            col.setZero();
    }
    return f;
}

void write_embedding_csv(const Embedding& emb, std::ostream& out) {
    out << "node";
    for (int d = 0; d < emb.dims; ++d) out << ",v" << d;
    out << '\n';
    for (Eigen::Index i = 0; i < emb.vectors.rows(); ++i) {
        out << i;
        for (int d = 0; d < emb.dims; ++d) out << ',' << format_number(emb.vectors(i, d));
        out << '\n';
    }
}

}  // namespace qhealth
