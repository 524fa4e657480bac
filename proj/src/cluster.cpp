#include "qhealth/cluster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <string>

namespace qhealth {

std::string_view to_string(ClusterMethod m) noexcept {
    switch (m) {
        case ClusterMethod::KMeans: return "kmeans";
        case ClusterMethod::GMM: return "gmm";
        case ClusterMethod::Spectral: return "spectral";
        case ClusterMethod::Node2VecKMeans: return "node2vec-kmeans";
    }
    return "?";
}

ClusterMethod parse_cluster_method(std::string_view token) {
    for (auto m : kAllClusterMethods)
        if (to_string(m) == token) return m;
    throw UsageError("unknown clustering method '" + std::string(token) + "'");
}

std::vector<int> canonical_labels(std::span<const int> labels) {
    std::map<int, int> remap;
    std::vector<int> out;
    out.reserve(labels.size());
    for (int l : labels) {
        const auto [it, inserted] = remap.emplace(l, static_cast<int>(remap.size()));
        out.push_back(it->second);
    }
    return out;
}

namespace {

void check_k(const Mat& points, int k) {
    if (k < 2) throw UsageError("k must be >= 2");
    if (k > points.rows())
        throw UsageError("k=" + std::to_string(k) + " exceeds the number of points (" +
                         std::to_string(points.rows()) + ")");
    if (!points.allFinite()) throw DataError("points contain non-finite values");
}

std::uint64_t point_hash(const Mat& points, Eigen::Index i) {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (Eigen::Index d = 0; d < points.cols(); ++d) {
        const double v = points(i, d) == 0.0 ? 0.0 : points(i, d);
        h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
    }
    return h;
}

bool lex_less(const Mat& points, Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index d = 0; d < points.cols(); ++d) {
        if (points(a, d) < points(b, d)) return true;
        if (points(b, d) < points(a, d)) return false;
    }
    return false;
}

double unit_from_hash(std::uint64_t h) { return (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53; }

struct LloydRun {
    std::vector<int> labels;
    Mat centers;
    double wcss = 0.0;
    std::vector<double> trace;
};

Mat seed_centers(const Mat& points, int k, std::uint64_t seed, const std::vector<std::uint64_t>& hashes) {
    const auto n = points.rows();
    Mat centers(k, points.cols());
    Vec d2 = Vec::Constant(n, std::numeric_limits<double>::infinity());
    std::vector<bool> chosen(static_cast<std::size_t>(n), false);
    for (int c = 0; c < k; ++c) {
        const std::uint64_t step_seed = derive_seed(seed, 0x6b6d7070, static_cast<std::uint64_t>(c));
        bool any_weight = false;
        if (c > 0)
            for (Eigen::Index i = 0; i < n; ++i) any_weight = any_weight || d2(i) > 0.0;
        Eigen::Index best = -1;
        double best_key = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i) {
            double w = 1.0;
            if (c > 0) w = any_weight ? d2(i) : (chosen[static_cast<std::size_t>(i)] ? 0.0 : 1.0);
            if (!(w > 0.0)) continue;
            // Exponential race: the minimum of -ln(u)/w selects i with probability w / sum(w).
            const double key = -std::log(unit_from_hash(mix64(step_seed ^ hashes[static_cast<std::size_t>(i)]))) / w;
            if (best < 0 || key < best_key || (key == best_key && lex_less(points, i, best))) {
                best = i;
                best_key = key;
            }
        }
        chosen[static_cast<std::size_t>(best)] = true;
        centers.row(c) = points.row(best);
        for (Eigen::Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), (points.row(i) - centers.row(c)).squaredNorm());
    }
    return centers;
}

LloydRun lloyd(const Mat& points, Mat centers, int max_iter) {
    const auto n = points.rows();
    const auto k = static_cast<int>(centers.rows());
    LloydRun run;
    run.labels.assign(static_cast<std::size_t>(n), -1);
    for (int iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = (points.row(i) - centers.row(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (run.labels[static_cast<std::size_t>(i)] != best) {
                run.labels[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        // Empty clusters take the point farthest from its own center.
        for (int c = 0; c < k; ++c) {
            if (std::find(run.labels.begin(), run.labels.end(), c) != run.labels.end()) continue;
            Eigen::Index far = -1;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const int own = run.labels[static_cast<std::size_t>(i)];
                if (std::count(run.labels.begin(), run.labels.end(), own) < 2) continue;
                const double d = (points.row(i) - centers.row(own)).squaredNorm();
                if (d > far_d || (d == far_d && lex_less(points, i, far))) {
                    far = i;
                    far_d = d;
                }
            }
            run.labels[static_cast<std::size_t>(far)] = c;
            changed = true;
        }
        Mat sums = Mat::Zero(k, points.cols());
        Vec counts = Vec::Zero(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(run.labels[static_cast<std::size_t>(i)]) += points.row(i);
            counts(run.labels[static_cast<std::size_t>(i)]) += 1.0;
        }
        for (int c = 0; c < k; ++c) centers.row(c) = sums.row(c) / counts(c);
        run.trace.push_back(within_cluster_ss(points, run.labels, k));
        if (!changed && iter > 0) break;
    }
    run.centers = std::move(centers);
    run.wcss = run.trace.back();
    return run;
}

Mat pairwise_distances(const Mat& points) {
    const auto n = points.rows();
    Mat d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (points.row(i) - points.row(j)).norm();
    }
    return d;
}

}  // namespace

double within_cluster_ss(const Mat& points, std::span<const int> labels, int k) {
    Mat sums = Mat::Zero(k, points.cols());
    Vec counts = Vec::Zero(k);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
        counts(labels[static_cast<std::size_t>(i)]) += 1.0;
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const int c = labels[static_cast<std::size_t>(i)];
        total += (points.row(i) - sums.row(c) / counts(c)).squaredNorm();
    }
    return total;
}

ClusterAssignment kmeans(const Mat& points, int k, std::uint64_t seed, const KMeansOptions& opts) {
    check_k(points, k);
    if (opts.restarts < 1 || opts.max_iter < 1) throw UsageError("kmeans: restarts and max_iter must be >= 1");
    std::vector<std::uint64_t> hashes(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) hashes[static_cast<std::size_t>(i)] = point_hash(points, i);

    std::vector<LloydRun> runs(static_cast<std::size_t>(opts.restarts));
    parallel_for(runs.size(), [&](std::size_t r) {
        const auto centers = seed_centers(points, k, derive_seed(seed, 0x6b6d, r), hashes);
        runs[r] = lloyd(points, centers, opts.max_iter);
    });
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
        if (runs[r].wcss < runs[best].wcss) best = r;
    if (opts.wcss_trace) *opts.wcss_trace = runs[best].trace;

    ClusterAssignment a;
    a.method = ClusterMethod::KMeans;
    a.k = k;
    a.labels = canonical_labels(runs[best].labels);
    a.seed = seed;
    a.objective = runs[best].wcss;
    a.silhouette = silhouette_score(points, a.labels);
    return a;
}

double gmm_log_likelihood(const Mat& points, const Vec& weights, const std::vector<Vec>& means,
                          const std::vector<Mat>& covariances) {
    const auto n = points.rows();
    const auto d = static_cast<double>(points.cols());
    const auto k = static_cast<Eigen::Index>(means.size());
    Mat logp(n, k);
    for (Eigen::Index c = 0; c < k; ++c) {
        const Eigen::LLT<Mat> llt(covariances[static_cast<std::size_t>(c)]);
        if (llt.info() != Eigen::Success) throw NumericalError("GMM covariance is not positive definite");
        const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        const Mat centred = (points.rowwise() - means[static_cast<std::size_t>(c)].transpose()).transpose();
        const Mat z = llt.matrixL().solve(centred);
        logp.col(c) = (-0.5 * (d * std::log(2.0 * std::numbers::pi) + logdet + z.colwise().squaredNorm().array()) +
                       std::log(weights(c)))
                          .transpose();
    }
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = logp.row(i).maxCoeff();
        ll += m + std::log((logp.row(i).array() - m).exp().sum());
    }
    return ll;
}

ClusterAssignment gmm_em(const Mat& points, int k, std::uint64_t seed, const GmmOptions& opts) {
    check_k(points, k);
    const auto n = points.rows();
    const auto dim = points.cols();
    const Mat reg = opts.reg * Mat::Identity(dim, dim);
    const auto init = kmeans(points, k, seed);

    Vec weights(k);
    std::vector<Vec> means(static_cast<std::size_t>(k));
    std::vector<Mat> covs(static_cast<std::size_t>(k));
    Mat resp = Mat::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i) resp(i, init.labels[static_cast<std::size_t>(i)]) = 1.0;

    const auto m_step = [&] {
        for (int c = 0; c < k; ++c) {
            const double nk = resp.col(c).sum();
            if (!(nk > 1e-12)) throw NumericalError("GMM component " + std::to_string(c) + " collapsed");
            weights(c) = nk / static_cast<double>(n);
            const Vec mu = (points.transpose() * resp.col(c)) / nk;
            const Mat centred = points.rowwise() - mu.transpose();
            covs[static_cast<std::size_t>(c)] =
                (centred.transpose() * resp.col(c).asDiagonal() * centred) / nk + reg;
            means[static_cast<std::size_t>(c)] = mu;
        }
    };
    const auto e_step = [&] {
        Mat logp(n, k);
        for (int c = 0; c < k; ++c) {
            const Eigen::LLT<Mat> llt(covs[static_cast<std::size_t>(c)]);
            if (llt.info() != Eigen::Success)
                throw NumericalError("GMM covariance singular after regularization");
            const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
            const Mat centred = (points.rowwise() - means[static_cast<std::size_t>(c)].transpose()).transpose();
            const Mat z = llt.matrixL().solve(centred);
            logp.col(c) = (-0.5 * (static_cast<double>(dim) * std::log(2.0 * std::numbers::pi) + logdet +
                                   z.colwise().squaredNorm().array()) +
                           std::log(weights(c)))
                              .transpose();
        }
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double m = logp.row(i).maxCoeff();
            const Eigen::RowVectorXd e = (logp.row(i).array() - m).exp();
            const double s = e.sum();
            resp.row(i) = e / s;
            ll += m + std::log(s);
        }
        return ll;
    };

    std::vector<double> trace;
    m_step();
    double ll = e_step();
    trace.push_back(ll);
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        m_step();
        const double next = e_step();
        trace.push_back(next);
        const double gain = next - ll;
        ll = next;
        if (gain < opts.tol) break;
    }
    if (!std::isfinite(ll)) throw NumericalError("GMM log-likelihood is not finite");
    if (opts.loglik_trace) *opts.loglik_trace = trace;

    std::vector<int> labels(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index best = 0;
        resp.row(i).maxCoeff(&best);
        labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    ClusterAssignment a;
    a.method = ClusterMethod::GMM;
    a.k = k;
    a.labels = canonical_labels(labels);
    a.seed = seed;
    a.objective = ll;
    if (*std::max_element(a.labels.begin(), a.labels.end()) + 1 < k)
        throw NumericalError("GMM left a component without members at k=" + std::to_string(k));
    a.silhouette = silhouette_score(points, a.labels);
    return a;
}

EigenDecomposition jacobi_eigen(const Mat& symmetric, double tol, int max_sweeps) {
    const auto n = symmetric.rows();
    if (symmetric.cols() != n) throw UsageError("jacobi_eigen: matrix is not square");
    Mat a = 0.5 * (symmetric + symmetric.transpose());
    Mat v = Mat::Identity(n, n);
    const auto off_norm = [&] {
        double ss = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i)
                if (i != j) ss += a(i, j) * a(i, j);
        return std::sqrt(ss);
    };
    EigenDecomposition out;
    while (off_norm() >= tol) {
        if (out.sweeps >= max_sweeps) throw NumericalError("Jacobi eigensolver did not converge");
        ++out.sweeps;
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index r = 0; r < n; ++r) {
                    const double arp = a(r, p), arq = a(r, q);
                    a(r, p) = c * arp - s * arq;
                    a(r, q) = s * arp + c * arq;
                }
                for (Eigen::Index r = 0; r < n; ++r) {
                    const double apr = a(p, r), aqr = a(q, r);
                    a(p, r) = c * apr - s * aqr;
                    a(q, r) = s * apr + c * aqr;
                }
                for (Eigen::Index r = 0; r < n; ++r) {
                    const double vrp = v(r, p), vrq = v(r, q);
                    v(r, p) = c * vrp - s * vrq;
                    v(r, q) = s * vrp + c * vrq;
                }
            }
        }
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) < a(y, y); });
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
        out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
    }
    return out;
}

double median_pairwise_distance(const Mat& points) {
    if (points.rows() < 2) throw DataError("median pairwise distance needs at least 2 points");
    std::vector<double> d;
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        for (Eigen::Index j = i + 1; j < points.rows(); ++j) d.push_back((points.row(i) - points.row(j)).norm());
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    double med = *mid;
    if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
    if (!(med > 0.0)) {
        double smallest = std::numeric_limits<double>::infinity();
        for (double x : d)
            if (x > 0.0) smallest = std::min(smallest, x);
        if (!std::isfinite(smallest)) throw DataError("all points coincide");
        med = smallest;
    }
    return med;
}

namespace {

Mat gaussian_affinity(const Mat& points, double sigma) {
    const auto n = points.rows();
    Mat a = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            a(i, j) = a(j, i) = std::exp(-(points.row(i) - points.row(j)).squaredNorm() / (2.0 * sigma * sigma));
    return a;
}

Mat laplacian_from_affinity(const Mat& a) {
    const auto n = a.rows();
    Vec inv_sqrt = a.rowwise().sum();
    for (Eigen::Index i = 0; i < n; ++i) inv_sqrt(i) = inv_sqrt(i) > 0.0 ? 1.0 / std::sqrt(inv_sqrt(i)) : 0.0;
    Mat l = -(inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal());
    l.diagonal().array() += 1.0;
    return 0.5 * (l + l.transpose());
}

std::vector<int> affinity_components(const Mat& a) {
    const auto n = a.rows();
    std::vector<int> comp(static_cast<std::size_t>(n), -1);
    int next = 0;
    for (Eigen::Index s = 0; s < n; ++s) {
        if (comp[static_cast<std::size_t>(s)] >= 0) continue;
        std::vector<Eigen::Index> stack{s};
        comp[static_cast<std::size_t>(s)] = next;
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            for (Eigen::Index v = 0; v < n; ++v)
                if (comp[static_cast<std::size_t>(v)] < 0 && a(u, v) > std::numeric_limits<double>::epsilon()) {
                    comp[static_cast<std::size_t>(v)] = next;
                    stack.push_back(v);
                }
        }
        ++next;
    }
    return comp;
}

}  // namespace

Mat normalized_laplacian(const Mat& points, double sigma) {
    if (!(sigma > 0.0)) throw UsageError("spectral: sigma must be positive");
    return laplacian_from_affinity(gaussian_affinity(points, sigma));
}

ClusterAssignment spectral(const Mat& points, int k, std::optional<double> sigma, std::uint64_t seed) {
    check_k(points, k);
    const double s = sigma ? *sigma : median_pairwise_distance(points);
    if (!(s > 0.0)) throw UsageError("spectral: sigma must be positive");
    const Mat affinity = gaussian_affinity(points, s);

    ClusterAssignment a;
    a.method = ClusterMethod::Spectral;
    a.k = k;
    a.seed = seed;
    const auto comps = affinity_components(affinity);
    const int n_comps = *std::max_element(comps.begin(), comps.end()) + 1;
    a.disconnected_affinity = n_comps > 1;
    if (n_comps == k) {
        a.labels = canonical_labels(comps);
        a.silhouette = silhouette_score(points, a.labels);
        return a;
    }

    const Mat l = laplacian_from_affinity(affinity);
    Mat u;
    if (points.rows() <= 64) {
        u = jacobi_eigen(l).vectors.leftCols(k);
    } else {
        const Eigen::SelfAdjointEigenSolver<Mat> solver(l);
        if (solver.info() != Eigen::Success) throw NumericalError("spectral: eigensolver failed");
        u = solver.eigenvectors().leftCols(k);
    }
    for (int c = 0; c < k; ++c) {
        Eigen::Index arg = 0;
        u.col(c).cwiseAbs().maxCoeff(&arg);
        if (u(arg, c) < 0.0) u.col(c) *= -1.0;
    }
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        const double norm = u.row(i).norm();
        if (norm > 0.0) u.row(i) /= norm;
    }
    const auto inner = kmeans(u, k, seed);
    a.labels = inner.labels;
    a.objective = inner.objective;
    a.silhouette = silhouette_score(points, a.labels);
    return a;
}

double silhouette_score(const Mat& points, std::span<const int> labels) {
    const auto n = points.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n) throw DataError("silhouette: label count mismatch");
    std::map<int, int> sizes;
    for (int l : labels) ++sizes[l];
    if (sizes.size() < 2) throw DataError("silhouette needs at least two clusters");
    const Mat d = pairwise_distances(points);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int own = labels[static_cast<std::size_t>(i)];
        if (sizes[own] == 1) continue;
        std::map<int, double> sums;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) sums[labels[static_cast<std::size_t>(j)]] += d(i, j);
        const double a = sums[own] / (sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [label, size] : sizes)
            if (label != own) b = std::min(b, sums[label] / size);
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

ClusterAssignment run_clustering(ClusterMethod method, const Mat& points, int k, std::uint64_t seed) {
    switch (method) {
        case ClusterMethod::KMeans: return kmeans(points, k, seed);
        case ClusterMethod::GMM: return gmm_em(points, k, seed);
        case ClusterMethod::Spectral: return spectral(points, k, std::nullopt, seed);
        case ClusterMethod::Node2VecKMeans: {
            auto a = kmeans(points, k, seed);
            a.method = ClusterMethod::Node2VecKMeans;
            return a;
        }
    }
    throw UsageError("unknown clustering method");
}

ClusterAssignment select_k(const Mat& points, ClusterMethod method, std::span<const int> k_range,
                           std::uint64_t seed) {
    if (k_range.empty()) throw UsageError("select_k: empty k range");
    for (int k : k_range)
        if (k < 2 || k > points.rows() - 1)
            throw UsageError("select_k: k=" + std::to_string(k) + " outside [2, n-1]");
    std::optional<ClusterAssignment> best;
    for (int k : k_range) {
        auto a = run_clustering(method, points, k, seed);
        if (!best || a.silhouette > best->silhouette || (a.silhouette == best->silhouette && a.k < best->k))
            best = std::move(a);
    }
    return *best;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw DataError("ARI: label vectors differ in length");
    const auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ca, cb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        ca[a[i]] += 1.0;
        cb[b[i]] += 1.0;
    }
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [key, c] : joint) index += pairs(c);
    for (const auto& [key, c] : ca) sa += pairs(c);
    for (const auto& [key, c] : cb) sb += pairs(c);
    const double total = pairs(static_cast<double>(a.size()));
    if (total == 0.0) return 1.0;
    const double expected = sa * sb / total;
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) return index == expected ? 1.0 : 0.0;
    return (index - expected) / (max_index - expected);
}

}  // namespace qhealth
