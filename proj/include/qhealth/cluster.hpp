#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qhealth/common.hpp"

namespace qhealth {

enum class ClusterMethod : std::uint8_t { KMeans, GMM, Spectral, Node2VecKMeans };

std::string_view to_string(ClusterMethod m) noexcept;
/// Accepts kmeans, gmm, spectral, node2vec-kmeans.
ClusterMethod parse_cluster_method(std::string_view token);

inline constexpr ClusterMethod kAllClusterMethods[] = {ClusterMethod::KMeans, ClusterMethod::GMM,
                                                       ClusterMethod::Spectral, ClusterMethod::Node2VecKMeans};

/// Points are the rows of a matrix throughout.
struct ClusterAssignment {
    ClusterMethod method = ClusterMethod::KMeans;
    int k = 0;
    /// Relabelled so clusters appear in order of their first member.
    std::vector<int> labels;
    double silhouette = 0.0;
    std::uint64_t seed = 0;
    /// WCSS for k-means, final log-likelihood for GMM, k-means WCSS on the
    /// spectral coordinates for spectral.
    double objective = 0.0;
    /// Spectral only: the affinity graph fell apart at machine precision.
    bool disconnected_affinity = false;
};

struct KMeansOptions {
    int max_iter = 300;
    int restarts = 10;
    /// When set, receives the WCSS after every Lloyd step of the winning restart.
    std::vector<double>* wcss_trace = nullptr;
};

/// k-means++ seeding plus Lloyd iterations, best of `restarts` by WCSS.
/// Random choices hash each point's coordinates, so reordering the input
/// permutes the output without changing the partition.
ClusterAssignment kmeans(const Mat& points, int k, std::uint64_t seed, const KMeansOptions& opts = {});

double within_cluster_ss(const Mat& points, std::span<const int> labels, int k);

struct GmmOptions {
    int max_iter = 500;
    double tol = 1e-7;
    double reg = 1e-6;
    std::vector<double>* loglik_trace = nullptr;
};

/// Full-covariance Gaussian mixture by EM from a k-means start; labels are
/// the maximum-responsibility components.
ClusterAssignment gmm_em(const Mat& points, int k, std::uint64_t seed, const GmmOptions& opts = {});

/// Mixture log-likelihood for given parameters (exposed for tests).
double gmm_log_likelihood(const Mat& points, const Vec& weights, const std::vector<Vec>& means,
                          const std::vector<Mat>& covariances);

struct EigenDecomposition {
    /// Ascending.
    Vec values;
    /// Column i pairs with values(i).
    Mat vectors;
    int sweeps = 0;
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is below tol.
EigenDecomposition jacobi_eigen(const Mat& symmetric, double tol = 1e-10, int max_sweeps = 100);

/// Median of the pairwise Euclidean distances.
double median_pairwise_distance(const Mat& points);

/// Symmetric normalized Laplacian I - D^-1/2 A D^-1/2 of the Gaussian affinity.
Mat normalized_laplacian(const Mat& points, double sigma);

/// Spectral clustering; sigma nullopt uses the median pairwise distance.
/// Jacobi handles up to 64 points, larger inputs use Eigen's solver.
ClusterAssignment spectral(const Mat& points, int k, std::optional<double> sigma, std::uint64_t seed);

/// Mean over points of (b - a) / max(a, b); singleton members contribute 0.
double silhouette_score(const Mat& points, std::span<const int> labels);

ClusterAssignment run_clustering(ClusterMethod method, const Mat& points, int k, std::uint64_t seed);

/// Best silhouette over k_range; ties keep the smaller k.
ClusterAssignment select_k(const Mat& points, ClusterMethod method, std::span<const int> k_range,
                           std::uint64_t seed);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

/// Relabels so labels appear in order 0, 1, ... by first occurrence.
std::vector<int> canonical_labels(std::span<const int> labels);

}  // namespace qhealth
