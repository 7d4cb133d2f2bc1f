#ifndef KGSUB_CLUSTERING_HPP
#define KGSUB_CLUSTERING_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgsub/matrix.hpp"

/**
 * @file clustering.hpp
 * @brief Lloyd k-means over translation vectors plus the usual k-selection
 * scores (WSS, silhouette, Davies-Bouldin, Calinski-Harabasz).
 */

namespace kgsub {

enum class KMeansInit {
    /// k distinct data points chosen uniformly at random.
    RandomPoints,
    KMeansPlusPlus,
};

struct KMeansOptions {
    std::size_t k = 2;
    std::uint64_t seed = 0;
    std::size_t max_iter = 300;
    KMeansInit init = KMeansInit::RandomPoints;
    /// Overrides `init` when set (k x q).
    std::optional<Matrix> initial_means;
};

struct Clustering {
    std::size_t k = 0;
    std::vector<std::uint32_t> assignments;
    Matrix means;
    std::size_t iterations_run = 0;
    bool converged = false;
    /// WSS after every (assign, update) step.
    std::vector<double> wss_trace;
    /// Number of times an emptied cluster was reseeded.
    std::size_t empty_repairs = 0;

    std::vector<std::size_t> sizes() const;

    /// {k, assignments, means}
    nlohmann::json to_json() const;
    static Clustering from_json(const nlohmann::json& j);
};

/**
 * Lloyd iterations: nearest mean by Euclidean distance (ties go to the lower
 * cluster id), then recompute means, until assignments stop changing or
 * max_iter assignment passes have run. An emptied cluster is reseeded with
 * the point farthest from its current mean among clusters of size > 1.
 * Throws ParameterError unless 1 <= k <= n.
 */
Clustering kmeans(const Matrix& points, const KMeansOptions& options);

/// Runs kmeans `restarts` times with seeds derive_seed(options.seed, i) and keeps the lowest WSS.
struct RestartResult {
    Clustering clustering;
    std::uint64_t seed = 0;
    double wss = 0;
};
RestartResult best_of_restarts(const Matrix& points, const KMeansOptions& options, std::size_t restarts);

double wss(const Clustering& clustering, const Matrix& points);

enum class SilhouetteVariant {
    /// a = distance to own centroid, b = distance to nearest other centroid.
    Centroid,
    /// Classic definition from mean pairwise distances; singletons score 0.
    Pairwise,
};

/// Mean silhouette in [-1, 1]. Throws ParameterError when k < 2.
double silhouette(const Clustering& clustering,
                  const Matrix& points,
                  SilhouetteVariant variant = SilhouetteVariant::Centroid);

/// Lower is better. +inf when two centroids coincide. Throws ParameterError when k < 2.
double davies_bouldin(const Clustering& clustering, const Matrix& points);

/// Higher is better. +inf when WSS is 0. Throws ParameterError unless 2 <= k < n.
double calinski_harabasz(const Clustering& clustering, const Matrix& points);

struct KSelectionRow {
    std::size_t k = 0;
    double wss = 0;
    double silhouette = 0;
    double davies_bouldin = 0;
    double calinski_harabasz = 0;
    std::uint64_t seed = 0;
};

struct KSelectionCurve {
    std::vector<KSelectionRow> rows;
    std::size_t silhouette_max_k = 0;
    std::size_t silhouette_min_k = 0;
    std::size_t davies_bouldin_min_k = 0;
    std::size_t calinski_harabasz_max_k = 0;
    /// Point of the WSS curve farthest below the chord joining its ends.
    std::size_t elbow_k = 0;

    /// The suggestion reported to users: the silhouette maximum.
    std::size_t suggested_k() const { return silhouette_max_k; }

    std::string to_tsv() const;
    nlohmann::json extrema_json() const;
};

/// Rows for k = k_min..k_max, each the best of `restarts` runs. Range must lie in [2, n-1].
KSelectionCurve k_sweep(const Matrix& points,
                        std::size_t k_min,
                        std::size_t k_max,
                        std::size_t restarts,
                        std::uint64_t seed,
                        const KMeansOptions& base = {});

/// Adjusted Rand index between two labelings of the same points.
double adjusted_rand_index(std::span<const std::int64_t> a, std::span<const std::int64_t> b);

}

#endif
