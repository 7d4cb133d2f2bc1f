#ifndef KGSUB_CLUSTER_METRICS_HPP
#define KGSUB_CLUSTER_METRICS_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgsub/clustering.hpp"
#include "kgsub/matrix.hpp"

/**
 * @file cluster_metrics.hpp
 * @brief Cohesion and separation of clusters on the unit hypersphere.
 *
 * Points and centroids are normalized before any distance is taken, so
 * t_m lies in [0, 2], cohesion 1 - t_m in [-1, 1] and separation in [0, 2].
 */

namespace kgsub {

/// Componentwise mean of the listed rows. Throws DataError when `members` is empty.
std::vector<double> cluster_centroid(const Matrix& points, std::span<const std::size_t> members);

/// Componentwise mean of every row.
std::vector<double> cluster_centroid(const Matrix& points);

/// v / ||v||_2. Throws DegenerateVectorError for a zero (or non-finite) norm.
std::vector<double> normalize_unit(std::span<const double> v);

struct CohesionResult {
    /// Mean Euclidean distance between normalized members and the normalized centroid.
    double t = 0;
    double coh = 1;
    /// Members with zero norm, left out of the average.
    std::size_t excluded = 0;
};

/**
 * `points` are the raw members of one cluster and `centroid` their raw mean;
 * both are normalized here. Throws DegenerateVectorError when the centroid
 * or every member has zero norm.
 */
CohesionResult cohesion(const Matrix& points, std::span<const double> centroid);

/// Mean distance from normalized centroid m to the other rows. Throws ParameterError when k < 2.
double separation(const Matrix& normalized_centroids, std::size_t m);

struct Summary {
    double mean = 0;
    /// Population standard deviation.
    double std = 0;
    double variance = 0;
};

/// Throws ParameterError when empty.
Summary summarize(std::span<const double> values);

struct ClusterQualityRow {
    std::uint32_t cluster_id = 0;
    std::size_t size = 0;
    double t = 0;
    double cohesion = 0;
    double separation = 0;
    std::size_t excluded_points = 0;
    /// Zero-norm centroid: cohesion and separation are undefined (NaN).
    bool degenerate_centroid = false;
};

struct ClusterQuality {
    std::vector<ClusterQualityRow> rows;
    /// Over non-degenerate clusters only.
    Summary cohesion;
    Summary separation;
    std::size_t excluded_points = 0;
    std::size_t degenerate_clusters = 0;

    /// cluster_id, size, cohesion, separation, then mean/std/variance summary rows.
    std::string to_tsv() const;
    nlohmann::json to_json() const;
};

/// Cohesion and separation of every cluster. Separation needs at least two usable centroids.
ClusterQuality compute_quality(const Matrix& points, const Clustering& clustering);

}

#endif
