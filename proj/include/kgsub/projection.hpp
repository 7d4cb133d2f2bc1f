#ifndef KGSUB_PROJECTION_HPP
#define KGSUB_PROJECTION_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kgsub/matrix.hpp"

/**
 * @file projection.hpp
 * @brief 2-D projections for plotting: exact t-SNE and PCA.
 */

namespace kgsub {

enum class ProjectionMethod { Tsne, Pca };

ProjectionMethod parse_projection_method(std::string_view name);
std::string_view projection_method_name(ProjectionMethod method);

struct TsneParams {
    double perplexity = 30;
    std::size_t iterations = 1000;
    double early_exaggeration = 12;
    std::size_t exaggeration_iterations = 250;
    /// Defaults to n / 12 when unset.
    std::optional<double> learning_rate;
    /// Larger inputs are uniformly subsampled (seeded) down to this many rows.
    std::size_t max_points = 10000;
    /// KL(P||Q) is recorded every this many iterations (plus the first and last).
    std::size_t checkpoint_every = 50;
};

struct Projection2D {
    /// One row per projected point, aligned with source_rows.
    Matrix coords;
    ProjectionMethod method = ProjectionMethod::Tsne;
    TsneParams params;
    std::uint64_t seed = 0;
    /// Index into the input point set of each row; the identity unless subsampled.
    std::vector<std::size_t> source_rows;
    bool subsampled = false;
    /// (iteration, KL divergence) checkpoints; t-SNE only.
    std::vector<std::pair<std::size_t, double>> kl_trace;

    /// point_id, x, y, cluster_id. `assignments` is indexed by input row.
    std::string to_tsv(std::span<const std::uint32_t> assignments) const;
    nlohmann::json metadata() const;
};

/**
 * Project `points` (n x q) to two dimensions. Needs n >= 4; t-SNE also needs
 * perplexity < (n - 1) / 3 for the (possibly subsampled) n. Deterministic per seed.
 */
Projection2D project_2d(const Matrix& points, ProjectionMethod method, const TsneParams& params, std::uint64_t seed);

/// Symmetrized input affinities P (n x n, summing to 1) for the given perplexity.
Matrix tsne_affinities(const Matrix& points, double perplexity);

}

#endif
