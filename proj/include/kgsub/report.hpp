#ifndef KGSUB_REPORT_HPP
#define KGSUB_REPORT_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgsub/cluster_metrics.hpp"
#include "kgsub/clustering.hpp"
#include "kgsub/graph_store.hpp"
#include "kgsub/projection.hpp"

namespace kgsub {

/// Fill color for a cluster id, as "#rrggbb".
std::string cluster_color(std::size_t cluster, std::size_t k);

/**
 * Standalone SVG scatter plot: one circle per projected point colored by
 * cluster, plus a legend bar with one entry per cluster id. `assignments`
 * is indexed by input row (see Projection2D::source_rows).
 */
std::string render_scatter(const Projection2D& proj,
                           std::span<const std::uint32_t> assignments,
                           std::size_t k,
                           std::string_view title = "");

struct ClusterSample {
    std::uint32_t cluster_id = 0;
    std::size_t size = 0;
    /// Positions into the relation's triple list, ascending.
    std::vector<std::size_t> triple_indices;
    std::vector<TripleRecord> triples;
};

struct ClusterReport {
    std::string relation;
    std::size_t per_cluster = 0;
    std::uint64_t seed = 0;
    std::vector<ClusterSample> clusters;
};

/// min(m, |C|) triples per cluster, uniformly without replacement. `g_r` is aligned with the assignments.
ClusterReport sample_cluster_triples(const Clustering& clustering,
                                     std::span<const TripleRecord> g_r,
                                     std::size_t m,
                                     std::uint64_t seed);

/// Markdown: a summary table per cluster (size, cohesion, separation) and its sampled triples.
std::string render_markdown(const ClusterReport& report, const ClusterQuality* quality = nullptr);

}

#endif
