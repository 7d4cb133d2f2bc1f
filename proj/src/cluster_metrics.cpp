#include "kgsub/cluster_metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "kgsub/error.hpp"
#include "kgsub/io.hpp"

namespace kgsub {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

double distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

}

std::vector<double> cluster_centroid(const Matrix& points, std::span<const std::size_t> members) {
    if (members.empty()) {
        throw DataError("centroid of an empty cluster");
    }
    std::vector<double> c(points.cols(), 0.0);
    for (auto i : members) {
        const auto p = points.row(i);
        for (std::size_t j = 0; j < c.size(); ++j) {
            c[j] += p[j];
        }
    }
    for (auto& x : c) {
        x /= static_cast<double>(members.size());
    }
    return c;
}

std::vector<double> cluster_centroid(const Matrix& points) {
    std::vector<std::size_t> all(points.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return cluster_centroid(points, all);
}

std::vector<double> normalize_unit(std::span<const double> v) {
    const double norm = std::sqrt(dot(v, v));
    if (!(norm > 0) || !std::isfinite(norm)) {
        throw DegenerateVectorError("cannot normalize a zero-norm vector");
    }
    std::vector<double> out(v.begin(), v.end());
    for (auto& x : out) {
        x /= norm;
    }
    return out;
}

CohesionResult cohesion(const Matrix& points, std::span<const double> centroid) {
    if (points.empty()) {
        throw DataError("cohesion of an empty cluster");
    }
    const auto c = normalize_unit(centroid);
    CohesionResult result;
    double sum = 0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        const auto p = points.row(i);
        if (dot(p, p) == 0) {
            ++result.excluded;
            continue;
        }
        sum += distance(normalize_unit(p), c);
        ++used;
    }
    if (used == 0) {
        throw DegenerateVectorError("every member of the cluster has zero norm");
    }
    result.t = sum / static_cast<double>(used);
    result.coh = 1.0 - result.t;
    return result;
}

double separation(const Matrix& normalized_centroids, std::size_t m) {
    const auto k = normalized_centroids.rows();
    if (k < 2) {
        throw ParameterError("separation needs at least 2 centroids");
    }
    if (m >= k) {
        throw ParameterError("centroid index out of range");
    }
    double sum = 0;
    for (std::size_t j = 0; j < k; ++j) {
        if (j != m) {
            sum += distance(normalized_centroids.row(m), normalized_centroids.row(j));
        }
    }
    return sum / static_cast<double>(k - 1);
}

Summary summarize(std::span<const double> values) {
    if (values.empty()) {
        throw ParameterError("summary of an empty list");
    }
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return {mean, std::sqrt(ss / n), ss / n};
}

ClusterQuality compute_quality(const Matrix& points, const Clustering& clustering) {
    if (clustering.assignments.size() != points.rows()) {
        throw ParameterError("clustering does not match the point set");
    }
    std::vector<std::vector<std::size_t>> members(clustering.k);
    for (std::size_t i = 0; i < points.rows(); ++i) {
        members.at(clustering.assignments[i]).push_back(i);
    }

    ClusterQuality quality;
    std::vector<std::size_t> usable;
    std::vector<std::vector<double>> unit_centroids;
    for (std::size_t c = 0; c < clustering.k; ++c) {
        ClusterQualityRow row;
        row.cluster_id = static_cast<std::uint32_t>(c);
        row.size = members[c].size();
        row.separation = nan;
        if (members[c].empty()) {
            row.degenerate_centroid = true;
            row.t = row.cohesion = nan;
            quality.rows.push_back(row);
            continue;
        }
        const auto centroid = cluster_centroid(points, members[c]);
        Matrix own(members[c].size(), points.cols());
        for (std::size_t i = 0; i < members[c].size(); ++i) {
            std::ranges::copy(points.row(members[c][i]), own.row(i).begin());
        }
        try {
            const auto coh = cohesion(own, centroid);
            row.t = coh.t;
            row.cohesion = coh.coh;
            row.excluded_points = coh.excluded;
            usable.push_back(c);
            unit_centroids.push_back(normalize_unit(centroid));
        } catch (const DegenerateVectorError&) {
            row.degenerate_centroid = true;
            row.t = row.cohesion = nan;
            row.excluded_points = 0;
        }
        quality.excluded_points += row.excluded_points;
        quality.rows.push_back(row);
    }

    if (usable.size() >= 2) {
        Matrix centroids(usable.size(), points.cols());
        for (std::size_t i = 0; i < usable.size(); ++i) {
            std::ranges::copy(unit_centroids[i], centroids.row(i).begin());
        }
        for (std::size_t i = 0; i < usable.size(); ++i) {
            quality.rows[usable[i]].separation = separation(centroids, i);
        }
    }

    std::vector<double> coh;
    std::vector<double> sep;
    for (const auto& row : quality.rows) {
        if (row.degenerate_centroid) {
            ++quality.degenerate_clusters;
            continue;
        }
        coh.push_back(row.cohesion);
        if (std::isfinite(row.separation)) {
            sep.push_back(row.separation);
        }
    }
    quality.cohesion = coh.empty() ? Summary{nan, nan, nan} : summarize(coh);
    quality.separation = sep.empty() ? Summary{nan, nan, nan} : summarize(sep);
    return quality;
}

std::string ClusterQuality::to_tsv() const {
    std::ostringstream out;
    out << "cluster_id\tsize\tcohesion\tseparation\n";
    for (const auto& row : rows) {
        out << row.cluster_id << '\t' << row.size << '\t' << io::format_double(row.cohesion) << '\t'
            << io::format_double(row.separation) << '\n';
    }
    out << "mean\t\t" << io::format_double(cohesion.mean) << '\t' << io::format_double(separation.mean) << '\n';
    out << "std\t\t" << io::format_double(cohesion.std) << '\t' << io::format_double(separation.std) << '\n';
    out << "variance\t\t" << io::format_double(cohesion.variance) << '\t' << io::format_double(separation.variance)
        << '\n';
    return out.str();
}

nlohmann::json ClusterQuality::to_json() const {
    const auto number = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
    const auto summary = [&](const Summary& s) {
        return nlohmann::json{{"mean", number(s.mean)}, {"std", number(s.std)}, {"variance", number(s.variance)}};
    };
    nlohmann::json clusters = nlohmann::json::array();
    for (const auto& row : rows) {
        clusters.push_back({
            {"cluster_id", row.cluster_id},
            {"size", row.size},
            {"t", number(row.t)},
            {"cohesion", number(row.cohesion)},
            {"separation", number(row.separation)},
            {"excluded_points", row.excluded_points},
            {"degenerate_centroid", row.degenerate_centroid},
        });
    }
    return {
        {"clusters", clusters},
        {"cohesion", summary(cohesion)},
        {"separation", summary(separation)},
        {"excluded_points", excluded_points},
        {"degenerate_clusters", degenerate_clusters},
    };
}

}
