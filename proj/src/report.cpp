#include "kgsub/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "kgsub/error.hpp"
#include "kgsub/io.hpp"
#include "kgsub/random.hpp"

namespace kgsub {

namespace {

constexpr std::array<const char*, 20> palette{
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
};

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string md_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '|') {
            out += "\\|";
        } else {
            out += c;
        }
    }
    return out;
}

std::string fixed(double v) {
    return io::format_fixed(v, 2);
}

}

std::string cluster_color(std::size_t cluster, std::size_t k) {
    if (k <= palette.size()) {
        return palette[cluster % palette.size()];
    }
    // evenly spaced hues at fixed saturation/value
    const double h = static_cast<double>(cluster) / static_cast<double>(k) * 6.0;
    const double s = 0.65;
    const double v = 0.85;
    const auto sector = static_cast<int>(std::floor(h)) % 6;
    const double f = h - std::floor(h);
    const double p = v * (1 - s);
    const double q = v * (1 - s * f);
    const double t = v * (1 - s * (1 - f));
    double r = 0;
    double g = 0;
    double b = 0;
    switch (sector) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    const auto byte = [](double x) { return static_cast<unsigned>(std::lround(x * 255.0)); };
    std::array<char, 8> hex{};
    std::snprintf(hex.data(), hex.size(), "#%02x%02x%02x", byte(r), byte(g), byte(b));
    return hex.data();
}

std::string render_scatter(const Projection2D& proj,
                           std::span<const std::uint32_t> assignments,
                           std::size_t k,
                           std::string_view title) {
    const auto n = proj.coords.rows();
    if (n == 0) {
        throw DataError("cannot render an empty projection");
    }
    if (k == 0) {
        throw ParameterError("palette size k must be >= 1");
    }
    if (proj.source_rows.size() != n) {
        throw ParameterError("projection rows and source rows disagree");
    }
    const std::size_t needed = *std::max_element(proj.source_rows.begin(), proj.source_rows.end()) + 1;
    if (assignments.size() < needed || (!proj.subsampled && assignments.size() != n)) {
        throw ParameterError("assignments must have one entry per input point");
    }

    constexpr double width = 720;
    constexpr double height = 540;
    constexpr double margin = 40;
    constexpr double legend_width = 120;
    const double plot_w = width - 2 * margin - legend_width;
    const double plot_h = height - 2 * margin;

    double min_x = proj.coords(0, 0);
    double max_x = min_x;
    double min_y = proj.coords(0, 1);
    double max_y = min_y;
    for (std::size_t i = 0; i < n; ++i) {
        min_x = std::min(min_x, proj.coords(i, 0));
        max_x = std::max(max_x, proj.coords(i, 0));
        min_y = std::min(min_y, proj.coords(i, 1));
        max_y = std::max(max_y, proj.coords(i, 1));
    }
    const double range = std::max({max_x - min_x, max_y - min_y, 1e-12});
    const double scale = std::min(plot_w, plot_h) / range;
    const double off_x = margin + (plot_w - (max_x - min_x) * scale) / 2;
    const double off_y = margin + (plot_h - (max_y - min_y) * scale) / 2;

    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";
    if (!title.empty()) {
        out << "<text x=\"" << margin << "\" y=\"" << margin / 2 + 5
            << "\" font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
    }
    out << "<g class=\"points\">\n";
    for (std::size_t i = 0; i < n; ++i) {
        const auto cluster = assignments[proj.source_rows[i]];
        if (cluster >= k) {
            throw ParameterError("assignment " + std::to_string(cluster) + " outside the palette");
        }
        const double x = off_x + (proj.coords(i, 0) - min_x) * scale;
        const double y = off_y + (max_y - proj.coords(i, 1)) * scale;
        out << "<circle cx=\"" << fixed(x) << "\" cy=\"" << fixed(y) << "\" r=\"3\" fill=\""
            << cluster_color(cluster, k) << "\" fill-opacity=\"0.8\"/>\n";
    }
    out << "</g>\n";

    const double legend_x = width - margin - legend_width + 20;
    const double entry_h = std::min(18.0, plot_h / static_cast<double>(k));
    out << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"" << fixed(std::max(6.0, entry_h * 0.7))
        << "\">\n";
    for (std::size_t c = 0; c < k; ++c) {
        const double y = margin + static_cast<double>(c) * entry_h;
        out << "<g class=\"legend-entry\"><rect x=\"" << fixed(legend_x) << "\" y=\"" << fixed(y)
            << "\" width=\"14\" height=\"" << fixed(entry_h) << "\" fill=\"" << cluster_color(c, k)
            << "\"/><text x=\"" << fixed(legend_x + 20) << "\" y=\"" << fixed(y + entry_h * 0.8) << "\">" << c
            << "</text></g>\n";
    }
    out << "</g>\n";
    out << "</svg>\n";
    return out.str();
}

ClusterReport sample_cluster_triples(const Clustering& clustering,
                                     std::span<const TripleRecord> g_r,
                                     std::size_t m,
                                     std::uint64_t seed) {
    if (clustering.assignments.size() != g_r.size()) {
        throw ParameterError("clustering is not aligned with the relation's triples");
    }
    std::vector<std::vector<std::size_t>> members(clustering.k);
    for (std::size_t i = 0; i < g_r.size(); ++i) {
        members.at(clustering.assignments[i]).push_back(i);
    }

    ClusterReport report;
    report.per_cluster = m;
    report.seed = seed;
    if (!g_r.empty()) {
        report.relation = g_r.front().relation;
    }
    for (std::size_t c = 0; c < clustering.k; ++c) {
        ClusterSample sample;
        sample.cluster_id = static_cast<std::uint32_t>(c);
        sample.size = members[c].size();
        auto pool = members[c];
        const auto take = std::min(m, pool.size());
        Rng rng(derive_seed(seed, c));
        for (std::size_t i = 0; i < take; ++i) {
            const auto j = i + rng.index(pool.size() - i);
            std::swap(pool[i], pool[j]);
        }
        sample.triple_indices.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
        std::sort(sample.triple_indices.begin(), sample.triple_indices.end());
        for (auto i : sample.triple_indices) {
            sample.triples.push_back(g_r[i]);
        }
        report.clusters.push_back(std::move(sample));
    }
    return report;
}

std::string render_markdown(const ClusterReport& report, const ClusterQuality* quality) {
    std::ostringstream out;
    out << "# Clusters of " << md_escape(report.relation.empty() ? "(empty relation)" : report.relation) << "\n\n";
    out << "Up to " << report.per_cluster << " randomly sampled triples per cluster (seed " << report.seed << ").\n\n";

    out << "| cluster | size | cohesion | separation |\n";
    out << "|---:|---:|---:|---:|\n";
    for (const auto& c : report.clusters) {
        std::string coh = "-";
        std::string sep = "-";
        if (quality != nullptr && c.cluster_id < quality->rows.size()) {
            coh = io::format_fixed(quality->rows[c.cluster_id].cohesion, 4);
            sep = io::format_fixed(quality->rows[c.cluster_id].separation, 4);
        }
        out << "| " << c.cluster_id << " | " << c.size << " | " << coh << " | " << sep << " |\n";
    }
    if (quality != nullptr) {
        out << "\nMean cohesion " << io::format_fixed(quality->cohesion.mean, 4) << " (std "
            << io::format_fixed(quality->cohesion.std, 4) << ", variance " << io::format_fixed(quality->cohesion.variance, 4)
            << "); mean separation " << io::format_fixed(quality->separation.mean, 4) << " (std "
            << io::format_fixed(quality->separation.std, 4) << ", variance "
            << io::format_fixed(quality->separation.variance, 4) << ").\n";
    }

    for (const auto& c : report.clusters) {
        out << "\n## Cluster " << c.cluster_id << " (" << c.size << " triples)\n\n";
        if (c.triples.empty()) {
            out << "_no triples sampled_\n";
            continue;
        }
        out << "| head | relation | tail |\n|---|---|---|\n";
        for (const auto& t : c.triples) {
            out << "| " << md_escape(t.head) << " | " << md_escape(t.relation) << " | " << md_escape(t.tail) << " |\n";
        }
    }
    return out.str();
}

}
