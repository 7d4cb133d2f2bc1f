#include "kgsub/relation_validator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "kgsub/error.hpp"
#include "kgsub/io.hpp"

namespace kgsub {

namespace {

void fill_row(const EmbeddingTable& table, std::uint32_t head, std::uint32_t tail, std::span<double> out) {
    const auto h = table.entity(head);
    const auto t = table.entity(tail);
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = static_cast<double>(t[j]) - static_cast<double>(h[j]);
    }
}

double norm(std::span<const double> v) {
    return std::sqrt(dot(v, v));
}

}

TranslationSet translation_vectors(const EmbeddingTable& table, const GraphSample& sample, std::uint32_t relation) {
    if (relation >= sample.relations().size()) {
        throw LookupError("relation id " + std::to_string(relation) + " not in sample");
    }
    TranslationSet ts;
    ts.relation = relation;
    ts.triple_order = sample.relation_members(relation);
    ts.vectors = Matrix(ts.triple_order.size(), table.dim());
    const auto indexed = sample.indexed();
    for (std::size_t i = 0; i < ts.triple_order.size(); ++i) {
        const auto& t = indexed[ts.triple_order[i]];
        if (t.head >= table.entity_count() || t.tail >= table.entity_count()) {
            const auto missing = t.head >= table.entity_count() ? t.head : t.tail;
            throw LookupError("no embedding for entity " + sample.entities().uri(missing));
        }
        fill_row(table, t.head, t.tail, ts.vectors.row(i));
    }
    return ts;
}

TranslationSet translation_vectors(const EmbeddingTable& table,
                                   const Dictionary& entities,
                                   std::span<const TripleRecord> g_r,
                                   std::uint32_t relation) {
    const auto lookup = [&](const std::string& uri) {
        const auto id = entities.find(uri);
        if (!id || *id >= table.entity_count()) {
            throw LookupError("no embedding for entity " + uri);
        }
        return *id;
    };
    TranslationSet ts;
    ts.relation = relation;
    ts.triple_order.resize(g_r.size());
    std::iota(ts.triple_order.begin(), ts.triple_order.end(), std::size_t{0});
    ts.vectors = Matrix(g_r.size(), table.dim());
    for (std::size_t i = 0; i < g_r.size(); ++i) {
        fill_row(table, lookup(g_r[i].head), lookup(g_r[i].tail), ts.vectors.row(i));
    }
    return ts;
}

std::vector<double> centroid_vector(const TranslationSet& ts) {
    if (ts.vectors.empty()) {
        throw DataError("centroid of an empty translation set");
    }
    std::vector<double> c(ts.vectors.cols(), 0.0);
    for (std::size_t i = 0; i < ts.vectors.rows(); ++i) {
        const auto row = ts.vectors.row(i);
        for (std::size_t j = 0; j < c.size(); ++j) {
            c[j] += row[j];
        }
    }
    for (auto& x : c) {
        x /= static_cast<double>(ts.vectors.rows());
    }
    return c;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0 || nb == 0) {
        return 0;
    }
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

SimilarityListPair similarity_lists(const EmbeddingTable& table, std::uint32_t relation, const TranslationSet& ts) {
    if (ts.vectors.empty()) {
        throw DataError("similarity lists of an empty translation set");
    }
    const auto r_float = table.relation(relation);
    const std::vector<double> r(r_float.begin(), r_float.end());
    const auto rc = centroid_vector(ts);

    SimilarityListPair pair;
    pair.sl_direct.reserve(ts.size());
    pair.sl_centroid.reserve(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto v = ts.vectors.row(i);
        if (norm(v) == 0) {
            ++pair.degenerate;
        }
        pair.sl_direct.push_back(cosine(r, v));
        pair.sl_centroid.push_back(cosine(rc, v));
    }
    return pair;
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });

    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = rank;
        }
        i = j + 1;
    }
    return ranks;
}

SpearmanResult spearman_abs(const SimilarityListPair& pair) {
    const auto n = pair.sl_direct.size();
    if (n != pair.sl_centroid.size()) {
        throw ParameterError("similarity lists differ in length");
    }
    if (n < 2) {
        throw ParameterError("spearman needs at least 2 entries");
    }
    // Pearson correlation of the average ranks handles ties exactly.
    const auto x = average_ranks(pair.sl_direct);
    const auto y = average_ranks(pair.sl_centroid);
    const double mean = (static_cast<double>(n) + 1.0) / 2.0;
    double sxy = 0;
    double sxx = 0;
    double syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mean) * (y[i] - mean);
        sxx += (x[i] - mean) * (x[i] - mean);
        syy += (y[i] - mean) * (y[i] - mean);
    }
    SpearmanResult result;
    if (sxx == 0 || syy == 0) {
        result.degenerate = true;
        result.abs_rho = std::numeric_limits<double>::quiet_NaN();
        return result;
    }
    const double rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    result.rho = rho;
    result.abs_rho = std::abs(rho);
    return result;
}

namespace {

std::vector<double> histogram(std::span<const double> values, std::size_t bins) {
    constexpr double eps = 1e-10;
    std::vector<double> counts(bins, 0.0);
    for (double v : values) {
        const double clamped = std::clamp(v, -1.0, 1.0);
        auto b = static_cast<std::size_t>((clamped + 1.0) / 2.0 * static_cast<double>(bins));
        counts[std::min(b, bins - 1)] += 1.0;
    }
    const double n = static_cast<double>(values.size());
    const double total = 1.0 + eps * static_cast<double>(bins);
    for (auto& c : counts) {
        c = (c / n + eps) / total;
    }
    return counts;
}

double kl(std::span<const double> p, std::span<const double> q) {
    double sum = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        sum += p[i] * std::log(p[i] / q[i]);
    }
    return sum;
}

}

double kl_check(const SimilarityListPair& pair, std::size_t bins) {
    if (bins < 2) {
        throw ParameterError("kl_check needs at least 2 bins");
    }
    if (pair.sl_direct.empty() || pair.sl_centroid.empty()) {
        throw ParameterError("kl_check needs non-empty similarity lists");
    }
    const auto p = histogram(pair.sl_direct, bins);
    const auto q = histogram(pair.sl_centroid, bins);
    return std::max(0.0, 0.5 * kl(p, q) + 0.5 * kl(q, p));
}

RelationValidationReport validate_all(const EmbeddingTable& table,
                                      const GraphSample& sample,
                                      std::size_t min_triples,
                                      std::size_t bins) {
    min_triples = std::max<std::size_t>(min_triples, 2);
    RelationValidationReport report;
    for (std::size_t r = 0; r < sample.relations().size(); ++r) {
        const auto rel = static_cast<std::uint32_t>(r);
        const auto& uri = sample.relations().uri(rel);
        const auto ts = translation_vectors(table, sample, rel);
        if (ts.size() < min_triples) {
            report.skipped.push_back(
                {uri, ts.size(), "fewer than " + std::to_string(min_triples) + " triples"});
            continue;
        }
        const auto pair = similarity_lists(table, rel, ts);
        const auto rho = spearman_abs(pair);

        RelationValidationRow row;
        row.relation = uri;
        row.triple_count = ts.size();
        row.rho = rho.rho;
        row.abs_rho = rho.abs_rho;
        row.sign = rho.rho ? (*rho.rho > 0 ? 1 : (*rho.rho < 0 ? -1 : 0)) : 0;
        row.kl = kl_check(pair, bins);
        row.degenerate = pair.degenerate;
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string RelationValidationReport::to_tsv() const {
    std::ostringstream out;
    out << "relation\ttriples\tspearman\tabs_spearman\tsign\tkl_divergence\tdegenerate\n";
    for (const auto& row : rows) {
        out << row.relation << '\t' << row.triple_count << '\t'
            << (row.rho ? io::format_double(*row.rho) : std::string("nan")) << '\t' << io::format_double(row.abs_rho)
            << '\t' << row.sign << '\t' << io::format_double(row.kl) << '\t' << row.degenerate << '\n';
    }
    return out.str();
}

nlohmann::json RelationValidationReport::to_json() const {
    const auto number = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
    nlohmann::json out = {{"relations", nlohmann::json::array()}, {"skipped", nlohmann::json::array()}};
    for (const auto& row : rows) {
        out["relations"].push_back({
            {"relation", row.relation},
            {"triples", row.triple_count},
            {"spearman", row.rho ? number(*row.rho) : nlohmann::json(nullptr)},
            {"abs_spearman", number(row.abs_rho)},
            {"sign", row.sign},
            {"kl_divergence", number(row.kl)},
            {"degenerate", row.degenerate},
        });
    }
    for (const auto& s : skipped) {
        out["skipped"].push_back({{"relation", s.relation}, {"triples", s.triple_count}, {"reason", s.reason}});
    }
    return out;
}

}
