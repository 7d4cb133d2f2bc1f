#ifndef KGSUB_RELATION_VALIDATOR_HPP
#define KGSUB_RELATION_VALIDATOR_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgsub/embedding.hpp"
#include "kgsub/graph_store.hpp"
#include "kgsub/matrix.hpp"

/**
 * @file relation_validator.hpp
 * @brief Checks that a learned relation vector agrees with the mean of its
 * translation vectors (tail - head), triple by triple.
 */

namespace kgsub {

/// Translation vectors of one relation; row i belongs to triple_order[i].
struct TranslationSet {
    std::uint32_t relation = 0;
    std::vector<std::size_t> triple_order;
    Matrix vectors;

    std::size_t size() const { return vectors.rows(); }
};

/// Rows are vec(t) - vec(h) for every triple of `relation` in `sample`, in sample order.
TranslationSet translation_vectors(const EmbeddingTable& table, const GraphSample& sample, std::uint32_t relation);

/**
 * Same for an explicit ordered list of triples. Entity URIs are resolved
 * through `entities`; an unknown URI raises LookupError naming it.
 * triple_order is 0..n-1.
 */
TranslationSet translation_vectors(const EmbeddingTable& table,
                                   const Dictionary& entities,
                                   std::span<const TripleRecord> g_r,
                                   std::uint32_t relation);

/// Componentwise mean of the rows. Throws DataError when empty.
std::vector<double> centroid_vector(const TranslationSet& ts);

/// Cosine similarity; 0 when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

struct SimilarityListPair {
    std::vector<double> sl_direct;
    std::vector<double> sl_centroid;
    /// Zero-norm translation vectors (scored 0 in both lists).
    std::size_t degenerate = 0;
};

SimilarityListPair similarity_lists(const EmbeddingTable& table, std::uint32_t relation, const TranslationSet& ts);

struct SpearmanResult {
    /// Unset when either list is constant.
    std::optional<double> rho;
    double abs_rho = 0;
    bool degenerate = false;
};

/// Average ranks, ties sharing the mean of their positions (1-based).
std::vector<double> average_ranks(std::span<const double> values);

SpearmanResult spearman_abs(const SimilarityListPair& pair);

/**
 * Symmetrized KL divergence, 0.5 KL(P||Q) + 0.5 KL(Q||P), between
 * histograms of the two lists over [-1, 1] with `bins` equal-width bins.
 * Each bin probability gets 1e-10 added before renormalizing.
 */
double kl_check(const SimilarityListPair& pair, std::size_t bins = 50);

struct RelationValidationRow {
    std::string relation;
    std::size_t triple_count = 0;
    std::optional<double> rho;
    double abs_rho = 0;
    /// +1, -1, or 0 when rho is undefined or exactly zero.
    int sign = 0;
    double kl = 0;
    std::size_t degenerate = 0;
};

struct SkippedRelation {
    std::string relation;
    std::size_t triple_count = 0;
    std::string reason;
};

struct RelationValidationReport {
    std::vector<RelationValidationRow> rows;
    std::vector<SkippedRelation> skipped;

    std::string to_tsv() const;
    nlohmann::json to_json() const;
};

/// One row per relation with at least `min_triples` (>= 2) triples, in relation id order.
RelationValidationReport validate_all(const EmbeddingTable& table,
                                      const GraphSample& sample,
                                      std::size_t min_triples = 2,
                                      std::size_t bins = 50);

}

#endif
