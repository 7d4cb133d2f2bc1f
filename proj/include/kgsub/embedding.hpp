#ifndef KGSUB_EMBEDDING_HPP
#define KGSUB_EMBEDDING_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "kgsub/graph_store.hpp"

/**
 * @file embedding.hpp
 * @brief Translation-based entity/relation embeddings.
 *
 * Triples are scored as s(h, r, t) = -||h + r - t||_2 and trained with the
 * margin ranking loss max(0, margin + s(h', r, t') - s(h, r, t)) against
 * corrupted triples, one corruption of head or tail per negative.
 */

namespace kgsub {

struct TrainConfig {
    std::uint32_t dim = 100;
    std::uint32_t epochs = 30;
    /// Base step size; each parameter is scaled by its accumulated squared gradient (Adagrad).
    double learning_rate = 0.1;
    double margin = 1.0;
    std::uint32_t negatives = 10;
    std::uint32_t batch_size = 1000;
    std::uint64_t seed = 0;
    /// 1 = deterministic; >1 = lock-free data-parallel updates (lost updates tolerated).
    std::uint32_t workers = 1;
    /// Project entity vectors back onto the unit sphere after every update.
    bool unit_norm_entities = false;
    /// Resample corruptions that happen to be training triples.
    bool strict_negatives = false;

    /// Throws ConfigError on an invalid combination.
    void validate() const;
};

/// Dense float vectors for every entity and relation id, stored by id.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(std::uint32_t dim, std::size_t entity_count, std::size_t relation_count);

    std::uint32_t dim() const { return dim_; }
    std::size_t entity_count() const { return entity_count_; }
    std::size_t relation_count() const { return relation_count_; }

    std::span<const float> entity(std::uint32_t id) const;
    std::span<float> entity(std::uint32_t id);
    std::span<const float> relation(std::uint32_t id) const;
    std::span<float> relation(std::uint32_t id);

    std::span<const float> entity_data() const { return entities_; }
    std::span<float> entity_data() { return entities_; }
    std::span<const float> relation_data() const { return relations_; }
    std::span<float> relation_data() { return relations_; }

    bool all_finite() const;

    bool operator==(const EmbeddingTable&) const = default;

private:
    std::uint32_t dim_ = 0;
    std::size_t entity_count_ = 0;
    std::size_t relation_count_ = 0;
    std::vector<float> entities_;
    std::vector<float> relations_;
};

/// The seeded initialization used by train_embeddings: uniform in [-0.5/q, 0.5/q].
EmbeddingTable initial_table(std::size_t entity_count, std::size_t relation_count, const TrainConfig& config);

struct TrainResult {
    EmbeddingTable table;
    /// Mean hinge loss over all (positive, negative) pairs, one entry per epoch.
    std::vector<double> epoch_loss;
};

/// Optional per-epoch callback (epoch index, epoch-average loss).
using EpochCallback = std::function<void(std::uint32_t, double)>;

TrainResult train_embeddings(const GraphSample& train, const TrainConfig& config, const EpochCallback& on_epoch = {});

/// -||h + r - t||_2. Throws LookupError on an out-of-range id.
double score_triple(const EmbeddingTable& table, std::uint32_t head, std::uint32_t relation, std::uint32_t tail);

struct RankMetrics {
    double mrr = 0;
    double hits_at_10 = 0;
    std::size_t evaluated = 0;
};

/**
 * Tail-ranking sanity check: each test triple competes against
 * `corruptions_per_triple` uniformly drawn wrong tails. The rank is one plus
 * the number of corruptions scoring strictly higher.
 */
RankMetrics rank_eval(const EmbeddingTable& table,
                      std::span<const IndexedTriple> test,
                      std::size_t corruptions_per_triple,
                      std::uint64_t seed);

/// Binary format: "KGSE", u32 version, u32 dim, u64 entities, u64 relations, then LE f32 data.
void save_table(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable load_table(const std::filesystem::path& path, std::optional<std::uint32_t> expected_dim = std::nullopt);

void write_table(std::ostream& out, const EmbeddingTable& table);
EmbeddingTable read_table(std::istream& in, std::optional<std::uint32_t> expected_dim = std::nullopt);

/// One line per vector: kind, id, uri, then the components.
void export_tsv(std::ostream& out, const EmbeddingTable& table, const Dictionary& entities, const Dictionary& relations);

}

#endif
