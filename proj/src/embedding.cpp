#include "kgsub/embedding.hpp"

#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <thread>
#include <unordered_set>

#include "kgsub/error.hpp"
#include "kgsub/io.hpp"
#include "kgsub/random.hpp"

namespace kgsub {

void TrainConfig::validate() const {
    if (dim == 0) {
        throw ConfigError("embedding dimension must be >= 1");
    }
    if (!(margin > 0) || !std::isfinite(margin)) {
        throw ConfigError("margin must be > 0");
    }
    if (negatives == 0) {
        throw ConfigError("negatives per positive must be >= 1");
    }
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning rate must be > 0");
    }
    if (batch_size == 0) {
        throw ConfigError("batch size must be >= 1");
    }
    if (workers == 0) {
        throw ConfigError("worker count must be >= 1");
    }
}

EmbeddingTable::EmbeddingTable(std::uint32_t dim, std::size_t entity_count, std::size_t relation_count)
    : dim_(dim),
      entity_count_(entity_count),
      relation_count_(relation_count),
      entities_(entity_count * dim, 0.0f),
      relations_(relation_count * dim, 0.0f) {}

std::span<const float> EmbeddingTable::entity(std::uint32_t id) const {
    if (id >= entity_count_) {
        throw LookupError("entity id " + std::to_string(id) + " not in embedding table");
    }
    return {entities_.data() + static_cast<std::size_t>(id) * dim_, dim_};
}

std::span<float> EmbeddingTable::entity(std::uint32_t id) {
    if (id >= entity_count_) {
        throw LookupError("entity id " + std::to_string(id) + " not in embedding table");
    }
    return {entities_.data() + static_cast<std::size_t>(id) * dim_, dim_};
}

std::span<const float> EmbeddingTable::relation(std::uint32_t id) const {
    if (id >= relation_count_) {
        throw LookupError("relation id " + std::to_string(id) + " not in embedding table");
    }
    return {relations_.data() + static_cast<std::size_t>(id) * dim_, dim_};
}

std::span<float> EmbeddingTable::relation(std::uint32_t id) {
    if (id >= relation_count_) {
        throw LookupError("relation id " + std::to_string(id) + " not in embedding table");
    }
    return {relations_.data() + static_cast<std::size_t>(id) * dim_, dim_};
}

bool EmbeddingTable::all_finite() const {
    const auto finite = [](float x) { return std::isfinite(x); };
    return std::all_of(entities_.begin(), entities_.end(), finite) &&
           std::all_of(relations_.begin(), relations_.end(), finite);
}

namespace {

void normalize_in_place(std::span<float> v) {
    double norm = 0;
    for (float x : v) {
        norm += static_cast<double>(x) * x;
    }
    norm = std::sqrt(norm);
    if (norm > 0) {
        for (auto& x : v) {
            x = static_cast<float>(x / norm);
        }
    }
}

// Parameter access either plain (single worker) or through relaxed atomics
// (shared between Hogwild workers, where torn vectors are acceptable but
// data races on individual floats are not).
template <bool Shared>
struct Access {
    static float load(const float& x) {
        if constexpr (Shared) {
            return std::atomic_ref<const float>(x).load(std::memory_order_relaxed);
        } else {
            return x;
        }
    }
    static void store(float& x, float v) {
        if constexpr (Shared) {
            std::atomic_ref<float>(x).store(v, std::memory_order_relaxed);
        } else {
            x = v;
        }
    }
};

struct TrainingState {
    EmbeddingTable table;
    std::vector<float> entity_accum;
    std::vector<float> relation_accum;
};

struct TripleKeyHash {
    std::size_t operator()(const IndexedTriple& t) const {
        return static_cast<std::size_t>(
            mix64((static_cast<std::uint64_t>(t.head) << 32) ^ t.tail ^ (static_cast<std::uint64_t>(t.relation) << 48)));
    }
};

using TripleSet = std::unordered_set<IndexedTriple, TripleKeyHash>;

template <bool Shared>
class BatchWorker {
public:
    BatchWorker(TrainingState& state, const TrainConfig& config, const TripleSet* known)
        : state_(state), config_(config), known_(known), dim_(config.dim), dpos_(dim_), dneg_(dim_), grad_(4 * dim_) {}

    /// Returns the summed hinge loss over all pairs of the given positives.
    double run(std::span<const IndexedTriple> triples, std::span<const std::size_t> order, Rng& rng) {
        double total = 0;
        const auto n_entities = state_.table.entity_count();
        for (auto index : order) {
            const auto& pos = triples[index];
            for (std::uint32_t k = 0; k < config_.negatives; ++k) {
                IndexedTriple neg = pos;
                for (int attempt = 0; attempt < 16; ++attempt) {
                    neg = pos;
                    const auto replacement = static_cast<std::uint32_t>(rng.index(n_entities));
                    if (rng.coin()) {
                        neg.head = replacement;
                    } else {
                        neg.tail = replacement;
                    }
                    if (known_ == nullptr || !known_->contains(neg)) {
                        break;
                    }
                }
                total += step(pos, neg);
            }
        }
        return total;
    }

private:
    using A = Access<Shared>;

    double diff(const IndexedTriple& t, std::vector<double>& out) {
        const auto h = state_.table.entity(t.head);
        const auto r = state_.table.relation(t.relation);
        const auto tl = state_.table.entity(t.tail);
        double norm = 0;
        for (std::size_t i = 0; i < dim_; ++i) {
            out[i] = static_cast<double>(A::load(h[i])) + A::load(r[i]) - A::load(tl[i]);
            norm += out[i] * out[i];
        }
        return std::sqrt(norm);
    }

    double step(const IndexedTriple& pos, const IndexedTriple& neg) {
        const double pos_norm = diff(pos, dpos_);
        const double neg_norm = diff(neg, dneg_);
        const double loss = config_.margin + pos_norm - neg_norm;
        if (loss <= 0) {
            return 0;
        }

        // Gradient of ||x|| is x/||x||; a zero difference contributes nothing.
        const double pos_scale = pos_norm > 0 ? 1.0 / pos_norm : 0.0;
        const double neg_scale = neg_norm > 0 ? 1.0 / neg_norm : 0.0;

        // Collect entity gradients first so repeated entities get a single update.
        std::array<std::uint32_t, 4> ids{};
        std::size_t used = 0;
        const auto slot = [&](std::uint32_t id) {
            for (std::size_t s = 0; s < used; ++s) {
                if (ids[s] == id) {
                    return s;
                }
            }
            ids[used] = id;
            std::fill_n(grad_.begin() + static_cast<std::ptrdiff_t>(used * dim_), dim_, 0.0);
            return used++;
        };
        const auto add = [&](std::uint32_t id, const std::vector<double>& d, double scale) {
            const auto s = slot(id);
            for (std::size_t i = 0; i < dim_; ++i) {
                grad_[s * dim_ + i] += scale * d[i];
            }
        };
        add(pos.head, dpos_, pos_scale);
        add(pos.tail, dpos_, -pos_scale);
        add(neg.head, dneg_, -neg_scale);
        add(neg.tail, dneg_, neg_scale);

        for (std::size_t s = 0; s < used; ++s) {
            auto vec = state_.table.entity(ids[s]);
            float* accum = state_.entity_accum.data() + static_cast<std::size_t>(ids[s]) * dim_;
            apply(vec, accum, std::span<const double>(grad_).subspan(s * dim_, dim_));
            if (config_.unit_norm_entities) {
                project(vec);
            }
        }

        auto rel = state_.table.relation(pos.relation);
        float* rel_accum = state_.relation_accum.data() + static_cast<std::size_t>(pos.relation) * dim_;
        for (std::size_t i = 0; i < dim_; ++i) {
            grad_[i] = pos_scale * dpos_[i] - neg_scale * dneg_[i];
        }
        apply(rel, rel_accum, std::span<const double>(grad_).first(dim_));
        return loss;
    }

    void apply(std::span<float> params, float* accum, std::span<const double> grad) {
        for (std::size_t i = 0; i < dim_; ++i) {
            const double g = grad[i];
            if (g == 0) {
                continue;
            }
            const double acc = static_cast<double>(A::load(accum[i])) + g * g;
            A::store(accum[i], static_cast<float>(acc));
            const double updated = A::load(params[i]) - config_.learning_rate * g / std::sqrt(acc + 1e-10);
            A::store(params[i], static_cast<float>(updated));
        }
    }

    void project(std::span<float> vec) {
        double norm = 0;
        for (std::size_t i = 0; i < dim_; ++i) {
            const double x = A::load(vec[i]);
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (norm > 0) {
            for (std::size_t i = 0; i < dim_; ++i) {
                A::store(vec[i], static_cast<float>(A::load(vec[i]) / norm));
            }
        }
    }

    TrainingState& state_;
    const TrainConfig& config_;
    const TripleSet* known_;
    std::size_t dim_;
    std::vector<double> dpos_;
    std::vector<double> dneg_;
    std::vector<double> grad_;
};

}

EmbeddingTable initial_table(std::size_t entity_count, std::size_t relation_count, const TrainConfig& config) {
    config.validate();
    EmbeddingTable table(config.dim, entity_count, relation_count);
    Rng rng(derive_seed(config.seed, "init"));
    const double bound = 0.5 / config.dim;
    for (auto& x : table.entity_data()) {
        x = static_cast<float>(rng.uniform(-bound, bound));
    }
    for (auto& x : table.relation_data()) {
        x = static_cast<float>(rng.uniform(-bound, bound));
    }
    if (config.unit_norm_entities) {
        for (std::size_t e = 0; e < entity_count; ++e) {
            normalize_in_place(table.entity(static_cast<std::uint32_t>(e)));
        }
    }
    return table;
}

TrainResult train_embeddings(const GraphSample& train, const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (train.empty()) {
        throw DataError("cannot train embeddings on an empty sample");
    }
    const auto triples = train.indexed();
    const auto n_entities = train.entities().size();
    const auto n_relations = train.relations().size();
    for (const auto& t : triples) {
        if (t.head >= n_entities || t.tail >= n_entities || t.relation >= n_relations) {
            throw LookupError("internal consistency error: triple references an unindexed id");
        }
    }

    TrainingState state{initial_table(n_entities, n_relations, config),
                        std::vector<float>(n_entities * config.dim, 0.0f),
                        std::vector<float>(n_relations * config.dim, 0.0f)};

    TripleSet known;
    if (config.strict_negatives) {
        known.insert(triples.begin(), triples.end());
    }
    const TripleSet* known_ptr = config.strict_negatives ? &known : nullptr;

    std::vector<std::size_t> order(triples.size());
    const std::size_t batch = config.batch_size;
    const std::size_t n_batches = (order.size() + batch - 1) / batch;
    const double pairs = static_cast<double>(triples.size()) * config.negatives;

    TrainResult result;
    for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffler(derive_seed(config.seed, epoch, 0x5eedULL));
        shuffler.shuffle(order.begin(), order.end());

        const auto batch_span = [&](std::size_t b) {
            const auto begin = b * batch;
            return std::span<const std::size_t>(order).subspan(begin, std::min(batch, order.size() - begin));
        };

        double total = 0;
        if (config.workers == 1) {
            BatchWorker<false> worker(state, config, known_ptr);
            Rng rng(derive_seed(config.seed, epoch, 0));
            for (std::size_t b = 0; b < n_batches; ++b) {
                total += worker.run(triples, batch_span(b), rng);
            }
        } else {
            std::vector<double> partial(config.workers, 0.0);
            std::vector<std::jthread> threads;
            for (std::uint32_t w = 0; w < config.workers; ++w) {
                threads.emplace_back([&, w] {
                    BatchWorker<true> worker(state, config, known_ptr);
                    Rng rng(derive_seed(config.seed, epoch, w));
                    for (std::size_t b = w; b < n_batches; b += config.workers) {
                        partial[w] += worker.run(triples, batch_span(b), rng);
                    }
                });
            }
            threads.clear();
            total = std::accumulate(partial.begin(), partial.end(), 0.0);
        }

        const double mean = total / pairs;
        result.epoch_loss.push_back(mean);
        if (on_epoch) {
            on_epoch(epoch, mean);
        }
    }

    result.table = std::move(state.table);
    return result;
}

double score_triple(const EmbeddingTable& table, std::uint32_t head, std::uint32_t relation, std::uint32_t tail) {
    const auto h = table.entity(head);
    const auto r = table.relation(relation);
    const auto t = table.entity(tail);
    double sum = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double d = static_cast<double>(h[i]) + r[i] - t[i];
        sum += d * d;
    }
    return -std::sqrt(sum);
}

RankMetrics rank_eval(const EmbeddingTable& table,
                      std::span<const IndexedTriple> test,
                      std::size_t corruptions_per_triple,
                      std::uint64_t seed) {
    if (corruptions_per_triple == 0) {
        throw ParameterError("corruptions_per_triple must be >= 1");
    }
    if (test.empty()) {
        throw DataError("rank_eval needs at least one test triple");
    }
    if (table.entity_count() < 2) {
        throw DataError("rank_eval needs at least two entities to corrupt tails");
    }

    Rng rng(seed);
    RankMetrics metrics;
    double reciprocal = 0;
    std::size_t hits = 0;
    for (const auto& t : test) {
        const double truth = score_triple(table, t.head, t.relation, t.tail);
        std::size_t better = 0;
        for (std::size_t c = 0; c < corruptions_per_triple; ++c) {
            std::uint32_t candidate = t.tail;
            while (candidate == t.tail) {
                candidate = static_cast<std::uint32_t>(rng.index(table.entity_count()));
            }
            if (score_triple(table, t.head, t.relation, candidate) > truth) {
                ++better;
            }
        }
        const auto rank = better + 1;
        reciprocal += 1.0 / static_cast<double>(rank);
        hits += rank <= 10 ? 1 : 0;
    }
    metrics.evaluated = test.size();
    metrics.mrr = reciprocal / static_cast<double>(test.size());
    metrics.hits_at_10 = static_cast<double>(hits) / static_cast<double>(test.size());
    return metrics;
}

namespace {

constexpr std::array<char, 4> table_magic{'K', 'G', 'S', 'E'};
constexpr std::uint32_t table_version = 1;
constexpr std::size_t header_size = 4 + 4 + 4 + 8 + 8;

template <typename T>
void put_le(std::ostream& out, T value) {
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    }
    out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
    std::array<unsigned char, sizeof(T)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw FormatError("embedding file truncated in header");
    }
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<T>(bytes[i]) << (8 * i);
    }
    return value;
}

void put_floats(std::ostream& out, std::span<const float> values) {
    std::vector<char> buffer(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(values[i]);
        for (std::size_t b = 0; b < 4; ++b) {
            buffer[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
        }
    }
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
}

void get_floats(std::istream& in, std::span<float> values) {
    std::vector<unsigned char> buffer(values.size() * 4);
    in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
    if (in.gcount() != static_cast<std::streamsize>(buffer.size())) {
        throw FormatError("embedding file truncated: expected " + std::to_string(values.size()) + " floats");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits = 0;
        for (std::size_t b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(buffer[i * 4 + b]) << (8 * b);
        }
        values[i] = std::bit_cast<float>(bits);
    }
}

}

void write_table(std::ostream& out, const EmbeddingTable& table) {
    out.write(table_magic.data(), table_magic.size());
    put_le<std::uint32_t>(out, table_version);
    put_le<std::uint32_t>(out, table.dim());
    put_le<std::uint64_t>(out, table.entity_count());
    put_le<std::uint64_t>(out, table.relation_count());
    put_floats(out, table.entity_data());
    put_floats(out, table.relation_data());
}

EmbeddingTable read_table(std::istream& in, std::optional<std::uint32_t> expected_dim) {
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (in.gcount() != 4 || magic != table_magic) {
        throw FormatError("not an embedding table (bad magic)");
    }
    const auto version = get_le<std::uint32_t>(in);
    if (version != table_version) {
        throw FormatError("unsupported embedding table version " + std::to_string(version));
    }
    const auto dim = get_le<std::uint32_t>(in);
    const auto entities = get_le<std::uint64_t>(in);
    const auto relations = get_le<std::uint64_t>(in);
    if (dim == 0) {
        throw FormatError("embedding table has dimension 0");
    }
    if (expected_dim && *expected_dim != dim) {
        throw FormatError("embedding dimension mismatch: file has " + std::to_string(dim) + ", expected " +
                          std::to_string(*expected_dim));
    }
    constexpr std::uint64_t limit = std::uint64_t{1} << 40;
    if (entities > limit / dim || relations > limit / dim) {
        throw FormatError("embedding table header declares an implausible size");
    }

    EmbeddingTable table(dim, entities, relations);
    get_floats(in, table.entity_data());
    get_floats(in, table.relation_data());
    if (in.peek() != std::char_traits<char>::eof()) {
        throw FormatError("embedding file has trailing bytes");
    }
    return table;
}

void save_table(const EmbeddingTable& table, const std::filesystem::path& path) {
    io::write_atomic(path, [&](std::ostream& out) { write_table(out, table); });
}

EmbeddingTable load_table(const std::filesystem::path& path, std::optional<std::uint32_t> expected_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open embedding table " + path.string());
    }
    const auto size = std::filesystem::file_size(path);
    if (size < header_size) {
        throw FormatError("embedding file truncated in header");
    }
    return read_table(in, expected_dim);
}

void export_tsv(std::ostream& out, const EmbeddingTable& table, const Dictionary& entities, const Dictionary& relations) {
    if (entities.size() != table.entity_count() || relations.size() != table.relation_count()) {
        throw LookupError("dictionaries do not match the embedding table");
    }
    const auto emit = [&](std::string_view kind, std::size_t id, const std::string& uri, std::span<const float> v) {
        out << kind << '\t' << id << '\t' << uri;
        for (float x : v) {
            out << '\t' << io::format_double(static_cast<double>(x));
        }
        out << '\n';
    };
    for (std::size_t e = 0; e < table.entity_count(); ++e) {
        const auto id = static_cast<std::uint32_t>(e);
        emit("entity", e, entities.uri(id), table.entity(id));
    }
    for (std::size_t r = 0; r < table.relation_count(); ++r) {
        const auto id = static_cast<std::uint32_t>(r);
        emit("relation", r, relations.uri(id), table.relation(id));
    }
}

}
