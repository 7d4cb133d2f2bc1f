#include "kgsub/synthetic.hpp"

#include <charconv>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "kgsub/error.hpp"
#include "kgsub/random.hpp"

namespace kgsub {

namespace {

constexpr std::string_view entity_prefix = "/c/synth/";

std::string head_uri(std::size_t pool, std::size_t i) {
    return std::string(entity_prefix) + "h" + std::to_string(pool) + "/" + std::to_string(i);
}

std::string tail_uri(std::size_t pool, std::size_t i) {
    return std::string(entity_prefix) + "t" + std::to_string(pool) + "/" + std::to_string(i);
}

std::string label_meta(std::int64_t label) {
    return "{\"planted\":" + std::to_string(label) + "}";
}

}

void SyntheticSpec::validate() const {
    if (sub_relations == 0 || triples_per_sub_relation == 0 || head_pool_size == 0 || tail_pool_size == 0) {
        throw ParameterError("synthetic graph counts must be positive");
    }
    if (!(noise_rate >= 0 && noise_rate < 1)) {
        throw ParameterError("noise rate must lie in [0, 1)");
    }
    if (noise_rate > 0 && sub_relations < 2) {
        throw ParameterError("noise needs at least two sub-relations to mix pools");
    }
    if (triples_per_sub_relation > head_pool_size * tail_pool_size) {
        throw ParameterError("more triples per sub-relation than distinct head/tail pairs");
    }
    if (relation.empty() || (anchor_links > 0 && (anchor_relation.empty() || anchor_relation == relation))) {
        throw ParameterError("relation labels must be non-empty and distinct");
    }
}

SyntheticGraph generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(derive_seed(seed, "synthetic"));
    const std::size_t pairs = spec.head_pool_size * spec.tail_pool_size;

    SyntheticGraph graph;
    std::vector<std::size_t> pair_index(pairs);
    for (std::size_t s = 0; s < spec.sub_relations; ++s) {
        std::iota(pair_index.begin(), pair_index.end(), std::size_t{0});
        for (std::size_t i = 0; i < spec.triples_per_sub_relation; ++i) {
            const auto j = i + rng.index(pairs - i);
            std::swap(pair_index[i], pair_index[j]);

            if (spec.noise_rate > 0 && rng.uniform() < spec.noise_rate) {
                const auto other = (s + 1 + rng.index(spec.sub_relations - 1)) % spec.sub_relations;
                const auto h = rng.index(spec.head_pool_size);
                const auto t = rng.index(spec.tail_pool_size);
                graph.triples.push_back({head_uri(s, h), spec.relation, tail_uri(other, t), label_meta(noise_label)});
                graph.labels.push_back(noise_label);
            } else {
                const auto p = pair_index[i];
                const auto label = static_cast<std::int64_t>(s);
                graph.triples.push_back({head_uri(s, p / spec.tail_pool_size), spec.relation,
                                         tail_uri(s, p % spec.tail_pool_size), label_meta(label)});
                graph.labels.push_back(label);
            }
        }
    }

    std::vector<std::size_t> order(graph.triples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());
    SyntheticGraph shuffled;
    for (auto i : order) {
        shuffled.triples.push_back(std::move(graph.triples[i]));
        shuffled.labels.push_back(graph.labels[i]);
    }

    if (spec.anchor_links > 0) {
        const auto surface = shuffled.triples.size();
        std::unordered_set<std::string> seen;
        const auto link = [&](const std::string& uri, bool head) {
            if (!seen.insert(uri).second) {
                return;
            }
            const auto pool = *synthetic_pool(uri);
            for (std::size_t a = 0; a < spec.anchor_links; ++a) {
                const auto anchor = std::string(entity_prefix) + "anchor/" +
                                    (head ? std::string("head") : "t" + std::to_string(pool)) + "/" +
                                    std::to_string(a);
                shuffled.triples.push_back({uri, spec.anchor_relation, anchor, label_meta(anchor_label)});
                shuffled.labels.push_back(anchor_label);
            }
        };
        for (std::size_t i = 0; i < surface; ++i) {
            const auto head = shuffled.triples[i].head;
            const auto tail = shuffled.triples[i].tail;
            link(head, true);
            link(tail, false);
        }
    }
    return shuffled;
}

std::optional<std::size_t> synthetic_pool(std::string_view uri) {
    if (!uri.starts_with(entity_prefix)) {
        return std::nullopt;
    }
    uri.remove_prefix(entity_prefix.size());
    if (uri.empty() || (uri.front() != 'h' && uri.front() != 't')) {
        return std::nullopt;
    }
    uri.remove_prefix(1);
    std::size_t pool = 0;
    const auto [ptr, ec] = std::from_chars(uri.data(), uri.data() + uri.size(), pool);
    if (ec != std::errc() || ptr == uri.data() || ptr == uri.data() + uri.size() || *ptr != '/') {
        return std::nullopt;
    }
    return pool;
}

}
