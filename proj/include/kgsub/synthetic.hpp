#ifndef KGSUB_SYNTHETIC_HPP
#define KGSUB_SYNTHETIC_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgsub/graph_store.hpp"

/**
 * @file synthetic.hpp
 * @brief Graphs with known sub-relations hidden under one relation label.
 *
 * Sub-relation i links head pool i to tail pool i. Entity URIs encode their
 * pool: /c/synth/h<i>/<n> and /c/synth/t<i>/<n>.
 */

namespace kgsub {

/// Planted label of a noise triple (head pool and tail pool disagree).
inline constexpr std::int64_t noise_label = -1;
/// Label of an anchor triple (second relation, see SyntheticSpec::anchor_links).
inline constexpr std::int64_t anchor_label = -2;

struct SyntheticSpec {
    std::size_t sub_relations = 3;
    std::size_t triples_per_sub_relation = 300;
    std::size_t head_pool_size = 300;
    std::size_t tail_pool_size = 300;
    /// Fraction of triples whose tail is drawn from a different sub-relation's pool.
    double noise_rate = 0;
    /**
     * Extra triples per pool entity under `anchor_relation`: every head links
     * to a shared head anchor, every tail of pool i to an anchor of pool i.
     * This gives the embedding a second relation from which pool membership
     * is learnable. 0 disables them.
     */
    std::size_t anchor_links = 0;
    std::string relation = "/r/HasContext";
    std::string anchor_relation = "/r/IsA";

    /// Throws ParameterError on an impossible combination.
    void validate() const;
};

struct SyntheticGraph {
    /// Surface triples first (shuffled), then anchor triples.
    std::vector<TripleRecord> triples;
    /// Per triple: planted sub-relation, noise_label or anchor_label.
    std::vector<std::int64_t> labels;
};

SyntheticGraph generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// Pool index encoded in a synthetic entity URI, e.g. 2 for /c/synth/t2/17.
std::optional<std::size_t> synthetic_pool(std::string_view uri);

}

#endif
