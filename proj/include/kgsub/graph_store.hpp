#ifndef KGSUB_GRAPH_STORE_HPP
#define KGSUB_GRAPH_STORE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

/**
 * @file graph_store.hpp
 * @brief Parsing, filtering, sampling, splitting and summarizing triples.
 */

namespace kgsub {

/// One (head, relation, tail) assertion. `meta` is kept verbatim.
struct TripleRecord {
    std::string head;
    std::string relation;
    std::string tail;
    std::string meta;

    bool operator==(const TripleRecord&) const = default;
};

enum class InputFormat {
    /// 5 tab-separated columns: assertion URI, relation, start, end, metadata.
    ConceptNetDump,
    /// 3 tab-separated columns: head, relation, tail.
    GenericTsv,
};

InputFormat parse_format_name(std::string_view name);
std::string_view format_name(InputFormat format);

struct ParseOptions {
    InputFormat format = InputFormat::ConceptNetDump;
    /// Count and skip malformed lines instead of throwing.
    bool skip_bad_lines = false;
};

struct ParseResult {
    std::vector<TripleRecord> triples;
    std::size_t skipped_lines = 0;
};

/**
 * Parse a line-oriented triple stream. Records come out in input order.
 * Throws ParseError (with the 1-based line number) on a wrong column count,
 * an empty head/relation/tail, or a dump relation lacking the `/r/` prefix,
 * unless `skip_bad_lines` is set.
 */
ParseResult parse_assertions(std::istream& in, const ParseOptions& options);

std::vector<TripleRecord> parse_assertions(std::istream& in, InputFormat format);

/// ConceptNet assertion URI for a record, e.g. `/a/[/r/Antonym/,/c/en/appear/,/c/en/hide/]`.
std::string assertion_uri(const TripleRecord& triple);

/// Inverse of parse_assertions for the given format.
void write_assertions(std::ostream& out, std::span<const TripleRecord> triples, InputFormat format);

struct FilterResult {
    std::vector<TripleRecord> triples;
    /// Set when `keep` named a relation that never occurs after dropping.
    bool keep_relation_missing = false;
};

/// Drop the listed relations, then optionally keep only one. Order is preserved.
FilterResult filter_relations(std::span<const TripleRecord> triples,
                              const std::set<std::string>& drop,
                              const std::optional<std::string>& keep = std::nullopt);

/**
 * Uniform sample without replacement of min(n, |triples|) records in one
 * streaming pass (reservoir sampling). The sample is returned in input order.
 */
std::vector<TripleRecord> sample_triples(std::span<const TripleRecord> triples, std::size_t n, std::uint64_t seed);

/// Keep records whose assertion URI is listed in `ids`, in input order.
std::vector<TripleRecord> select_by_assertion(std::span<const TripleRecord> triples,
                                              const std::unordered_set<std::string>& ids);

struct SplitRatios {
    double train = 0.75;
    double valid = 0.125;
    double test = 0.125;
};

struct SplitResult {
    std::vector<TripleRecord> train;
    std::vector<TripleRecord> valid;
    std::vector<TripleRecord> test;
};

/**
 * Seeded random partition. Valid and test receive floor(ratio * n) records,
 * train takes the rest. Each part keeps input order.
 */
SplitResult split(std::span<const TripleRecord> triples, const SplitRatios& ratios, std::uint64_t seed);

/// Bijection between URIs and dense ids in first-appearance order.
class Dictionary {
public:
    std::uint32_t intern(std::string_view uri);
    std::optional<std::uint32_t> find(std::string_view uri) const;
    const std::string& uri(std::uint32_t id) const { return uris_.at(id); }
    std::size_t size() const { return uris_.size(); }
    std::span<const std::string> uris() const { return uris_; }

private:
    std::vector<std::string> uris_;
    std::unordered_map<std::string, std::uint32_t> ids_;
};

struct IndexedTriple {
    std::uint32_t head;
    std::uint32_t relation;
    std::uint32_t tail;

    bool operator==(const IndexedTriple&) const = default;
};

/// Ordered triple collection with entity and relation dictionaries.
class GraphSample {
public:
    GraphSample() = default;
    explicit GraphSample(std::vector<TripleRecord> triples);

    std::span<const TripleRecord> triples() const { return triples_; }
    std::span<const IndexedTriple> indexed() const { return indexed_; }
    const Dictionary& entities() const { return entities_; }
    const Dictionary& relations() const { return relations_; }
    std::size_t size() const { return triples_.size(); }
    bool empty() const { return triples_.empty(); }

    /// Positions (into triples()) of every triple with the given relation, in order.
    std::vector<std::size_t> relation_members(std::uint32_t relation) const;

    /// Writes triples.tsv, entities.tsv and relations.tsv into `dir`.
    void save(const std::filesystem::path& dir) const;
    static GraphSample load(const std::filesystem::path& dir);

private:
    std::vector<TripleRecord> triples_;
    std::vector<IndexedTriple> indexed_;
    Dictionary entities_;
    Dictionary relations_;
};

struct RelationCounts {
    std::size_t num_triples = 0;
    std::size_t num_entities = 0;

    bool operator==(const RelationCounts&) const = default;
};

struct GraphStats {
    std::size_t num_triples = 0;
    std::size_t num_entities = 0;
    std::size_t num_head_entities = 0;
    std::size_t num_tail_entities = 0;
    std::size_t head_tail_overlap = 0;
    std::map<std::string, RelationCounts> per_relation;

    nlohmann::json to_json() const;
};

GraphStats compute_stats(std::span<const TripleRecord> triples);

}

#endif
