#include "kgsub/graph_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "kgsub/error.hpp"
#include "kgsub/io.hpp"
#include "kgsub/random.hpp"

namespace kgsub {

namespace {

constexpr std::string_view relation_prefix = "/r/";

bool contains_separator(std::string_view s) {
    return s.find_first_of("\t\n") != std::string_view::npos;
}

void check_writable(const TripleRecord& t) {
    if (contains_separator(t.head) || contains_separator(t.relation) || contains_separator(t.tail) ||
        contains_separator(t.meta)) {
        throw DataError("triple field contains a tab or newline: " + t.head + " " + t.relation + " " + t.tail);
    }
}

std::string with_trailing_slash(std::string_view uri) {
    std::string out(uri);
    if (out.empty() || out.back() != '/') {
        out.push_back('/');
    }
    return out;
}

}

InputFormat parse_format_name(std::string_view name) {
    if (name == "conceptnet-dump" || name == "conceptnet") {
        return InputFormat::ConceptNetDump;
    }
    if (name == "generic-tsv" || name == "tsv") {
        return InputFormat::GenericTsv;
    }
    throw ConfigError("unknown input format '" + std::string(name) + "' (expected conceptnet-dump or generic-tsv)");
}

std::string_view format_name(InputFormat format) {
    return format == InputFormat::ConceptNetDump ? "conceptnet-dump" : "generic-tsv";
}

ParseResult parse_assertions(std::istream& in, const ParseOptions& options) {
    const bool dump = options.format == InputFormat::ConceptNetDump;
    const std::size_t expected_columns = dump ? 5 : 3;

    ParseResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = io::split(line, '\t');

        std::string problem;
        if (fields.size() != expected_columns) {
            problem = "expected " + std::to_string(expected_columns) + " tab-separated columns, found " +
                      std::to_string(fields.size());
        } else {
            const auto relation = fields[1];
            const auto head = dump ? fields[2] : fields[0];
            const auto tail = dump ? fields[3] : fields[2];
            if (head.empty() || relation.empty() || tail.empty()) {
                problem = "empty head, relation or tail column";
            } else if (dump && !relation.starts_with(relation_prefix)) {
                problem = "relation '" + std::string(relation) + "' does not start with /r/";
            } else {
                result.triples.push_back(TripleRecord{
                    std::string(head), std::string(relation), std::string(tail),
                    dump ? std::string(fields[4]) : std::string()});
                continue;
            }
        }

        if (!options.skip_bad_lines) {
            throw ParseError(line_no, problem);
        }
        ++result.skipped_lines;
    }
    return result;
}

std::vector<TripleRecord> parse_assertions(std::istream& in, InputFormat format) {
    return parse_assertions(in, ParseOptions{format, false}).triples;
}

std::string assertion_uri(const TripleRecord& triple) {
    return "/a/[" + with_trailing_slash(triple.relation) + "," + with_trailing_slash(triple.head) + "," +
           with_trailing_slash(triple.tail) + "]";
}

void write_assertions(std::ostream& out, std::span<const TripleRecord> triples, InputFormat format) {
    for (const auto& t : triples) {
        check_writable(t);
        if (format == InputFormat::ConceptNetDump) {
            out << assertion_uri(t) << '\t' << t.relation << '\t' << t.head << '\t' << t.tail << '\t' << t.meta
                << '\n';
        } else {
            out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
        }
    }
}

FilterResult filter_relations(std::span<const TripleRecord> triples,
                              const std::set<std::string>& drop,
                              const std::optional<std::string>& keep) {
    FilterResult result;
    for (const auto& t : triples) {
        if (drop.contains(t.relation)) {
            continue;
        }
        if (keep && t.relation != *keep) {
            continue;
        }
        result.triples.push_back(t);
    }
    result.keep_relation_missing = keep.has_value() && result.triples.empty();
    return result;
}

std::vector<TripleRecord> sample_triples(std::span<const TripleRecord> triples, std::size_t n, std::uint64_t seed) {
    if (n >= triples.size()) {
        return {triples.begin(), triples.end()};
    }
    if (n == 0) {
        return {};
    }

    // Algorithm R over positions; sorting the reservoir restores input order.
    Rng rng(seed);
    std::vector<std::size_t> reservoir(n);
    std::iota(reservoir.begin(), reservoir.end(), std::size_t{0});
    for (std::size_t i = n; i < triples.size(); ++i) {
        const auto j = rng.index(i + 1);
        if (j < n) {
            reservoir[j] = i;
        }
    }
    std::sort(reservoir.begin(), reservoir.end());

    std::vector<TripleRecord> out;
    out.reserve(n);
    for (auto i : reservoir) {
        out.push_back(triples[i]);
    }
    return out;
}

std::vector<TripleRecord> select_by_assertion(std::span<const TripleRecord> triples,
                                              const std::unordered_set<std::string>& ids) {
    std::vector<TripleRecord> out;
    for (const auto& t : triples) {
        if (ids.contains(assertion_uri(t))) {
            out.push_back(t);
        }
    }
    return out;
}

SplitResult split(std::span<const TripleRecord> triples, const SplitRatios& ratios, std::uint64_t seed) {
    if (!(ratios.train > 0 && ratios.valid > 0 && ratios.test > 0) ||
        std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9) {
        throw ParameterError("split ratios must be positive and sum to 1");
    }
    const std::size_t n = triples.size();
    if (n < 3) {
        throw ParameterError("need at least 3 triples to populate train/valid/test, got " + std::to_string(n));
    }

    // The small epsilon keeps e.g. 0.125 * 8 from flooring to 0 after rounding noise.
    const auto part = [n](double ratio) {
        return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
    };
    const std::size_t n_valid = part(ratios.valid);
    const std::size_t n_test = part(ratios.test);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());

    // 0 = train, 1 = valid, 2 = test
    std::vector<unsigned char> bucket(n, 0);
    for (std::size_t i = 0; i < n_valid; ++i) {
        bucket[order[i]] = 1;
    }
    for (std::size_t i = n_valid; i < n_valid + n_test; ++i) {
        bucket[order[i]] = 2;
    }

    SplitResult result;
    for (std::size_t i = 0; i < n; ++i) {
        auto& dest = bucket[i] == 0 ? result.train : (bucket[i] == 1 ? result.valid : result.test);
        dest.push_back(triples[i]);
    }
    return result;
}

std::uint32_t Dictionary::intern(std::string_view uri) {
    auto it = ids_.find(std::string(uri));
    if (it != ids_.end()) {
        return it->second;
    }
    const auto id = static_cast<std::uint32_t>(uris_.size());
    uris_.emplace_back(uri);
    ids_.emplace(uris_.back(), id);
    return id;
}

std::optional<std::uint32_t> Dictionary::find(std::string_view uri) const {
    auto it = ids_.find(std::string(uri));
    if (it == ids_.end()) {
        return std::nullopt;
    }
    return it->second;
}

GraphSample::GraphSample(std::vector<TripleRecord> triples) : triples_(std::move(triples)) {
    indexed_.reserve(triples_.size());
    for (const auto& t : triples_) {
        const auto h = entities_.intern(t.head);
        const auto r = relations_.intern(t.relation);
        const auto tl = entities_.intern(t.tail);
        indexed_.push_back({h, r, tl});
    }
}

std::vector<std::size_t> GraphSample::relation_members(std::uint32_t relation) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < indexed_.size(); ++i) {
        if (indexed_[i].relation == relation) {
            out.push_back(i);
        }
    }
    return out;
}

namespace {

void write_dictionary(const std::filesystem::path& path, const Dictionary& dict) {
    io::write_atomic(path, [&](std::ostream& out) {
        for (std::size_t i = 0; i < dict.size(); ++i) {
            out << i << '\t' << dict.uri(static_cast<std::uint32_t>(i)) << '\n';
        }
    });
}

void check_dictionary(const std::filesystem::path& path, const Dictionary& expected) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("missing " + path.string());
    }
    std::string line;
    std::size_t count = 0;
    while (std::getline(in, line)) {
        const auto fields = io::split(line, '\t');
        if (fields.size() != 2 || fields[0] != std::to_string(count) || count >= expected.size() ||
            fields[1] != expected.uri(static_cast<std::uint32_t>(count))) {
            throw FormatError(path.string() + ": entry " + std::to_string(count) +
                              " disagrees with the triple file");
        }
        ++count;
    }
    if (count != expected.size()) {
        throw FormatError(path.string() + ": expected " + std::to_string(expected.size()) + " entries, found " +
                          std::to_string(count));
    }
}

}

void GraphSample::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    io::write_atomic(dir / "triples.tsv", [&](std::ostream& out) {
        for (const auto& t : triples_) {
            check_writable(t);
            out << t.head << '\t' << t.relation << '\t' << t.tail << '\t' << t.meta << '\n';
        }
    });
    write_dictionary(dir / "entities.tsv", entities_);
    write_dictionary(dir / "relations.tsv", relations_);
}

GraphSample GraphSample::load(const std::filesystem::path& dir) {
    const auto path = dir / "triples.tsv";
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("missing " + path.string());
    }
    std::vector<TripleRecord> triples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = io::split(line, '\t');
        if (fields.size() != 4 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
            throw ParseError(line_no, path.string() + ": expected head, relation, tail, meta");
        }
        triples.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2]),
                           std::string(fields[3])});
    }
    GraphSample sample(std::move(triples));
    check_dictionary(dir / "entities.tsv", sample.entities_);
    check_dictionary(dir / "relations.tsv", sample.relations_);
    return sample;
}

GraphStats compute_stats(std::span<const TripleRecord> triples) {
    std::unordered_set<std::string_view> heads;
    std::unordered_set<std::string_view> tails;
    std::map<std::string, std::pair<std::size_t, std::unordered_set<std::string_view>>> relations;

    for (const auto& t : triples) {
        heads.insert(t.head);
        tails.insert(t.tail);
        auto& rel = relations[t.relation];
        ++rel.first;
        rel.second.insert(t.head);
        rel.second.insert(t.tail);
    }

    GraphStats stats;
    stats.num_triples = triples.size();
    stats.num_head_entities = heads.size();
    stats.num_tail_entities = tails.size();
    for (const auto& h : heads) {
        if (tails.contains(h)) {
            ++stats.head_tail_overlap;
        }
    }
    stats.num_entities = stats.num_head_entities + stats.num_tail_entities - stats.head_tail_overlap;
    for (const auto& [name, rel] : relations) {
        stats.per_relation[name] = RelationCounts{rel.first, rel.second.size()};
    }
    return stats;
}

nlohmann::json GraphStats::to_json() const {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [name, counts] : per_relation) {
        per[name] = {{"num_triples", counts.num_triples}, {"num_entities", counts.num_entities}};
    }
    return {
        {"num_triples", num_triples},
        {"num_entities", num_entities},
        {"num_head_entities", num_head_entities},
        {"num_tail_entities", num_tail_entities},
        {"head_tail_overlap", head_tail_overlap},
        {"per_relation", per},
    };
}

}
