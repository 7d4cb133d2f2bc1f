#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "kgsub/error.hpp"
#include "kgsub/graph_store.hpp"
#include "kgsub/random.hpp"
#include "oracles.hpp"

using namespace kgsub;
namespace fs = std::filesystem;

namespace {

const std::string fixture = std::string(KGSUB_TEST_DATA) + "/conceptnet_1k.tsv";

std::vector<TripleRecord> table1() {
    return {
        {"/c/en/appear", "/r/Antonym", "/c/en/hide", "{}"},
        {"/c/en/apparent/a", "/r/Antonym", "/c/en/inapparent", "{}"},
        {"/c/en/jury", "/r/CapableOf", "/c/en/state_verdict", "{}"},
        {"/c/en/accriminate", "/r/DerivedFrom", "/c/en/criminate/v", "{}"},
        {"/c/en/mutton_ham/n", "/r/RelatedTo", "/c/en/salt", "{}"},
    };
}

std::vector<TripleRecord> numbered(std::size_t n) {
    std::vector<TripleRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({"/c/en/h" + std::to_string(i), "/r/RelatedTo", "/c/en/t" + std::to_string(i % 37), ""});
    }
    return out;
}

std::vector<TripleRecord> load_fixture() {
    std::ifstream in(fixture);
    REQUIRE(in);
    return parse_assertions(in, InputFormat::ConceptNetDump);
}

}

TEST_CASE("dump line parses into a record") {
    std::istringstream in("/a/[/r/Antonym/,/c/en/appear/,/c/en/hide/]\t/r/Antonym\t/c/en/appear\t/c/en/hide\t{}\n");
    const auto rows = parse_assertions(in, InputFormat::ConceptNetDump);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0] == TripleRecord{"/c/en/appear", "/r/Antonym", "/c/en/hide", "{}"});
    CHECK(assertion_uri(rows[0]) == "/a/[/r/Antonym/,/c/en/appear/,/c/en/hide/]");
}

TEST_CASE("empty stream gives no records") {
    std::istringstream in("");
    CHECK(parse_assertions(in, InputFormat::ConceptNetDump).empty());
    std::istringstream in2("");
    CHECK(parse_assertions(in2, InputFormat::GenericTsv).empty());
}

TEST_CASE("1k fixture matches the naive split oracle") {
    const auto rows = load_fixture();
    const auto expected = oracle::split_dump_file(fixture);
    REQUIRE(rows.size() == 1000);
    REQUIRE(expected.size() == 1000);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].head == expected[i].head);
        CHECK(rows[i].relation == expected[i].relation);
        CHECK(rows[i].tail == expected[i].tail);
        CHECK(rows[i].meta == expected[i].meta);
    }
}

TEST_CASE("malformed lines") {
    SUBCASE("wrong column count carries the line number") {
        std::istringstream in("a\t/r/X\tb\tc\t{}\nonly\ttwo\n");
        try {
            parse_assertions(in, InputFormat::ConceptNetDump);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
        }
    }
    SUBCASE("empty head") {
        std::istringstream in("h\t/r/X\t\tt\n");
        CHECK_THROWS_AS(parse_assertions(in, InputFormat::ConceptNetDump), ParseError);
    }
    SUBCASE("relation without /r/ prefix") {
        std::istringstream in("a\tIsA\th\tt\t{}\n");
        CHECK_THROWS_AS(parse_assertions(in, InputFormat::ConceptNetDump), ParseError);
    }
    SUBCASE("generic tsv accepts arbitrary labels") {
        std::istringstream in("h\tlikes\tt\n");
        const auto rows = parse_assertions(in, InputFormat::GenericTsv);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].relation == "likes");
    }
    SUBCASE("skip mode counts") {
        std::istringstream in("a\t/r/X\th\tt\t{}\nbroken\n\nb\t/r/Y\th\tt\t{}\n");
        const auto result = parse_assertions(in, {InputFormat::ConceptNetDump, true});
        CHECK(result.triples.size() == 2);
        CHECK(result.skipped_lines == 2);
    }
}

TEST_CASE("parse and serialize round-trip") {
    const auto rows = load_fixture();
    for (auto format : {InputFormat::ConceptNetDump, InputFormat::GenericTsv}) {
        std::ostringstream out;
        write_assertions(out, rows, format);
        std::istringstream in(out.str());
        const auto back = parse_assertions(in, format);
        REQUIRE(back.size() == rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(back[i].head == rows[i].head);
            CHECK(back[i].relation == rows[i].relation);
            CHECK(back[i].tail == rows[i].tail);
        }
    }
}

TEST_CASE("filter relations") {
    const auto t = table1();
    const auto kept = filter_relations(t, {}, "/r/Antonym");
    REQUIRE(kept.triples.size() == 2);
    CHECK(kept.triples[0] == t[0]);
    CHECK(kept.triples[1] == t[1]);
    CHECK_FALSE(kept.keep_relation_missing);

    CHECK(filter_relations(t, {}).triples == t);

    const auto missing = filter_relations(t, {}, "/r/HasContext");
    CHECK(missing.triples.empty());
    CHECK(missing.keep_relation_missing);

    const auto rows = load_fixture();
    std::size_t oracle_count = 0;
    for (const auto& r : oracle::split_dump_file(fixture)) {
        oracle_count += r.relation != "/r/ExternalURL" ? 1 : 0;
    }
    CHECK(filter_relations(rows, {"/r/ExternalURL"}).triples.size() == oracle_count);
    CHECK(oracle_count == 950);
}

TEST_CASE("sampling") {
    const auto pool = numbered(1000);
    CHECK(sample_triples(pool, 0, 1).empty());
    CHECK(sample_triples(pool, 1000, 1) == pool);
    CHECK(sample_triples(pool, 5000, 1) == pool);

    const auto a = sample_triples(pool, 100, 42);
    CHECK(a.size() == 100);
    CHECK(a == sample_triples(pool, 100, 42));
    CHECK(a != sample_triples(pool, 100, 43));

    std::set<std::string> heads;
    for (const auto& t : a) {
        heads.insert(t.head);
    }
    CHECK(heads.size() == 100);
    CHECK(std::is_sorted(a.begin(), a.end(), [](const TripleRecord& x, const TripleRecord& y) {
        return std::stoi(x.head.substr(7)) < std::stoi(y.head.substr(7));
    }));
}

TEST_CASE("sampling frequencies are uniform within binomial bounds") {
    const auto pool = numbered(1000);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        index[pool[i].head] = i;
    }
    const std::size_t runs = 10000;
    std::vector<double> count(pool.size(), 0);
    for (std::size_t r = 0; r < runs; ++r) {
        for (const auto& t : sample_triples(pool, 100, derive_seed(7, r))) {
            count[index[t.head]] += 1;
        }
    }
    const double p = 0.1;
    const double mean = static_cast<double>(runs) * p;
    const double sigma = std::sqrt(static_cast<double>(runs) * p * (1 - p));
    std::size_t outside3 = 0;
    std::size_t outside5 = 0;
    for (double c : count) {
        outside3 += std::abs(c - mean) > 3 * sigma ? 1 : 0;
        outside5 += std::abs(c - mean) > 5 * sigma ? 1 : 0;
    }
    // 3 sigma is exceeded by ~0.27% of elements under uniformity
    CHECK(outside3 <= 10);
    CHECK(outside5 == 0);
}

TEST_CASE("split sizes and partition") {
    const auto eight = numbered(8);
    const auto s = split(eight, {}, 3);
    CHECK(s.train.size() == 6);
    CHECK(s.valid.size() == 1);
    CHECK(s.test.size() == 1);

    const double n = 4'000'000;
    CHECK(static_cast<std::size_t>(std::floor(0.125 * n)) == 500'000);
    CHECK(static_cast<std::size_t>(n) - 2 * 500'000 == 3'000'000);

    CHECK_THROWS_AS(split(numbered(2), {}, 1), ParameterError);
    CHECK_THROWS_AS(split(eight, {0.5, 0.5, 0.5}, 1), ParameterError);

    const auto big = numbered(1003);
    const auto p = split(big, {}, 11);
    CHECK(p.valid.size() == 125);
    CHECK(p.test.size() == 125);
    CHECK(p.train.size() == 753);
    std::multiset<std::string> all;
    std::set<std::string> parts;
    for (const auto* part : {&p.train, &p.valid, &p.test}) {
        for (const auto& t : *part) {
            all.insert(t.head);
            parts.insert(t.head);
        }
    }
    std::multiset<std::string> input;
    for (const auto& t : big) {
        input.insert(t.head);
    }
    CHECK(all == input);
    CHECK(parts.size() == all.size());
    CHECK(split(big, {}, 11).train == p.train);
}

TEST_CASE("stats on the Table-1 rows") {
    const auto st = compute_stats(table1());
    CHECK(st.num_triples == 5);
    CHECK(st.num_head_entities == 5);
    CHECK(st.num_tail_entities == 5);
    CHECK(st.head_tail_overlap == 0);
    CHECK(st.num_entities == 10);
    CHECK(st.per_relation.size() == 4);
    CHECK(st.per_relation.at("/r/Antonym").num_triples == 2);
    CHECK(st.per_relation.at("/r/Antonym").num_entities == 4);

    const auto empty = compute_stats({});
    CHECK(empty.num_triples == 0);
    CHECK(empty.num_entities == 0);
    CHECK(empty.per_relation.empty());
}

TEST_CASE("stats invariants on the fixture") {
    const auto rows = load_fixture();
    const auto st = compute_stats(rows);
    std::set<std::string> h, t, all;
    for (const auto& r : rows) {
        h.insert(r.head);
        t.insert(r.tail);
        all.insert(r.head);
        all.insert(r.tail);
    }
    CHECK(st.num_head_entities == h.size());
    CHECK(st.num_tail_entities == t.size());
    CHECK(st.num_entities == all.size());
    CHECK(st.num_head_entities + st.num_tail_entities - st.head_tail_overlap == st.num_entities);
    std::size_t sum = 0;
    for (const auto& [rel, c] : st.per_relation) {
        sum += c.num_triples;
    }
    CHECK(sum == st.num_triples);
}

TEST_CASE("graph sample dictionaries and reload") {
    const GraphSample g(load_fixture());
    std::set<std::string> uris;
    for (const auto& t : g.triples()) {
        uris.insert(t.head);
        uris.insert(t.tail);
    }
    CHECK(g.entities().size() == uris.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(g.entities().uri(g.indexed()[i].head) == g.triples()[i].head);
        CHECK(g.relations().uri(g.indexed()[i].relation) == g.triples()[i].relation);
    }
    CHECK(g.entities().uri(0) == g.triples()[0].head);

    const auto dir = fs::temp_directory_path() / "kgsub_sample_reload";
    fs::remove_all(dir);
    g.save(dir);
    const auto back = GraphSample::load(dir);
    CHECK(std::equal(back.triples().begin(), back.triples().end(), g.triples().begin(), g.triples().end()));
    CHECK(std::equal(back.indexed().begin(), back.indexed().end(), g.indexed().begin(), g.indexed().end()));
    fs::remove_all(dir);
}

TEST_CASE("select by assertion id") {
    const auto t = table1();
    const auto picked = select_by_assertion(t, {assertion_uri(t[4]), assertion_uri(t[1]), "/a/[nothing]"});
    REQUIRE(picked.size() == 2);
    CHECK(picked[0] == t[1]);
    CHECK(picked[1] == t[4]);
}
