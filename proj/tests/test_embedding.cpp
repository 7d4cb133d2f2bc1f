#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "kgsub/embedding.hpp"
#include "kgsub/error.hpp"
#include "kgsub/random.hpp"
#include "kgsub/synthetic.hpp"

using namespace kgsub;
namespace fs = std::filesystem;

namespace {

std::uint64_t fnv(std::span<const float> values) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (float f : values) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, &f, 4);
        for (int b = 0; b < 4; ++b) {
            h ^= (bits >> (8 * b)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

const GraphSample& planted() {
    static const GraphSample g(generate_synthetic(SyntheticSpec{}, 5).triples);
    return g;
}

TrainConfig planted_config() {
    TrainConfig c;
    c.dim = 16;
    c.epochs = 50;
    c.seed = 9;
    return c;
}

}

TEST_CASE("config validation") {
    TrainConfig c;
    c.dim = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.margin = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.negatives = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.epochs = 0;
    CHECK_NOTHROW(c.validate());
    c.dim = 0;
    CHECK_THROWS_AS(train_embeddings(planted(), c), ConfigError);
}

TEST_CASE("zero epochs returns the seeded initialization") {
    TrainConfig c = planted_config();
    c.epochs = 0;
    const auto r = train_embeddings(planted(), c);
    const auto init = initial_table(planted().entities().size(), planted().relations().size(), c);
    CHECK(r.table == init);
    CHECK(r.epoch_loss.empty());
    const float bound = 0.5f / static_cast<float>(c.dim);
    for (float v : init.entity_data()) {
        CHECK(std::abs(v) <= bound);
    }
    for (float v : init.relation_data()) {
        CHECK(std::abs(v) <= bound);
    }
}

TEST_CASE("table covers exactly the training dictionaries") {
    TrainConfig c = planted_config();
    c.epochs = 2;
    const auto r = train_embeddings(planted(), c);
    CHECK(r.table.entity_count() == planted().entities().size());
    CHECK(r.table.relation_count() == planted().relations().size());
    CHECK(r.table.dim() == 16);
    CHECK(r.table.all_finite());
}

TEST_CASE("score arithmetic") {
    EmbeddingTable t(2, 3, 1);
    auto h = t.entity(0);
    auto r = t.relation(0);
    h[0] = 1;
    r[1] = 1;
    CHECK(score_triple(t, 0, 0, 1) == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-12));

    auto e2 = t.entity(2);
    e2[0] = 1;
    e2[1] = 1;
    CHECK(score_triple(t, 0, 0, 2) == 0.0);

    const double before = score_triple(t, 0, 0, 1);
    for (auto id : {0u, 1u}) {
        t.entity(id)[0] += 3.5f;
        t.entity(id)[1] -= 1.25f;
    }
    CHECK(score_triple(t, 0, 0, 1) == doctest::Approx(before).epsilon(1e-6));

    CHECK_THROWS_AS(score_triple(t, 5, 0, 1), LookupError);
    CHECK_THROWS_AS(score_triple(t, 0, 3, 1), LookupError);
}

TEST_CASE("single-worker training is deterministic and the loss falls") {
    const auto a = train_embeddings(planted(), planted_config());
    const auto b = train_embeddings(planted(), planted_config());
    CHECK(a.table == b.table);
    CHECK(a.epoch_loss == b.epoch_loss);
    REQUIRE(a.epoch_loss.size() == 50);
    CHECK(a.epoch_loss.back() < 0.1 * a.epoch_loss.front());
    CHECK(a.table.all_finite());

    auto other = planted_config();
    other.seed = 10;
    CHECK_FALSE(train_embeddings(planted(), other).table == a.table);
}

TEST_CASE("multi-worker loss within 20% of single-worker") {
    auto cfg = planted_config();
    cfg.workers = 4;
    cfg.batch_size = 100;
    const auto multi = train_embeddings(planted(), cfg);
    auto single_small = planted_config();
    single_small.batch_size = 100;
    const auto reference = train_embeddings(planted(), single_small);
    CHECK(multi.table.all_finite());
    CHECK(std::abs(multi.epoch_loss.back() - reference.epoch_loss.back()) <= 0.2 * reference.epoch_loss.back() + 1e-9);
    CHECK(reference.epoch_loss.back() > 0);
}

TEST_CASE("strict negatives and unit norm options train") {
    auto cfg = planted_config();
    cfg.epochs = 5;
    cfg.strict_negatives = true;
    cfg.unit_norm_entities = true;
    const auto r = train_embeddings(planted(), cfg);
    for (std::uint32_t e = 0; e < r.table.entity_count(); ++e) {
        double s = 0;
        for (float v : r.table.entity(e)) {
            s += static_cast<double>(v) * v;
        }
        CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("rank eval") {
    SUBCASE("perfect table") {
        // entity i at (i, 0); relation shifts by +1 in y; true tails satisfy h + r = t exactly
        EmbeddingTable t(2, 20, 1);
        for (std::uint32_t i = 0; i < 20; ++i) {
            t.entity(i)[0] = static_cast<float>(i);
        }
        std::vector<IndexedTriple> test;
        for (std::uint32_t i = 0; i < 10; ++i) {
            t.entity(10 + i)[0] = static_cast<float>(i);
            t.entity(10 + i)[1] = 1;
            test.push_back({i, 0, 10 + i});
        }
        t.relation(0)[1] = 1;
        const auto m = rank_eval(t, test, 50, 3);
        CHECK(m.mrr == 1.0);
        CHECK(m.hits_at_10 == 1.0);
        CHECK(m.evaluated == 10);
    }
    SUBCASE("untrained table is near chance") {
        auto cfg = planted_config();
        cfg.epochs = 0;
        const auto init = train_embeddings(planted(), cfg).table;
        const auto m = rank_eval(init, planted().indexed(), 50, 4);
        CHECK(std::abs(m.hits_at_10 - 10.0 / 51.0) <= 0.05);
    }
    SUBCASE("errors") {
        EmbeddingTable t(2, 5, 1);
        CHECK_THROWS_AS(rank_eval(t, {}, 50, 1), DataError);
        const std::vector<IndexedTriple> one{{0, 0, 1}};
        CHECK_THROWS_AS(rank_eval(t, one, 0, 1), ParameterError);
    }
}

TEST_CASE("binary table round-trip") {
    EmbeddingTable t(3, 3, 2);
    Rng rng(1);
    for (auto& v : t.entity_data()) {
        v = static_cast<float>(rng.normal());
    }
    for (auto& v : t.relation_data()) {
        v = static_cast<float>(rng.normal());
    }
    std::stringstream buf;
    write_table(buf, t);
    const std::string bytes = buf.str();
    CHECK(bytes.size() == 28 + 4 * 3 * 5);
    CHECK(bytes.substr(0, 4) == "KGSE");
    std::istringstream in(bytes);
    CHECK(read_table(in) == t);

    std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_table(truncated), FormatError);
    std::istringstream header_only(bytes.substr(0, 10));
    CHECK_THROWS_AS(read_table(header_only), FormatError);
    std::istringstream wrong_dim(bytes);
    CHECK_THROWS_AS(read_table(wrong_dim, 4u), FormatError);
    std::string bad = bytes;
    bad[4] = 9;
    std::istringstream bad_version(bad);
    CHECK_THROWS_AS(read_table(bad_version), FormatError);
    std::istringstream trailing(bytes + "x");
    CHECK_THROWS_AS(read_table(trailing), FormatError);
}

TEST_CASE("100k-vector file round-trip checksum") {
    EmbeddingTable t(8, 100000, 10);
    Rng rng(2);
    for (auto& v : t.entity_data()) {
        v = static_cast<float>(rng.uniform(-1, 1));
    }
    for (auto& v : t.relation_data()) {
        v = static_cast<float>(rng.uniform(-1, 1));
    }
    const auto path = fs::temp_directory_path() / "kgsub_100k.bin";
    save_table(t, path);
    CHECK(fs::file_size(path) == 28 + 4ull * 8 * 100010);
    const auto back = load_table(path, 8u);
    CHECK(fnv(back.entity_data()) == fnv(t.entity_data()));
    CHECK(fnv(back.relation_data()) == fnv(t.relation_data()));
    fs::resize_file(path, fs::file_size(path) - 4);
    CHECK_THROWS_AS(load_table(path), FormatError);
    fs::remove(path);
}

TEST_CASE("tsv export") {
    EmbeddingTable t(2, 2, 1);
    t.entity(1)[0] = 0.5f;
    Dictionary ents, rels;
    ents.intern("/c/en/a");
    ents.intern("/c/en/b");
    rels.intern("/r/IsA");
    std::ostringstream out;
    export_tsv(out, t, ents, rels);
    std::istringstream lines(out.str());
    std::string line;
    std::size_t count = 0;
    while (std::getline(lines, line)) {
        ++count;
        std::size_t tabs = 0;
        for (char ch : line) {
            tabs += ch == '\t' ? 1 : 0;
        }
        CHECK(tabs == 4);
    }
    CHECK(count == 3);
    CHECK(out.str().find("/c/en/b") != std::string::npos);
}
