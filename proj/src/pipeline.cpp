#include "kgsub/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "kgsub/cluster_metrics.hpp"
#include "kgsub/error.hpp"
#include "kgsub/io.hpp"
#include "kgsub/random.hpp"
#include "kgsub/relation_validator.hpp"
#include "kgsub/report.hpp"

namespace kgsub {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view init_name(KMeansInit init) {
    return init == KMeansInit::KMeansPlusPlus ? "kmeans++" : "random";
}

KMeansInit parse_init(std::string_view name) {
    if (name == "random") {
        return KMeansInit::RandomPoints;
    }
    if (name == "kmeans++") {
        return KMeansInit::KMeansPlusPlus;
    }
    throw ConfigError("unknown k-means init '" + std::string(name) + "' (expected random or kmeans++)");
}

void reject_unknown(const json& j, std::string_view section, std::initializer_list<std::string_view> keys) {
    if (!j.is_object()) {
        throw ConfigError("config section '" + std::string(section) + "' must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ConfigError("unknown config key '" + (section.empty() ? "" : std::string(section) + ".") + key +
                              "'");
        }
    }
}

template <typename T>
void read(const json& j, std::string_view key, T& out) {
    const auto it = j.find(std::string(key));
    if (it != j.end()) {
        out = it->template get<T>();
    }
}

}

void RunConfig::validate() const {
    if (!(split.train > 0 && split.valid > 0 && split.test > 0) ||
        std::abs(split.train + split.valid + split.test - 1.0) > 1e-9) {
        throw ConfigError("split ratios must be positive and sum to 1");
    }
    train.validate();
    if (rank_corruptions < 1) {
        throw ConfigError("rank_corruptions must be >= 1");
    }
    for (const auto& r : relations) {
        if (r.empty()) {
            throw ConfigError("target relation names must be non-empty");
        }
    }
    if (k < 1) {
        throw ConfigError("k must be >= 1");
    }
    if (k_min < 2 || k_max < k_min) {
        throw ConfigError("sweep range needs 2 <= k_min <= k_max");
    }
    if (restarts < 1 || max_iter < 1) {
        throw ConfigError("restarts and max_iter must be >= 1");
    }
    if (!(tsne.perplexity > 0) || tsne.iterations < 1 || !(tsne.early_exaggeration > 0) || tsne.max_points < 4) {
        throw ConfigError("invalid t-SNE parameters");
    }
    if (tsne.learning_rate && !(*tsne.learning_rate > 0)) {
        throw ConfigError("t-SNE learning rate must be > 0");
    }
    try {
        synthetic.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    if (output_dir.empty()) {
        throw ConfigError("no output directory given");
    }
}

json RunConfig::to_json() const {
    json out = {
        {"input", input.string()},
        {"format", format_name(format)},
        {"skip_bad_lines", skip_bad_lines},
        {"drop_relations", drop_relations},
        {"sample_size", sample_size ? json(*sample_size) : json(nullptr)},
        {"sample_ids", sample_ids ? json(sample_ids->string()) : json(nullptr)},
        {"split", {split.train, split.valid, split.test}},
        {"train",
         {{"dim", train.dim},
          {"epochs", train.epochs},
          {"learning_rate", train.learning_rate},
          {"margin", train.margin},
          {"negatives", train.negatives},
          {"batch_size", train.batch_size},
          {"workers", train.workers},
          {"unit_norm_entities", train.unit_norm_entities},
          {"strict_negatives", train.strict_negatives}}},
        {"rank_corruptions", rank_corruptions},
        {"export_embeddings_tsv", export_embeddings_tsv},
        {"relations", relations},
        {"cluster",
         {{"k", k},
          {"sweep", sweep},
          {"k_min", k_min},
          {"k_max", k_max},
          {"restarts", restarts},
          {"max_iter", max_iter},
          {"init", init_name(init)}}},
        {"projection",
         {{"method", projection_method_name(projection)},
          {"perplexity", tsne.perplexity},
          {"iterations", tsne.iterations},
          {"early_exaggeration", tsne.early_exaggeration},
          {"exaggeration_iterations", tsne.exaggeration_iterations},
          {"learning_rate", tsne.learning_rate ? json(*tsne.learning_rate) : json(nullptr)},
          {"max_points", tsne.max_points}}},
        {"report_samples", report_samples},
        {"synthetic",
         {{"sub_relations", synthetic.sub_relations},
          {"triples_per_sub_relation", synthetic.triples_per_sub_relation},
          {"head_pool_size", synthetic.head_pool_size},
          {"tail_pool_size", synthetic.tail_pool_size},
          {"noise_rate", synthetic.noise_rate},
          {"anchor_links", synthetic.anchor_links},
          {"relation", synthetic.relation},
          {"anchor_relation", synthetic.anchor_relation},
          {"output", synthetic_output ? json(synthetic_output->string()) : json(nullptr)}}},
        {"seed", seed},
        {"output_dir", output_dir.string()},
    };
    return out;
}

RunConfig RunConfig::from_json(const json& j, RunConfig c) {
    try {
        reject_unknown(j, "",
                       {"input", "format", "skip_bad_lines", "drop_relations", "sample_size", "sample_ids", "split",
                        "train", "rank_corruptions", "export_embeddings_tsv", "relations", "cluster", "projection",
                        "report_samples", "synthetic", "seed", "output_dir"});
        if (j.contains("input")) {
            c.input = j["input"].get<std::string>();
        }
        if (j.contains("format")) {
            c.format = parse_format_name(j["format"].get<std::string>());
        }
        read(j, "skip_bad_lines", c.skip_bad_lines);
        read(j, "drop_relations", c.drop_relations);
        if (j.contains("sample_size")) {
            c.sample_size = j["sample_size"].is_null() ? std::nullopt
                                                       : std::optional<std::size_t>(j["sample_size"].get<std::size_t>());
        }
        if (j.contains("sample_ids")) {
            c.sample_ids = j["sample_ids"].is_null() ? std::nullopt
                                                     : std::optional<fs::path>(j["sample_ids"].get<std::string>());
        }
        if (j.contains("split")) {
            const auto r = j["split"].get<std::vector<double>>();
            if (r.size() != 3) {
                throw ConfigError("split must list three ratios (train, valid, test)");
            }
            c.split = {r[0], r[1], r[2]};
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            reject_unknown(t, "train",
                           {"dim", "epochs", "learning_rate", "margin", "negatives", "batch_size", "workers",
                            "unit_norm_entities", "strict_negatives"});
            read(t, "dim", c.train.dim);
            read(t, "epochs", c.train.epochs);
            read(t, "learning_rate", c.train.learning_rate);
            read(t, "margin", c.train.margin);
            read(t, "negatives", c.train.negatives);
            read(t, "batch_size", c.train.batch_size);
            read(t, "workers", c.train.workers);
            read(t, "unit_norm_entities", c.train.unit_norm_entities);
            read(t, "strict_negatives", c.train.strict_negatives);
        }
        read(j, "rank_corruptions", c.rank_corruptions);
        read(j, "export_embeddings_tsv", c.export_embeddings_tsv);
        read(j, "relations", c.relations);
        if (j.contains("cluster")) {
            const auto& k = j["cluster"];
            reject_unknown(k, "cluster", {"k", "sweep", "k_min", "k_max", "restarts", "max_iter", "init"});
            read(k, "k", c.k);
            read(k, "sweep", c.sweep);
            read(k, "k_min", c.k_min);
            read(k, "k_max", c.k_max);
            read(k, "restarts", c.restarts);
            read(k, "max_iter", c.max_iter);
            if (k.contains("init")) {
                c.init = parse_init(k["init"].get<std::string>());
            }
        }
        if (j.contains("projection")) {
            const auto& p = j["projection"];
            reject_unknown(p, "projection",
                           {"method", "perplexity", "iterations", "early_exaggeration", "exaggeration_iterations",
                            "learning_rate", "max_points"});
            if (p.contains("method")) {
                c.projection = parse_projection_method(p["method"].get<std::string>());
            }
            read(p, "perplexity", c.tsne.perplexity);
            read(p, "iterations", c.tsne.iterations);
            read(p, "early_exaggeration", c.tsne.early_exaggeration);
            read(p, "exaggeration_iterations", c.tsne.exaggeration_iterations);
            if (p.contains("learning_rate")) {
                c.tsne.learning_rate = p["learning_rate"].is_null()
                                           ? std::nullopt
                                           : std::optional<double>(p["learning_rate"].get<double>());
            }
            read(p, "max_points", c.tsne.max_points);
        }
        read(j, "report_samples", c.report_samples);
        if (j.contains("synthetic")) {
            const auto& s = j["synthetic"];
            reject_unknown(s, "synthetic",
                           {"sub_relations", "triples_per_sub_relation", "head_pool_size", "tail_pool_size",
                            "noise_rate", "anchor_links", "relation", "anchor_relation", "output"});
            read(s, "sub_relations", c.synthetic.sub_relations);
            read(s, "triples_per_sub_relation", c.synthetic.triples_per_sub_relation);
            read(s, "head_pool_size", c.synthetic.head_pool_size);
            read(s, "tail_pool_size", c.synthetic.tail_pool_size);
            read(s, "noise_rate", c.synthetic.noise_rate);
            read(s, "anchor_links", c.synthetic.anchor_links);
            read(s, "relation", c.synthetic.relation);
            read(s, "anchor_relation", c.synthetic.anchor_relation);
            if (s.contains("output")) {
                c.synthetic_output = s["output"].is_null() ? std::nullopt
                                                           : std::optional<fs::path>(s["output"].get<std::string>());
            }
        }
        read(j, "seed", c.seed);
        if (j.contains("output_dir")) {
            c.output_dir = j["output_dir"].get<std::string>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::from_json(const json& j) {
    return from_json(j, RunConfig{});
}

const std::vector<std::string>& stage_order() {
    static const std::vector<std::string> order{"ingest",   "sample",  "stats",   "split",   "train",
                                                "validate", "cluster", "metrics", "project", "report"};
    return order;
}

bool is_stage(std::string_view name) {
    const auto& order = stage_order();
    return name == "pipeline" || name == "synth" || std::find(order.begin(), order.end(), name) != order.end();
}

std::string relation_dir_name(std::string_view uri) {
    if (uri.starts_with("/r/")) {
        uri.remove_prefix(3);
    }
    std::string out(uri);
    std::replace(out.begin(), out.end(), '/', '_');
    if (out.empty() || out == "." || out == "..") {
        out = "_" + out;
    }
    return out;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) != nullptr) {
        return 2;
    }
    if (dynamic_cast<const DependencyError*>(&e) != nullptr) {
        return 3;
    }
    if (dynamic_cast<const Error*>(&e) != nullptr) {
        return 4;
    }
    return 1;
}

namespace {

class OutputLock {
public:
    explicit OutputLock(const fs::path& dir) {
        fs::create_directories(dir);
        const auto path = dir / ".kgsub.lock";
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
        if (fd_ < 0) {
            throw Error("cannot open lock file " + path.string());
        }
        if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(fd_);
            throw DependencyError("output directory " + dir.string() + " is in use by another run");
        }
    }
    ~OutputLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    int fd_ = -1;
};

struct RelationData {
    std::string uri;
    std::string dir;
    TranslationSet ts;
    std::vector<TripleRecord> triples;
};

class Stage {
public:
    Stage(const RunConfig& config, std::string name) : cfg(config), root(config.output_dir), name_(std::move(name)) {}

    fs::path require(const fs::path& relative, std::string_view producer) {
        const auto path = root / relative;
        if (!fs::exists(path)) {
            throw DependencyError("missing " + path.string() + " (run the '" + std::string(producer) +
                                  "' stage first)");
        }
        record_input(path);
        return path;
    }

    void record_input(const fs::path& path) { inputs[label(path)] = io::file_checksum(path); }

    GraphSample load_graph(std::string_view part, std::string_view producer) {
        const fs::path dir = fs::path("graph") / std::string(part);
        require(dir / "triples.tsv", producer);
        require(dir / "entities.tsv", producer);
        require(dir / "relations.tsv", producer);
        return GraphSample::load(root / dir);
    }

    void save_graph(const GraphSample& g, std::string_view part) {
        const fs::path dir = root / "graph" / std::string(part);
        g.save(dir);
        wrote(dir / "triples.tsv");
        wrote(dir / "entities.tsv");
        wrote(dir / "relations.tsv");
    }

    void write(const fs::path& relative, std::string_view contents) {
        const auto path = root / relative;
        io::write_atomic(path, contents);
        wrote(path);
    }

    void write_json(const fs::path& relative, const json& j) { write(relative, j.dump(2) + "\n"); }

    void wrote(const fs::path& path) { outputs[label(path)] = io::file_checksum(path); }

    EmbeddingTable load_embeddings(const GraphSample& train) {
        const auto path = require("embeddings/embeddings.bin", "train");
        auto table = load_table(path, cfg.train.dim);
        if (table.entity_count() != train.entities().size() || table.relation_count() != train.relations().size()) {
            throw FormatError("embeddings do not match graph/train (rerun 'train')");
        }
        return table;
    }

    std::vector<RelationData> relations(const EmbeddingTable& table,
                                        const GraphSample& train,
                                        const std::vector<std::string>& uris) {
        std::vector<RelationData> out;
        for (const auto& uri : uris) {
            const auto id = train.relations().find(uri);
            if (!id) {
                throw DataError("relation " + uri + " does not occur in graph/train");
            }
            RelationData r{uri, relation_dir_name(uri), translation_vectors(table, train, *id), {}};
            for (auto i : r.ts.triple_order) {
                r.triples.push_back(train.triples()[i]);
            }
            out.push_back(std::move(r));
        }
        return out;
    }

    /// Relations that the cluster stage actually clustered.
    std::vector<std::string> clustered_relations() {
        const auto summary = require("summaries/cluster.json", "cluster");
        const auto j = json::parse(io::read_file(summary));
        std::vector<std::string> out;
        for (const auto& entry : j.at("details").at("clustered")) {
            const auto uri = entry.get<std::string>();
            require(fs::path("clusters") / relation_dir_name(uri) / "clustering.json", "cluster");
            out.push_back(uri);
        }
        return out;
    }

    Clustering load_clustering(const RelationData& r) {
        const auto path = root / "clusters" / r.dir / "clustering.json";
        auto c = Clustering::from_json(json::parse(io::read_file(path)));
        if (c.assignments.size() != r.ts.size()) {
            throw FormatError(path.string() + " does not match the current embeddings (rerun 'cluster')");
        }
        return c;
    }

    StageSummary finish(double seconds) {
        json summary = {
            {"stage", name_},
            {"seed", cfg.seed},
            {"inputs", inputs},
            {"outputs", outputs},
            {"duration_seconds", seconds},
            {"details", details},
        };
        io::write_atomic(root / "summaries" / (name_ + ".json"), summary.dump(2) + "\n");
        return {name_, summary};
    }

    const RunConfig& cfg;
    fs::path root;
    json inputs = json::object();
    json outputs = json::object();
    json details = json::object();

private:
    std::string label(const fs::path& path) const {
        const auto rel = path.lexically_relative(root);
        return rel.empty() || rel.native().starts_with("..") ? path.string() : rel.generic_string();
    }

    std::string name_;
};

void ingest(Stage& s) {
    if (s.cfg.input.empty()) {
        throw ConfigError("ingest needs an input file (--input or \"input\" in the config)");
    }
    if (!fs::exists(s.cfg.input)) {
        throw DependencyError("missing input file " + s.cfg.input.string());
    }
    s.record_input(s.cfg.input);
    std::ifstream in(s.cfg.input, std::ios::binary);
    const auto parsed = parse_assertions(in, ParseOptions{s.cfg.format, s.cfg.skip_bad_lines});
    const std::set<std::string> drop(s.cfg.drop_relations.begin(), s.cfg.drop_relations.end());
    auto filtered = filter_relations(parsed.triples, drop);
    s.details = {{"parsed", parsed.triples.size()},
                 {"skipped_lines", parsed.skipped_lines},
                 {"dropped", parsed.triples.size() - filtered.triples.size()},
                 {"kept", filtered.triples.size()},
                 {"format", format_name(s.cfg.format)}};
    s.save_graph(GraphSample(std::move(filtered.triples)), "ingested");
}

void stats(Stage& s) {
    const auto sample = s.load_graph("sample", "sample");
    const auto st = compute_stats(sample.triples());
    s.write_json("graph/stats.json", st.to_json());
    s.details = {{"num_triples", st.num_triples}, {"num_entities", st.num_entities}};
}

void sample(Stage& s) {
    const auto ingested = s.load_graph("ingested", "ingest");
    std::vector<TripleRecord> picked;
    if (s.cfg.sample_ids) {
        if (!fs::exists(*s.cfg.sample_ids)) {
            throw DependencyError("missing sample id file " + s.cfg.sample_ids->string());
        }
        s.record_input(*s.cfg.sample_ids);
        std::ifstream in(*s.cfg.sample_ids, std::ios::binary);
        std::unordered_set<std::string> ids;
        std::string line;
        while (std::getline(in, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
                line.pop_back();
            }
            if (!line.empty()) {
                ids.insert(line);
            }
        }
        picked = select_by_assertion(ingested.triples(), ids);
        s.details = {{"mode", "id-list"}, {"ids", ids.size()}, {"matched", picked.size()}};
    } else {
        const auto n = s.cfg.sample_size.value_or(ingested.size());
        picked = sample_triples(ingested.triples(), n, derive_seed(s.cfg.seed, "sample"));
        s.details = {{"mode", "random"}, {"requested", n}, {"sampled", picked.size()}};
    }
    s.save_graph(GraphSample(std::move(picked)), "sample");
}

void split_stage(Stage& s) {
    const auto sample = s.load_graph("sample", "sample");
    auto parts = split(sample.triples(), s.cfg.split, derive_seed(s.cfg.seed, "split"));
    s.details = {{"train", parts.train.size()}, {"valid", parts.valid.size()}, {"test", parts.test.size()}};
    s.save_graph(GraphSample(std::move(parts.train)), "train");
    s.save_graph(GraphSample(std::move(parts.valid)), "valid");
    s.save_graph(GraphSample(std::move(parts.test)), "test");
}

void train_stage(Stage& s) {
    const auto train = s.load_graph("train", "split");
    auto config = s.cfg.train;
    config.seed = derive_seed(s.cfg.seed, "train");
    const auto result = train_embeddings(train, config);
    if (!result.table.all_finite()) {
        throw DataError("training diverged (non-finite embedding component)");
    }
    save_table(result.table, s.root / "embeddings/embeddings.bin");
    s.wrote(s.root / "embeddings/embeddings.bin");

    std::ostringstream loss;
    loss << "epoch\tloss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
        loss << e + 1 << '\t' << io::format_double(result.epoch_loss[e]) << '\n';
    }
    s.write("embeddings/loss.tsv", loss.str());

    if (s.cfg.export_embeddings_tsv) {
        std::ostringstream out;
        export_tsv(out, result.table, train.entities(), train.relations());
        s.write("embeddings/embeddings.tsv", out.str());
    }

    // Rank the held-out test triples whose entities and relation were seen in training.
    json rank = nullptr;
    const auto test_dir = s.root / "graph/test/triples.tsv";
    if (fs::exists(test_dir)) {
        const auto test = s.load_graph("test", "split");
        std::vector<IndexedTriple> known;
        for (const auto& t : test.triples()) {
            const auto h = train.entities().find(t.head);
            const auto r = train.relations().find(t.relation);
            const auto tl = train.entities().find(t.tail);
            if (h && r && tl) {
                known.push_back({*h, *r, *tl});
            }
        }
        if (!known.empty() && train.entities().size() >= 2) {
            const auto m = rank_eval(result.table, known, s.cfg.rank_corruptions, derive_seed(s.cfg.seed, "rank"));
            rank = {{"mrr", m.mrr},
                    {"hits_at_10", m.hits_at_10},
                    {"evaluated", m.evaluated},
                    {"test_triples", test.size()},
                    {"corruptions", s.cfg.rank_corruptions}};
        }
    }
    s.write_json("embeddings/rank_eval.json", {{"test", rank}});
    s.details = {{"epochs", config.epochs},
                 {"first_loss", result.epoch_loss.empty() ? json(nullptr) : json(result.epoch_loss.front())},
                 {"final_loss", result.epoch_loss.empty() ? json(nullptr) : json(result.epoch_loss.back())},
                 {"entities", result.table.entity_count()},
                 {"relations", result.table.relation_count()},
                 {"rank_eval", rank}};
}

void validate_stage(Stage& s) {
    const auto train = s.load_graph("train", "split");
    const auto table = s.load_embeddings(train);
    const auto report = validate_all(table, train);
    s.write("validation/report.tsv", report.to_tsv());
    s.write_json("validation/report.json", report.to_json());
    s.details = {{"validated", report.rows.size()}, {"skipped", report.skipped.size()}};
}

void cluster_stage(Stage& s) {
    const auto train = s.load_graph("train", "split");
    const auto table = s.load_embeddings(train);

    std::vector<std::string> present;
    json missing = json::array();
    for (const auto& uri : s.cfg.relations) {
        if (train.relations().find(uri)) {
            present.push_back(uri);
        } else {
            missing.push_back(uri);
        }
    }

    json clustered = json::array();
    json skipped = json::array();
    json per_relation = json::object();
    for (auto& r : s.relations(table, train, present)) {
        const auto n = r.ts.size();
        if (n < 2) {
            skipped.push_back({{"relation", r.uri}, {"triples", n}, {"reason", "fewer than 2 triples"}});
            continue;
        }
        const fs::path dir = fs::path("clusters") / r.dir;
        std::ostringstream triples;
        write_assertions(triples, r.triples, InputFormat::GenericTsv);
        s.write(dir / "triples.tsv", triples.str());

        KMeansOptions options;
        options.max_iter = s.cfg.max_iter;
        options.init = s.cfg.init;

        json info = {{"triples", n}};
        const auto k_max = std::min(s.cfg.k_max, n - 1);
        if (s.cfg.sweep && s.cfg.k_min <= k_max) {
            const auto curve =
                k_sweep(r.ts.vectors, s.cfg.k_min, k_max, s.cfg.restarts, derive_seed(s.cfg.seed, "sweep:" + r.uri),
                        options);
            s.write(dir / "k_selection.tsv", curve.to_tsv());
            s.write_json(dir / "k_extrema.json", curve.extrema_json());
            info["k_extrema"] = curve.extrema_json();
        }

        options.k = std::min(s.cfg.k, n);
        options.seed = derive_seed(s.cfg.seed, "cluster:" + r.uri);
        const auto best = best_of_restarts(r.ts.vectors, options, s.cfg.restarts);
        s.write_json(dir / "clustering.json", best.clustering.to_json());

        std::ostringstream trace;
        trace << "iteration\twss\n";
        for (std::size_t i = 0; i < best.clustering.wss_trace.size(); ++i) {
            trace << i + 1 << '\t' << io::format_double(best.clustering.wss_trace[i]) << '\n';
        }
        s.write(dir / "wss_trace.tsv", trace.str());
        json run = {{"k", best.clustering.k},
                    {"seed", best.seed},
                    {"wss", best.wss},
                    {"iterations_run", best.clustering.iterations_run},
                    {"converged", best.clustering.converged},
                    {"empty_repairs", best.clustering.empty_repairs},
                    {"restarts", s.cfg.restarts},
                    {"init", init_name(s.cfg.init)}};
        s.write_json(dir / "run.json", run);
        info["run"] = run;
        per_relation[r.uri] = info;
        clustered.push_back(r.uri);
    }
    s.details = {{"clustered", clustered}, {"missing", missing}, {"skipped", skipped}, {"relations", per_relation}};
}

void metrics_stage(Stage& s) {
    const auto uris = s.clustered_relations();
    const auto train = s.load_graph("train", "split");
    const auto table = s.load_embeddings(train);
    json per_relation = json::object();
    for (const auto& r : s.relations(table, train, uris)) {
        const auto clustering = s.load_clustering(r);
        const auto quality = compute_quality(r.ts.vectors, clustering);
        const fs::path dir = fs::path("metrics") / r.dir;
        s.write(dir / "quality.tsv", quality.to_tsv());
        s.write_json(dir / "quality.json", quality.to_json());
        per_relation[r.uri] = {{"cohesion_mean", quality.cohesion.mean},
                               {"cohesion_std", quality.cohesion.std},
                               {"separation_mean", quality.separation.mean},
                               {"separation_std", quality.separation.std},
                               {"excluded_points", quality.excluded_points},
                               {"degenerate_clusters", quality.degenerate_clusters}};
    }
    s.details = {{"relations", per_relation}};
}

void project_stage(Stage& s) {
    const auto uris = s.clustered_relations();
    const auto train = s.load_graph("train", "split");
    const auto table = s.load_embeddings(train);
    json per_relation = json::object();
    json skipped = json::array();
    for (const auto& r : s.relations(table, train, uris)) {
        const auto clustering = s.load_clustering(r);
        const auto n = std::min(r.ts.size(), s.cfg.tsne.max_points);
        if (n < 4) {
            skipped.push_back({{"relation", r.uri}, {"triples", r.ts.size()}, {"reason", "fewer than 4 points"}});
            continue;
        }
        auto params = s.cfg.tsne;
        bool adjusted = false;
        const double limit = (static_cast<double>(n) - 1.0) / 3.0;
        if (s.cfg.projection == ProjectionMethod::Tsne && !(params.perplexity < limit)) {
            // small relations: use the largest perplexity the point count allows
            params.perplexity = std::max(limit - 1e-6, 1e-3) * 0.999;
            adjusted = true;
        }
        const auto proj =
            project_2d(r.ts.vectors, s.cfg.projection, params, derive_seed(s.cfg.seed, "project:" + r.uri));
        const fs::path dir = fs::path("plots") / r.dir;
        s.write(dir / "projection.tsv", proj.to_tsv(clustering.assignments));
        auto meta = proj.metadata();
        meta["perplexity_adjusted"] = adjusted;
        if (proj.subsampled) {
            meta["source_points"] = r.ts.size();
        }
        s.write_json(dir / "projection.json", meta);
        s.write(dir / "scatter.svg",
                render_scatter(proj, clustering.assignments, clustering.k,
                               r.uri + " (" + std::string(projection_method_name(proj.method)) + ", k=" +
                                   std::to_string(clustering.k) + ")"));
        per_relation[r.uri] = {{"points", proj.coords.rows()},
                               {"subsampled", proj.subsampled},
                               {"perplexity_adjusted", adjusted}};
    }
    s.details = {{"relations", per_relation}, {"skipped", skipped}};
}

void report_stage(Stage& s) {
    const auto uris = s.clustered_relations();
    const auto train = s.load_graph("train", "split");
    const auto table = s.load_embeddings(train);
    json per_relation = json::object();
    for (const auto& r : s.relations(table, train, uris)) {
        const auto clustering = s.load_clustering(r);
        const auto quality = compute_quality(r.ts.vectors, clustering);
        const auto report =
            sample_cluster_triples(clustering, r.triples, s.cfg.report_samples, derive_seed(s.cfg.seed, "report:" + r.uri));
        const fs::path dir = fs::path("reports") / r.dir;
        s.write(dir / "clusters.md", render_markdown(report, &quality));

        std::ostringstream tsv;
        tsv << "cluster_id\ttriple_index\thead\trelation\ttail\n";
        for (const auto& c : report.clusters) {
            for (std::size_t i = 0; i < c.triples.size(); ++i) {
                tsv << c.cluster_id << '\t' << c.triple_indices[i] << '\t' << c.triples[i].head << '\t'
                    << c.triples[i].relation << '\t' << c.triples[i].tail << '\n';
            }
        }
        s.write(dir / "samples.tsv", tsv.str());
        per_relation[r.uri] = {{"clusters", report.clusters.size()}};
    }
    s.details = {{"relations", per_relation}};
}

void synth_stage(Stage& s) {
    const auto graph = generate_synthetic(s.cfg.synthetic, s.cfg.seed);
    const auto target = s.cfg.synthetic_output.value_or(s.root / "synthetic" / "assertions.tsv");
    io::write_atomic(target, [&](std::ostream& out) { write_assertions(out, graph.triples, InputFormat::ConceptNetDump); });
    s.wrote(target);

    auto labels_path = target;
    labels_path.replace_filename(target.stem().string() + ".labels.tsv");
    io::write_atomic(labels_path, [&](std::ostream& out) {
        out << "line\tlabel\n";
        for (std::size_t i = 0; i < graph.labels.size(); ++i) {
            out << i + 1 << '\t' << graph.labels[i] << '\n';
        }
    });
    s.wrote(labels_path);
    s.details = {{"triples", graph.triples.size()}, {"assertions", target.string()}, {"labels", labels_path.string()}};
}

}

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)) {
    config_.validate();
}

std::vector<StageSummary> Pipeline::run(std::string_view stage) {
    if (!is_stage(stage)) {
        throw ConfigError("unknown stage '" + std::string(stage) + "'");
    }
    OutputLock lock(config_.output_dir);
    std::vector<StageSummary> out;
    if (stage == "pipeline") {
        for (const auto& name : stage_order()) {
            out.push_back(run_stage(name));
        }
    } else {
        out.push_back(run_stage(stage));
    }
    return out;
}

StageSummary Pipeline::run_stage(std::string_view name) {
    const auto start = std::chrono::steady_clock::now();
    Stage s(config_, std::string(name));
    if (name == "ingest") {
        ingest(s);
    } else if (name == "stats") {
        stats(s);
    } else if (name == "sample") {
        sample(s);
    } else if (name == "split") {
        split_stage(s);
    } else if (name == "train") {
        train_stage(s);
    } else if (name == "validate") {
        validate_stage(s);
    } else if (name == "cluster") {
        cluster_stage(s);
    } else if (name == "metrics") {
        metrics_stage(s);
    } else if (name == "project") {
        project_stage(s);
    } else if (name == "report") {
        report_stage(s);
    } else if (name == "synth") {
        synth_stage(s);
    } else {
        throw ConfigError("unknown stage '" + std::string(name) + "'");
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    return s.finish(elapsed.count());
}

}
