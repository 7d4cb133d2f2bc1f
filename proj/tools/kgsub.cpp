#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kgsub/error.hpp"
#include "kgsub/pipeline.hpp"

namespace {

struct Overrides {
    std::optional<std::string> config;
    std::optional<std::string> input;
    std::optional<std::string> format;
    bool skip_bad_lines = false;
    bool keep_external_url = false;
    std::optional<std::size_t> sample_size;
    std::optional<std::string> sample_ids;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;

    std::optional<std::uint32_t> dim;
    std::optional<std::uint32_t> epochs;
    std::optional<double> lr;
    std::optional<double> margin;
    std::optional<std::uint32_t> negatives;
    std::optional<std::uint32_t> batch_size;
    std::optional<std::uint32_t> workers;
    bool unit_norm = false;
    bool strict_negatives = false;
    bool export_tsv = false;

    std::vector<std::string> relations;
    std::optional<std::size_t> k;
    std::optional<std::size_t> k_min;
    std::optional<std::size_t> k_max;
    bool no_sweep = false;
    std::optional<std::size_t> restarts;
    std::optional<std::string> init;

    std::optional<std::string> projection;
    std::optional<double> perplexity;
    std::optional<std::size_t> tsne_iterations;
    std::optional<std::size_t> report_samples;

    std::optional<std::size_t> sub_relations;
    std::optional<std::size_t> per_sub_relation;
    std::optional<std::size_t> pool_size;
    std::optional<double> noise;
    std::optional<std::size_t> anchor_links;
    std::optional<std::string> synth_out;
};

void add_options(CLI::App& app, Overrides& o) {
    app.add_option("-c,--config", o.config, "JSON run configuration");
    app.add_option("-i,--input", o.input, "Input triple file");
    app.add_option("--format", o.format, "conceptnet-dump or generic-tsv");
    app.add_flag("--skip-bad-lines", o.skip_bad_lines, "Count and skip malformed lines");
    app.add_flag("--keep-external-url", o.keep_external_url, "Do not drop /r/ExternalURL on ingest");
    app.add_option("-n,--sample-size", o.sample_size, "Triples to sample (default: all)");
    app.add_option("--sample-ids", o.sample_ids, "File of assertion URIs defining the sample");
    app.add_option("-s,--seed", o.seed, "Global seed");
    app.add_option("-o,--out", o.out, "Output directory (default: $KGSUB_OUTPUT_ROOT or ./kgsub-out)");

    app.add_option("--dim", o.dim, "Embedding dimension");
    app.add_option("--epochs", o.epochs, "Training epochs");
    app.add_option("--lr", o.lr, "Adagrad learning rate");
    app.add_option("--margin", o.margin, "Ranking margin");
    app.add_option("--negatives", o.negatives, "Negatives per positive");
    app.add_option("--batch-size", o.batch_size, "Positives per batch");
    app.add_option("--workers", o.workers, "Training threads (1 = deterministic)");
    app.add_flag("--unit-norm", o.unit_norm, "Keep entity vectors on the unit sphere");
    app.add_flag("--strict-negatives", o.strict_negatives, "Resample corruptions that are training triples");
    app.add_flag("--export-tsv", o.export_tsv, "Also write embeddings/embeddings.tsv");

    app.add_option("-r,--relation", o.relations, "Target relation (repeatable)");
    app.add_option("-k,--k", o.k, "Number of clusters");
    app.add_option("--k-min", o.k_min, "Sweep start");
    app.add_option("--k-max", o.k_max, "Sweep end");
    app.add_flag("--no-sweep", o.no_sweep, "Skip the k-selection sweep");
    app.add_option("--restarts", o.restarts, "k-means restarts");
    app.add_option("--init", o.init, "random or kmeans++");

    app.add_option("--projection", o.projection, "tsne or pca");
    app.add_option("--perplexity", o.perplexity, "t-SNE perplexity");
    app.add_option("--tsne-iterations", o.tsne_iterations, "t-SNE iterations");
    app.add_option("-m,--report-samples", o.report_samples, "Triples sampled per cluster in reports");

    app.add_option("--sub-relations", o.sub_relations, "synth: planted sub-relations");
    app.add_option("--triples-per-sub-relation", o.per_sub_relation, "synth: triples per sub-relation");
    app.add_option("--pool-size", o.pool_size, "synth: head and tail pool size");
    app.add_option("--noise", o.noise, "synth: noise rate");
    app.add_option("--anchor-links", o.anchor_links, "synth: anchor triples per pool entity");
    app.add_option("--synth-out", o.synth_out, "synth: output assertion file");
}

kgsub::RunConfig build_config(const Overrides& o) {
    kgsub::RunConfig c;
    if (o.config) {
        std::ifstream in(*o.config);
        if (!in) {
            throw kgsub::ConfigError("cannot read config file " + *o.config);
        }
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw kgsub::ConfigError("config file " + *o.config + ": " + e.what());
        }
        c = kgsub::RunConfig::from_json(j);
    }
    if (o.input) c.input = *o.input;
    if (o.format) c.format = kgsub::parse_format_name(*o.format);
    if (o.skip_bad_lines) c.skip_bad_lines = true;
    if (o.keep_external_url) {
        std::erase(c.drop_relations, std::string("/r/ExternalURL"));
    }
    if (o.sample_size) c.sample_size = *o.sample_size;
    if (o.sample_ids) c.sample_ids = *o.sample_ids;
    if (o.seed) c.seed = *o.seed;

    if (o.dim) c.train.dim = *o.dim;
    if (o.epochs) c.train.epochs = *o.epochs;
    if (o.lr) c.train.learning_rate = *o.lr;
    if (o.margin) c.train.margin = *o.margin;
    if (o.negatives) c.train.negatives = *o.negatives;
    if (o.batch_size) c.train.batch_size = *o.batch_size;
    if (o.workers) c.train.workers = *o.workers;
    if (o.unit_norm) c.train.unit_norm_entities = true;
    if (o.strict_negatives) c.train.strict_negatives = true;
    if (o.export_tsv) c.export_embeddings_tsv = true;

    if (!o.relations.empty()) c.relations = o.relations;
    if (o.k) c.k = *o.k;
    if (o.k_min) c.k_min = *o.k_min;
    if (o.k_max) c.k_max = *o.k_max;
    if (o.no_sweep) c.sweep = false;
    if (o.restarts) c.restarts = *o.restarts;
    if (o.init) {
        c = kgsub::RunConfig::from_json({{"cluster", {{"init", *o.init}}}}, c);
    }

    if (o.projection) c.projection = kgsub::parse_projection_method(*o.projection);
    if (o.perplexity) c.tsne.perplexity = *o.perplexity;
    if (o.tsne_iterations) c.tsne.iterations = *o.tsne_iterations;
    if (o.report_samples) c.report_samples = *o.report_samples;

    if (o.sub_relations) c.synthetic.sub_relations = *o.sub_relations;
    if (o.per_sub_relation) c.synthetic.triples_per_sub_relation = *o.per_sub_relation;
    if (o.pool_size) {
        c.synthetic.head_pool_size = *o.pool_size;
        c.synthetic.tail_pool_size = *o.pool_size;
    }
    if (o.noise) c.synthetic.noise_rate = *o.noise;
    if (o.anchor_links) c.synthetic.anchor_links = *o.anchor_links;
    if (o.synth_out) c.synthetic_output = *o.synth_out;

    if (o.out) {
        c.output_dir = *o.out;
    } else if (c.output_dir.empty()) {
        const char* root = std::getenv("KGSUB_OUTPUT_ROOT");
        c.output_dir = (root != nullptr && *root != '\0') ? root : "kgsub-out";
    }
    return c;
}

}

int main(int argc, char** argv) {
    CLI::App app{"kgsub: relation substructure discovery in knowledge graphs"};
    app.require_subcommand(1);
    Overrides overrides;
    std::string stage;

    const std::vector<std::pair<std::string, std::string>> commands{
        {"ingest", "Parse and filter the input into graph/ingested"},
        {"sample", "Random (or id-listed) sample into graph/sample"},
        {"stats", "Triple and entity counts of the sample"},
        {"split", "Train/valid/test split"},
        {"train", "Train translation embeddings"},
        {"validate", "Relation vector vs. centroid vector check"},
        {"cluster", "k-means over translation vectors of the target relations"},
        {"metrics", "Cluster cohesion and separation"},
        {"project", "2-D projection and SVG scatter plot"},
        {"report", "Sampled triples per cluster"},
        {"pipeline", "Run every stage from ingest to report"},
        {"synth", "Write a synthetic graph with planted sub-relations"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        add_options(*sub, overrides);
        sub->callback([&stage, name = name] { stage = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        kgsub::Pipeline pipeline(build_config(overrides));
        for (const auto& summary : pipeline.run(stage)) {
            std::cout << summary.stage << ": ok (" << summary.json.at("duration_seconds").get<double>() << " s)\n";
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "kgsub " << stage << ": " << e.what() << '\n';
        return kgsub::exit_code_for(e);
    }
}
