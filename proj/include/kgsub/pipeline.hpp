#ifndef KGSUB_PIPELINE_HPP
#define KGSUB_PIPELINE_HPP

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kgsub/clustering.hpp"
#include "kgsub/embedding.hpp"
#include "kgsub/graph_store.hpp"
#include "kgsub/projection.hpp"
#include "kgsub/synthetic.hpp"

/**
 * @file pipeline.hpp
 * @brief Stage runner: every stage reads artifacts from the output directory,
 * writes its own atomically, and leaves a JSON summary in summaries/.
 *
 *     graph/{ingested,sample,train,valid,test}/   graph/stats.json
 *     embeddings/            validation/
 *     clusters/<relation>/   metrics/<relation>/
 *     plots/<relation>/      reports/<relation>/
 */

namespace kgsub {

struct RunConfig {
    std::filesystem::path input;
    InputFormat format = InputFormat::ConceptNetDump;
    bool skip_bad_lines = false;
    std::vector<std::string> drop_relations{"/r/ExternalURL"};

    /// Unset keeps every ingested triple.
    std::optional<std::size_t> sample_size;
    /// File of assertion URIs (one per line) selecting the sample instead of random sampling.
    std::optional<std::filesystem::path> sample_ids;
    SplitRatios split;

    /// train.seed is ignored; the stage derives it from `seed`.
    TrainConfig train;
    std::size_t rank_corruptions = 50;
    bool export_embeddings_tsv = false;

    std::vector<std::string> relations{"/r/HasContext", "/r/FormOf", "/r/SymbolOf"};
    std::size_t k = 20;
    bool sweep = true;
    std::size_t k_min = 2;
    std::size_t k_max = 40;
    std::size_t restarts = 10;
    std::size_t max_iter = 300;
    KMeansInit init = KMeansInit::RandomPoints;

    ProjectionMethod projection = ProjectionMethod::Tsne;
    TsneParams tsne;
    std::size_t report_samples = 5;

    SyntheticSpec synthetic;
    std::optional<std::filesystem::path> synthetic_output;

    std::uint64_t seed = 0;
    std::filesystem::path output_dir;

    /// Throws ConfigError on the first invalid value.
    void validate() const;

    nlohmann::json to_json() const;
    /// Starts from `base` and overrides every key present. Unknown keys raise ConfigError.
    static RunConfig from_json(const nlohmann::json& j, RunConfig base);
    static RunConfig from_json(const nlohmann::json& j);
};

/// The subcommand names, in pipeline order (`pipeline` and `synth` excluded).
const std::vector<std::string>& stage_order();
bool is_stage(std::string_view name);

/// "/r/HasContext" -> "HasContext"; other slashes become underscores.
std::string relation_dir_name(std::string_view relation_uri);

struct StageSummary {
    std::string stage;
    nlohmann::json json;
};

class Pipeline {
public:
    explicit Pipeline(RunConfig config);

    const RunConfig& config() const { return config_; }

    /// Runs one named stage. `pipeline` runs every stage in order.
    std::vector<StageSummary> run(std::string_view stage);

private:
    StageSummary run_stage(std::string_view stage);

    RunConfig config_;
};

/// 0 success, 2 usage/config, 3 missing prerequisite or locked output, 4 data, 1 anything else.
int exit_code_for(const std::exception& e);

}

#endif
