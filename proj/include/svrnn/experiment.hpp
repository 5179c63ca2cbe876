#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "svrnn/eval.hpp"
#include "svrnn/models.hpp"
#include "svrnn/threat_field.hpp"
#include "svrnn/training.hpp"

namespace svrnn {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Every knob of the pipeline as a flat key=value set.
struct ExperimentConfig {
    // threat field
    std::size_t grid_side = 100;
    std::size_t horizon = 4;
    std::size_t n_p = 4;
    std::size_t pool_size = 500;
    std::size_t n_d = 50;
    std::size_t n_s = 500;
    double sigma1 = 0.25;
    double sigma2 = 0.0;
    double dt = 0.01;
    double theta0_range = 5.0;
    double width_min = 0.02;
    double width_max = 0.2;
    // models and training
    std::vector<ModelKind> models{ModelKind::svae, ModelKind::vrnn, ModelKind::svrnn};
    std::vector<std::size_t> svae_channels{16, 32, 64, 128};
    Reconstruction reconstruction = Reconstruction::sum;
    std::size_t epochs = 200;
    std::size_t batch_size = 10;
    double learning_rate = 1e-3;
    double clip_norm = 5.0;
    double support_fraction = -1.0;
    std::size_t threads = 1;
    // evaluation
    std::size_t n_generated = 500;
    std::size_t pca_components = 3;
    bool export_images = true;
    // seeds
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    // file arguments of the individual subcommands
    std::string out_dir;
    std::string pool_path;
    std::string data_path;
    std::string support_path;
    std::string checkpoint_path;
    std::string output_path;
    std::string generated_paths;  // comma-separated label=path pairs
    std::string model = "svrnn";
    std::size_t count = 0;

    /// "paper-full" (100x100 grid) or "paper-desk" (20x20 grid).
    static ExperimentConfig preset(const std::string& name);

    /// Throws ConfigError for an unknown key or a malformed value.
    void set(const std::string& key, const std::string& value);
    /// Applies "key = value" lines; '#' starts a comment.
    void apply_text(const std::string& text);
    void apply_file(const std::filesystem::path& path);
    std::string get(const std::string& key) const;
    std::string to_text() const;
    /// Checks every key on its own.
    void validate() const;
    /// validate() plus the cross-key constraints of the full protocol.
    void validate_run() const;

    PoolConfig pool_config(std::uint64_t seed) const;
    TrainConfig train_config(std::uint64_t seed) const;
    Architecture architecture(ModelKind kind) const;

    struct KeyDoc {
        const char* key;
        const char* doc;
    };
    static const std::vector<KeyDoc>& keys();
};

/// Seed of the support set drawn alongside the pool of `seed`.
std::uint64_t support_seed(std::uint64_t seed);
/// Seed used to sample from a model trained under `seed`.
std::uint64_t generation_seed(std::uint64_t seed);

const char* report_label(ModelKind kind);

struct ModelOutcome {
    ModelKind kind = ModelKind::vrnn;
    std::vector<LossBreakdown> history;
    std::size_t best_epoch = 0;
    double distance = 0.0;
    double decay = 0.0;  // fraction of generated data whose last-step peak is below the first
    Dataset generated;
};

struct ExperimentOutcome {
    std::uint64_t seed = 0;
    Dataset pool;
    Dataset train;
    Dataset support;
    std::vector<ModelOutcome> models;
    SimilarityReport report;

    const ModelOutcome& model(ModelKind kind) const;
};

/// Pool, subsample, support set, training of every configured model, generation and the moment report
/// for one seed. When out_dir is non-empty every artifact is written there.
ExperimentOutcome run_experiment(const ExperimentConfig& config, std::uint64_t seed,
                                 const std::filesystem::path& out_dir = {}, std::ostream* log = nullptr);

}  // namespace svrnn
