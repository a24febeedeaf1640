#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "polypgen/denoiser/train.hpp"
#include "polypgen/experiment/protocol.hpp"
#include "polypgen/latent/autoencoder.hpp"
#include "polypgen/metrics/fid.hpp"
#include "polypgen/seg/segmenter.hpp"

// Flat `key = value` experiment configuration. `[section]` headers prefix the
// keys that follow them, so `[mask]` + `steps = 10` sets `mask.steps`. Values
// are numbers, true/false, strings (quotes optional) or `[a, b, ...]` lists.
namespace polypgen::experiment {

enum class DataSource { toy, directory };

struct DataConfig {
    DataSource source = DataSource::toy;
    std::filesystem::path path;       // directory source: images/ + masks/
    std::filesystem::path test_path;  // optional separate test corpus
    int resolution = 32;
    int channels = 3;
    std::size_t toy_count = 200;   // toy corpus size
    std::size_t train_count = 0;   // 0: everything not held out for testing
    std::size_t test_count = 40;   // ignored when test_path is set
    double mask_threshold = data::kDefaultMaskThreshold;
};

struct GeneratorConfig {
    diffusion::DiffusionConfig diffusion;
    denoiser::DenoiserArch arch;
    denoiser::TrainConfig train;
};

struct GenerationConfig {
    std::size_t masks = 100;        // synthetic pairs to produce
    std::size_t eval_samples = 50;  // draws per checkpoint for FID / SIM
    metrics::FeatureKind features = metrics::FeatureKind::downsample_pixels;
    std::size_t gallery_cells = 10;
};

struct ExperimentConfig {
    std::string run_id = "default";
    std::filesystem::path output_root = "runs";
    std::uint64_t seed = 0;
    bool latent_mode = false;
    int parallelism = 1;
    DataConfig data;
    GeneratorConfig mask;
    GeneratorConfig image;
    latent::AutoencoderArch ae;
    latent::AETrainConfig ae_train;
    GenerationConfig generation;
    seg::SegTrainConfig seg;
    MixingPlan mixing;

    ExperimentConfig();

    /// Value checks plus existence of referenced paths.
    void validate() const;
    std::filesystem::path run_dir() const { return output_root / run_id; }
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Every key with its resolved value in a fixed order; parsing the output
/// reproduces the same text.
std::string format_config(const ExperimentConfig& cfg);

std::string_view feature_kind_name(metrics::FeatureKind k);
metrics::FeatureKind parse_feature_kind(std::string_view s);

}  // namespace polypgen::experiment
