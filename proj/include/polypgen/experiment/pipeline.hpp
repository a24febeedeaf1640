#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "polypgen/experiment/config.hpp"
#include "polypgen/experiment/generation.hpp"
#include "polypgen/experiment/report.hpp"

// Stage functions over one run directory:
//   runs/<id>/config.toml      resolved configuration
//   runs/<id>/checkpoints/     autoencoders, denoiser snapshots, segmenter
//   runs/<id>/samples/         generated masks, synthetic pairs, galleries
//   runs/<id>/reports/         checkpoint tables, sweep / three-way / final reports
// Each stage reads what earlier stages wrote, so the CLI can run them one at
// a time and run_pipeline() chains them.
namespace polypgen::experiment {

/// Exclusive lock on a run directory, held for the object's lifetime.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& run_dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path path_;
};

struct RunDir {
    std::filesystem::path root;

    std::filesystem::path config() const { return root / "config.toml"; }
    std::filesystem::path checkpoints() const { return root / "checkpoints"; }
    std::filesystem::path samples() const { return root / "samples"; }
    std::filesystem::path reports() const { return root / "reports"; }
    std::filesystem::path generated_masks() const { return samples() / "masks"; }
    std::filesystem::path synthetic() const { return samples() / "synthetic"; }

    /// Creates the layout and writes the resolved config.
    static RunDir prepare(const ExperimentConfig& cfg);
};

struct DataSplits {
    data::PairedDataset train;  // real pairs for generator and segmenter training
    data::PairedDataset test;
};

/// Deterministic real-data splits for the configured source.
DataSplits load_data(const ExperimentConfig& cfg);

std::string_view stage_model_name(denoiser::ModelKind kind);  // "mask_model" / "image_model"

/// Latent mode only: a 1-channel autoencoder for masks and an image autoencoder.
void stage_train_autoencoders(const ExperimentConfig& cfg, const RunDir& run);
std::optional<latent::Autoencoder> load_stage_autoencoder(const RunDir& run, denoiser::ModelKind kind);

/// Trains and writes step-labelled denoiser snapshots; returns their paths.
std::vector<std::filesystem::path> stage_train_generator(const ExperimentConfig& cfg, const RunDir& run,
                                                         denoiser::ModelKind kind);
/// FID (and SIM for masks) of every snapshot; writes the checkpoint table.
CheckpointTable stage_evaluate_generator(const ExperimentConfig& cfg, const RunDir& run, denoiser::ModelKind kind);
/// argmin-FID over the stored table; writes the selection.
metrics::CheckpointRecord stage_select(const RunDir& run, denoiser::ModelKind kind);

std::vector<BinaryMask> stage_generate_masks(const ExperimentConfig& cfg, const RunDir& run);
data::PairedDataset stage_generate_images(const ExperimentConfig& cfg, const RunDir& run);

/// Single segmenter on the real training split.
MetricReport stage_train_segmenter(const ExperimentConfig& cfg, const RunDir& run);
MetricReport stage_sweep(const ExperimentConfig& cfg, const RunDir& run);
MetricReport stage_three_way(const ExperimentConfig& cfg, const RunDir& run);
/// Merges checkpoint tables, sweep and three-way rows into reports/report.*.
MetricReport stage_report(const RunDir& run);

/// Every stage in order under one lock.
MetricReport run_pipeline(const ExperimentConfig& cfg);

/// JSON as written by eval-gen, or CSV with id, fid and optional sim columns.
CheckpointTable load_checkpoint_table(const std::filesystem::path& path);
std::vector<BinaryMask> load_mask_dir(const std::filesystem::path& dir);

}  // namespace polypgen::experiment
