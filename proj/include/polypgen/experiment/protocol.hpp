#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "polypgen/data/dataset.hpp"
#include "polypgen/metrics/fid.hpp"
#include "polypgen/seg/segmenter.hpp"

namespace polypgen::experiment {

struct MixingPlan {
    std::size_t real_count = 0;
    std::vector<std::size_t> synthetic_counts;  // ascending

    void validate() const;
};

/// The i/ii/iii comparison at toy or full scale.
struct MetricRow {
    std::string experiment_id;
    std::string model;
    std::size_t real_n = 0;
    std::size_t synth_n = 0;
    seg::SegMetricSet micro;
    seg::SegMetricSet imagewise;
    friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

struct CheckpointTable {
    std::string name;  // e.g. "mask_model"
    std::vector<metrics::CheckpointRecord> records;
    std::size_t sample_count = 0;  // items per side in each FID
    friend bool operator==(const CheckpointTable&, const CheckpointTable&) = default;
};

inline constexpr int kReportSchemaVersion = 1;

struct MetricReport {
    int schema_version = kReportSchemaVersion;
    std::vector<MetricRow> rows;
    std::vector<CheckpointTable> checkpoint_tables;
    std::optional<std::size_t> best_row;  // highest micro-imagewise IoU
    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Index of the row with the highest micro-imagewise IoU (earliest on ties).
std::optional<std::size_t> best_imagewise_row(const std::vector<MetricRow>& rows);

/// Training set = the first real_count real samples followed by the first
/// `synthetic` synthetic samples; both prefixes are stable across k.
data::PairedDataset mix_training_set(const data::PairedDataset& real, std::size_t real_count,
                                     const data::PairedDataset& synth, std::size_t synthetic);

struct SweepOptions {
    int parallelism = 1;  // independent rows trained concurrently
};

/// One row per synthetic count: train on the mix, evaluate on `test`.
/// Row k trains with seed derive_seed(scfg.seed + k, sweep).
MetricReport run_mixing_sweep(const data::PairedDataset& real, const data::PairedDataset& synth, const MixingPlan& plan,
                              const seg::SegTrainConfig& scfg, const data::PairedDataset& test,
                              const SweepOptions& opts = {});

/// Rows: real only, synthetic only, combined.
MetricReport run_three_way(const data::PairedDataset& real, const data::PairedDataset& synth,
                           const data::PairedDataset& test, const seg::SegTrainConfig& scfg,
                           const SweepOptions& opts = {});

}  // namespace polypgen::experiment
