#include "polypgen/experiment/protocol.hpp"

#include <algorithm>
#include <future>

#include <spdlog/spdlog.h>

#include "polypgen/seeding.hpp"

namespace polypgen::experiment {

void MixingPlan::validate() const {
    require(!synthetic_counts.empty(), ErrorCode::InvalidConfig, "mixing plan needs at least one synthetic count");
    require(std::is_sorted(synthetic_counts.begin(), synthetic_counts.end()), ErrorCode::InvalidConfig,
            "synthetic counts must be ascending");
    require(real_count + synthetic_counts.front() > 0, ErrorCode::InvalidConfig, "a sweep row would have no training data");
}

std::optional<std::size_t> best_imagewise_row(const std::vector<MetricRow>& rows) {
    if (rows.empty()) return std::nullopt;
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].imagewise.iou > rows[best].imagewise.iou) best = i;
    return best;
}

data::PairedDataset mix_training_set(const data::PairedDataset& real, std::size_t real_count,
                                     const data::PairedDataset& synth, std::size_t synthetic) {
    if (real.size() < real_count)
        throw Error(ErrorCode::InsufficientData,
                    "need " + std::to_string(real_count) + " real samples, have " + std::to_string(real.size()));
    if (synth.size() < synthetic)
        throw Error(ErrorCode::InsufficientData,
                    "need " + std::to_string(synthetic) + " synthetic samples, have " + std::to_string(synth.size()));
    data::PairedDataset mix;
    mix.resolution = real_count > 0 ? real.resolution : synth.resolution;
    mix.samples.reserve(real_count + synthetic);
    mix.samples.insert(mix.samples.end(), real.samples.begin(), real.samples.begin() + static_cast<std::ptrdiff_t>(real_count));
    mix.samples.insert(mix.samples.end(), synth.samples.begin(), synth.samples.begin() + static_cast<std::ptrdiff_t>(synthetic));
    return mix;
}

namespace {

struct Job {
    std::string id;
    std::size_t real_n;
    std::size_t synth_n;
    std::uint64_t seed;
};

MetricRow run_job(const Job& job, const data::PairedDataset& real, const data::PairedDataset& synth,
                  const seg::SegTrainConfig& base, const data::PairedDataset& test) {
    const auto train = mix_training_set(real, job.real_n, synth, job.synth_n);
    seg::SegTrainConfig cfg = base;
    cfg.seed = job.seed;
    spdlog::info("{}: training {} on {} real + {} synthetic", job.id, seg::seg_model_name(cfg.arch.kind), job.real_n,
                 job.synth_n);
    const auto trained = seg::train_segmenter(train, cfg);
    const auto ev = seg::evaluate_segmenter(trained.best, test);
    return {job.id, std::string(seg::seg_model_name(cfg.arch.kind)), job.real_n, job.synth_n, ev.micro, ev.imagewise};
}

std::vector<MetricRow> run_jobs(const std::vector<Job>& jobs, const data::PairedDataset& real,
                                const data::PairedDataset& synth, const seg::SegTrainConfig& cfg,
                                const data::PairedDataset& test, int parallelism) {
    cfg.validate();
    if (test.empty()) throw Error(ErrorCode::EmptyDataset, "segmentation test set is empty");
    for (const auto& j : jobs) {  // fail before any training starts
        if (real.size() < j.real_n || synth.size() < j.synth_n)
            throw Error(ErrorCode::InsufficientData, j.id + ": not enough real or synthetic samples");
    }
    std::vector<MetricRow> rows(jobs.size());
    const std::size_t width = static_cast<std::size_t>(std::max(1, parallelism));
    for (std::size_t start = 0; start < jobs.size(); start += width) {
        const std::size_t end = std::min(jobs.size(), start + width);
        std::vector<std::future<MetricRow>> running;
        for (std::size_t i = start; i < end; ++i)
            running.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred,
                                         [&, i] { return run_job(jobs[i], real, synth, cfg, test); }));
        for (std::size_t i = start; i < end; ++i) rows[i] = running[i - start].get();
    }
    return rows;
}

}  // namespace

MetricReport run_mixing_sweep(const data::PairedDataset& real, const data::PairedDataset& synth, const MixingPlan& plan,
                              const seg::SegTrainConfig& scfg, const data::PairedDataset& test, const SweepOptions& opts) {
    plan.validate();
    if (real.size() < plan.real_count || synth.size() < plan.synthetic_counts.back())
        throw Error(ErrorCode::InsufficientData, "mixing plan asks for more samples than available");
    std::vector<Job> jobs;
    for (auto k : plan.synthetic_counts)
        jobs.push_back({"sweep_r" + std::to_string(plan.real_count) + "_s" + std::to_string(k), plan.real_count, k,
                        derive_seed(scfg.seed + k, streams::sweep)});
    MetricReport report;
    report.rows = run_jobs(jobs, real, synth, scfg, test, opts.parallelism);
    report.best_row = best_imagewise_row(report.rows);
    return report;
}

MetricReport run_three_way(const data::PairedDataset& real, const data::PairedDataset& synth,
                           const data::PairedDataset& test, const seg::SegTrainConfig& scfg, const SweepOptions& opts) {
    if (real.empty() || synth.empty()) throw Error(ErrorCode::InsufficientData, "three-way comparison needs real and synthetic data");
    const std::vector<Job> jobs{
        {"three_way_real", real.size(), 0, derive_seed(scfg.seed, streams::sweep)},
        {"three_way_synthetic", 0, synth.size(), derive_seed(scfg.seed + 1, streams::sweep)},
        {"three_way_combined", real.size(), synth.size(), derive_seed(scfg.seed + 2, streams::sweep)},
    };
    MetricReport report;
    report.rows = run_jobs(jobs, real, synth, scfg, test, opts.parallelism);
    report.best_row = best_imagewise_row(report.rows);
    return report;
}

}  // namespace polypgen::experiment
