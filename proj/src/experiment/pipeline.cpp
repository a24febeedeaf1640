#include "polypgen/experiment/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "polypgen/data/toy.hpp"
#include "polypgen/metrics/similarity.hpp"
#include "polypgen/seeding.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using polypgen::denoiser::ModelKind;

namespace polypgen::experiment {

namespace {

// Per-stage seed streams below the global seed.
namespace stage {
inline constexpr std::uint64_t mask_train = 101;
inline constexpr std::uint64_t image_train = 102;
inline constexpr std::uint64_t ae_mask = 103;
inline constexpr std::uint64_t ae_image = 104;
inline constexpr std::uint64_t evaluation = 105;
inline constexpr std::uint64_t gen_masks = 106;
inline constexpr std::uint64_t gen_images = 107;
inline constexpr std::uint64_t segmentation = 108;
}  // namespace stage

std::uint64_t stage_seed(const ExperimentConfig& cfg, std::uint64_t s) { return derive_seed(cfg.seed, s); }

bool needs_autoencoders(const ExperimentConfig& cfg) {
    return cfg.latent_mode || cfg.generation.features == metrics::FeatureKind::trained_encoder;
}

fs::path ae_path(const RunDir& run, ModelKind kind) {
    return run.checkpoints() / (kind == ModelKind::mask_model ? "ae_mask.pgae" : "ae_image.pgae");
}

fs::path table_path(const RunDir& run, ModelKind kind) {
    return run.reports() / (std::string(stage_model_name(kind)) + "_checkpoints.json");
}

fs::path selection_path(const RunDir& run, ModelKind kind) {
    return run.reports() / (std::string(stage_model_name(kind)) + "_selection.json");
}

fs::path snapshot_path(const RunDir& run, ModelKind kind, std::int64_t step) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_step%08lld.pgdn", std::string(stage_model_name(kind)).c_str(),
                  static_cast<long long>(step));
    return run.checkpoints() / name;
}

std::vector<fs::path> list_snapshots(const RunDir& run, ModelKind kind) {
    const std::string prefix = std::string(stage_model_name(kind)) + "_step";
    std::vector<fs::path> out;
    if (fs::is_directory(run.checkpoints()))
        for (const auto& e : fs::directory_iterator(run.checkpoints())) {
            const std::string name = e.path().filename().string();
            if (name.rfind(prefix, 0) == 0 && e.path().extension() == ".pgdn") out.push_back(e.path());
        }
    std::sort(out.begin(), out.end());
    if (out.empty())
        throw Error(ErrorCode::UnreadableFile, "no " + std::string(stage_model_name(kind)) + " checkpoints under " +
                                                   run.checkpoints().string());
    return out;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::UnreadableFile, path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IoFailure, path.string() + ": " + e.what());
    }
}

json record_json(const metrics::CheckpointRecord& r) {
    return json{{"id", r.id}, {"fid", r.fid}, {"sim", r.sim ? json(*r.sim) : json(nullptr)}};
}

metrics::CheckpointRecord record_from_json(const json& j) {
    metrics::CheckpointRecord r;
    r.id = j.at("id").get<std::int64_t>();
    r.fid = j.at("fid").get<double>();
    if (!j.at("sim").is_null()) r.sim = j.at("sim").get<double>();
    return r;
}

std::unique_ptr<latent::Generator> load_generator(const RunDir& run, ModelKind kind, const fs::path& ckpt_path) {
    const auto ckpt = denoiser::load_checkpoint(ckpt_path);
    if (ckpt.kind != kind) throw Error(ErrorCode::WrongModelKind, ckpt_path.string());
    return latent::make_generator(ckpt, ckpt.latent ? load_stage_autoencoder(run, kind) : std::nullopt);
}

std::unique_ptr<latent::Generator> selected_generator(const RunDir& run, ModelKind kind) {
    const json sel = read_json(selection_path(run, kind));
    return load_generator(run, kind, run.checkpoints() / sel.at("checkpoint").get<std::string>());
}

metrics::FeatureExtractor feature_extractor(const ExperimentConfig& cfg, const RunDir& run, ModelKind kind) {
    if (cfg.generation.features == metrics::FeatureKind::downsample_pixels)
        return metrics::FeatureExtractor::downsample_pixels();
    auto ae = load_stage_autoencoder(run, kind);
    if (!ae) throw Error(ErrorCode::UnreadableFile, ae_path(run, kind).string() + " (run train-ae first)");
    return metrics::FeatureExtractor::trained_encoder(std::make_shared<const latent::Autoencoder>(std::move(*ae)),
                                                      cfg.data.resolution);
}

seg::SegTrainConfig seg_config(const ExperimentConfig& cfg) {
    seg::SegTrainConfig s = cfg.seg;
    s.arch.in_channels = cfg.data.channels;
    s.seed = stage_seed(cfg, stage::segmentation);
    return s;
}

data::PairedDataset load_synthetic(const ExperimentConfig& cfg, const RunDir& run) {
    return data::load_paired_dataset(run.synthetic(), cfg.data.resolution, cfg.data.mask_threshold, cfg.data.channels);
}

std::size_t gallery_count(const ExperimentConfig& cfg, std::size_t available) {
    return std::min(cfg.generation.gallery_cells, available);
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

// Header row names the columns; id and fid are required, sim, table and
// sample_count are optional, anything else is ignored.
CheckpointTable read_table_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::UnreadableFile, path.string());
    const auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        return cells;
    };
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::EmptyList, path.string() + " is empty");
    const auto header = split(line);
    const auto col = [&](std::string_view name) {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    };
    const int id_col = col("id"), fid_col = col("fid"), sim_col = col("sim"), name_col = col("table"),
              n_col = col("sample_count");
    require(id_col >= 0 && fid_col >= 0, ErrorCode::InvalidConfig, path.string() + ": needs id and fid columns");
    CheckpointTable t;
    t.name = path.stem().string();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line);
        const auto cell = [&](int c) { return c >= 0 && c < static_cast<int>(cells.size()) ? cells[c] : std::string{}; };
        require(static_cast<int>(cells.size()) > std::max(id_col, fid_col), ErrorCode::InvalidConfig,
                path.string() + ": short row '" + line + "'");
        metrics::CheckpointRecord r;
        try {
            r.id = std::stoll(cells[id_col]);
            r.fid = std::stod(cells[fid_col]);
            if (!cell(sim_col).empty()) r.sim = std::stod(cell(sim_col));
            if (!cell(n_col).empty()) t.sample_count = std::stoull(cell(n_col));
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::InvalidConfig, path.string() + ": bad row '" + line + "'");
        }
        if (!cell(name_col).empty()) t.name = cell(name_col);
        t.records.push_back(r);
    }
    return t;
}

}  // namespace

std::string_view stage_model_name(ModelKind kind) { return denoiser::model_kind_name(kind); }

RunLock::RunLock(const fs::path& run_dir) : path_(run_dir / ".lock") {
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) throw Error(ErrorCode::Locked, run_dir.string() + " is in use (remove " + path_.string() + " if stale)");
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

RunLock::~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

RunDir RunDir::prepare(const ExperimentConfig& cfg) {
    RunDir run{cfg.run_dir()};
    std::error_code ec;
    for (const auto& d : {run.checkpoints(), run.samples(), run.reports()}) {
        fs::create_directories(d, ec);
        if (ec) throw Error(ErrorCode::IoFailure, d.string() + ": " + ec.message());
    }
    std::ofstream out(run.config(), std::ios::binary);
    out << format_config(cfg);
    if (!out) throw Error(ErrorCode::IoFailure, run.config().string());
    return run;
}

DataSplits load_data(const ExperimentConfig& cfg) {
    const auto& d = cfg.data;
    data::PairedDataset all =
        d.source == DataSource::toy
            ? data::make_toy_dataset(d.toy_count, d.resolution, cfg.seed, "toy", d.channels)
            : data::load_paired_dataset(d.path, d.resolution, d.mask_threshold, d.channels);
    const std::uint64_t split_seed = derive_seed(cfg.seed, streams::split);
    DataSplits out;
    if (!d.test_path.empty()) {
        out.test = data::load_paired_dataset(d.test_path, d.resolution, d.mask_threshold, d.channels);
        const std::size_t n = d.train_count ? d.train_count : all.size();
        const std::vector<std::size_t> counts{n};
        out.train = data::split_dataset(all, counts, split_seed)[0];
    } else {
        if (all.size() <= d.test_count)
            throw Error(ErrorCode::InsufficientData, "corpus of " + std::to_string(all.size()) +
                                                         " cannot hold out " + std::to_string(d.test_count));
        const std::size_t n = d.train_count ? d.train_count : all.size() - d.test_count;
        const std::vector<std::size_t> counts{n, d.test_count};
        auto parts = data::split_dataset(all, counts, split_seed);
        out.train = std::move(parts[0]);
        out.test = std::move(parts[1]);
    }
    if (out.test.empty()) throw Error(ErrorCode::EmptyDataset, "test split is empty");
    return out;
}

std::optional<latent::Autoencoder> load_stage_autoencoder(const RunDir& run, ModelKind kind) {
    const fs::path p = ae_path(run, kind);
    if (!fs::exists(p)) return std::nullopt;
    return latent::Autoencoder(latent::load_autoencoder(p));
}

void stage_train_autoencoders(const ExperimentConfig& cfg, const RunDir& run) {
    const DataSplits splits = load_data(cfg);
    std::vector<ImageTensor> masks;
    for (const auto& s : splits.train.samples) masks.push_back(mask_to_signed(s.mask));

    latent::AutoencoderArch mask_arch = cfg.ae;
    mask_arch.in_channels = 1;
    latent::AETrainConfig tc = cfg.ae_train;
    tc.seed = stage_seed(cfg, stage::ae_mask);
    auto mask_ae = latent::train_autoencoder(masks, mask_arch, tc);
    mask_ae.checkpoint.resolution = cfg.data.resolution;
    latent::save_autoencoder(mask_ae.checkpoint, ae_path(run, ModelKind::mask_model));
    spdlog::info("train-ae: mask autoencoder PSNR {:.2f} dB", mask_ae.train_psnr);

    latent::AutoencoderArch image_arch = cfg.ae;
    image_arch.in_channels = cfg.data.channels;
    tc.seed = stage_seed(cfg, stage::ae_image);
    auto image_ae = latent::train_autoencoder(splits.train, image_arch, tc);
    latent::save_autoencoder(image_ae.checkpoint, ae_path(run, ModelKind::image_model));
    spdlog::info("train-ae: image autoencoder PSNR {:.2f} dB", image_ae.train_psnr);
}

std::vector<fs::path> stage_train_generator(const ExperimentConfig& cfg, const RunDir& run, ModelKind kind) {
    const DataSplits splits = load_data(cfg);
    const GeneratorConfig& g = kind == ModelKind::mask_model ? cfg.mask : cfg.image;
    denoiser::TrainConfig tc = g.train;
    tc.seed = stage_seed(cfg, kind == ModelKind::mask_model ? stage::mask_train : stage::image_train);
    const auto log_step = [&](const denoiser::CurvePoint& p) {
        if (p.step % 100 == 0) spdlog::info("{} step {} loss {:.5f} (ema {:.5f})", stage_model_name(kind), p.step, p.loss, p.loss_ema);
    };

    denoiser::TrainResult result;
    if (cfg.latent_mode) {
        auto ae = load_stage_autoencoder(run, kind);
        if (!ae) throw Error(ErrorCode::UnreadableFile, ae_path(run, kind).string() + " (run train-ae first)");
        result = latent::train_latent_denoiser(splits.train, kind, *ae, g.diffusion, tc, g.arch, log_step);
    } else {
        result = denoiser::train_denoiser(splits.train, kind, g.diffusion, tc, g.arch, log_step);
    }
    // Stale snapshots from an earlier configuration would pollute selection.
    for (const auto& e : fs::directory_iterator(run.checkpoints())) {
        const std::string name = e.path().filename().string();
        if (name.rfind(std::string(stage_model_name(kind)) + "_step", 0) == 0) fs::remove(e.path());
    }
    std::vector<fs::path> paths;
    for (const auto& ck : result.checkpoints) {
        paths.push_back(snapshot_path(run, kind, ck.step));
        denoiser::save_checkpoint(ck, paths.back());
    }
    denoiser::write_curve_csv(result.curve, run.reports() / (std::string(stage_model_name(kind)) + "_curve.csv"));
    return paths;
}

CheckpointTable stage_evaluate_generator(const ExperimentConfig& cfg, const RunDir& run, ModelKind kind) {
    const DataSplits splits = load_data(cfg);
    const auto fx = feature_extractor(cfg, run, kind);
    const std::size_t n = cfg.generation.eval_samples;
    std::vector<std::uint64_t> seeds(n);
    const std::uint64_t base = stage_seed(cfg, stage::evaluation);
    for (std::size_t i = 0; i < n; ++i) seeds[i] = base + i;
    const auto real_masks = splits.train.masks();

    CheckpointTable table;
    table.name = std::string(stage_model_name(kind));
    table.sample_count = n;
    for (const auto& path : list_snapshots(run, kind)) {
        const auto gen = load_generator(run, kind, path);
        metrics::CheckpointRecord rec;
        rec.id = denoiser::load_checkpoint(path).step;
        if (kind == ModelKind::mask_model) {
            const auto raw = gen->sample({}, seeds);
            std::vector<BinaryMask> masks;
            for (const auto& s : raw) masks.push_back(binarize_sample(s));
            rec.fid = metrics::fid(std::span<const BinaryMask>(real_masks), masks, fx);
            rec.sim = metrics::SIM(real_masks, masks);
        } else {
            std::vector<BinaryMask> cond(n);
            for (std::size_t i = 0; i < n; ++i) cond[i] = real_masks[i % real_masks.size()];
            const auto images = gen->sample(cond, seeds);
            const auto real_images = splits.train.images();
            rec.fid = metrics::fid(std::span<const ImageTensor>(real_images), images, fx);
        }
        spdlog::info("eval-gen {} step {}: FID {:.4f}{}", table.name, rec.id, rec.fid,
                     rec.sim ? fmt::format(", SIM {:.2f}", *rec.sim) : std::string());
        table.records.push_back(rec);
    }
    json recs = json::array();
    for (const auto& r : table.records) recs.push_back(record_json(r));
    write_json(table_path(run, kind), json{{"schema_version", kReportSchemaVersion},
                                           {"name", table.name},
                                           {"sample_count", table.sample_count},
                                           {"records", recs}});
    write_checkpoint_csv(table, run.reports() / (table.name + "_checkpoints.csv"));
    return table;
}

CheckpointTable load_checkpoint_table(const fs::path& path) {
    if (path.extension() == ".csv") return read_table_csv(path);
    const json j = read_json(path);
    try {
        if (j.at("schema_version").get<int>() != kReportSchemaVersion)
            throw Error(ErrorCode::VersionMismatch, path.string());
        CheckpointTable t;
        t.name = j.at("name").get<std::string>();
        t.sample_count = j.at("sample_count").get<std::size_t>();
        for (const auto& r : j.at("records")) t.records.push_back(record_from_json(r));
        return t;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IoFailure, path.string() + ": " + e.what());
    }
}

metrics::CheckpointRecord stage_select(const RunDir& run, ModelKind kind) {
    const auto table = load_checkpoint_table(table_path(run, kind));
    const auto best = select_best_checkpoint(table.records);
    json sel = record_json(best);
    sel["checkpoint"] = snapshot_path(run, kind, best.id).filename().string();
    write_json(selection_path(run, kind), sel);
    spdlog::info("select {}: step {} (FID {:.4f})", stage_model_name(kind), best.id, best.fid);
    return best;
}

std::vector<BinaryMask> load_mask_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::UnreadableFile, dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<BinaryMask> out;
    for (const auto& f : files) out.push_back(data::read_mask_png(f));
    return out;
}

std::vector<BinaryMask> stage_generate_masks(const ExperimentConfig& cfg, const RunDir& run) {
    const auto gen = selected_generator(run, ModelKind::mask_model);
    MaskGenerationLog log;
    const auto masks = generate_masks(*gen, cfg.generation.masks, stage_seed(cfg, stage::gen_masks), &log);
    std::error_code ec;
    fs::remove_all(run.generated_masks(), ec);
    fs::create_directories(run.generated_masks(), ec);
    for (std::size_t i = 0; i < masks.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "mask_%05zu.png", i);
        data::write_mask_png(run.generated_masks() / name, masks[i]);
    }
    write_json(run.reports() / "mask_generation.json",
               json{{"count", masks.size()}, {"rejected", log.rejected}, {"still_empty", log.still_empty},
                    {"generator_digest", gen->digest()}});

    const std::size_t k = gallery_count(cfg, masks.size());
    if (k > 0) {
        const int rows = k > 1 ? 2 : 1;
        const int cols = static_cast<int>((k + rows - 1) / rows);
        emit_gallery(std::span<const BinaryMask>(masks.data(), k), rows, cols, run.samples() / "gallery_masks.png");

        // Generated masks over their closest training masks, captioned with sim.
        const auto reals = load_data(cfg).train.masks();
        std::vector<BinaryMask> cells(2 * k);
        std::vector<std::string> captions(2 * k);
        for (std::size_t i = 0; i < k; ++i) {
            const auto m = metrics::closest_real(masks[i], reals);
            cells[i] = masks[i];
            captions[i] = "G" + std::to_string(i);
            cells[k + i] = reals[m.index];
            captions[k + i] = fixed2(m.sim);
        }
        emit_gallery(std::span<const BinaryMask>(cells), 2, static_cast<int>(k), run.samples() / "gallery_similarity.png",
                     captions);
    }
    return masks;
}

data::PairedDataset stage_generate_images(const ExperimentConfig& cfg, const RunDir& run) {
    const auto gen = selected_generator(run, ModelKind::image_model);
    const auto masks = load_mask_dir(run.generated_masks());
    if (masks.empty()) throw Error(ErrorCode::EmptyDataset, "no generated masks (run gen-masks first)");
    const std::uint64_t seed = stage_seed(cfg, stage::gen_images);
    const std::vector<std::uint64_t> seeds{seed};
    auto samples = generate_conditioned_images(*gen, masks, seeds, "syn");
    std::error_code ec;
    fs::remove_all(run.synthetic(), ec);
    data::write_generated_dataset(samples, run.synthetic(), {gen->digest(), seed});

    const std::size_t k = gallery_count(cfg, samples.size());
    if (k > 0) {
        std::vector<ImageTensor> cells;
        for (std::size_t i = 0; i < k; ++i) cells.push_back(mask_to_signed(samples[i].mask));
        for (std::size_t i = 0; i < k; ++i) cells.push_back(samples[i].image);
        emit_gallery(std::span<const ImageTensor>(cells), 2, static_cast<int>(k), run.samples() / "gallery_pairs.png");

        // One mask, several noise draws per row.
        constexpr int kDraws = 4;
        const std::size_t rows = std::min<std::size_t>(2, masks.size());
        std::vector<ImageTensor> grid;
        for (std::size_t r = 0; r < rows; ++r) {
            const std::vector<BinaryMask> same(kDraws, masks[r]);
            std::vector<std::uint64_t> draw_seeds(kDraws);
            for (int d = 0; d < kDraws; ++d) draw_seeds[d] = derive_seed(seed + r, 2000 + static_cast<std::uint64_t>(d));
            grid.push_back(mask_to_signed(masks[r]));
            for (auto& img : gen->sample(same, draw_seeds)) grid.push_back(std::move(img));
        }
        emit_gallery(std::span<const ImageTensor>(grid), static_cast<int>(rows), kDraws + 1,
                     run.samples() / "gallery_seeds.png");
    }
    return load_synthetic(cfg, run);
}

MetricReport stage_train_segmenter(const ExperimentConfig& cfg, const RunDir& run) {
    const DataSplits splits = load_data(cfg);
    const auto scfg = seg_config(cfg);
    const auto trained = seg::train_segmenter(splits.train, scfg);
    seg::save_segmenter(trained.best, run.checkpoints() / "segmenter.pgsg");
    const auto ev = seg::evaluate_segmenter(trained.best, splits.test);
    seg::write_audit_csv(ev.per_image, run.reports() / "train_seg_audit.csv");
    MetricReport report;
    report.rows.push_back({"train_seg_real", std::string(seg::seg_model_name(scfg.arch.kind)), splits.train.size(), 0,
                           ev.micro, ev.imagewise});
    report.best_row = best_imagewise_row(report.rows);
    emit_report(report, run.reports(), "train_seg");
    return report;
}

MetricReport stage_sweep(const ExperimentConfig& cfg, const RunDir& run) {
    const DataSplits splits = load_data(cfg);
    const auto synth = load_synthetic(cfg, run);
    auto report = run_mixing_sweep(splits.train, synth, cfg.mixing, seg_config(cfg), splits.test, {cfg.parallelism});
    emit_report(report, run.reports(), "sweep");
    return report;
}

MetricReport stage_three_way(const ExperimentConfig& cfg, const RunDir& run) {
    const DataSplits splits = load_data(cfg);
    const auto synth = load_synthetic(cfg, run);
    auto report = run_three_way(splits.train, synth, splits.test, seg_config(cfg), {cfg.parallelism});
    emit_report(report, run.reports(), "three_way");
    return report;
}

MetricReport stage_report(const RunDir& run) {
    MetricReport report;
    for (ModelKind kind : {ModelKind::mask_model, ModelKind::image_model})
        if (fs::exists(table_path(run, kind))) report.checkpoint_tables.push_back(load_checkpoint_table(table_path(run, kind)));
    for (const char* stem : {"sweep", "three_way"}) {
        const fs::path p = run.reports() / (std::string(stem) + ".json");
        if (!fs::exists(p)) continue;
        const auto part = load_report_json(p);
        report.rows.insert(report.rows.end(), part.rows.begin(), part.rows.end());
    }
    report.best_row = best_imagewise_row(report.rows);
    emit_report(report, run.reports(), "report");
    return report;
}

MetricReport run_pipeline(const ExperimentConfig& cfg) {
    cfg.validate();
    RunLock lock(cfg.run_dir());
    const RunDir run = RunDir::prepare(cfg);
    if (needs_autoencoders(cfg)) stage_train_autoencoders(cfg, run);
    for (ModelKind kind : {ModelKind::mask_model, ModelKind::image_model}) {
        stage_train_generator(cfg, run, kind);
        stage_evaluate_generator(cfg, run, kind);
        stage_select(run, kind);
    }
    stage_generate_masks(cfg, run);
    stage_generate_images(cfg, run);
    stage_sweep(cfg, run);
    stage_three_way(cfg, run);
    return stage_report(run);
}

}  // namespace polypgen::experiment
