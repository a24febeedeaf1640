// Command-line front end: one subcommand per pipeline stage plus a few
// standalone utilities. Failures print {"error": CODE, "message": ...} on
// stderr and exit with status 2.
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "polypgen/data/toy.hpp"
#include "polypgen/experiment/pipeline.hpp"
#include "polypgen/io/png.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace polypgen;
using polypgen::denoiser::ModelKind;

namespace {

json metrics_json(const seg::SegMetricSet& m) {
    return {{"iou", m.iou}, {"f1", m.f1}, {"accuracy", m.accuracy}, {"precision", m.precision}};
}

json report_summary(const experiment::MetricReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"experiment_id", row.experiment_id}, {"real_n", row.real_n}, {"synth_n", row.synth_n},
                        {"micro", metrics_json(row.micro)}, {"imagewise", metrics_json(row.imagewise)}});
    return {{"rows", rows}, {"best_row", r.best_row ? json(*r.best_row) : json(nullptr)}};
}

json record_json(const metrics::CheckpointRecord& r) {
    return {{"id", r.id}, {"fid", r.fid}, {"sim", r.sim ? json(*r.sim) : json(nullptr)}};
}

ModelKind parse_kind(const std::string& s) {
    if (s == "mask") return ModelKind::mask_model;
    if (s == "image") return ModelKind::image_model;
    return denoiser::parse_model_kind(s);
}

struct Session {
    experiment::ExperimentConfig cfg;
    experiment::RunDir run;
};

int emit(const json& j) {
    std::cout << j.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage diffusion data generation and segmentation benchmark"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

    std::string config_path;
    int parallelism = 0;
    std::string model = "mask";
    const auto with_config = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
    };

    // Subcommands that operate on a run directory.
    std::vector<std::pair<CLI::App*, std::function<json(Session&)>>> stages;
    const auto stage = [&](const std::string& name, const std::string& help, std::function<json(Session&)> fn) {
        CLI::App* sub = app.add_subcommand(name, help);
        with_config(sub);
        stages.emplace_back(sub, std::move(fn));
        return sub;
    };

    stage("train-ae", "train the mask and image autoencoders", [](Session& s) {
        experiment::stage_train_autoencoders(s.cfg, s.run);
        return json{{"checkpoints", s.run.checkpoints().string()}};
    });
    stage("train-mask", "train the unconditional mask model", [](Session& s) {
        json paths = json::array();
        for (const auto& p : experiment::stage_train_generator(s.cfg, s.run, ModelKind::mask_model)) paths.push_back(p.string());
        return json{{"checkpoints", paths}};
    });
    stage("train-image", "train the mask-conditioned image model", [](Session& s) {
        json paths = json::array();
        for (const auto& p : experiment::stage_train_generator(s.cfg, s.run, ModelKind::image_model)) paths.push_back(p.string());
        return json{{"checkpoints", paths}};
    });
    stage("eval-gen", "FID/SIM of every stored generator checkpoint", [&](Session& s) {
        const auto table = experiment::stage_evaluate_generator(s.cfg, s.run, parse_kind(model));
        json recs = json::array();
        for (const auto& r : table.records) recs.push_back(record_json(r));
        return json{{"table", table.name}, {"records", recs}};
    })->add_option("-m,--model", model, "mask or image");
    stage("gen-masks", "sample masks from the selected mask checkpoint", [](Session& s) {
        const auto masks = experiment::stage_generate_masks(s.cfg, s.run);
        return json{{"count", masks.size()}, {"dir", s.run.generated_masks().string()}};
    });
    stage("gen-images", "sample images conditioned on the generated masks", [](Session& s) {
        const auto ds = experiment::stage_generate_images(s.cfg, s.run);
        return json{{"count", ds.size()}, {"dir", s.run.synthetic().string()}};
    });
    stage("train-seg", "train and evaluate one segmenter on real data",
          [](Session& s) { return report_summary(experiment::stage_train_segmenter(s.cfg, s.run)); });
    stage("sweep", "fixed real count plus growing synthetic counts",
          [](Session& s) { return report_summary(experiment::stage_sweep(s.cfg, s.run)); });
    stage("three-way", "real only, synthetic only, combined",
          [](Session& s) { return report_summary(experiment::stage_three_way(s.cfg, s.run)); });
    stage("report", "merge checkpoint tables and segmentation rows",
          [](Session& s) { return report_summary(experiment::stage_report(s.run)); });
    for (auto& [sub, fn] : stages)
        if (sub->get_name() == "sweep" || sub->get_name() == "three-way")
            sub->add_option("-j,--parallelism", parallelism, "rows trained concurrently");

    // `run` takes its own lock inside run_pipeline.
    CLI::App* run_cmd = app.add_subcommand("run", "every stage in order");
    with_config(run_cmd);
    run_cmd->add_option("-j,--parallelism", parallelism, "rows trained concurrently");

    // select works on a run directory or on a standalone table.
    CLI::App* select_cmd = app.add_subcommand("select", "pick the lowest-FID checkpoint");
    std::string table_file;
    select_cmd->add_option("-c,--config", config_path, "experiment config file")->check(CLI::ExistingFile);
    select_cmd->add_option("-m,--model", model, "mask or image");
    select_cmd->add_option("-t,--table", table_file, "CSV (id,fid[,sim]) or checkpoint-table JSON")->check(CLI::ExistingFile);

    CLI::App* gallery_cmd = app.add_subcommand("gallery", "grid PNG of masks or images");
    std::string gallery_src, gallery_out;
    int rows = 2, cols = 5;
    bool gallery_masks = false;
    gallery_cmd->add_option("-i,--input", gallery_src, "dataset directory (images/ + masks/) or a directory of mask PNGs")
        ->required()
        ->check(CLI::ExistingDirectory);
    gallery_cmd->add_option("-o,--out", gallery_out, "output PNG")->required();
    gallery_cmd->add_option("--rows", rows)->check(CLI::PositiveNumber);
    gallery_cmd->add_option("--cols", cols)->check(CLI::PositiveNumber);
    gallery_cmd->add_flag("--masks", gallery_masks, "show masks instead of images");

    CLI::App* toy_cmd = app.add_subcommand("toy-data", "write a seeded blob-mask / shaded-image corpus");
    std::string toy_out;
    std::size_t toy_n = 100;
    int toy_res = 32;
    std::uint64_t toy_seed = 0;
    toy_cmd->add_option("-o,--out", toy_out)->required();
    toy_cmd->add_option("-n,--count", toy_n);
    toy_cmd->add_option("-r,--resolution", toy_res);
    toy_cmd->add_option("-s,--seed", toy_seed);

    CLI::App* defaults_cmd = app.add_subcommand("print-config", "resolved config (defaults, or --config merged)");
    defaults_cmd->add_option("-c,--config", config_path)->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        spdlog::set_level(spdlog::level::from_str(log_level));
        const auto load = [&] {
            auto cfg = experiment::load_config(config_path);
            if (parallelism > 0) cfg.parallelism = parallelism;
            cfg.validate();
            return cfg;
        };

        for (auto& [sub, fn] : stages) {
            if (!sub->parsed()) continue;
            Session s{load(), {}};
            experiment::RunLock lock(s.cfg.run_dir());
            s.run = experiment::RunDir::prepare(s.cfg);
            return emit(fn(s));
        }
        if (run_cmd->parsed()) return emit(report_summary(experiment::run_pipeline(load())));
        if (select_cmd->parsed()) {
            if (!table_file.empty()) {
                const auto table = experiment::load_checkpoint_table(table_file);
                return emit(record_json(experiment::select_best_checkpoint(table.records)));
            }
            if (config_path.empty()) throw Error(ErrorCode::InvalidConfig, "select needs --config or --table");
            const auto cfg = load();
            experiment::RunLock lock(cfg.run_dir());
            const auto run = experiment::RunDir::prepare(cfg);
            return emit(record_json(experiment::stage_select(run, parse_kind(model))));
        }
        if (gallery_cmd->parsed()) {
            const fs::path src(gallery_src);
            const std::size_t cap = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
            if (fs::is_directory(src / "images") && fs::is_directory(src / "masks")) {
                const auto ds = data::load_paired_dataset(src, io::read_png(fs::directory_iterator(src / "images")->path(), 1).height);
                std::vector<ImageTensor> cells;
                for (std::size_t i = 0; i < std::min(cap, ds.size()); ++i)
                    cells.push_back(gallery_masks ? mask_to_signed(ds.samples[i].mask) : ds.samples[i].image);
                experiment::emit_gallery(std::span<const ImageTensor>(cells), rows, cols, gallery_out);
            } else {
                auto masks = experiment::load_mask_dir(src);
                if (masks.size() > cap) masks.resize(cap);
                experiment::emit_gallery(std::span<const BinaryMask>(masks), rows, cols, gallery_out);
            }
            return emit(json{{"gallery", gallery_out}});
        }
        if (toy_cmd->parsed()) {
            const auto ds = data::make_toy_dataset(toy_n, toy_res, toy_seed);
            const auto manifest = data::write_generated_dataset(ds.samples, toy_out, {"toy", toy_seed});
            return emit(json{{"count", ds.size()}, {"manifest", manifest.string()}});
        }
        if (defaults_cmd->parsed()) {
            const auto cfg = config_path.empty() ? experiment::ExperimentConfig{} : experiment::load_config(config_path);
            std::cout << experiment::format_config(cfg);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << json{{"error", std::string(error_name(e.code()))}, {"message", e.detail()}}.dump() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "Internal"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    }
    return 1;
}
