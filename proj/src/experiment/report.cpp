#include "polypgen/experiment/report.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <limits>
#include <string_view>

#include <nlohmann/json.hpp>

#include "polypgen/data/dataset.hpp"
#include "polypgen/io/png.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace polypgen::experiment {

namespace {

json metrics_json(const seg::SegMetricSet& m) {
    return json{{"iou", m.iou}, {"f1", m.f1}, {"accuracy", m.accuracy}, {"precision", m.precision}};
}

seg::SegMetricSet metrics_from_json(const json& j) {
    return {j.at("iou").get<double>(), j.at("f1").get<double>(), j.at("accuracy").get<double>(),
            j.at("precision").get<double>()};
}

json report_json(const MetricReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back(json{{"experiment_id", row.experiment_id},
                            {"model", row.model},
                            {"real_n", row.real_n},
                            {"synth_n", row.synth_n},
                            {"micro", metrics_json(row.micro)},
                            {"imagewise", metrics_json(row.imagewise)}});
    json tables = json::array();
    for (const auto& t : r.checkpoint_tables) {
        json recs = json::array();
        for (const auto& rec : t.records)
            recs.push_back(json{{"id", rec.id}, {"fid", rec.fid}, {"sim", rec.sim ? json(*rec.sim) : json(nullptr)}});
        tables.push_back(json{{"name", t.name}, {"sample_count", t.sample_count}, {"records", recs}});
    }
    return json{{"schema_version", r.schema_version},
                {"rows", rows},
                {"checkpoint_tables", tables},
                {"best_row", r.best_row ? json(*r.best_row) : json(nullptr)}};
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out.precision(std::numeric_limits<double>::max_digits10);
    return out;
}

void finish(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

// 3×5 bitmap glyphs, rows top to bottom.
constexpr std::string_view kGlyphChars = "0123456789.-:%=/_ABCDEFGHIJKLMNOPQRSTUVWXYZ";
constexpr std::array<std::string_view, 43> kGlyphs = {
    "111101101101111", "010110010010111", "111001111100111", "111001111001111", "101101111001001",
    "111100111001111", "111100111101111", "111001001010010", "111101111101111", "111101111001111",
    "000000000000010", "000000111000000", "000010000010000", "101001010100101", "000111000111000",
    "001001010100100", "000000000000111", "010101111101101", "110101110101110", "011100100100011",
    "110101101101110", "111100110100111", "111100110100100", "011100101101011", "101101111101101",
    "111010010010111", "001001001101010", "101101110101101", "100100100100111", "101111111101101",
    "110101101101101", "010101101101010", "110101110100100", "010101101110011", "110101110101101",
    "011100010001110", "111010010010010", "101101101101111", "101101101101010", "101101111111101",
    "101101010101101", "101101010010010", "111001010100111"};

constexpr int kGlyphW = 3, kGlyphH = 5, kAdvance = 4;

void draw_text(io::Image8& img, int x0, int y0, int max_width, std::string_view text) {
    int x = x0;
    for (char ch : text) {
        if (x + kGlyphW > x0 + max_width) break;
        const auto pos = kGlyphChars.find(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
        if (pos != std::string_view::npos) {
            const auto glyph = kGlyphs[pos];
            for (int gy = 0; gy < kGlyphH; ++gy)
                for (int gx = 0; gx < kGlyphW; ++gx) {
                    if (glyph[static_cast<std::size_t>(gy * kGlyphW + gx)] != '1') continue;
                    const std::size_t p = (static_cast<std::size_t>(y0 + gy) * img.width + (x + gx)) * 3;
                    img.pixels[p] = img.pixels[p + 1] = img.pixels[p + 2] = 255;
                }
        }
        x += kAdvance;
    }
}

}  // namespace

ReportPaths emit_report(const MetricReport& report, const fs::path& out_dir, const std::string& stem) {
    ReportPaths paths{out_dir / (stem + ".csv"), out_dir / (stem + ".json")};
    {
        auto out = open_out(paths.csv);
        out << "schema_version,experiment_id,model,real_n,synth_n,micro_iou,micro_f1,micro_accuracy,micro_precision,"
               "imagewise_iou,imagewise_f1,imagewise_accuracy,imagewise_precision,best\n";
        for (std::size_t i = 0; i < report.rows.size(); ++i) {
            const auto& r = report.rows[i];
            out << report.schema_version << ',' << r.experiment_id << ',' << r.model << ',' << r.real_n << ',' << r.synth_n
                << ',' << r.micro.iou << ',' << r.micro.f1 << ',' << r.micro.accuracy << ',' << r.micro.precision << ','
                << r.imagewise.iou << ',' << r.imagewise.f1 << ',' << r.imagewise.accuracy << ',' << r.imagewise.precision
                << ',' << (report.best_row == i ? 1 : 0) << '\n';
        }
        finish(out, paths.csv);
    }
    {
        auto out = open_out(paths.json);
        out << report_json(report).dump(2) << '\n';
        finish(out, paths.json);
    }
    return paths;
}

MetricReport load_report_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::UnreadableFile, path.string());
    try {
        const json j = json::parse(in);
        MetricReport r;
        r.schema_version = j.at("schema_version").get<int>();
        if (r.schema_version != kReportSchemaVersion)
            throw Error(ErrorCode::VersionMismatch, path.string() + ": report schema " + std::to_string(r.schema_version));
        for (const auto& row : j.at("rows"))
            r.rows.push_back({row.at("experiment_id").get<std::string>(), row.at("model").get<std::string>(),
                              row.at("real_n").get<std::size_t>(), row.at("synth_n").get<std::size_t>(),
                              metrics_from_json(row.at("micro")), metrics_from_json(row.at("imagewise"))});
        for (const auto& t : j.at("checkpoint_tables")) {
            CheckpointTable table;
            table.name = t.at("name").get<std::string>();
            table.sample_count = t.at("sample_count").get<std::size_t>();
            for (const auto& rec : t.at("records")) {
                metrics::CheckpointRecord c;
                c.id = rec.at("id").get<std::int64_t>();
                c.fid = rec.at("fid").get<double>();
                if (!rec.at("sim").is_null()) c.sim = rec.at("sim").get<double>();
                table.records.push_back(c);
            }
            r.checkpoint_tables.push_back(std::move(table));
        }
        if (!j.at("best_row").is_null()) r.best_row = j.at("best_row").get<std::size_t>();
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IoFailure, path.string() + ": malformed report: " + e.what());
    }
}

void write_checkpoint_csv(const CheckpointTable& table, const fs::path& path) {
    auto out = open_out(path);
    out << "schema_version,table,id,fid,sim,sample_count\n";
    for (const auto& r : table.records) {
        out << kReportSchemaVersion << ',' << table.name << ',' << r.id << ',' << r.fid << ',';
        if (r.sim) out << *r.sim;
        out << ',' << table.sample_count << '\n';
    }
    finish(out, path);
}

fs::path emit_gallery(std::span<const ImageTensor> cells, int rows, int cols, const fs::path& out,
                      std::span<const std::string> captions) {
    require(rows >= 1 && cols >= 1, ErrorCode::InvalidConfig, "gallery grid must be at least 1x1");
    require(!cells.empty(), ErrorCode::EmptyList, "gallery needs at least one cell");
    require(cells.size() <= static_cast<std::size_t>(rows) * cols, ErrorCode::ShapeMismatch, "more cells than grid slots");
    require(captions.empty() || captions.size() == cells.size(), ErrorCode::ShapeMismatch, "one caption per cell");
    const int h = cells.front().height, w = cells.front().width;
    const int band = captions.empty() ? 0 : kCaptionBand;
    io::Image8 img{cols * w, rows * (h + band), 3, {}};
    img.pixels.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const ImageTensor& cell = cells[i];
        require(cell.height == h && cell.width == w && (cell.channels == 1 || cell.channels == 3), ErrorCode::ShapeMismatch,
                "gallery cells must share a size and have 1 or 3 channels");
        const int gy = static_cast<int>(i) / cols, gx = static_cast<int>(i) % cols;
        const int oy = gy * (h + band), ox = gx * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c) {
                    const double v = cell.at(cell.channels == 1 ? 0 : c, y, x);
                    img.pixels[(static_cast<std::size_t>(oy + y) * img.width + ox + x) * 3 + c] = data::signed_to_u8(v);
                }
        if (band > 0) draw_text(img, ox + 1, oy + h + 2, w - 1, captions[i]);
    }
    if (out.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(out.parent_path(), ec);
    }
    io::write_png(out, img);
    return out;
}

fs::path emit_gallery(std::span<const BinaryMask> cells, int rows, int cols, const fs::path& out,
                      std::span<const std::string> captions) {
    std::vector<ImageTensor> grids;
    grids.reserve(cells.size());
    for (const auto& m : cells) grids.push_back(mask_to_signed(m));
    return emit_gallery(std::span<const ImageTensor>(grids), rows, cols, out, captions);
}

}  // namespace polypgen::experiment
