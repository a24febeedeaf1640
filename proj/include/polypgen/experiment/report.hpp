#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polypgen/experiment/protocol.hpp"

namespace polypgen::experiment {

struct ReportPaths {
    std::filesystem::path csv;
    std::filesystem::path json;
};

/// `<stem>.csv` (one line per row, schema_version as the first column) and
/// `<stem>.json` (rows, checkpoint tables, best row) under `out_dir`.
ReportPaths emit_report(const MetricReport& report, const std::filesystem::path& out_dir, const std::string& stem);
MetricReport load_report_json(const std::filesystem::path& path);

/// id,fid,sim per checkpoint; empty sim for image models.
void write_checkpoint_csv(const CheckpointTable& table, const std::filesystem::path& path);

inline constexpr int kCaptionBand = 9;  // pixels below each gallery row

/// rows × cols grid of equally sized cells (1- or 3-channel, [-1, 1]) as one
/// RGB PNG. With captions, each grid row gets a caption band underneath.
std::filesystem::path emit_gallery(std::span<const ImageTensor> cells, int rows, int cols,
                                   const std::filesystem::path& out,
                                   std::span<const std::string> captions = {});
std::filesystem::path emit_gallery(std::span<const BinaryMask> cells, int rows, int cols,
                                   const std::filesystem::path& out,
                                   std::span<const std::string> captions = {});

}  // namespace polypgen::experiment
