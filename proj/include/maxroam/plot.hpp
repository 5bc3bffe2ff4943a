#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace maxroam {

enum class PlotKind { bars_vs_p, heat_delta_r, lines_selection };

PlotKind parse_plot_kind(std::string_view name);

/// Header plus string cells; '#' comment lines are skipped.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Throws std::invalid_argument when the column is missing.
    std::size_t column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

/// Renders a sweep table (columns mode, p, delta, target_r, selection, score,
/// status) as a standalone SVG document. Throws std::invalid_argument with
/// "no rows" for a table without usable rows.
///  - bars_vs_p:       grouped bars, one bar per mode at each p
///  - heat_delta_r:    delta x target_r heat map
///  - lines_selection: one line per selection strategy over target_r
std::string render_svg(const CsvTable& table, PlotKind kind);

void plot(const std::filesystem::path& csv_path, PlotKind kind, const std::filesystem::path& svg_path);

}  // namespace maxroam
