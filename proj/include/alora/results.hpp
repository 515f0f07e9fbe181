#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace alora {

using Cell = std::variant<std::int64_t, double, std::string>;

/// A comma-separated table. Doubles are written with 17 significant digits,
/// integers verbatim, strings verbatim (they must not contain ',', '"' or a
/// newline).
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row);
};

std::string format_cell(const Cell& cell);
std::string render_csv(const Table& table);
void write_csv(const Table& table, const std::filesystem::path& path);

/// Writes <stem>.csv (the table) and <stem>.json (the summary with the
/// config hash added under "config_hash"). Returns the two paths.
std::vector<std::filesystem::path> emit_results(const Table& table, nlohmann::ordered_json summary,
                                                const std::string& config_hash, const std::filesystem::path& stem);

/// Reads a table written by write_csv back; numeric-looking cells are
/// returned as text so callers can parse them exactly.
Table read_csv(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace alora
