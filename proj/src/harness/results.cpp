#include "alora/results.hpp"

#include <fstream>
#include <stdexcept>

#include "alora/format.hpp"

namespace alora {

void Table::add(std::vector<Cell> row) {
    if (row.size() != columns.size())
        throw std::invalid_argument("table row has " + std::to_string(row.size()) + " cells, expected " +
                                    std::to_string(columns.size()));
    rows.push_back(std::move(row));
}

std::string format_cell(const Cell& cell) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) return format_17(v);
            else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
            else {
                if (v.find_first_of(",\"\n") != std::string::npos)
                    throw std::invalid_argument("table cell '" + v + "' contains a delimiter");
                return v;
            }
        },
        cell);
}

std::string render_csv(const Table& table) {
    std::string out;
    for (std::size_t k = 0; k < table.columns.size(); ++k) out += (k ? "," : "") + table.columns[k];
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) out += (k ? "," : "") + format_cell(row[k]);
        out += '\n';
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

void write_csv(const Table& table, const std::filesystem::path& path) { write_text(path, render_csv(table)); }

std::vector<std::filesystem::path> emit_results(const Table& table, nlohmann::ordered_json summary,
                                                const std::string& config_hash, const std::filesystem::path& stem) {
    std::filesystem::path csv = stem;
    csv += ".csv";
    std::filesystem::path json = stem;
    json += ".json";
    summary["config_hash"] = config_hash;
    write_csv(table, csv);
    write_text(json, summary.dump(2) + "\n");
    return {csv, json};
}

Table read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
    const auto split = [](const std::string& line) {
        std::vector<std::string> out;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            out.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return out;
    };
    Table t;
    std::string line;
    if (!std::getline(in, line)) return t;
    t.columns = split(line);
    while (std::getline(in, line)) {
        std::vector<Cell> row;
        for (auto& s : split(line)) row.emplace_back(std::move(s));
        t.add(std::move(row));
    }
    return t;
}

}  // namespace alora
