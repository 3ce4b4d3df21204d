#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "srd/spde/grid.hpp"

namespace srd::runner {

namespace fs = std::filesystem;

// %.17g, with inf/nan spelled out.
std::string format_double(double x);
// RFC-4180 field quoting.
std::string csv_escape(const std::string& s);

// Writes a header and rows; a trailing config_hash column is added to every row.
class CsvWriter {
public:
    CsvWriter(const fs::path& path, std::vector<std::string> header, std::string config_hash);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    // Cells are formatted by the caller (format_double for reals).
    void row(const std::vector<std::string>& cells);
    void close();
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
    std::ofstream out_;
    std::size_t columns_;
    std::string hash_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::size_t column(const std::string& name) const;  // throws if absent
    double number(std::size_t row, const std::string& name) const;
};
CsvTable read_csv(const fs::path& path);

void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);

// Writes to a sibling temporary and renames over the target.
void write_atomic(const fs::path& path, const std::string& data);

std::string sha256_file(const fs::path& path);

// Binary snapshot: "SRDF", u32 version, u32 d, u32 M, u32 species, u32 scalar width,
// then 4 kappa values and species-major float64 data, all little-endian.
inline constexpr std::uint32_t kSnapshotVersion = 1;
void write_snapshot(const fs::path& path, const spde::TorusField& field);
spde::TorusField read_snapshot(const fs::path& path);
// Per-cell CSV: x [, y], a1..a4.
void write_snapshot_csv(const fs::path& path, const spde::TorusField& field, const std::string& config_hash);

}  // namespace srd::runner
