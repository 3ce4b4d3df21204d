#include "srd/runner/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "srd/rng.hpp"

namespace srd::runner {

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

CsvWriter::CsvWriter(const fs::path& path, std::vector<std::string> header, std::string config_hash)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()), hash_(std::move(config_hash)) {
    if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    header.push_back("config_hash");
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << csv_escape(header[i]);
    out_ << "\r\n";
}

CsvWriter::~CsvWriter() {
    if (out_.is_open()) out_.close();
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) {
        throw std::invalid_argument("CsvWriter: row has " + std::to_string(cells.size()) + " cells, expected " +
                                    std::to_string(columns_) + " (" + path_.string() + ")");
    }
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << csv_escape(cells[i]);
    out_ << "," << hash_ << "\r\n";
}

void CsvWriter::close() {
    out_.close();
    if (!out_) throw std::runtime_error("error writing " + path_.string());
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw std::out_of_range("CSV column '" + name + "' not found");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
    const std::string& s = rows.at(row).at(column(name));
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (s == "nan") return NAN;
    return std::stod(s);
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("missing input: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    CsvTable t;
    std::vector<std::string> rec;
    std::string field;
    bool quoted = false, any = false;
    auto end_record = [&] {
        rec.push_back(field);
        field.clear();
        if (t.header.empty()) {
            t.header = rec;
        } else {
            t.rows.push_back(rec);
        }
        rec.clear();
        any = false;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            rec.push_back(field);
            field.clear();
            any = true;
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            end_record();
        } else {
            field += c;
            any = true;
        }
    }
    if (any || !field.empty()) end_record();
    return t;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_atomic(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("missing input: " + path.string());
    return nlohmann::json::parse(in);
}

void write_atomic(const fs::path& path, const std::string& data) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        out.close();
        if (!out) throw std::runtime_error("error writing " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

namespace {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

void put_u32(std::string& s, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    s.append(b, 4);
}
void put_f64(std::string& s, double v) {
    char b[8];
    std::memcpy(b, &v, 8);
    s.append(b, 8);
}

}  // namespace

void write_snapshot(const fs::path& path, const spde::TorusField& field) {
    const auto& g = field.grid();
    std::string s = "SRDF";
    put_u32(s, kSnapshotVersion);
    put_u32(s, static_cast<std::uint32_t>(g.d));
    put_u32(s, static_cast<std::uint32_t>(g.M));
    put_u32(s, 4);
    put_u32(s, 8);
    for (double k : field.kappa()) put_f64(s, k);
    for (int i = 0; i < 4; ++i) {
        for (double v : field.species(i)) put_f64(s, v);
    }
    write_atomic(path, s);
}

spde::TorusField read_snapshot(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string s = ss.str();
    if (s.size() < 24 || s.compare(0, 4, "SRDF") != 0) throw std::runtime_error(path.string() + ": not a field snapshot");
    std::array<std::uint32_t, 5> h{};
    std::memcpy(h.data(), s.data() + 4, 20);
    if (h[0] != kSnapshotVersion) throw std::runtime_error(path.string() + ": unsupported snapshot version " + std::to_string(h[0]));
    if (h[3] != 4 || h[4] != 8) throw std::runtime_error(path.string() + ": unsupported species count or scalar width");
    const spde::TorusGrid g(static_cast<int>(h[1]), static_cast<int>(h[2]));
    const std::size_t need = 24 + 8 * (4 + 4 * g.cells());
    if (s.size() != need) throw std::runtime_error(path.string() + ": truncated snapshot");
    spde::Vec4 kappa{};
    std::memcpy(kappa.data(), s.data() + 24, 32);
    spde::TorusField f(g, kappa);
    const char* p = s.data() + 56;
    for (int i = 0; i < 4; ++i) {
        auto sp = f.species(i);
        std::memcpy(sp.data(), p, 8 * sp.size());
        p += 8 * sp.size();
    }
    return f;
}

void write_snapshot_csv(const fs::path& path, const spde::TorusField& field, const std::string& config_hash) {
    const auto& g = field.grid();
    std::vector<std::string> header{"x"};
    if (g.d == 2) header.push_back("y");
    for (const char* n : {"a1", "a2", "a3", "a4"}) header.push_back(n);
    CsvWriter w(path, header, config_hash);
    for (std::size_t c = 0; c < g.cells(); ++c) {
        std::vector<std::string> row{std::to_string(c % static_cast<std::size_t>(g.M))};
        if (g.d == 2) row.push_back(std::to_string(c / static_cast<std::size_t>(g.M)));
        const auto a = field.at(c);
        for (double v : a) row.push_back(format_double(v));
        w.row(row);
    }
    w.close();
}

}  // namespace srd::runner
