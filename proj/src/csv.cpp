#include "fsa/csv.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fsa {

namespace {

bool needs_quoting(const std::string& s) {
    return s.find_first_of(",\"\n\r") != std::string::npos;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// Splits one logical CSV record starting at `pos`; advances past the record.
std::vector<std::string> parse_record(const std::string& text, size_t& pos) {
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    while (pos < text.size()) {
        char c = text[pos];
        if (in_quotes) {
            if (c == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    field += '"';
                    pos += 2;
                } else {
                    in_quotes = false;
                    ++pos;
                }
            } else {
                field += c;
                ++pos;
            }
        } else if (c == '"') {
            in_quotes = true;
            ++pos;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
            ++pos;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
            ++pos;
            fields.push_back(field);
            return fields;
        } else {
            field += c;
            ++pos;
        }
    }
    fields.push_back(field);
    return fields;
}

}  // namespace

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
    for (size_t i = 0; i < header_.size(); ++i) index_[header_[i]] = i;
}

CsvTable CsvTable::read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open CSV file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse(ss.str());
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

CsvTable CsvTable::parse(const std::string& text) {
    size_t pos = 0;
    if (text.empty()) throw Error("empty CSV");
    CsvTable t(parse_record(text, pos));
    while (pos < text.size()) {
        size_t mark = pos;
        auto row = parse_record(text, pos);
        if (row.size() == 1 && row[0].empty()) continue;  // blank line
        if (row.size() != t.header_.size()) {
            throw Error(strf("CSV row at offset %zu has %zu fields, header has %zu", mark,
                             row.size(), t.header_.size()));
        }
        t.cells_.push_back(std::move(row));
    }
    return t;
}

void CsvTable::write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write CSV file: " + path);
    out << to_string();
}

std::string CsvTable::to_string() const {
    std::string out;
    auto emit_row = [&out](const std::vector<std::string>& row) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += needs_quoting(row[i]) ? quote(row[i]) : row[i];
        }
        out += '\n';
    };
    emit_row(header_);
    for (const auto& row : cells_) emit_row(row);
    return out;
}

size_t CsvTable::column(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("CSV column not found: " + name);
    return it->second;
}

std::optional<double> CsvTable::number(size_t row, const std::string& name) const {
    const std::string& s = cell(row, name);
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw Error("bad number in column " + name + ": '" + s + "'");
    return v;
}

std::optional<int> CsvTable::integer(size_t row, const std::string& name) const {
    auto v = number(row, name);
    if (!v) return std::nullopt;
    if (*v != std::floor(*v)) throw Error("non-integer in column " + name);
    return static_cast<int>(*v);
}

void CsvTable::append_row(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size()) {
        throw Error(strf("append_row: %zu fields, header has %zu", cells.size(), header_.size()));
    }
    cells_.push_back(cells);
}

std::string csv_number(double v) {
    if (std::isnan(v)) return "";
    // Shortest representation that parses back exactly.
    for (int prec = 1; prec <= 17; ++prec) {
        std::string s = strf("%.*g", prec, v);
        if (std::strtod(s.c_str(), nullptr) == v) return s;
    }
    return strf("%.17g", v);
}

}  // namespace fsa
