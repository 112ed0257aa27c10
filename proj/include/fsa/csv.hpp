#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsa/common.hpp"

namespace fsa {

/// In-memory CSV table with a header row. Cells are raw strings; empty cell
/// means missing. Quoting per RFC 4180 (fields containing comma/quote/newline).
class CsvTable {
public:
    CsvTable() = default;
    explicit CsvTable(std::vector<std::string> header);

    static CsvTable read_file(const std::string& path);
    static CsvTable parse(const std::string& text);

    void write_file(const std::string& path) const;
    std::string to_string() const;

    const std::vector<std::string>& header() const { return header_; }
    size_t rows() const { return cells_.size(); }
    size_t cols() const { return header_.size(); }

    bool has_column(const std::string& name) const { return index_.count(name) > 0; }
    size_t column(const std::string& name) const;

    const std::string& cell(size_t row, size_t col) const { return cells_[row][col]; }
    const std::string& cell(size_t row, const std::string& name) const {
        return cells_[row][column(name)];
    }

    /// Missing (empty) cells come back as nullopt; unparseable numbers throw.
    std::optional<double> number(size_t row, const std::string& name) const;
    std::optional<int> integer(size_t row, const std::string& name) const;

    void append_row(const std::vector<std::string>& cells);

private:
    std::vector<std::string> header_;
    std::map<std::string, size_t> index_;
    std::vector<std::vector<std::string>> cells_;
};

/// Canonical numeric cell formatting: shortest text that round-trips, '.' decimal.
std::string csv_number(double v);

}  // namespace fsa
