#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace v2g::csv {

/// Header-addressed CSV table. Cells are kept as trimmed strings; numeric
/// conversion happens at the call site so errors can name the column and row.
class Table {
public:
    static Table parse(std::string_view text, std::string_view source = "csv");
    static Table read_file(const std::string& path);

    const std::vector<std::string>& header() const noexcept { return header_; }
    std::size_t rows() const noexcept { return cells_.size(); }
    bool has_column(std::string_view name) const;

    /// Throws ParseError if the column is absent.
    std::size_t column(std::string_view name) const;

    const std::string& cell(std::size_t row, std::size_t col) const { return cells_.at(row).at(col); }

    /// Empty cell yields nullopt; a non-numeric cell throws ParseError.
    std::optional<double> number(std::size_t row, std::size_t col) const;
    double required_number(std::size_t row, std::size_t col) const;

    const std::string& source() const noexcept { return source_; }

private:
    std::string source_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> cells_;
};

std::string read_text_file(const std::string& path);

}  // namespace v2g::csv
