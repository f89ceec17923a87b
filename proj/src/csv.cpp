#include "v2g/csv.hpp"

#include "v2g/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace v2g {

namespace {

std::string join_failures(const std::vector<std::string>& failures) {
    std::string out = "validation failed:";
    for (const auto& f : failures) {
        out += "\n  - ";
        out += f;
    }
    return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> failures)
    : std::runtime_error(join_failures(failures)), failures_(std::move(failures)) {}

namespace csv {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

// Splits one record; handles double-quoted fields with "" escapes.
std::vector<std::string> split_record(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(trim(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(trim(current));
    return fields;
}

}  // namespace

Table Table::parse(std::string_view text, std::string_view source) {
    Table t;
    t.source_ = std::string(source);
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (trim(line).empty()) {
            if (end == text.size()) break;
            continue;
        }
        auto fields = split_record(line);
        if (t.header_.empty()) {
            t.header_ = std::move(fields);
        } else {
            if (fields.size() != t.header_.size()) {
                throw ParseError(t.source_ + ": line " + std::to_string(line_no) + " has " +
                                 std::to_string(fields.size()) + " fields, header has " +
                                 std::to_string(t.header_.size()));
            }
            t.cells_.push_back(std::move(fields));
        }
        if (end == text.size()) break;
    }
    if (t.header_.empty()) throw ParseError(t.source_ + ": missing header row");
    return t;
}

Table Table::read_file(const std::string& path) { return parse(read_text_file(path), path); }

bool Table::has_column(std::string_view name) const {
    return std::find(header_.begin(), header_.end(), name) != header_.end();
}

std::size_t Table::column(std::string_view name) const {
    const auto it = std::find(header_.begin(), header_.end(), name);
    if (it == header_.end()) throw ParseError(source_ + ": missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header_.begin());
}

std::optional<double> Table::number(std::size_t row, std::size_t col) const {
    const auto& s = cell(row, col);
    if (s.empty()) return std::nullopt;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError(source_ + ": row " + std::to_string(row + 1) + ", column '" + header_.at(col) +
                         "': not a number: '" + s + "'");
    }
    return value;
}

double Table::required_number(std::size_t row, std::size_t col) const {
    auto v = number(row, col);
    if (!v) {
        throw ParseError(source_ + ": row " + std::to_string(row + 1) + ", column '" + header_.at(col) +
                         "': empty cell");
    }
    return *v;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace csv
}  // namespace v2g
