#include "vh/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vh/common.hpp"

namespace vh::csv {

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.emplace_back(trim(line.substr(start)));
            break;
        }
        out.emplace_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

Table read(std::istream& in, const std::vector<std::string>& expected_header, const std::string& source) {
    Table table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split(line);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            if (!expected_header.empty() && table.header != expected_header) {
                std::string want;
                for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
                throw Error("bad_header", source + ": expected header '" + want + "'");
            }
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw Error("bad_row", source + ":" + std::to_string(line_no) + ": expected " +
                                       std::to_string(table.header.size()) + " fields, got " +
                                       std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(line_no);
    }
    if (!have_header && !expected_header.empty()) {
        throw Error("bad_header", source + ": missing header");
    }
    return table;
}

Table read(const std::filesystem::path& path, const std::vector<std::string>& expected_header) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open " + path.string());
    return read(in, expected_header, path.string());
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int decimals) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view field, const std::string& context) {
    field = trim(field);
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size() || !std::isfinite(v)) {
        throw Error("bad_number", context + ": not a finite number: '" + std::string(field) + "'");
    }
    return v;
}

long long parse_int(std::string_view field, const std::string& context) {
    field = trim(field);
    long long v = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
        // Accept integral values written with a decimal point, e.g. "12.0".
        const double d = parse_double(field, context);
        if (d != std::floor(d)) throw Error("bad_number", context + ": not an integer: '" + std::string(field) + "'");
        return static_cast<long long>(d);
    }
    return v;
}

}  // namespace vh::csv
