#ifndef VH_CSV_HPP
#define VH_CSV_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace vh::csv {

/// Splits one line on commas. Quoting is not supported; none of the
/// numeric tables exchanged here need it.
std::vector<std::string> split(std::string_view line);

std::string_view trim(std::string_view s);

/// Rows of a comma-separated file. The header is checked against
/// `expected_header` (exact, after trimming) when it is nonempty.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

Table read(const std::filesystem::path& path, const std::vector<std::string>& expected_header = {});
Table read(std::istream& in, const std::vector<std::string>& expected_header = {},
           const std::string& source = "<stream>");

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);
/// Fixed number of decimals, for human-facing tables.
std::string format_fixed(double v, int decimals);

double parse_double(std::string_view field, const std::string& context);
long long parse_int(std::string_view field, const std::string& context);

}  // namespace vh::csv

#endif  // VH_CSV_HPP
