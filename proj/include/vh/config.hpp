#ifndef VH_CONFIG_HPP
#define VH_CONFIG_HPP

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vh {

/// Flat `dotted.key = value` file. Entry order is preserved, `#` starts a
/// comment line, and a repeated key is an error. Overrides replace (or
/// append) entries and are remembered separately for the manifest.
class KeyValueConfig {
public:
    using Entry = std::pair<std::string, std::string>;

    static KeyValueConfig parse(std::istream& in, const std::string& source = "<stream>");
    static KeyValueConfig load(const std::filesystem::path& path);

    /// Directory that relative paths resolve against.
    const std::filesystem::path& base_dir() const { return base_dir_; }
    void set_base_dir(std::filesystem::path dir) { base_dir_ = std::move(dir); }

    void set(const std::string& key, const std::string& value);
    void override_value(const std::string& key, const std::string& value);

    bool has(const std::string& key) const;
    std::optional<std::string> find(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    /// Empty when unset; otherwise resolved against base_dir().
    std::filesystem::path get_path(const std::string& key) const;

    /// Entries whose key starts with `prefix`, with the prefix removed.
    std::vector<Entry> with_prefix(const std::string& prefix) const;

    const std::vector<Entry>& entries() const { return entries_; }
    const std::vector<Entry>& overrides() const { return overrides_; }

private:
    std::vector<Entry> entries_;
    std::vector<Entry> overrides_;
    std::filesystem::path base_dir_ = ".";
};

}  // namespace vh

#endif  // VH_CONFIG_HPP
