#include "vh/config.hpp"

#include <algorithm>
#include <fstream>
#include <istream>

#include "vh/common.hpp"
#include "vh/csv.hpp"

namespace vh {

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source) {
    KeyValueConfig cfg;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto body = csv::trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto eq = body.find('=');
        const auto ctx = source + ":" + std::to_string(number);
        if (eq == std::string_view::npos) throw Error("bad_config", ctx + ": expected 'key = value'");
        const std::string key(csv::trim(body.substr(0, eq)));
        const std::string value(csv::trim(body.substr(eq + 1)));
        if (key.empty()) throw Error("bad_config", ctx + ": empty key");
        if (cfg.has(key)) throw Error("bad_config", ctx + ": duplicate key '" + key + "'");
        cfg.entries_.emplace_back(key, value);
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open config " + path.string());
    auto cfg = parse(in, path.string());
    cfg.base_dir_ = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    return cfg;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == key; });
    if (it != entries_.end()) it->second = value;
    else entries_.emplace_back(key, value);
}

void KeyValueConfig::override_value(const std::string& key, const std::string& value) {
    set(key, value);
    overrides_.emplace_back(key, value);
}

bool KeyValueConfig::has(const std::string& key) const { return find(key).has_value(); }

std::optional<std::string> KeyValueConfig::find(const std::string& key) const {
    for (const auto& [k, v] : entries_) {
        if (k == key) return v;
    }
    return std::nullopt;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    return find(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto v = find(key);
    return v ? csv::parse_double(*v, "config key " + key) : fallback;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
    const auto v = find(key);
    return v ? csv::parse_int(*v, "config key " + key) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    const auto v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw Error("bad_config", "config key " + key + ": expected a boolean, got '" + *v + "'");
}

std::filesystem::path KeyValueConfig::get_path(const std::string& key) const {
    const auto v = find(key);
    if (!v || v->empty()) return {};
    std::filesystem::path p(*v);
    return p.is_absolute() ? p : base_dir_ / p;
}

std::vector<KeyValueConfig::Entry> KeyValueConfig::with_prefix(const std::string& prefix) const {
    std::vector<Entry> out;
    for (const auto& [k, v] : entries_) {
        if (k.size() > prefix.size() && k.compare(0, prefix.size(), prefix) == 0) {
            out.emplace_back(k.substr(prefix.size()), v);
        }
    }
    return out;
}

}  // namespace vh
