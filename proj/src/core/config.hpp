#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace zsim::cfg {

// Flat `key = value` text config. `#` starts a comment. Keys are kept in
// sorted order so dump() and hash() are stable regardless of input order.
class KeyValue {
public:
    KeyValue() = default;

    static KeyValue parse_file(const std::string& path);
    static KeyValue parse_text(const std::string& text, const std::string& origin = "<memory>");

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void set(const std::string& key, double value);
    void set(const std::string& key, int64_t value);

    // Keys consumed by any get_*/has call; unknown-key detection for strict
    // commands.
    std::vector<std::string> unused_keys() const;

    std::string dump() const;
    uint64_t hash() const;

private:
    std::string require(const std::string& key) const;

    std::map<std::string, std::string> values_;
    mutable std::map<std::string, bool> touched_;
};

}  // namespace zsim::cfg
