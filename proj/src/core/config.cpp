#include "core/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "core/common.hpp"

namespace zsim::cfg {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValue KeyValue::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path);
}

KeyValue KeyValue::parse_text(const std::string& text, const std::string& origin) {
    KeyValue kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            fail(ErrorKind::config, origin + ":" + std::to_string(lineno) + ": expected `key = value`");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(ErrorKind::config, origin + ":" + std::to_string(lineno) + ": empty key");
        kv.values_[key] = value;
    }
    return kv;
}

std::string KeyValue::require(const std::string& key) const {
    auto it = values_.find(key);
    touched_[key] = true;
    if (it == values_.end()) return "";
    return it->second;
}

std::string KeyValue::get_string(const std::string& key, const std::string& fallback) const {
    std::string v = require(key);
    return values_.count(key) ? v : fallback;
}

double KeyValue::get_double(const std::string& key, double fallback) const {
    if (!values_.count(key)) {
        touched_[key] = true;
        return fallback;
    }
    std::string v = require(key);
    try {
        size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        fail(ErrorKind::config, "config key `" + key + "`: not a number: " + v);
    }
}

int64_t KeyValue::get_int(const std::string& key, int64_t fallback) const {
    if (!values_.count(key)) {
        touched_[key] = true;
        return fallback;
    }
    std::string v = require(key);
    int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        fail(ErrorKind::config, "config key `" + key + "`: not an integer: " + v);
    }
    return out;
}

bool KeyValue::get_bool(const std::string& key, bool fallback) const {
    if (!values_.count(key)) {
        touched_[key] = true;
        return fallback;
    }
    std::string v = require(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(ErrorKind::config, "config key `" + key + "`: not a boolean: " + v);
}

void KeyValue::set(const std::string& key, double value) {
    std::ostringstream ss;
    ss.precision(17);
    ss << value;
    values_[key] = ss.str();
}

void KeyValue::set(const std::string& key, int64_t value) { values_[key] = std::to_string(value); }

std::vector<std::string> KeyValue::unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
        if (!touched_.count(k)) out.push_back(k);
    }
    return out;
}

std::string KeyValue::dump() const {
    std::ostringstream ss;
    for (const auto& [k, v] : values_) ss << k << " = " << v << "\n";
    return ss.str();
}

uint64_t KeyValue::hash() const { return fnv1a(dump()); }

}  // namespace zsim::cfg
