#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "olab/common.hpp"

namespace olab::config {

// Flat `key = value` files: one pair per line, '#' starts a comment,
// blank lines ignored.  Values keep internal spaces; keys do not.
struct KeyValues {
    std::map<std::string, std::string> values;

    static std::string trim(const std::string& s) {
        std::size_t b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        std::size_t e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static KeyValues parse_text(const std::string& text) {
        KeyValues kv;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
            kv.values[key] = value;
        }
        return kv;
    }

    static KeyValues load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("cannot open config file: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_text(buf.str());
    }

    std::string serialize() const {
        std::ostringstream out;
        for (const auto& [k, v] : values) out << k << " = " << v << "\n";
        return out.str();
    }

    bool has(const std::string& key) const { return values.count(key) > 0; }

    const std::string& get(const std::string& key) const {
        auto it = values.find(key);
        if (it == values.end()) throw std::invalid_argument("missing config key: " + key);
        return it->second;
    }

    std::string get_or(const std::string& key, const std::string& fallback) const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values.find(key);
        if (it == values.end()) return fallback;
        std::size_t used = 0;
        double x = std::stod(it->second, &used);
        if (used != it->second.size())
            throw std::invalid_argument("config key " + key + ": not a number: " + it->second);
        return x;
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto it = values.find(key);
        if (it == values.end()) return fallback;
        std::size_t used = 0;
        long long x = std::stoll(it->second, &used);
        if (used != it->second.size())
            throw std::invalid_argument("config key " + key + ": not an integer: " + it->second);
        return x;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values.find(key);
        if (it == values.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw std::invalid_argument("config key " + key + ": not a boolean: " + it->second);
    }

    // Comma- and/or space-separated integer list.
    std::vector<int> get_int_list(const std::string& key) const {
        std::vector<int> out;
        std::string s = get(key);
        for (char& c : s)
            if (c == ',') c = ' ';
        std::istringstream in(s);
        long long x;
        while (in >> x) out.push_back(static_cast<int>(x));
        if (!in.eof()) throw std::invalid_argument("config key " + key + ": bad integer list");
        return out;
    }

    void set(const std::string& key, const std::string& value) { values[key] = value; }
    void set_int(const std::string& key, long long x) { values[key] = std::to_string(x); }
    void set_double(const std::string& key, double x) {
        std::ostringstream num;
        num.precision(17);
        num << x;
        values[key] = num.str();
    }
};

}  // namespace olab::config
