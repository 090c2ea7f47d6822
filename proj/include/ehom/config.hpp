#ifndef EHOM_CONFIG_HPP
#define EHOM_CONFIG_HPP

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ehom/errors.hpp"

namespace ehom {

/// Structured-text configuration: [section] headers, key = value lines,
/// values are whitespace- or comma-separated token lists, '#' comments.
/// Repeated keys accumulate rows (used for inclusion lists).
class Config {
public:
    static Config parse(const std::string& text) {
        Config cfg;
        cfg.text_ = text;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("cli", "line " + std::to_string(lineno) +
                                                 ": unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                cfg.sections_[section];
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("cli",
                                  "line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw ConfigError("cli", "line " + std::to_string(lineno) + ": empty key");
            cfg.sections_[section][key].push_back(tokenize(value));
        }
        return cfg;
    }

    static Config from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cli", "cannot open config file " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    const std::string& text() const { return text_; }

    bool has_section(const std::string& s) const { return sections_.count(s) > 0; }
    bool has(const std::string& s, const std::string& k) const {
        auto it = sections_.find(s);
        return it != sections_.end() && it->second.count(k) > 0;
    }

    void require_section(const std::string& s) const {
        if (!has_section(s))
            throw ConfigError("cli", "missing required section [" + s + "]");
    }

    const std::vector<std::vector<std::string>>& rows(const std::string& s,
                                                      const std::string& k) const {
        auto sit = sections_.find(s);
        if (sit == sections_.end())
            throw ConfigError("cli", "missing required section [" + s + "]");
        auto kit = sit->second.find(k);
        if (kit == sit->second.end())
            throw ConfigError("cli", "missing key '" + k + "' in section [" + s + "]");
        return kit->second;
    }

    std::string get_string(const std::string& s, const std::string& k) const {
        const auto& r = rows(s, k);
        if (r.back().empty())
            throw ConfigError("cli", "empty value for '" + k + "' in [" + s + "]");
        return r.back().front();
    }
    std::string get_string(const std::string& s, const std::string& k,
                           const std::string& fallback) const {
        return has(s, k) ? get_string(s, k) : fallback;
    }

    double get_number(const std::string& s, const std::string& k) const {
        return to_number(s, k, get_string(s, k));
    }
    double get_number(const std::string& s, const std::string& k, double fallback) const {
        return has(s, k) ? get_number(s, k) : fallback;
    }
    int get_int(const std::string& s, const std::string& k) const {
        const double v = get_number(s, k);
        if (v != static_cast<int>(v))
            throw ConfigError("cli", "'" + k + "' in [" + s + "] must be an integer");
        return static_cast<int>(v);
    }
    int get_int(const std::string& s, const std::string& k, int fallback) const {
        return has(s, k) ? get_int(s, k) : fallback;
    }
    bool get_bool(const std::string& s, const std::string& k, bool fallback) const {
        if (!has(s, k)) return fallback;
        const std::string v = get_string(s, k);
        if (v == "true" || v == "on" || v == "1") return true;
        if (v == "false" || v == "off" || v == "0") return false;
        throw ConfigError("cli", "'" + k + "' in [" + s + "] must be a boolean");
    }

    std::vector<double> get_list(const std::string& s, const std::string& k) const {
        std::vector<double> out;
        for (const std::string& tok : rows(s, k).back()) out.push_back(to_number(s, k, tok));
        return out;
    }
    std::vector<double> get_list(const std::string& s, const std::string& k,
                                 std::vector<double> fallback) const {
        return has(s, k) ? get_list(s, k) : fallback;
    }

private:
    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }
    static std::vector<std::string> tokenize(const std::string& s) {
        std::vector<std::string> toks;
        std::string cur;
        for (char c : s) {
            if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
                if (!cur.empty()) toks.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!cur.empty()) toks.push_back(cur);
        return toks;
    }
    static double to_number(const std::string& s, const std::string& k, const std::string& tok) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(tok, &pos);
            if (pos != tok.size()) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("cli", "'" + k + "' in [" + s + "]: '" + tok +
                                         "' is not a number");
        }
    }

    std::string text_;
    std::map<std::string, std::map<std::string, std::vector<std::vector<std::string>>>> sections_;
};

/// FNV-1a hash of the raw config text, for output provenance.
inline std::string config_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace ehom

#endif
