#pragma once

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "io.hpp"

namespace quantcurve {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Flat key=value configuration; repeated keys accumulate into lists, '#'
// starts a comment.  Overrides (--set key=value) replace the whole list for
// that key.
class Config {
public:
    Config() = default;

    static Config from_file(const std::string& path) {
        Config c;
        c.parse(read_file(path), path);
        return c;
    }

    static Config from_string(const std::string& text) {
        Config c;
        c.parse(text, "<string>");
        return c;
    }

    void override_set(const std::string& key, const std::string& value) {
        values_[key] = {value};
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    const std::vector<std::string>& list(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
        return it->second;
    }

    std::string str(const std::string& key) const {
        const auto& v = list(key);
        if (v.size() != 1)
            throw ConfigError("config key '" + key + "' must have exactly one value");
        return v[0];
    }

    std::string str_or(const std::string& key, const std::string& def) const {
        return has(key) ? str(key) : def;
    }

    double num(const std::string& key) const { return parse_num(key, str(key)); }

    double num_or(const std::string& key, double def) const {
        return has(key) ? num(key) : def;
    }

    long integer(const std::string& key) const {
        const double v = num(key);
        const long i = static_cast<long>(v);
        if (static_cast<double>(i) != v)
            throw ConfigError("config key '" + key + "' must be an integer");
        return i;
    }

    long integer_or(const std::string& key, long def) const {
        return has(key) ? integer(key) : def;
    }

    std::vector<double> nums(const std::string& key) const {
        std::vector<double> out;
        for (const auto& s : list(key)) out.push_back(parse_num(key, s));
        return out;
    }

    std::vector<double> nums_or(const std::string& key, std::vector<double> def) const {
        return has(key) ? nums(key) : def;
    }

    const std::map<std::string, std::vector<std::string>>& raw() const { return values_; }

private:
    double parse_num(const std::string& key, const std::string& s) const {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != s.size())
            throw ConfigError("config key '" + key + "': invalid number '" + s + "'");
        return v;
    }

    void parse(const std::string& text, const std::string& origin) {
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::size_t a = line.find_first_not_of(" \t\r");
            if (a == std::string::npos) continue;
            std::size_t b = line.find_last_not_of(" \t\r");
            line = line.substr(a, b - a + 1);
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": expected key=value, got '" + line + "'");
            std::string key = line.substr(0, eq);
            std::string value = line.substr(eq + 1);
            auto trim = [](std::string& s) {
                const std::size_t x = s.find_first_not_of(" \t");
                const std::size_t y = s.find_last_not_of(" \t");
                s = x == std::string::npos ? "" : s.substr(x, y - x + 1);
            };
            trim(key);
            trim(value);
            if (key.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            values_[key].push_back(value);
        }
    }

    std::map<std::string, std::vector<std::string>> values_;
};

}  // namespace quantcurve
