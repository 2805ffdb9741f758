#pragma once

// INI-style run configuration: sections of key = value pairs, overrides of
// the form section.key=value, typed access with field diagnostics, and a
// canonical text form used for hashing.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace amyepi::config {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream o;
    o << std::hex << std::setw(16) << std::setfill('0') << v;
    return o.str();
}

class Config {
public:
    Config() = default;

    static Config parse(std::istream& in, const std::string& origin) {
        Config c;
        try {
            boost::property_tree::read_ini(in, c.tree_);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
        }
        for (const auto& sec : c.tree_)
            if (sec.second.empty() && !sec.second.data().empty())
                throw ConfigError(origin + ": key '" + sec.first + "' must live inside a [section]");
        return c;
    }

    static Config parse_text(const std::string& text, const std::string& origin = "<text>") {
        std::istringstream in(text);
        return parse(in, origin);
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        return parse(in, path);
    }

    /// Later values win.
    void merge(const Config& other) {
        for (const auto& sec : other.tree_)
            for (const auto& kv : sec.second) set(sec.first + "." + kv.first, kv.second.data());
    }

    /// "section.key=value"
    void apply_override(const std::string& spec) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + spec + "' is not of the form section.key=value");
        const std::string key = trim(spec.substr(0, eq));
        if (key.find('.') == std::string::npos || key.front() == '.' || key.back() == '.')
            throw ConfigError("override key '" + key + "' must be section.key");
        set(key, trim(spec.substr(eq + 1)));
    }

    void set(const std::string& dotted, const std::string& value) {
        const auto dot = dotted.find('.');
        auto sec = tree_.get_child_optional(path(dotted.substr(0, dot)));
        Tree& section = sec ? *sec : tree_.add_child(path(dotted.substr(0, dot)), Tree());
        section.put(path(dotted.substr(dot + 1)), value);
    }

    bool has(const std::string& dotted) const { return raw(dotted) != nullptr; }

    std::string get_string(const std::string& dotted, const std::string& fallback) const {
        const std::string* v = raw(dotted);
        return v ? *v : fallback;
    }
    std::string require_string(const std::string& dotted) const {
        const std::string* v = raw(dotted);
        if (!v) throw ConfigError("missing required field '" + dotted + "'");
        return *v;
    }

    double get_double(const std::string& dotted, double fallback) const {
        const std::string* v = raw(dotted);
        return v ? to_double(dotted, *v) : fallback;
    }
    int get_int(const std::string& dotted, int fallback) const {
        const std::string* v = raw(dotted);
        if (!v) return fallback;
        const double d = to_double(dotted, *v);
        if (d != static_cast<int>(d)) throw ConfigError("field '" + dotted + "': expected an integer, got '" + *v + "'");
        return static_cast<int>(d);
    }
    bool get_bool(const std::string& dotted, bool fallback) const {
        const std::string* v = raw(dotted);
        if (!v) return fallback;
        if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
        if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
        throw ConfigError("field '" + dotted + "': expected a boolean, got '" + *v + "'");
    }
    std::vector<double> get_doubles(const std::string& dotted, const std::vector<double>& fallback) const {
        const std::string* v = raw(dotted);
        if (!v) return fallback;
        std::vector<double> out;
        for (const auto& w : split_ws(comma_to_space(*v))) out.push_back(to_double(dotted, w));
        return out;
    }
    std::vector<std::string> get_words(const std::string& dotted) const {
        const std::string* v = raw(dotted);
        return v ? split_ws(comma_to_space(*v)) : std::vector<std::string>{};
    }

    /// Keys in a section, in file order.
    std::vector<std::string> keys(const std::string& section) const {
        std::vector<std::string> out;
        auto sec = tree_.get_child_optional(path(section));
        if (sec)
            for (const auto& kv : *sec) out.push_back(kv.first);
        return out;
    }

    /// Throws on any key not read through this object (typo detection).
    void check_unused(const std::set<std::string>& allowed_sections = {}) const {
        for (const auto& sec : tree_) {
            if (!allowed_sections.empty() && !allowed_sections.count(sec.first))
                throw ConfigError("unknown section [" + sec.first + "]");
            for (const auto& kv : sec.second)
                if (!used_.count(sec.first + "." + kv.first))
                    throw ConfigError("unknown field '" + sec.first + "." + kv.first + "'");
        }
    }

    /// Sections and keys sorted, one "key = value" per line.
    std::string canonical() const {
        std::set<std::string> sections;
        for (const auto& sec : tree_) sections.insert(sec.first);
        std::ostringstream o;
        for (const auto& s : sections) {
            o << '[' << s << "]\n";
            std::set<std::pair<std::string, std::string>> kvs;
            for (const auto& kv : tree_.get_child(path(s)))
                kvs.emplace(kv.first, trim(kv.second.data()));
            for (const auto& [k, v] : kvs) o << k << " = " << v << '\n';
            o << '\n';
        }
        return o.str();
    }

    std::string hash() const { return hex64(fnv1a(canonical())); }

private:
    using Tree = boost::property_tree::ptree;
    // keys may contain dots (lesion.shape), so paths use a separator that never appears
    static Tree::path_type path(const std::string& s) { return Tree::path_type(s, '\x1f'); }

    static std::string comma_to_space(std::string s) {
        for (char& c : s)
            if (c == ',') c = ' ';
        return s;
    }

    static double to_double(const std::string& field, const std::string& v) {
        const std::string t = trim(v);
        std::size_t used = 0;
        double d = 0.0;
        try {
            d = std::stod(t, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != t.size())
            throw ConfigError("field '" + field + "': expected a number, got '" + v + "'");
        return d;
    }

    const std::string* raw(const std::string& dotted) const {
        const auto dot = dotted.find('.');
        if (dot == std::string::npos) return nullptr;
        auto sec = tree_.get_child_optional(path(dotted.substr(0, dot)));
        if (!sec) return nullptr;
        auto val = sec->get_child_optional(path(dotted.substr(dot + 1)));
        if (!val) return nullptr;
        used_.insert(dotted);
        return &val->data();
    }

    Tree tree_;
    mutable std::set<std::string> used_;
};

} // namespace amyepi::config
