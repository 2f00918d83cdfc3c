#include "socsim/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "socsim/errors.hpp"

namespace soc {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* kind) {
    T out{};
    const char* first = value.data();
    const char* last = first + value.size();
    if (!value.empty() && value[0] == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last || first == last)
        throw ConfigError(key + ": expected " + kind + ", got '" + value + "'");
    return out;
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
    KeyValues kv;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::ios_base::failure("cannot open config file " + path.string());
    return parse_key_values(f);
}

double parse_real(const std::string& key, const std::string& value) {
    const double v = parse_number<double>(key, value, "a real number");
    if (!std::isfinite(v)) throw ConfigError(key + ": must be finite");
    return v;
}

std::int64_t parse_integer(const std::string& key, const std::string& value) {
    return parse_number<std::int64_t>(key, value, "an integer");
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& value) {
    return parse_number<std::uint64_t>(key, value, "a non-negative integer");
}

}  // namespace soc
