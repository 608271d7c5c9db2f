#include "jprof/units_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "jprof/errors.hpp"

namespace jprof {

namespace {

// Splits "12.5ms" into value and unit, scales by the unit factor and
// rounds to an integer count of the base unit.
std::uint64_t parse_scaled(std::string_view text, std::string_view what,
                           const std::pair<std::string_view, double> units[],
                           std::size_t n_units) {
    std::string s(text);
    s.erase(std::remove_if(s.begin(), s.end(),
                           [](unsigned char c) { return std::isspace(c); }),
            s.end());
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (s.empty()) throw InvalidArgument("empty " + std::string(what));

    std::size_t unit_at = s.size();
    while (unit_at > 0 && std::isalpha(static_cast<unsigned char>(s[unit_at - 1])))
        --unit_at;
    std::string digits = s.substr(0, unit_at);
    std::string unit = s.substr(unit_at);

    double scale = 1.0;
    if (!unit.empty()) {
        bool found = false;
        for (std::size_t i = 0; i < n_units; ++i) {
            if (unit == units[i].first) {
                scale = units[i].second;
                found = true;
                break;
            }
        }
        if (!found)
            throw InvalidArgument("unknown " + std::string(what) + " unit '" + unit + "'");
    }

    char* end = nullptr;
    double value = std::strtod(digits.c_str(), &end);
    if (digits.empty() || end != digits.c_str() + digits.size() || value < 0 ||
        !std::isfinite(value))
        throw InvalidArgument("bad " + std::string(what) + " '" + std::string(text) + "'");
    double scaled = value * scale;
    if (scaled > 1.8e19)
        throw InvalidArgument(std::string(what) + " out of range: " + std::string(text));
    return static_cast<std::uint64_t>(std::llround(scaled));
}

}  // namespace

std::uint64_t parse_duration_us(std::string_view text) {
    static const std::pair<std::string_view, double> units[] = {
        {"us", 1.0}, {"ms", 1e3}, {"s", 1e6}, {"m", 6e7}, {"min", 6e7}};
    return parse_scaled(text, "duration", units, 5);
}

std::uint64_t parse_energy_uj(std::string_view text) {
    static const std::pair<std::string_view, double> units[] = {
        {"uj", 1.0}, {"mj", 1e3}, {"j", 1e6}, {"kj", 1e9}};
    return parse_scaled(text, "energy", units, 4);
}

std::uint64_t parse_power_uw(std::string_view text) {
    static const std::pair<std::string_view, double> units[] = {
        {"uw", 1.0}, {"mw", 1e3}, {"w", 1e6}, {"kw", 1e9}};
    return parse_scaled(text, "power", units, 4);
}

double round_sig6(double value) {
    if (value == 0.0 || !std::isfinite(value)) return value;
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return std::strtod(buf, nullptr);
}

std::string format_sig6(double value) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", round_sig6(value));
    return buf;
}

}  // namespace jprof
