#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace jprof {

// Accepts "500us", "10ms", "1.5s"; a bare number is microseconds.
std::uint64_t parse_duration_us(std::string_view text);
// Accepts "250uj", "16mj", "2j"; a bare number is microjoules.
std::uint64_t parse_energy_uj(std::string_view text);
// Accepts "800000uw", "900mw", "5w"; a bare number is microwatts.
std::uint64_t parse_power_uw(std::string_view text);

// Rounds to six significant digits. Documents quote numbers through this
// so every format prints the same value.
double round_sig6(double value);
std::string format_sig6(double value);

}  // namespace jprof
