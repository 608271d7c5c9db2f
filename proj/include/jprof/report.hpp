#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "jprof/harness.hpp"
#include "jprof/sampler.hpp"
#include "jprof/spans.hpp"

namespace jprof {

enum class Format { Text, Json, Csv, Svg };

Format parse_format(std::string_view name);

struct FlatCell {
    std::uint64_t hits = 0;
    std::uint64_t energy_uj = 0;  // hits * threshold
    double share = 0;             // of the domain's total hits
};

struct FlatRow {
    std::string function;
    std::uint64_t perf_ticks = 0;
    std::map<EnergyDomain, FlatCell> domains;
};

// Rows sorted by package energy, highest first; ties break on name.
std::vector<FlatRow> flat_rows(const Profile& profile);

// Sampling profile. Formats: text, json, csv, svg. The JSON document
// carries raw integer counts next to the rounded display values, so it
// reloads without loss; SVG carries them as data-* attributes. An empty
// profile renders as an explicitly empty document, not an error.
std::string render_flat(const Profile& profile, Format format);

// Span tree. Formats: text, json.
std::string render_spans(const SpanReport& root, Format format);

// Thread sweep. Formats: text, json, csv. Machine metadata must include
// "cores". Every repetition is listed, plus per-thread-count medians.
std::string render_sweep(const std::vector<RunResult>& results,
                         const std::map<std::string, std::string>& machine_meta,
                         Format format);

// Two sweeps side by side. Formats: text, json, csv.
std::string render_comparison(const ComparisonTable& table, Format format);

// Stored-document reload (inverse of the JSON renderers above).
Profile profile_from_json(const std::string& text);
SpanReport spans_from_json(const std::string& text);
std::pair<std::vector<RunResult>, std::map<std::string, std::string>> sweep_from_json(
    const std::string& text);
ComparisonTable comparison_from_json(const std::string& text);

// Re-renders a stored JSON document (any kind) in another format.
std::string rerender(const std::string& json_text, Format format);

}  // namespace jprof
