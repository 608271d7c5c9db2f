#include "jprof/report.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"

#include "jprof/errors.hpp"
#include "jprof/units_io.hpp"

namespace jprof {

using nlohmann::json;

namespace {

constexpr const char* kSchema = "joulescope-prof/v1";

double sig6(double v) { return round_sig6(v); }

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string pad_left(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string pct(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", fraction * 100.0);
    return buf;
}

// Returns a reference: the loops below iterate the result, and a copy
// would be destroyed before the loop body runs.
const json& require(const json& doc, const char* key) {
    if (!doc.is_object() || !doc.contains(key))
        throw ParseError(std::string("document is missing '") + key + "'", 0);
    return doc.at(key);
}

json parse_document(const std::string& text, const char* kind) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ParseError("document is not valid JSON", 0);
    if (require(doc, "schema").get<std::string>() != kSchema)
        throw InvalidArgument("unknown document schema");
    if (kind && require(doc, "kind").get<std::string>() != kind)
        throw InvalidArgument(std::string("document is not a ") + kind + " profile");
    return doc;
}

}  // namespace

Format parse_format(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (s == "text" || s == "txt") return Format::Text;
    if (s == "json") return Format::Json;
    if (s == "csv") return Format::Csv;
    if (s == "svg") return Format::Svg;
    throw InvalidArgument("unknown format '" + std::string(name) + "'");
}

std::vector<FlatRow> flat_rows(const Profile& profile) {
    std::map<EnergyDomain, std::uint64_t> totals;
    for (const auto& [fn, row] : profile.rows)
        for (const auto& [domain, hits] : row.hits) totals[domain] += hits;

    std::vector<FlatRow> rows;
    for (const auto& [fn, row] : profile.rows) {
        FlatRow out;
        out.function = profile.registry.name(fn);
        out.perf_ticks = row.perf_ticks;
        for (const auto& [domain, hits] : row.hits) {
            FlatCell cell;
            cell.hits = hits;
            cell.energy_uj = hits * profile.config.threshold_uj.at(domain);
            std::uint64_t total = totals.at(domain);
            cell.share = total > 0
                             ? static_cast<double>(hits) / static_cast<double>(total)
                             : 0.0;
            out.domains.emplace(domain, cell);
        }
        rows.push_back(std::move(out));
    }

    auto package_energy = [](const FlatRow& r) {
        std::uint64_t uj = 0;
        for (const auto& [domain, cell] : r.domains)
            if (domain.kind == DomainKind::Package) uj += cell.energy_uj;
        return uj;
    };
    auto total_energy = [](const FlatRow& r) {
        std::uint64_t uj = 0;
        for (const auto& [domain, cell] : r.domains) uj += cell.energy_uj;
        return uj;
    };
    std::sort(rows.begin(), rows.end(), [&](const FlatRow& a, const FlatRow& b) {
        std::uint64_t pa = package_energy(a), pb = package_energy(b);
        if (pa != pb) return pa > pb;
        std::uint64_t ta = total_energy(a), tb = total_energy(b);
        if (ta != tb) return ta > tb;
        return a.function < b.function;
    });
    return rows;
}

namespace {

std::vector<EnergyDomain> profile_domains(const Profile& profile) {
    if (!profile.config.domains.empty()) {
        std::vector<EnergyDomain> sorted = profile.config.domains;
        std::sort(sorted.begin(), sorted.end());
        return sorted;
    }
    std::vector<EnergyDomain> sorted;
    for (const auto& [domain, unused] : profile.config.threshold_uj)
        sorted.push_back(domain);
    return sorted;
}

std::string render_flat_text(const Profile& profile) {
    std::vector<EnergyDomain> domains = profile_domains(profile);
    std::vector<FlatRow> rows = flat_rows(profile);
    std::ostringstream out;
    out << "energy profile\n";
    out << "period_us: " << profile.config.period_us
        << "  total_ticks: " << profile.total_ticks
        << "  wall_time_us: " << profile.wall_time_us << "\n";
    for (const EnergyDomain& d : domains) {
        std::uint64_t hits = profile.total_hits(d);
        auto thr = profile.config.threshold_uj.find(d);
        out << "domain " << to_string(d) << ": threshold_uj "
            << (thr != profile.config.threshold_uj.end() ? thr->second : 0)
            << "  hits " << hits << "  energy_j "
            << format_sig6(static_cast<double>(
                   hits * (thr != profile.config.threshold_uj.end() ? thr->second
                                                                    : 0)) /
                           1e6);
        auto res = profile.residual_uj.find(d);
        if (res != profile.residual_uj.end())
            out << "  residual_uj " << res->second;
        auto meas = profile.total_energy_uj.find(d);
        if (meas != profile.total_energy_uj.end())
            out << "  measured_uj " << meas->second;
        out << "\n";
    }
    out << "\n";
    if (rows.empty()) {
        out << "(no samples)\n";
        return out.str();
    }

    std::size_t name_w = 8;
    for (const FlatRow& r : rows) name_w = std::max(name_w, r.function.size());
    out << pad_right("function", name_w) << pad_left("ticks", 10)
        << pad_left("time%", 9);
    for (const EnergyDomain& d : domains) {
        out << pad_left(to_string(d) + " hits", 14)
            << pad_left(to_string(d) + " J", 12) << pad_left(to_string(d) + "%", 9);
    }
    out << "\n";
    for (const FlatRow& r : rows) {
        out << pad_right(r.function, name_w) << pad_left(std::to_string(r.perf_ticks), 10)
            << pad_left(profile.total_ticks > 0
                            ? pct(static_cast<double>(r.perf_ticks) /
                                  static_cast<double>(profile.total_ticks))
                            : pct(0),
                        9);
        for (const EnergyDomain& d : domains) {
            auto it = r.domains.find(d);
            if (it == r.domains.end()) {
                out << pad_left("0", 14) << pad_left("0", 12) << pad_left(pct(0), 9);
                continue;
            }
            out << pad_left(std::to_string(it->second.hits), 14)
                << pad_left(format_sig6(static_cast<double>(it->second.energy_uj) / 1e6),
                            12)
                << pad_left(pct(it->second.share), 9);
        }
        out << "\n";
    }
    return out.str();
}

json flat_to_json(const Profile& profile) {
    std::vector<EnergyDomain> domains = profile_domains(profile);
    json doc;
    doc["schema"] = kSchema;
    doc["kind"] = "flat";
    doc["period_us"] = profile.config.period_us;
    json thresholds = json::object();
    for (const auto& [domain, uj] : profile.config.threshold_uj)
        thresholds[to_string(domain)] = uj;
    doc["threshold_uj"] = thresholds;
    json domain_list = json::array();
    for (const EnergyDomain& d : domains) domain_list.push_back(to_string(d));
    doc["domains"] = domain_list;
    doc["total_ticks"] = profile.total_ticks;
    doc["wall_time_us"] = profile.wall_time_us;
    doc["sampler_self_time_us"] = profile.sampler_self_time_us;

    json totals = json::object();
    for (const EnergyDomain& d : domains) {
        json t;
        std::uint64_t hits = profile.total_hits(d);
        auto thr = profile.config.threshold_uj.find(d);
        std::uint64_t threshold =
            thr != profile.config.threshold_uj.end() ? thr->second : 0;
        t["hits"] = hits;
        t["energy_j"] = sig6(static_cast<double>(hits * threshold) / 1e6);
        auto res = profile.residual_uj.find(d);
        if (res != profile.residual_uj.end()) t["residual_uj"] = res->second;
        auto meas = profile.total_energy_uj.find(d);
        if (meas != profile.total_energy_uj.end()) t["measured_uj"] = meas->second;
        totals[to_string(d)] = t;
    }
    doc["totals"] = totals;

    json rows = json::array();
    for (const FlatRow& r : flat_rows(profile)) {
        json row;
        row["function"] = r.function;
        row["perf_ticks"] = r.perf_ticks;
        row["time_share"] =
            profile.total_ticks > 0
                ? sig6(static_cast<double>(r.perf_ticks) /
                       static_cast<double>(profile.total_ticks))
                : 0.0;
        json cells = json::object();
        for (const auto& [domain, cell] : r.domains) {
            json c;
            c["hits"] = cell.hits;
            c["energy_j"] = sig6(static_cast<double>(cell.energy_uj) / 1e6);
            c["share"] = sig6(cell.share);
            cells[to_string(domain)] = c;
        }
        row["domains"] = cells;
        rows.push_back(row);
    }
    doc["rows"] = rows;
    return doc;
}

std::string render_flat_csv(const Profile& profile) {
    std::vector<EnergyDomain> domains = profile_domains(profile);
    std::ostringstream out;
    out << "function,perf_ticks,time_share";
    for (const EnergyDomain& d : domains)
        out << ',' << to_string(d) << "_hits," << to_string(d) << "_energy_j,"
            << to_string(d) << "_share";
    out << "\n";
    for (const FlatRow& r : flat_rows(profile)) {
        out << r.function << ',' << r.perf_ticks << ','
            << (profile.total_ticks > 0
                    ? format_sig6(static_cast<double>(r.perf_ticks) /
                                  static_cast<double>(profile.total_ticks))
                    : "0");
        for (const EnergyDomain& d : domains) {
            auto it = r.domains.find(d);
            if (it == r.domains.end()) {
                out << ",0,0,0";
                continue;
            }
            out << ',' << it->second.hits << ','
                << format_sig6(static_cast<double>(it->second.energy_uj) / 1e6) << ','
                << format_sig6(it->second.share);
        }
        out << "\n";
    }
    return out.str();
}

std::string fmt1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

// Bar chart of hits per function and domain (left axis) with perf ticks
// overlaid (right axis). Raw counts ride along as data-* attributes.
std::string render_flat_svg(const Profile& profile) {
    std::vector<EnergyDomain> domains = profile_domains(profile);
    std::vector<FlatRow> rows = flat_rows(profile);

    const double width = 900, height = 420;
    const double left = 70, right = 830, top = 30, bottom = 340;
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
        << "\">\n";
    out << "<title>energy profile</title>\n";
    out << "<style>text{font-family:monospace;font-size:11px}</style>\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
        << "\" fill=\"white\"/>\n";

    if (rows.empty()) {
        out << "<text x=\"" << (width / 2) << "\" y=\"" << (height / 2)
            << "\" text-anchor=\"middle\" data-total-ticks=\"" << profile.total_ticks
            << "\">no samples</text>\n";
        out << "</svg>\n";
        return out.str();
    }

    std::uint64_t max_hits = 1, max_ticks = 1;
    for (const FlatRow& r : rows) {
        max_ticks = std::max(max_ticks, r.perf_ticks);
        for (const auto& [domain, cell] : r.domains)
            max_hits = std::max(max_hits, cell.hits);
    }

    const char* palette[] = {"#4878a8", "#e49444", "#59a14f", "#b07aa1", "#79706e"};
    double band = (right - left) / static_cast<double>(rows.size());
    double sub = band * 0.8 / static_cast<double>(domains.size());

    out << "<g class=\"frame\" stroke=\"#333\" fill=\"none\">\n";
    out << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right
        << "\" y2=\"" << bottom << "\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left
        << "\" y2=\"" << bottom << "\"/>\n";
    out << "<line x1=\"" << right << "\" y1=\"" << top << "\" x2=\"" << right
        << "\" y2=\"" << bottom << "\"/>\n";
    out << "</g>\n";

    out << "<g class=\"bars\">\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const FlatRow& r = rows[i];
        double x0 = left + band * static_cast<double>(i) + band * 0.1;
        for (std::size_t d = 0; d < domains.size(); ++d) {
            auto it = r.domains.find(domains[d]);
            std::uint64_t hits = it != r.domains.end() ? it->second.hits : 0;
            std::uint64_t uj = it != r.domains.end() ? it->second.energy_uj : 0;
            double h = (bottom - top) * static_cast<double>(hits) /
                       static_cast<double>(max_hits);
            out << "<rect x=\"" << fmt1(x0 + sub * static_cast<double>(d))
                << "\" y=\"" << fmt1(bottom - h) << "\" width=\"" << fmt1(sub)
                << "\" height=\"" << fmt1(h) << "\" fill=\"" << palette[d % 5]
                << "\" data-function=\"" << xml_escape(r.function)
                << "\" data-domain=\"" << to_string(domains[d]) << "\" data-hits=\""
                << hits << "\" data-energy-uj=\"" << uj << "\"/>\n";
        }
    }
    out << "</g>\n";

    out << "<g class=\"perf-ticks\" fill=\"#d62728\">\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double cx = left + band * (static_cast<double>(i) + 0.5);
        double cy = bottom - (bottom - top) * static_cast<double>(rows[i].perf_ticks) /
                                 static_cast<double>(max_ticks);
        out << "<circle cx=\"" << fmt1(cx) << "\" cy=\"" << fmt1(cy)
            << "\" r=\"3\" data-function=\"" << xml_escape(rows[i].function)
            << "\" data-perf-ticks=\"" << rows[i].perf_ticks << "\"/>\n";
    }
    out << "</g>\n";

    out << "<g class=\"labels\">\n";
    out << "<text x=\"" << (left - 6) << "\" y=\"" << (top + 4)
        << "\" text-anchor=\"end\">" << max_hits << "</text>\n";
    out << "<text x=\"" << (left - 6) << "\" y=\"" << bottom
        << "\" text-anchor=\"end\">0</text>\n";
    out << "<text x=\"" << (right + 6) << "\" y=\"" << (top + 4) << "\">" << max_ticks
        << "</text>\n";
    out << "<text x=\"" << (right + 6) << "\" y=\"" << bottom << "\">0</text>\n";
    out << "<text x=\"" << left << "\" y=\"16\">hits (bars)</text>\n";
    out << "<text x=\"" << (right - 120) << "\" y=\"16\">perf ticks (dots)</text>\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::string label = rows[i].function.substr(0, 14);
        out << "<text x=\"" << fmt1(left + band * (static_cast<double>(i) + 0.5))
            << "\" y=\"" << (bottom + 16) << "\" text-anchor=\"middle\">"
            << xml_escape(label) << "</text>\n";
    }
    for (std::size_t d = 0; d < domains.size(); ++d) {
        double y = bottom + 36 + 14 * static_cast<double>(d);
        out << "<rect x=\"" << left << "\" y=\"" << fmt1(y - 9)
            << "\" width=\"10\" height=\"10\" fill=\"" << palette[d % 5] << "\"/>\n";
        out << "<text x=\"" << (left + 16) << "\" y=\"" << fmt1(y) << "\">"
            << to_string(domains[d]) << "</text>\n";
    }
    out << "</g>\n";
    out << "</svg>\n";
    return out.str();
}

}  // namespace

std::string render_flat(const Profile& profile, Format format) {
    switch (format) {
        case Format::Text: return render_flat_text(profile);
        case Format::Json: return flat_to_json(profile).dump(2) + "\n";
        case Format::Csv: return render_flat_csv(profile);
        case Format::Svg: return render_flat_svg(profile);
    }
    throw InvalidArgument("unsupported format");
}

namespace {

void render_span_text(const SpanReport& span, int depth, std::ostringstream& out) {
    std::string name(static_cast<std::size_t>(depth) * 2, ' ');
    name += span.name;
    out << pad_right(name, 28)
        << pad_left(format_sig6(static_cast<double>(span.duration_us) / 1e6) + "s", 12);
    for (const auto& [domain, cell] : span.domains) {
        out << "  " << to_string(domain) << " "
            << format_sig6(static_cast<double>(cell.energy_uj) / 1e6) << "J ("
            << format_sig6(static_cast<double>(cell.avg_power_uw) / 1e6) << "W, self "
            << format_sig6(static_cast<double>(cell.energy_uj_exclusive) / 1e6)
            << "J)";
    }
    if (span.flags.degenerate) out << "  [degenerate]";
    if (span.flags.low_confidence) out << "  [low-confidence]";
    if (span.flags.shared_counter) out << "  [shared-counter]";
    out << "\n";
    for (const SpanReport& child : span.children)
        render_span_text(child, depth + 1, out);
}

json span_to_json(const SpanReport& span) {
    json node;
    node["name"] = span.name;
    node["duration_us"] = span.duration_us;
    json cells = json::object();
    for (const auto& [domain, cell] : span.domains) {
        json c;
        c["energy_uj"] = cell.energy_uj;
        c["exclusive_uj"] = cell.energy_uj_exclusive;
        c["avg_power_uw"] = cell.avg_power_uw;
        c["energy_j"] = sig6(static_cast<double>(cell.energy_uj) / 1e6);
        c["avg_power_w"] = sig6(static_cast<double>(cell.avg_power_uw) / 1e6);
        cells[to_string(domain)] = c;
    }
    node["domains"] = cells;
    json flags;
    flags["degenerate"] = span.flags.degenerate;
    flags["low_confidence"] = span.flags.low_confidence;
    flags["shared_counter"] = span.flags.shared_counter;
    node["flags"] = flags;
    json children = json::array();
    for (const SpanReport& child : span.children)
        children.push_back(span_to_json(child));
    node["children"] = children;
    return node;
}

}  // namespace

std::string render_spans(const SpanReport& root, Format format) {
    switch (format) {
        case Format::Text: {
            std::ostringstream out;
            out << "span tree\n";
            render_span_text(root, 0, out);
            return out.str();
        }
        case Format::Json: {
            json doc;
            doc["schema"] = kSchema;
            doc["kind"] = "spans";
            doc["root"] = span_to_json(root);
            return doc.dump(2) + "\n";
        }
        default:
            throw InvalidArgument("span trees render as text or json");
    }
}

namespace {

json metrics_to_json(const EfficiencyMetrics& m) {
    json doc;
    doc["threads"] = m.threads;
    doc["events"] = m.events;
    doc["wall_time_s"] = sig6(m.wall_time_s);
    doc["events_per_second"] = sig6(m.events_per_second);
    doc["events_per_second_per_core"] = sig6(m.events_per_second_per_core);
    json joules = json::object(), jpe = json::object(), epj = json::object();
    for (const auto& [domain, v] : m.joules) joules[to_string(domain)] = sig6(v);
    for (const auto& [domain, v] : m.joules_per_event) jpe[to_string(domain)] = sig6(v);
    for (const auto& [domain, v] : m.events_per_joule) epj[to_string(domain)] = sig6(v);
    doc["joules"] = joules;
    doc["joules_per_event"] = jpe;
    doc["events_per_joule"] = epj;
    if (m.external_joules) doc["external_joules"] = sig6(*m.external_joules);
    if (m.external_joules_per_event)
        doc["external_joules_per_event"] = sig6(*m.external_joules_per_event);
    doc["zero_events"] = m.zero_events;
    doc["overcommitted"] = m.overcommitted;
    return doc;
}

EfficiencyMetrics metrics_from_json(const json& doc) {
    EfficiencyMetrics m;
    m.threads = require(doc, "threads").get<int>();
    m.events = require(doc, "events").get<std::uint64_t>();
    m.wall_time_s = require(doc, "wall_time_s").get<double>();
    m.events_per_second = require(doc, "events_per_second").get<double>();
    m.events_per_second_per_core =
        require(doc, "events_per_second_per_core").get<double>();
    for (const auto& [key, v] : require(doc, "joules").items())
        m.joules[parse_domain(key)] = v.get<double>();
    for (const auto& [key, v] : require(doc, "joules_per_event").items())
        m.joules_per_event[parse_domain(key)] = v.get<double>();
    for (const auto& [key, v] : require(doc, "events_per_joule").items())
        m.events_per_joule[parse_domain(key)] = v.get<double>();
    if (doc.contains("external_joules"))
        m.external_joules = doc.at("external_joules").get<double>();
    if (doc.contains("external_joules_per_event"))
        m.external_joules_per_event = doc.at("external_joules_per_event").get<double>();
    m.zero_events = require(doc, "zero_events").get<bool>();
    m.overcommitted = require(doc, "overcommitted").get<bool>();
    return m;
}

std::vector<EnergyDomain> sweep_domains(const std::vector<RunResult>& results) {
    std::set<EnergyDomain> domains;
    for (const RunResult& r : results)
        for (const auto& [domain, unused] : r.energy_uj) domains.insert(domain);
    return {domains.begin(), domains.end()};
}

std::map<int, EfficiencyMetrics> sweep_medians(const std::vector<RunResult>& results,
                                               int cores) {
    std::map<int, std::vector<EfficiencyMetrics>> grouped;
    for (const RunResult& r : results)
        grouped[r.threads].push_back(compute_metrics(r, cores));
    std::map<int, EfficiencyMetrics> medians;
    for (const auto& [threads, metrics] : grouped)
        medians.emplace(threads, median_metrics(metrics));
    return medians;
}

json sweep_to_json(const std::vector<RunResult>& results,
                   const std::map<std::string, std::string>& meta) {
    int cores = cores_from_meta(meta);
    json doc;
    doc["schema"] = kSchema;
    doc["kind"] = "sweep";
    doc["machine"] = meta;
    json runs = json::array();
    for (const RunResult& r : results) {
        json row;
        row["threads"] = r.threads;
        row["repetition"] = r.repetition;
        row["start_us"] = r.start_us;
        row["end_us"] = r.end_us;
        row["wall_time_us"] = r.wall_time_us;
        row["events"] = r.events;
        row["events_from_output"] = r.events_from_output;
        row["exit_status"] = r.exit_status;
        row["success"] = r.success;
        json energy = json::object();
        for (const auto& [domain, uj] : r.energy_uj) energy[to_string(domain)] = uj;
        row["energy_uj"] = energy;
        if (r.external_joules) row["external_joules"] = sig6(*r.external_joules);
        row["metrics"] = metrics_to_json(compute_metrics(r, cores));
        runs.push_back(row);
    }
    doc["runs"] = runs;
    json medians = json::array();
    for (const auto& [threads, m] : sweep_medians(results, cores))
        medians.push_back(metrics_to_json(m));
    doc["medians"] = medians;
    return doc;
}

std::string render_sweep_text(const std::vector<RunResult>& results,
                              const std::map<std::string, std::string>& meta) {
    int cores = cores_from_meta(meta);
    std::vector<EnergyDomain> domains = sweep_domains(results);
    std::ostringstream out;
    out << "thread sweep";
    for (const auto& [key, value] : meta) out << "  " << key << "=" << value;
    out << "\n\n";
    out << pad_left("threads", 8) << pad_left("rep", 5) << pad_left("wall_s", 10)
        << pad_left("events", 10) << pad_left("ev/s", 12) << pad_left("ev/s/core", 12);
    for (const EnergyDomain& d : domains)
        out << pad_left(to_string(d) + " J", 12) << pad_left(to_string(d) + " J/ev", 14)
            << pad_left(to_string(d) + " ev/J", 14);
    out << pad_left("ext J", 10) << "  flags\n";
    auto metric_line = [&](const EfficiencyMetrics& m, const std::string& rep,
                           bool success) {
        out << pad_left(std::to_string(m.threads), 8) << pad_left(rep, 5)
            << pad_left(format_sig6(m.wall_time_s), 10)
            << pad_left(std::to_string(m.events), 10)
            << pad_left(format_sig6(m.events_per_second), 12)
            << pad_left(format_sig6(m.events_per_second_per_core), 12);
        for (const EnergyDomain& d : domains) {
            auto j = m.joules.find(d);
            out << pad_left(j != m.joules.end() ? format_sig6(j->second) : "-", 12);
            auto jpe = m.joules_per_event.find(d);
            out << pad_left(jpe != m.joules_per_event.end() ? format_sig6(jpe->second)
                                                            : "-",
                            14);
            auto epj = m.events_per_joule.find(d);
            out << pad_left(epj != m.events_per_joule.end() ? format_sig6(epj->second)
                                                            : "-",
                            14);
        }
        out << pad_left(m.external_joules ? format_sig6(*m.external_joules) : "-", 10);
        std::string flags;
        if (!success) flags += " failed";
        if (m.zero_events) flags += " zero-events";
        if (m.overcommitted) flags += " overcommit";
        out << " " << (flags.empty() ? " -" : flags) << "\n";
    };
    for (const RunResult& r : results)
        metric_line(compute_metrics(r, cores), std::to_string(r.repetition), r.success);
    out << "\nmedians:\n";
    for (const auto& [threads, m] : sweep_medians(results, cores))
        metric_line(m, "med", true);
    return out.str();
}

std::string render_sweep_csv(const std::vector<RunResult>& results,
                             const std::map<std::string, std::string>& meta) {
    int cores = cores_from_meta(meta);
    std::vector<EnergyDomain> domains = sweep_domains(results);
    std::ostringstream out;
    out << "threads,repetition,success,wall_time_s,events,events_per_second,"
        << "events_per_second_per_core";
    for (const EnergyDomain& d : domains)
        out << ',' << to_string(d) << "_joules," << to_string(d) << "_joules_per_event,"
            << to_string(d) << "_events_per_joule";
    out << ",external_joules,external_joules_per_event,overcommitted\n";
    for (const RunResult& r : results) {
        EfficiencyMetrics m = compute_metrics(r, cores);
        out << r.threads << ',' << r.repetition << ',' << (r.success ? 1 : 0) << ','
            << format_sig6(m.wall_time_s) << ',' << m.events << ','
            << format_sig6(m.events_per_second) << ','
            << format_sig6(m.events_per_second_per_core);
        for (const EnergyDomain& d : domains) {
            auto j = m.joules.find(d);
            out << ',' << (j != m.joules.end() ? format_sig6(j->second) : "");
            auto jpe = m.joules_per_event.find(d);
            out << ','
                << (jpe != m.joules_per_event.end() ? format_sig6(jpe->second) : "");
            auto epj = m.events_per_joule.find(d);
            out << ','
                << (epj != m.events_per_joule.end() ? format_sig6(epj->second) : "");
        }
        out << ',' << (m.external_joules ? format_sig6(*m.external_joules) : "") << ','
            << (m.external_joules_per_event ? format_sig6(*m.external_joules_per_event)
                                            : "")
            << ',' << (m.overcommitted ? 1 : 0) << "\n";
    }
    return out.str();
}

}  // namespace

std::string render_sweep(const std::vector<RunResult>& results,
                         const std::map<std::string, std::string>& machine_meta,
                         Format format) {
    switch (format) {
        case Format::Text: return render_sweep_text(results, machine_meta);
        case Format::Json: return sweep_to_json(results, machine_meta).dump(2) + "\n";
        case Format::Csv: return render_sweep_csv(results, machine_meta);
        default: throw InvalidArgument("sweeps render as text, json or csv");
    }
}

std::string render_comparison(const ComparisonTable& table, Format format) {
    switch (format) {
        case Format::Text: {
            std::ostringstream out;
            out << "sweep comparison: " << table.label_a << " vs " << table.label_b
                << "\n";
            for (const ComparisonRow& row : table.rows) {
                out << "\nthreads " << row.threads << ":\n";
                out << "  " << pad_right("metric", 34) << pad_left(table.label_a, 14)
                    << pad_left(table.label_b, 14) << pad_left("b/a", 10) << "\n";
                for (const auto& [key, ratio] : row.ratios) {
                    auto value_of = [&](const EfficiencyMetrics& m) -> std::string {
                        std::size_t dot = key.find('.');
                        std::string base = key.substr(0, dot);
                        if (base == "wall_time_s") return format_sig6(m.wall_time_s);
                        if (base == "events_per_second")
                            return format_sig6(m.events_per_second);
                        if (base == "events_per_second_per_core")
                            return format_sig6(m.events_per_second_per_core);
                        if (base == "external_joules_per_event")
                            return m.external_joules_per_event
                                       ? format_sig6(*m.external_joules_per_event)
                                       : "-";
                        EnergyDomain d = parse_domain(key.substr(dot + 1));
                        const auto& map = base == "joules_per_event"
                                              ? m.joules_per_event
                                              : m.events_per_joule;
                        auto it = map.find(d);
                        return it != map.end() ? format_sig6(it->second) : "-";
                    };
                    out << "  " << pad_right(key, 34) << pad_left(value_of(row.a), 14)
                        << pad_left(value_of(row.b), 14)
                        << pad_left(format_sig6(ratio), 10) << "\n";
                }
            }
            return out.str();
        }
        case Format::Json: {
            json doc;
            doc["schema"] = kSchema;
            doc["kind"] = "comparison";
            doc["label_a"] = table.label_a;
            doc["label_b"] = table.label_b;
            json rows = json::array();
            for (const ComparisonRow& row : table.rows) {
                json r;
                r["threads"] = row.threads;
                r["a"] = metrics_to_json(row.a);
                r["b"] = metrics_to_json(row.b);
                json ratios = json::object();
                for (const auto& [key, ratio] : row.ratios) ratios[key] = sig6(ratio);
                r["ratios"] = ratios;
                rows.push_back(r);
            }
            doc["rows"] = rows;
            return doc.dump(2) + "\n";
        }
        case Format::Csv: {
            std::ostringstream out;
            out << "threads,metric,b_over_a\n";
            for (const ComparisonRow& row : table.rows)
                for (const auto& [key, ratio] : row.ratios)
                    out << row.threads << ',' << key << ',' << format_sig6(ratio)
                        << "\n";
            return out.str();
        }
        default:
            throw InvalidArgument("comparisons render as text, json or csv");
    }
}

Profile profile_from_json(const std::string& text) {
    json doc = parse_document(text, "flat");
    Profile profile;
    profile.config.period_us = require(doc, "period_us").get<std::uint64_t>();
    for (const auto& [key, v] : require(doc, "threshold_uj").items())
        profile.config.threshold_uj[parse_domain(key)] = v.get<std::uint64_t>();
    for (const auto& name : require(doc, "domains"))
        profile.config.domains.push_back(parse_domain(name.get<std::string>()));
    profile.total_ticks = require(doc, "total_ticks").get<std::uint64_t>();
    profile.wall_time_us = require(doc, "wall_time_us").get<std::uint64_t>();
    if (doc.contains("sampler_self_time_us"))
        profile.sampler_self_time_us = doc.at("sampler_self_time_us").get<std::uint64_t>();
    for (const auto& [key, t] : require(doc, "totals").items()) {
        EnergyDomain d = parse_domain(key);
        if (t.contains("residual_uj"))
            profile.residual_uj[d] = t.at("residual_uj").get<std::uint64_t>();
        if (t.contains("measured_uj"))
            profile.total_energy_uj[d] = t.at("measured_uj").get<std::uint64_t>();
    }
    for (const auto& row : require(doc, "rows")) {
        FunctionId id = profile.registry.intern(require(row, "function").get<std::string>());
        ProfileRow& target = profile.rows[id];
        target.perf_ticks = require(row, "perf_ticks").get<std::uint64_t>();
        for (const auto& [key, cell] : require(row, "domains").items())
            target.hits[parse_domain(key)] = require(cell, "hits").get<std::uint64_t>();
    }
    return profile;
}

namespace {

SpanReport span_from_json(const json& node) {
    SpanReport span;
    span.name = require(node, "name").get<std::string>();
    span.duration_us = require(node, "duration_us").get<std::uint64_t>();
    for (const auto& [key, cell] : require(node, "domains").items()) {
        SpanDomainEnergy e;
        e.energy_uj = require(cell, "energy_uj").get<std::uint64_t>();
        e.energy_uj_exclusive = require(cell, "exclusive_uj").get<std::uint64_t>();
        e.avg_power_uw = require(cell, "avg_power_uw").get<std::uint64_t>();
        span.domains[parse_domain(key)] = e;
    }
    json flags = require(node, "flags");
    span.flags.degenerate = require(flags, "degenerate").get<bool>();
    span.flags.low_confidence = require(flags, "low_confidence").get<bool>();
    span.flags.shared_counter = require(flags, "shared_counter").get<bool>();
    for (const auto& child : require(node, "children"))
        span.children.push_back(span_from_json(child));
    return span;
}

}  // namespace

SpanReport spans_from_json(const std::string& text) {
    json doc = parse_document(text, "spans");
    return span_from_json(require(doc, "root"));
}

std::pair<std::vector<RunResult>, std::map<std::string, std::string>> sweep_from_json(
    const std::string& text) {
    json doc = parse_document(text, "sweep");
    std::map<std::string, std::string> meta;
    for (const auto& [key, v] : require(doc, "machine").items())
        meta[key] = v.get<std::string>();
    std::vector<RunResult> results;
    for (const auto& row : require(doc, "runs")) {
        RunResult r;
        r.threads = require(row, "threads").get<int>();
        r.repetition = require(row, "repetition").get<int>();
        r.start_us = require(row, "start_us").get<std::uint64_t>();
        r.end_us = require(row, "end_us").get<std::uint64_t>();
        r.wall_time_us = require(row, "wall_time_us").get<std::uint64_t>();
        r.events = require(row, "events").get<std::uint64_t>();
        r.events_from_output = require(row, "events_from_output").get<bool>();
        r.exit_status = require(row, "exit_status").get<int>();
        r.success = require(row, "success").get<bool>();
        for (const auto& [key, v] : require(row, "energy_uj").items())
            r.energy_uj[parse_domain(key)] = v.get<std::uint64_t>();
        if (row.contains("external_joules"))
            r.external_joules = row.at("external_joules").get<double>();
        results.push_back(std::move(r));
    }
    return {std::move(results), std::move(meta)};
}

ComparisonTable comparison_from_json(const std::string& text) {
    json doc = parse_document(text, "comparison");
    ComparisonTable table;
    table.label_a = require(doc, "label_a").get<std::string>();
    table.label_b = require(doc, "label_b").get<std::string>();
    for (const auto& row : require(doc, "rows")) {
        ComparisonRow r;
        r.threads = require(row, "threads").get<int>();
        r.a = metrics_from_json(require(row, "a"));
        r.b = metrics_from_json(require(row, "b"));
        for (const auto& [key, v] : require(row, "ratios").items())
            r.ratios[key] = v.get<double>();
        table.rows.push_back(std::move(r));
    }
    return table;
}

std::string rerender(const std::string& json_text, Format format) {
    json doc = parse_document(json_text, nullptr);
    std::string kind = require(doc, "kind").get<std::string>();
    if (kind == "flat") return render_flat(profile_from_json(json_text), format);
    if (kind == "spans") return render_spans(spans_from_json(json_text), format);
    if (kind == "sweep") {
        auto [results, meta] = sweep_from_json(json_text);
        return render_sweep(results, meta, format);
    }
    if (kind == "comparison")
        return render_comparison(comparison_from_json(json_text), format);
    throw InvalidArgument("unknown document kind '" + kind + "'");
}

}  // namespace jprof
