#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "jprof/errors.hpp"
#include "jprof/report.hpp"

using namespace jprof;

namespace {

const EnergyDomain kPkg{DomainKind::Package, 0};
const EnergyDomain kDram{DomainKind::Dram, 0};

// Two functions, two domains, numbers chosen so every invariant is easy to
// eyeball: 1000 pkg hits at 100 uJ, 400 dram hits at 50 uJ.
Profile sample_profile() {
    Profile p;
    FunctionId encode = p.registry.intern("encode");
    FunctionId filter = p.registry.intern("filter");
    p.config.period_us = 1'000;
    p.config.threshold_uj[kPkg] = 100;
    p.config.threshold_uj[kDram] = 50;
    p.config.domains = {kPkg, kDram};
    p.rows[encode].hits[kPkg] = 600;
    p.rows[encode].hits[kDram] = 100;
    p.rows[encode].perf_ticks = 60;
    p.rows[filter].hits[kPkg] = 400;
    p.rows[filter].hits[kDram] = 300;
    p.rows[filter].perf_ticks = 40;
    p.total_ticks = 100;
    p.wall_time_us = 100'000;
    p.total_energy_uj[kPkg] = 100'123;
    p.residual_uj[kPkg] = 123;
    p.total_energy_uj[kDram] = 20'017;
    p.residual_uj[kDram] = 17;
    return p;
}

std::vector<RunResult> sample_runs() {
    RunResult r1;
    r1.threads = 1;
    r1.repetition = 1;
    r1.start_us = 1'000;
    r1.end_us = 101'000;
    r1.wall_time_us = 100'000;
    r1.events = 50;
    r1.events_from_output = true;
    r1.energy_uj[kPkg] = 250'000;
    r1.success = true;
    RunResult r2 = r1;
    r2.repetition = 2;
    r2.start_us = 200'000;
    r2.end_us = 300'000;
    r2.events = 70;
    r2.energy_uj[kPkg] = 350'000;
    return {r1, r2};
}

// Tag-balance scan, enough to catch unterminated elements and bad nesting.
bool xml_well_formed(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    while ((i = text.find('<', i)) != std::string::npos) {
        std::size_t end = text.find('>', i);
        if (end == std::string::npos) return false;
        std::string tag = text.substr(i + 1, end - i - 1);
        i = end + 1;
        if (tag.empty()) return false;
        if (tag[0] == '?' || tag[0] == '!') continue;
        if (tag[0] == '/') {
            if (stack.empty() || stack.back() != tag.substr(1)) return false;
            stack.pop_back();
            continue;
        }
        bool self_closed = tag.back() == '/';
        std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
        if (name.empty()) return false;
        if (!self_closed) stack.push_back(name);
    }
    return stack.empty();
}

}  // namespace

TEST_CASE("format names parse case-insensitively") {
    CHECK(parse_format("text") == Format::Text);
    CHECK(parse_format("txt") == Format::Text);
    CHECK(parse_format("JSON") == Format::Json);
    CHECK(parse_format("csv") == Format::Csv);
    CHECK(parse_format("Svg") == Format::Svg);
    CHECK_THROWS_AS(parse_format("pdf"), InvalidArgument);
}

TEST_CASE("flat rows sort by package energy and carry shares") {
    std::vector<FlatRow> rows = flat_rows(sample_profile());
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].function == "encode");
    CHECK(rows[1].function == "filter");
    CHECK(rows[0].domains.at(kPkg).hits == 600);
    CHECK(rows[0].domains.at(kPkg).energy_uj == 60'000);
    CHECK(rows[0].domains.at(kPkg).share == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(rows[1].domains.at(kDram).share == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("the text table shows totals and per-function lines") {
    std::string text = render_flat(sample_profile(), Format::Text);
    CHECK(text.find("domain pkg: threshold_uj 100") != std::string::npos);
    CHECK(text.find("residual_uj 123") != std::string::npos);
    CHECK(text.find("measured_uj 100123") != std::string::npos);
    CHECK(text.find("encode") != std::string::npos);
    CHECK(text.find("60.00%") != std::string::npos);
}

TEST_CASE("the json document reloads without loss") {
    Profile p = sample_profile();
    std::string doc = render_flat(p, Format::Json);

    // Byte-deterministic.
    CHECK(doc == render_flat(p, Format::Json));

    nlohmann::json j = nlohmann::json::parse(doc);
    CHECK(j["schema"] == "joulescope-prof/v1");
    CHECK(j["kind"] == "flat");
    CHECK(j["period_us"] == 1000);
    CHECK(j["threshold_uj"]["pkg"] == 100);
    CHECK(j["totals"]["pkg"]["hits"] == 1000);
    CHECK(j["totals"]["pkg"]["measured_uj"] == 100123);
    CHECK(j["totals"]["pkg"]["residual_uj"] == 123);
    CHECK(j["rows"][0]["function"] == "encode");
    CHECK(j["rows"][0]["domains"]["pkg"]["hits"] == 600);
    CHECK(j["rows"][0]["domains"]["pkg"]["share"] == 0.6);

    // Reload and re-render: identical bytes, so nothing was lost.
    Profile back = profile_from_json(doc);
    CHECK(render_flat(back, Format::Json) == doc);
    CHECK(back.total_hits(kPkg) == 1000);
    CHECK(back.config.threshold_uj.at(kDram) == 50);
    CHECK(back.total_energy_uj.at(kPkg) == 100'123);
}

TEST_CASE("display values round to six significant digits") {
    Profile p;
    FunctionId one = p.registry.intern("one");
    FunctionId two = p.registry.intern("two");
    p.config.threshold_uj[kPkg] = 100;
    p.config.domains = {kPkg};
    p.rows[one].hits[kPkg] = 1;
    p.rows[two].hits[kPkg] = 2;
    p.total_ticks = 3;
    p.rows[one].perf_ticks = 1;
    p.rows[two].perf_ticks = 2;

    nlohmann::json j = nlohmann::json::parse(render_flat(p, Format::Json));
    double share = j["rows"][0]["domains"]["pkg"]["share"].get<double>();
    CHECK(share == std::strtod("0.666667", nullptr));
}

TEST_CASE("csv and json agree on every number") {
    Profile p = sample_profile();
    std::string csv = render_flat(p, Format::Csv);
    nlohmann::json j = nlohmann::json::parse(render_flat(p, Format::Json));

    std::istringstream lines(csv);
    std::string header, line;
    REQUIRE(std::getline(lines, header));
    CHECK(header ==
          "function,perf_ticks,time_share,pkg_hits,pkg_energy_j,pkg_share,"
          "dram_hits,dram_energy_j,dram_share");
    std::size_t row = 0;
    while (std::getline(lines, line)) {
        std::vector<std::string> fields;
        std::istringstream fs(line);
        std::string field;
        while (std::getline(fs, field, ',')) fields.push_back(field);
        REQUIRE(fields.size() == 9);
        CHECK(fields[0] == j["rows"][row]["function"].get<std::string>());
        CHECK(std::strtod(fields[4].c_str(), nullptr) ==
              j["rows"][row]["domains"]["pkg"]["energy_j"].get<double>());
        CHECK(std::strtod(fields[5].c_str(), nullptr) ==
              j["rows"][row]["domains"]["pkg"]["share"].get<double>());
        ++row;
    }
    CHECK(row == 2);
}

TEST_CASE("an empty profile renders as empty, not as an error") {
    Profile p;
    CHECK(render_flat(p, Format::Text).find("(no samples)") != std::string::npos);
    nlohmann::json j = nlohmann::json::parse(render_flat(p, Format::Json));
    CHECK(j["rows"].is_array());
    CHECK(j["rows"].empty());
    std::string svg = render_flat(p, Format::Svg);
    CHECK(svg.find("no samples") != std::string::npos);
    CHECK(xml_well_formed(svg));
}

TEST_CASE("the svg chart is well formed and carries raw counts") {
    std::string svg = render_flat(sample_profile(), Format::Svg);
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("<svg xmlns=\"http://www.w3.org/2000/svg\"") != std::string::npos);
    CHECK(xml_well_formed(svg));
    CHECK(svg.find("data-function=\"encode\"") != std::string::npos);
    CHECK(svg.find("data-hits=\"600\"") != std::string::npos);
    CHECK(svg.find("data-energy-uj=\"60000\"") != std::string::npos);
    CHECK(svg.find("data-perf-ticks=\"60\"") != std::string::npos);
    CHECK(svg.find("data-domain=\"dram\"") != std::string::npos);
}

TEST_CASE("markup in function names is escaped") {
    Profile p;
    FunctionId odd = p.registry.intern("a<b>&\"c\"");
    p.config.threshold_uj[kPkg] = 10;
    p.config.domains = {kPkg};
    p.rows[odd].hits[kPkg] = 5;
    p.rows[odd].perf_ticks = 1;
    p.total_ticks = 1;
    std::string svg = render_flat(p, Format::Svg);
    CHECK(svg.find("data-function=\"a<b>") == std::string::npos);
    CHECK(svg.find("a&lt;b&gt;&amp;&quot;c&quot;") != std::string::npos);
    CHECK(xml_well_formed(svg));
}

TEST_CASE("span trees render as text and reload from json") {
    SpanReport child;
    child.name = "decode";
    child.duration_us = 500'000;
    child.domains[kPkg] = {3'000'000, 3'000'000, 6'000'000};
    child.flags.low_confidence = true;

    SpanReport root;
    root.name = "<root>";
    root.duration_us = 2'000'000;
    root.domains[kPkg] = {10'000'000, 7'000'000, 5'000'000};
    root.flags.shared_counter = true;
    root.children.push_back(child);

    std::string text = render_spans(root, Format::Text);
    CHECK(text.find("<root>") != std::string::npos);
    CHECK(text.find("  decode") != std::string::npos);
    CHECK(text.find("[shared-counter]") != std::string::npos);
    CHECK(text.find("[low-confidence]") != std::string::npos);

    std::string doc = render_spans(root, Format::Json);
    SpanReport back = spans_from_json(doc);
    CHECK(back.name == root.name);
    CHECK(back.duration_us == root.duration_us);
    CHECK(back.domains.at(kPkg).energy_uj == 10'000'000);
    CHECK(back.domains.at(kPkg).energy_uj_exclusive == 7'000'000);
    REQUIRE(back.children.size() == 1);
    CHECK(back.children[0].flags.low_confidence);
    CHECK(render_spans(back, Format::Json) == doc);

    CHECK_THROWS_AS(render_spans(root, Format::Csv), InvalidArgument);
}

TEST_CASE("sweep documents list runs, medians and the machine") {
    std::map<std::string, std::string> meta{{"cores", "4"}, {"host", "n1"}};
    std::vector<RunResult> runs = sample_runs();

    std::string text = render_sweep(runs, meta, Format::Text);
    CHECK(text.find("thread sweep") != std::string::npos);
    CHECK(text.find("cores=4") != std::string::npos);
    CHECK(text.find("medians:") != std::string::npos);

    std::string doc = render_sweep(runs, meta, Format::Json);
    nlohmann::json j = nlohmann::json::parse(doc);
    CHECK(j["kind"] == "sweep");
    CHECK(j["machine"]["host"] == "n1");
    REQUIRE(j["runs"].size() == 2);
    CHECK(j["runs"][0]["start_us"] == 1000);
    CHECK(j["runs"][0]["energy_uj"]["pkg"] == 250'000);
    CHECK(j["runs"][0]["metrics"]["events_per_second"] == 500.0);
    REQUIRE(j["medians"].size() == 1);
    CHECK(j["medians"][0]["events"] == 60);

    auto [back_runs, back_meta] = sweep_from_json(doc);
    CHECK(back_meta == meta);
    REQUIRE(back_runs.size() == 2);
    CHECK(back_runs[0].energy_uj.at(kPkg) == 250'000);
    CHECK(render_sweep(back_runs, back_meta, Format::Json) == doc);

    std::string csv = render_sweep(runs, meta, Format::Csv);
    CHECK(csv.rfind("threads,repetition,success,wall_time_s,events,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

    CHECK_THROWS_AS(render_sweep(runs, {}, Format::Text), InvalidArgument);
    CHECK_THROWS_AS(render_sweep(runs, meta, Format::Svg), InvalidArgument);
}

TEST_CASE("comparisons render ratios in all three formats") {
    auto run = [](int threads, std::uint64_t events, std::uint64_t pkg_uj) {
        RunResult r;
        r.threads = threads;
        r.repetition = 1;
        r.wall_time_us = 100'000'000;
        r.events = events;
        r.energy_uj[kPkg] = pkg_uj;
        r.success = true;
        return r;
    };
    SweepSide a{"baseline", {run(1, 1000, 5'000'000'000)}, {{"cores", "8"}}};
    SweepSide b{"tuned", {run(1, 1800, 4'500'000'000)}, {{"cores", "8"}}};
    ComparisonTable table = compare_runs(a, b);

    std::string text = render_comparison(table, Format::Text);
    CHECK(text.find("baseline") != std::string::npos);
    CHECK(text.find("tuned") != std::string::npos);
    CHECK(text.find("events_per_second") != std::string::npos);

    std::string csv = render_comparison(table, Format::Csv);
    CHECK(csv.rfind("threads,metric,b_over_a\n", 0) == 0);
    CHECK(csv.find("1,events_per_second,1.8") != std::string::npos);

    std::string doc = render_comparison(table, Format::Json);
    ComparisonTable back = comparison_from_json(doc);
    CHECK(back.label_a == "baseline");
    REQUIRE(back.rows.size() == 1);
    CHECK(back.rows[0].ratios.at("events_per_second") ==
          doctest::Approx(1.8).epsilon(1e-9));
    CHECK(render_comparison(back, Format::Json) == doc);

    CHECK_THROWS_AS(render_comparison(table, Format::Svg), InvalidArgument);
}

TEST_CASE("stored documents re-render into any supported format") {
    Profile p = sample_profile();
    std::string doc = render_flat(p, Format::Json);
    CHECK(rerender(doc, Format::Text) == render_flat(p, Format::Text));
    CHECK(rerender(doc, Format::Csv) == render_flat(p, Format::Csv));
    CHECK(rerender(doc, Format::Svg) == render_flat(p, Format::Svg));

    std::map<std::string, std::string> meta{{"cores", "4"}};
    std::vector<RunResult> runs = sample_runs();
    std::string sweep_doc = render_sweep(runs, meta, Format::Json);
    CHECK(rerender(sweep_doc, Format::Csv) == render_sweep(runs, meta, Format::Csv));
}

TEST_CASE("broken documents fail with a reason") {
    CHECK_THROWS_AS(rerender("not json", Format::Text), ParseError);
    CHECK_THROWS_AS(rerender("{\"schema\":\"other/v9\",\"kind\":\"flat\"}",
                             Format::Text),
                    InvalidArgument);
    CHECK_THROWS_AS(
        rerender("{\"schema\":\"joulescope-prof/v1\",\"kind\":\"wat\"}", Format::Text),
        InvalidArgument);
    CHECK_THROWS_AS(profile_from_json("{\"schema\":\"joulescope-prof/v1\","
                                      "\"kind\":\"spans\",\"root\":{}}"),
                    InvalidArgument);
    // A flat document missing its rows is a parse error with a message.
    CHECK_THROWS_AS(
        profile_from_json("{\"schema\":\"joulescope-prof/v1\",\"kind\":\"flat\","
                          "\"period_us\":1,\"threshold_uj\":{},\"domains\":[],"
                          "\"total_ticks\":0,\"wall_time_us\":0,\"totals\":{}}"),
        ParseError);
}
