#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/stat.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "jprof/capsim.hpp"
#include "jprof/report.hpp"
#include "jprof/trace.hpp"
#include "oracles.hpp"

using namespace jprof;

namespace {

const EnergyDomain kPkg{DomainKind::Package, 0};

struct CmdResult {
    int status = -1;
    std::string out;
    std::string err;
};

const std::string& work_dir() {
    static std::string dir = [] {
        char tmpl[] = "/tmp/jprof_cli_XXXXXX";
        REQUIRE(::mkdtemp(tmpl) != nullptr);
        return std::string(tmpl);
    }();
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

// Runs the installed binary through the shell; stderr lands in a side file.
CmdResult run_jprof(const std::string& args, const std::string& env_prefix = "") {
    static int serial = 0;
    std::string err_file = work_dir() + "/stderr." + std::to_string(serial++);
    std::string cmd = env_prefix + (env_prefix.empty() ? "" : " ") + JPROF_BIN + " " +
                      args + " 2>" + err_file;
    CmdResult result;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) result.out.append(buf, n);
    int status = ::pclose(pipe);
    result.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.err = slurp(err_file);
    return result;
}

std::string write_generated_trace() {
    TraceGenSpec spec;
    spec.functions = {{"encode", 0.5}, {"filter", 0.3}, {"io", 0.2}};
    spec.duration_us = 500'000;
    ExecutionTrace t = generate_trace(spec, 4);
    std::string path = work_dir() + "/gen.trace";
    std::ofstream out(path);
    write_trace(t, out);
    return path;
}

// Minimal powercap tree with one package domain.
std::string write_powercap_root() {
    static int serial = 0;
    std::string root = work_dir() + "/powercap" + std::to_string(serial++);
    std::string dir = root + "/intel-rapl:0";
    REQUIRE(::mkdir(root.c_str(), 0755) == 0);
    REQUIRE(::mkdir(dir.c_str(), 0755) == 0);
    spit(dir + "/name", "package-0\n");
    spit(dir + "/energy_uj", "123456\n");
    spit(dir + "/max_energy_range_uj", "262143328850\n");
    spit(dir + "/constraint_0_power_limit_uw", "250000000\n");
    spit(dir + "/constraint_0_time_window_us", "976\n");
    return root;
}

}  // namespace

TEST_CASE("help, version and bad usage exit codes") {
    CHECK(run_jprof("--help").status == 0);
    CmdResult help = run_jprof("--help");
    CHECK(help.out.find("replay") != std::string::npos);
    CHECK(help.out.find("sweep") != std::string::npos);

    CmdResult version = run_jprof("--version");
    CHECK(version.status == 0);
    CHECK(version.out.find("jprof 1.0.0") != std::string::npos);

    CmdResult bare = run_jprof("");
    CHECK(bare.status == 2);
    CHECK(bare.err.find("--help' for usage") != std::string::npos);

    CHECK(run_jprof("--no-such-flag").status == 2);
    CHECK(run_jprof("replay").status == 2);  // --trace is required
    CHECK(run_jprof("cap --window 1ms").status == 2);
}

TEST_CASE("runtime failures exit 1 with a prefixed message") {
    CmdResult r = run_jprof("replay --trace /nonexistent.trace");
    CHECK(r.status == 1);
    CHECK(r.err.find("jprof: ") != std::string::npos);
}

TEST_CASE("replay emits a conserving json document") {
    std::string trace_path = write_generated_trace();
    std::string out_path = work_dir() + "/flat.json";
    CmdResult r = run_jprof("replay --trace " + trace_path +
                            " --period 1ms --threshold pkg=2mj --format json -o " +
                            out_path);
    REQUIRE(r.status == 0);

    ExecutionTrace t = load_trace(trace_path);
    Profile p = profile_from_json(slurp(out_path));
    CHECK(p.config.period_us == 1'000);
    CHECK(p.config.threshold_uj.at(kPkg) == 2'000);
    CHECK(p.total_energy_uj.at(kPkg) ==
          oracle::riemann_uj_between(t, 0, t.duration_us(), kPkg));
    CHECK(p.total_hits(kPkg) * 2'000 + p.residual_uj.at(kPkg) ==
          p.total_energy_uj.at(kPkg));
}

TEST_CASE("replay renders svg to stdout") {
    std::string trace_path = write_generated_trace();
    CmdResult r = run_jprof("replay --trace " + trace_path +
                            " --domains pkg --format svg");
    REQUIRE(r.status == 0);
    CHECK(r.out.rfind("<?xml", 0) == 0);
    CHECK(r.out.find("data-domain=\"pkg\"") != std::string::npos);
}

TEST_CASE("report re-renders a stored document") {
    std::string trace_path = write_generated_trace();
    std::string out_path = work_dir() + "/rr.json";
    REQUIRE(run_jprof("replay --trace " + trace_path + " --format json -o " +
                      out_path)
                .status == 0);
    std::string doc = slurp(out_path);

    CmdResult csv = run_jprof("report --in " + out_path + " --format csv");
    REQUIRE(csv.status == 0);
    CHECK(csv.out == rerender(doc, Format::Csv));

    CmdResult text = run_jprof("report --in " + out_path + " --format text");
    REQUIRE(text.status == 0);
    CHECK(text.out == rerender(doc, Format::Text));

    CHECK(run_jprof("report --in " + trace_path).status == 1);  // not JSON
}

TEST_CASE("cap simulates onto a trace file") {
    FunctionRegistry reg;
    TraceSegment s;
    s.start_us = 0;
    s.end_us = 100'000;
    s.function = reg.intern("burn");
    s.power_uw[kPkg] = 20'000'000;
    ExecutionTrace t(reg, {s});
    std::string in_path = work_dir() + "/flat20w.trace";
    {
        std::ofstream out(in_path);
        write_trace(t, out);
    }

    std::string out_path = work_dir() + "/capped.trace";
    CmdResult r = run_jprof("cap --domain pkg --limit 10w --window 1ms --trace " +
                            in_path + " -o " + out_path);
    REQUIRE(r.status == 0);

    CapConstraint cap{kPkg, 10'000'000, 1'000};
    std::ostringstream expected;
    write_trace(enforce_cap_sim(t, cap), expected);
    CHECK(slurp(out_path) == expected.str());

    ExecutionTrace capped = load_trace(out_path);
    CHECK_FALSE(oracle::first_cap_violation(capped, cap).has_value());
}

TEST_CASE("cap writes through to a powercap tree") {
    std::string root = write_powercap_root();
    CmdResult r = run_jprof("cap --limit 10w --window 1ms --powercap-root " + root);
    REQUIRE(r.status == 0);
    CHECK(r.out.find("cap set: pkg") != std::string::npos);
    CHECK(slurp(root + "/intel-rapl:0/constraint_0_power_limit_uw") == "10000000\n");
    CHECK(slurp(root + "/intel-rapl:0/constraint_0_time_window_us") == "1000\n");

    // The environment variable names the same tree.
    CmdResult env = run_jprof("cap --limit 5w --window 10ms",
                              "JPROF_POWERCAP_ROOT=" + root);
    REQUIRE(env.status == 0);
    CHECK(slurp(root + "/intel-rapl:0/constraint_0_power_limit_uw") == "5000000\n");
}

TEST_CASE("span-run wraps a command and reports the tree") {
    std::string root = write_powercap_root();
    CmdResult r = run_jprof("span-run --powercap-root " + root +
                            " --name unit --format json -- echo marker");
    REQUIRE(r.status == 0);
    // The workload's stdout goes to stderr, keeping ours machine-readable.
    CHECK(r.err.find("marker") != std::string::npos);
    SpanReport tree = spans_from_json(r.out);
    CHECK(tree.name == "<root>");
    REQUIRE(tree.children.size() == 1);
    CHECK(tree.children[0].name == "unit");

    CHECK(run_jprof("span-run --powercap-root " + root + " -- false").status == 1);
}

TEST_CASE("meter ingest echoes a canonical csv") {
    std::string csv =
        "timestamp_us,power_uw\n"
        "0,100000000\n"
        "5000000,100000000\n"
        "10000000,100000000\n";
    std::string path = work_dir() + "/meter.csv";
    spit(path, csv);

    CmdResult echo = run_jprof("meter ingest --csv " + path);
    REQUIRE(echo.status == 0);
    CHECK(echo.out == csv);

    CmdResult stdin_echo = run_jprof("meter ingest --csv - < " + path);
    REQUIRE(stdin_echo.status == 0);
    CHECK(stdin_echo.out == csv);

    CmdResult window = run_jprof("meter ingest --csv " + path + " --from 0 --to 10s");
    REQUIRE(window.status == 0);
    CHECK(window.out.find("gross_joules: 1000") != std::string::npos);

    CmdResult json = run_jprof("meter ingest --csv " + path +
                               " --from 0 --to 10s --format json");
    REQUIRE(json.status == 0);
    nlohmann::json doc = nlohmann::json::parse(json.out);
    CHECK(doc["kind"] == "meter");
    CHECK(doc["gross_joules"] == 1000.0);

    CHECK(run_jprof("meter ingest --csv " + path + " --from 1s").status == 1);
    std::string bad = work_dir() + "/bad.csv";
    spit(bad, "nope\n");
    CHECK(run_jprof("meter ingest --csv " + bad).status == 1);
}

TEST_CASE("sweep drives a workload ladder end to end") {
    std::string config_path = work_dir() + "/sweep.conf";
    spit(config_path,
         "command = echo 'events: {threads}00'\n"
         "threads = 1,2\n"
         "cooldown = 0s\n"
         "meta.cores = 2\n");
    CmdResult r = run_jprof("sweep --config " + config_path +
                            " --no-counters --format json");
    REQUIRE(r.status == 0);
    auto [runs, meta] = sweep_from_json(r.out);
    REQUIRE(runs.size() == 2);
    CHECK(runs[0].events == 100);
    CHECK(runs[1].events == 200);
    CHECK(runs[0].energy_uj.empty());
    CHECK(meta.at("cores") == "2");
}
