#include "jprof/powercap.hpp"

#include <sys/stat.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>

namespace jprof {

namespace fs = std::filesystem;

namespace {

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw SourceUnavailable("cannot read " + path.string());
    std::string text;
    std::getline(in, text);
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
}

std::uint64_t read_u64_file(const fs::path& path) {
    std::string text = read_text_file(path);
    try {
        return std::stoull(text);
    } catch (const std::exception&) {
        throw SourceUnavailable("malformed number in " + path.string());
    }
}

// powercap names: "package-<n>" on the parent, "core"/"uncore"/"dram" on
// subdomains. Anything else (psys, unknown vendors) is skipped.
std::optional<DomainKind> kind_from_name(const std::string& name) {
    if (name.rfind("package-", 0) == 0) return DomainKind::Package;
    if (name == "core") return DomainKind::PowerPlane0;
    if (name == "uncore") return DomainKind::PowerPlane1;
    if (name == "dram") return DomainKind::Dram;
    return std::nullopt;
}

bool writable_mode(const fs::path& path) {
    struct stat st{};
    if (::stat(path.c_str(), &st) != 0) return false;
    // Check the mode bits directly: running as root would otherwise
    // bypass DAC and make read-only fixtures writable.
    return (st.st_mode & S_IWUSR) != 0;
}

void write_u64_file(const fs::path& path, std::uint64_t value) {
    if (!fs::exists(path) || !writable_mode(path))
        throw PermissionDenied("cannot write " + path.string());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw PermissionDenied("cannot write " + path.string());
    out << value << '\n';
    if (!out) throw PermissionDenied("write failed on " + path.string());
}

}  // namespace

fs::path PowercapSource::default_root() {
    if (const char* env = std::getenv("JPROF_POWERCAP_ROOT"); env && *env) return env;
    return "/sys/class/powercap";
}

bool PowercapSource::available(const fs::path& root) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) return false;
    for (const auto& entry : fs::directory_iterator(root, ec)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("intel-rapl:", 0) == 0 && fs::exists(entry.path() / "energy_uj", ec))
            return true;
    }
    return false;
}

PowercapSource::PowercapSource(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    if (!fs::is_directory(root_, ec))
        throw SourceUnavailable("powercap root " + root_.string() +
                                " is absent (wrong host or permissions?)");
    std::vector<fs::path> candidates;
    for (const auto& entry : fs::directory_iterator(root_, ec)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("intel-rapl:", 0) == 0) candidates.push_back(entry.path());
    }
    for (const auto& dir : candidates) {
        // intel-rapl:<s> or intel-rapl:<s>:<d>
        const std::string name = dir.filename().string();
        std::string spec = name.substr(std::string("intel-rapl:").size());
        int socket = -1;
        try {
            socket = std::stoi(spec.substr(0, spec.find(':')));
        } catch (const std::exception&) {
            continue;
        }
        if (socket < 0 || !fs::exists(dir / "energy_uj")) continue;
        auto kind = kind_from_name(read_text_file(dir / "name"));
        if (!kind) continue;
        DomainDir dd;
        dd.domain = {*kind, socket};
        dd.dir = dir;
        dd.range.max_range_uj = read_u64_file(dir / "max_energy_range_uj");
        dirs_.push_back(std::move(dd));
    }
    if (dirs_.empty())
        throw SourceUnavailable("no RAPL domains under " + root_.string());
    std::sort(dirs_.begin(), dirs_.end(),
              [](const DomainDir& a, const DomainDir& b) { return a.domain < b.domain; });
    for (std::size_t i = 1; i < dirs_.size(); ++i)
        if (dirs_[i].domain == dirs_[i - 1].domain)
            throw SourceUnavailable("duplicate powercap domain " + to_string(dirs_[i].domain));
}

std::vector<EnergyDomain> PowercapSource::domains() {
    std::vector<EnergyDomain> out;
    out.reserve(dirs_.size());
    for (const auto& dd : dirs_) out.push_back(dd.domain);
    return out;
}

CounterRange PowercapSource::range_of(const EnergyDomain& domain) {
    return lookup(domain).range;
}

const PowercapSource::DomainDir& PowercapSource::lookup(const EnergyDomain& domain) const {
    for (const auto& dd : dirs_)
        if (dd.domain == domain) return dd;
    throw UnknownDomain("domain " + to_string(domain) + " not enumerated by this source");
}

CounterReading PowercapSource::read(const EnergyDomain& domain) {
    const auto& dd = lookup(domain);
    CounterReading r;
    r.domain = domain;
    r.timestamp_us = monotonic_now_us();
    r.energy_uj = read_u64_file(dd.dir / "energy_uj");
    return r;
}

void PowercapSource::set_power_cap(const CapConstraint& cap) {
    validate(cap);
    const auto& dd = lookup(cap.domain);
    fs::path limit_file = dd.dir / "constraint_0_power_limit_uw";
    fs::path window_file = dd.dir / "constraint_0_time_window_us";
    if (!fs::exists(limit_file) || !fs::exists(window_file))
        throw CapUnsupported("domain " + to_string(cap.domain) +
                             " exposes no power constraint");
    write_u64_file(limit_file, cap.limit_uw);
    write_u64_file(window_file, cap.window_us);
}

}  // namespace jprof
