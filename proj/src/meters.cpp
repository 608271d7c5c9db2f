#include "jprof/meters.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>

#include "httplib.h"
#include "json.hpp"

#include "jprof/domain.hpp"
#include "jprof/errors.hpp"

namespace jprof {

namespace {

std::uint64_t parse_u64_field(const std::string& field, std::size_t line_no) {
    if (field.empty() || field.find_first_not_of("0123456789") != std::string::npos)
        throw ParseError("expected unsigned integer, got '" + field + "'", line_no);
    errno = 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(field.c_str(), &end, 10);
    if (errno != 0 || end != field.c_str() + field.size())
        throw ParseError("integer out of range: '" + field + "'", line_no);
    return v;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

PowerSeries ingest_csv(std::istream& in) {
    PowerSeries series;
    series.origin = SeriesOrigin::PlugMeterCsv;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line))
        throw ParseError("missing header 'timestamp_us,power_uw'", 1);
    ++line_no;
    if (strip_cr(line) != "timestamp_us,power_uw")
        throw ParseError("bad header '" + line + "'", line_no);
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        std::size_t comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError("expected 'timestamp_us,power_uw' pair", line_no);
        PowerPoint p;
        p.timestamp_us = parse_u64_field(line.substr(0, comma), line_no);
        p.power_uw = parse_u64_field(line.substr(comma + 1), line_no);
        if (!series.points.empty() && p.timestamp_us <= series.points.back().timestamp_us)
            throw NonMonotonicTimestamps("line " + std::to_string(line_no) +
                                         ": timestamp " + std::to_string(p.timestamp_us) +
                                         " does not increase");
        series.points.push_back(p);
    }
    return series;
}

void export_csv(const PowerSeries& series, std::ostream& out) {
    out << "timestamp_us,power_uw\n";
    for (const PowerPoint& p : series.points)
        out << p.timestamp_us << ',' << p.power_uw << '\n';
}

namespace {

long double value_at(const std::vector<PowerPoint>& pts, std::uint64_t t) {
    auto it = std::upper_bound(
        pts.begin(), pts.end(), t,
        [](std::uint64_t v, const PowerPoint& p) { return v < p.timestamp_us; });
    if (it == pts.begin()) return pts.front().power_uw;
    if (it == pts.end()) return pts.back().power_uw;
    const PowerPoint& hi = *it;
    const PowerPoint& lo = *(it - 1);
    if (t == lo.timestamp_us) return lo.power_uw;
    long double frac = static_cast<long double>(t - lo.timestamp_us) /
                       static_cast<long double>(hi.timestamp_us - lo.timestamp_us);
    return static_cast<long double>(lo.power_uw) +
           (static_cast<long double>(hi.power_uw) -
            static_cast<long double>(lo.power_uw)) *
               frac;
}

}  // namespace

double integrate(const PowerSeries& series, std::uint64_t t0_us, std::uint64_t t1_us,
                 bool allow_gaps) {
    if (t1_us < t0_us) throw InvalidArgument("integration window ends before it starts");
    const auto& pts = series.points;
    if (pts.empty()) throw CoverageError("power series is empty");
    if (t0_us < pts.front().timestamp_us || t1_us > pts.back().timestamp_us)
        throw CoverageError(
            "window [" + std::to_string(t0_us) + ", " + std::to_string(t1_us) +
            "] us outside series coverage [" + std::to_string(pts.front().timestamp_us) +
            ", " + std::to_string(pts.back().timestamp_us) +
            "] us; check timebase alignment");
    for (const SeriesGap& g : series.gaps) {
        if (g.start_us >= t1_us || g.end_us <= t0_us) continue;
        if (!allow_gaps)
            throw CoverageError("gap of " + std::to_string(g.missed_polls) +
                                " missed poll(s) inside the window");
        if (g.missed_polls > 3)
            throw CoverageError("gap of " + std::to_string(g.missed_polls) +
                                " missed poll(s) is too wide to bridge");
    }
    if (t0_us == t1_us) return 0.0;

    auto it = std::upper_bound(
        pts.begin(), pts.end(), t0_us,
        [](std::uint64_t v, const PowerPoint& p) { return v < p.timestamp_us; });
    long double area = 0;  // uW * us
    std::uint64_t prev_t = t0_us;
    long double prev_p = value_at(pts, t0_us);
    for (; it != pts.end() && it->timestamp_us < t1_us; ++it) {
        area += (prev_p + it->power_uw) * 0.5L * (it->timestamp_us - prev_t);
        prev_t = it->timestamp_us;
        prev_p = it->power_uw;
    }
    long double end_p = value_at(pts, t1_us);
    area += (prev_p + end_p) * 0.5L * (t1_us - prev_t);
    return static_cast<double>(area / 1e12L);
}

BaselineEstimate measure_idle_baseline(const PowerSeries& series, std::uint64_t t0_us,
                                       std::uint64_t t1_us) {
    if (t1_us < t0_us) throw InvalidArgument("idle window ends before it starts");
    long double sum = 0;
    std::uint64_t n = 0;
    for (const PowerPoint& p : series.points) {
        if (p.timestamp_us < t0_us || p.timestamp_us > t1_us) continue;
        sum += p.power_uw;
        ++n;
    }
    if (n == 0) throw InvalidArgument("no samples inside the idle window");
    long double mean = sum / n;
    long double var = 0;
    for (const PowerPoint& p : series.points) {
        if (p.timestamp_us < t0_us || p.timestamp_us > t1_us) continue;
        long double d = static_cast<long double>(p.power_uw) - mean;
        var += d * d;
    }
    BaselineEstimate est;
    est.idle_power_uw = static_cast<double>(mean);
    est.stddev_uw = static_cast<double>(std::sqrt(static_cast<double>(var / n)));
    est.window_start_us = t0_us;
    est.window_end_us = t1_us;
    return est;
}

double net_energy(const PowerSeries& series, std::uint64_t t0_us, std::uint64_t t1_us,
                  const BaselineEstimate& baseline, bool allow_gaps) {
    double gross = integrate(series, t0_us, t1_us, allow_gaps);
    double idle_j = baseline.idle_power_uw *
                    static_cast<double>(t1_us - t0_us) / 1e12;
    return gross - idle_j;
}

namespace {

enum class PollFailure { None, NoAnswer, Malformed };

struct PollSession {
    std::unique_ptr<httplib::Client> client;
    std::string path;
    httplib::Headers headers;

    explicit PollSession(const PduEndpoint& endpoint) {
        const std::string& url = endpoint.url;
        std::size_t scheme = url.find("://");
        if (scheme == std::string::npos)
            throw InvalidArgument("endpoint url needs a scheme: " + url);
        std::size_t slash = url.find('/', scheme + 3);
        std::string base = slash == std::string::npos ? url : url.substr(0, slash);
        path = slash == std::string::npos ? "/" : url.substr(slash);
        client = std::make_unique<httplib::Client>(base);
        std::uint64_t timeout_us =
            std::clamp<std::uint64_t>(endpoint.poll_interval_us / 2, 50'000, 2'000'000);
        client->set_connection_timeout(timeout_us / 1'000'000,
                                       timeout_us % 1'000'000);
        client->set_read_timeout(timeout_us / 1'000'000, timeout_us % 1'000'000);
        if (!endpoint.auth_token.empty())
            headers.emplace("Authorization", "Bearer " + endpoint.auth_token);
    }

    // One poll. Returns the reported power; failure kind via `failure`.
    std::optional<std::uint64_t> poll(PollFailure& failure, std::string& detail) {
        failure = PollFailure::None;
        auto res = client->Get(path, headers);
        if (!res || res->status != 200) {
            failure = PollFailure::NoAnswer;
            detail = !res ? "no response (" + httplib::to_string(res.error()) + ")"
                          : "http status " + std::to_string(res->status);
            return std::nullopt;
        }
        nlohmann::json body = nlohmann::json::parse(res->body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("power_w") ||
            !body["power_w"].is_number() || body["power_w"].get<double>() < 0) {
            failure = PollFailure::Malformed;
            detail = "body is not a {\"power_w\": <number>} object";
            return std::nullopt;
        }
        return static_cast<std::uint64_t>(
            std::llround(body["power_w"].get<double>() * 1e6));
    }
};

}  // namespace

PowerSeries poll_pdu(const PduEndpoint& endpoint, std::uint64_t duration_us) {
    if (endpoint.poll_interval_us == 0)
        throw InvalidArgument("poll interval must be positive");
    PollSession session(endpoint);
    PowerSeries series;
    series.origin = SeriesOrigin::PduApi;

    auto start = std::chrono::steady_clock::now();
    std::uint64_t t0 = monotonic_now_us();
    std::uint64_t polls = duration_us / endpoint.poll_interval_us + 1;
    std::uint32_t missed = 0;
    for (std::uint64_t k = 0; k < polls; ++k) {
        if (k > 0)
            std::this_thread::sleep_until(
                start + std::chrono::microseconds(k * endpoint.poll_interval_us));
        PollFailure failure;
        std::string detail;
        std::optional<std::uint64_t> power = session.poll(failure, detail);
        if (!power) {
            if (failure == PollFailure::Malformed)
                throw MalformedResponse(endpoint.url + ": " + detail);
            if (series.points.empty())
                throw Unreachable(endpoint.url + ": " + detail);
            ++missed;
            continue;
        }
        PowerPoint point{monotonic_now_us(), *power};
        if (missed > 0) {
            series.gaps.push_back(
                {series.points.back().timestamp_us, point.timestamp_us, missed});
            missed = 0;
        }
        series.points.push_back(point);
    }
    if (missed > 0 && !series.points.empty())
        series.gaps.push_back({series.points.back().timestamp_us,
                               t0 + (polls - 1) * endpoint.poll_interval_us, missed});
    return series;
}

PduPoller::PduPoller(PduEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    if (endpoint_.poll_interval_us == 0)
        throw InvalidArgument("poll interval must be positive");
}

PduPoller::~PduPoller() {
    stop_.store(true);
    if (thread_.joinable()) thread_.join();
}

void PduPoller::start() {
    if (started_) throw InvalidArgument("poller already started");
    started_ = true;
    thread_ = std::thread([this] {
        PowerSeries series;
        series.origin = SeriesOrigin::PduApi;
        std::string error;
        try {
            PollSession session(endpoint_);
            auto start = std::chrono::steady_clock::now();
            std::uint32_t missed = 0;
            std::uint64_t last_deadline_us = monotonic_now_us();
            for (std::uint64_t k = 0; !stop_.load(std::memory_order_relaxed); ++k) {
                if (k > 0) {
                    auto deadline =
                        start + std::chrono::microseconds(k * endpoint_.poll_interval_us);
                    while (std::chrono::steady_clock::now() < deadline) {
                        if (stop_.load(std::memory_order_relaxed)) break;
                        std::this_thread::sleep_for(std::chrono::milliseconds(5));
                    }
                    if (stop_.load(std::memory_order_relaxed)) break;
                }
                last_deadline_us = monotonic_now_us();
                PollFailure failure;
                std::string detail;
                std::optional<std::uint64_t> power = session.poll(failure, detail);
                if (!power) {
                    if (failure == PollFailure::Malformed) {
                        error = "malformed: " + endpoint_.url + ": " + detail;
                        break;
                    }
                    if (!series.points.empty()) ++missed;
                    if (series.points.empty() && error.empty())
                        error = "unreachable: " + endpoint_.url + ": " + detail;
                    continue;
                }
                PowerPoint point{monotonic_now_us(), *power};
                if (missed > 0) {
                    series.gaps.push_back(
                        {series.points.back().timestamp_us, point.timestamp_us, missed});
                    missed = 0;
                }
                series.points.push_back(point);
                error.clear();
            }
            if (missed > 0 && !series.points.empty())
                series.gaps.push_back(
                    {series.points.back().timestamp_us, last_deadline_us, missed});
        } catch (const std::exception& e) {
            error = std::string("unreachable: ") + e.what();
        }
        series_ = std::move(series);
        error_ = std::move(error);
    });
}

PowerSeries PduPoller::stop() {
    if (!started_) throw InvalidArgument("poller never started");
    stop_.store(true);
    if (thread_.joinable()) thread_.join();
    if (series_.points.empty() && !error_.empty()) {
        if (error_.rfind("malformed: ", 0) == 0)
            throw MalformedResponse(error_.substr(11));
        throw Unreachable(error_.substr(error_.rfind("unreachable: ", 0) == 0 ? 13 : 0));
    }
    return series_;
}

}  // namespace jprof
