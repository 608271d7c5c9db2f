#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <thread>
#include <vector>

namespace jprof {

// External node-level power measurements: a rack PDU polled over HTTP or a
// plug-through meter's CSV export. These see the whole machine including
// the power supply, so they complement the on-die counters rather than
// replace them.

struct PowerPoint {
    std::uint64_t timestamp_us = 0;
    std::uint64_t power_uw = 0;

    bool operator==(const PowerPoint&) const = default;
};

enum class SeriesOrigin { PduApi, PlugMeterCsv, Other };

// Polls that got no answer, bracketed by the surrounding good points.
struct SeriesGap {
    std::uint64_t start_us = 0;
    std::uint64_t end_us = 0;
    std::uint32_t missed_polls = 0;
};

struct PowerSeries {
    std::vector<PowerPoint> points;
    std::vector<SeriesGap> gaps;
    SeriesOrigin origin = SeriesOrigin::Other;
    double nominal_accuracy_pct = 3.0;
};

// CSV format: header "timestamp_us,power_uw", one decimal pair per line.
// Timestamps must be strictly increasing. Export of an ingested file is
// byte-identical.
PowerSeries ingest_csv(std::istream& in);
void export_csv(const PowerSeries& series, std::ostream& out);

// Trapezoidal integral over [t0_us, t1_us], in joules. The window must be
// covered by the series; a gap inside the window raises CoverageError
// unless allow_gaps is set and the gap spans at most three missed polls
// (the trapezoid then bridges it linearly).
double integrate(const PowerSeries& series, std::uint64_t t0_us, std::uint64_t t1_us,
                 bool allow_gaps = false);

struct BaselineEstimate {
    double idle_power_uw = 0;
    double stddev_uw = 0;
    std::uint64_t window_start_us = 0;
    std::uint64_t window_end_us = 0;
};

// Mean and spread of the samples inside an idle window.
BaselineEstimate measure_idle_baseline(const PowerSeries& series,
                                       std::uint64_t t0_us, std::uint64_t t1_us);

// Integral minus idle draw over the same window. Near-zero workloads can
// come out slightly negative; callers decide how to present that.
double net_energy(const PowerSeries& series, std::uint64_t t0_us, std::uint64_t t1_us,
                  const BaselineEstimate& baseline, bool allow_gaps = false);

struct PduEndpoint {
    std::string url;  // e.g. http://pdu.rack:8080/outlet/3
    std::uint64_t poll_interval_us = 1'000'000;
    std::string auth_token;  // sent as a bearer token when non-empty
};

// Polls at t = k * interval for k = 0 .. floor(duration / interval).
// The endpoint answers {"power_w": <number>, ...}. A failure before the
// first good answer raises Unreachable; later failures become gaps.
PowerSeries poll_pdu(const PduEndpoint& endpoint, std::uint64_t duration_us);

// Background poller with the same semantics, for wrapping a workload of
// unknown length.
class PduPoller {
public:
    explicit PduPoller(PduEndpoint endpoint);
    ~PduPoller();

    void start();
    PowerSeries stop();

private:
    PduEndpoint endpoint_;
    std::atomic<bool> stop_{false};
    std::thread thread_;
    PowerSeries series_;
    std::string error_;
    bool started_ = false;
};

}  // namespace jprof
