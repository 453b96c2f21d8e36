#pragma once

#include "lobench/engine.hpp"
#include "lobench/types.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lobench {

struct SessionInterval {
    Timestamp start = 0;
    Timestamp end = 0;
};

// Continuous-auction sessions sampled on a fixed grid. Grid points of an interval
// are start + k * period for k >= 1 up to and including end, so each sample closes
// one full period inside the session.
struct SessionCalendar {
    std::vector<SessionInterval> intervals{{clock_time(9, 30), clock_time(11, 30)},
                                           {clock_time(13, 0), clock_time(14, 57)}};
    Timestamp period = 3 * kNanosPerSecond;

    void validate() const;
    std::vector<Timestamp> grid() const;
    // Closed-interval membership: 09:30:00 and 14:57:00 are inside, 14:57:01 is not.
    bool contains(Timestamp t) const;
    std::size_t points_per_day() const;
};

struct DaySeries {
    std::string instrument;
    int day = 0;
    int levels = 10;
    std::vector<Snapshot> snapshots;

    std::size_t size() const { return snapshots.size(); }
};

enum class PaddingMode : std::uint8_t {
    extrapolate,  // missing levels one tick beyond the worst populated level, volume 1
    reject,       // thin books raise InsufficientDepth
};

struct SampleOptions {
    int levels = 10;
    PaddingMode padding = PaddingMode::extrapolate;
};

// top_levels with the configured thin-book policy. `padded` is set when any level was synthesized.
Snapshot book_snapshot(const BookState& book, int levels, PaddingMode mode, bool* padded = nullptr);

// Replays `stream` through a fresh engine and samples one snapshot per grid point from the
// latest state at or before it. Grid points with no intervening event are forward-filled.
DaySeries sample(std::span<const Order> stream, const SessionCalendar& calendar, const SampleOptions& options,
                 std::string instrument = {}, int day = 0, EventSink* sink = nullptr);

using OrderObserver = std::function<void(const Order&, const BookState&)>;

// Same, continuing from a pre-existing engine (the engine keeps the final state).
// `observer` runs after every applied order.
DaySeries sample(MatchingEngine& engine, std::span<const Order> stream, const SessionCalendar& calendar,
                 const SampleOptions& options, std::string instrument = {}, int day = 0, EventSink* sink = nullptr,
                 const OrderObserver& observer = {});

// `grid` and `raw` are aligned; missing entries copy the nearest preceding snapshot and take the
// grid time. A missing first entry is an error.
std::vector<Snapshot> forward_fill(std::span<const std::optional<Snapshot>> raw, std::span<const Timestamp> grid);

std::vector<Snapshot> filter_auction(std::span<const Snapshot> series, const SessionCalendar& calendar);

// Maximal runs of snapshots spaced exactly one period apart, as (first index, length).
std::vector<std::pair<std::size_t, std::size_t>> contiguous_blocks(std::span<const Snapshot> series,
                                                                   Timestamp period);

// Checks grid spacing, completeness, and per-snapshot validity.
std::vector<std::string> check_day_series(const DaySeries& series, const SessionCalendar& calendar);

}  // namespace lobench
