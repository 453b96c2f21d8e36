#include "lobench/pipeline.hpp"

#include <spdlog/spdlog.h>

namespace lobench {

void SessionCalendar::validate() const {
    if (period <= 0) throw ValidationError("calendar: sampling period must be positive");
    if (intervals.empty()) throw ValidationError("calendar: no session intervals");
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        const auto& iv = intervals[i];
        if (iv.end <= iv.start) throw ValidationError("calendar: empty interval " + std::to_string(i));
        if ((iv.end - iv.start) % period != 0)
            throw ValidationError("calendar: period does not divide interval " + std::to_string(i));
        if (i > 0 && iv.start < intervals[i - 1].end)
            throw ValidationError("calendar: intervals overlap or are out of order");
    }
}

std::vector<Timestamp> SessionCalendar::grid() const {
    std::vector<Timestamp> g;
    g.reserve(points_per_day());
    for (const auto& iv : intervals)
        for (Timestamp t = iv.start + period; t <= iv.end; t += period) g.push_back(t);
    return g;
}

bool SessionCalendar::contains(Timestamp t) const {
    for (const auto& iv : intervals)
        if (t >= iv.start && t <= iv.end) return true;
    return false;
}

std::size_t SessionCalendar::points_per_day() const {
    std::size_t n = 0;
    for (const auto& iv : intervals) n += static_cast<std::size_t>((iv.end - iv.start) / period);
    return n;
}

Snapshot book_snapshot(const BookState& book, int levels, PaddingMode mode, bool* padded) {
    if (padded) *padded = false;
    if (mode == PaddingMode::reject || (static_cast<int>(book.bids.size()) >= levels &&
                                        static_cast<int>(book.asks.size()) >= levels))
        return top_levels(book, levels);

    const auto best_bid = book.best_bid();
    const auto best_ask = book.best_ask();
    if (!best_bid && !best_ask) throw InsufficientDepth(levels, 0, 0);
    if (padded) *padded = true;

    Snapshot s;
    s.time = book.clock;
    s.levels.resize(levels);
    const auto& tick = book.tick_size;

    auto bid = book.bids.begin();
    Ticks last_bid = best_bid ? *best_bid + 1 : *best_ask;
    for (int i = 0; i < levels; ++i) {
        if (bid != book.bids.end()) {
            last_bid = bid->first;
            s.levels[i].bid_price = tick.to_price(last_bid);
            s.levels[i].bid_volume = static_cast<double>(bid->second.total_volume);
            ++bid;
        } else {
            --last_bid;
            if (last_bid <= 0) throw InsufficientDepth(levels, static_cast<int>(book.bids.size()),
                                                       static_cast<int>(book.asks.size()));
            s.levels[i].bid_price = tick.to_price(last_bid);
            s.levels[i].bid_volume = 1.0;
        }
    }
    auto ask = book.asks.begin();
    Ticks last_ask = best_ask ? *best_ask - 1 : *best_bid;
    for (int i = 0; i < levels; ++i) {
        if (ask != book.asks.end()) {
            last_ask = ask->first;
            s.levels[i].ask_volume = static_cast<double>(ask->second.total_volume);
            ++ask;
        } else {
            ++last_ask;
            s.levels[i].ask_volume = 1.0;
        }
        s.levels[i].ask_price = tick.to_price(last_ask);
    }
    return s;
}

DaySeries sample(std::span<const Order> stream, const SessionCalendar& calendar, const SampleOptions& options,
                 std::string instrument, int day, EventSink* sink) {
    MatchingEngine engine;
    return sample(engine, stream, calendar, options, std::move(instrument), day, sink);
}

namespace {
class NullSink : public EventSink {
public:
    void on_event(const EngineEvent&) override {}
};
}  // namespace

DaySeries sample(MatchingEngine& engine, std::span<const Order> stream, const SessionCalendar& calendar,
                 const SampleOptions& options, std::string instrument, int day, EventSink* sink,
                 const OrderObserver& observer) {
    calendar.validate();
    const auto grid = calendar.grid();
    NullSink null_sink;
    EventSink& out = sink ? *sink : null_sink;

    std::vector<std::optional<Snapshot>> raw(grid.size());
    std::size_t gi = 0;
    bool have_state = !engine.book().bids.empty() || !engine.book().asks.empty();
    bool changed = have_state;
    std::size_t padded_count = 0;

    auto emit_until = [&](Timestamp limit, bool inclusive) {
        while (gi < grid.size() && (grid[gi] < limit || (inclusive && grid[gi] == limit))) {
            if (!have_state)
                throw ValidationError("sample: no book state before first grid point (order stream starts late)");
            if (gi == 0 || changed) {
                bool padded = false;
                raw[gi] = book_snapshot(engine.book(), options.levels, options.padding, &padded);
                if (padded) ++padded_count;
            }
            changed = false;
            ++gi;
        }
    };

    for (const auto& o : stream) {
        emit_until(o.timestamp, false);
        engine.submit(o, out);
        if (observer) observer(o, engine.book());
        have_state = true;
        changed = true;
    }
    if (gi < grid.size()) emit_until(grid.back(), true);
    if (padded_count > 0)
        spdlog::info("sample {} day {}: {} snapshots padded by extrapolation", instrument, day, padded_count);

    DaySeries series;
    series.instrument = std::move(instrument);
    series.day = day;
    series.levels = options.levels;
    series.snapshots = forward_fill(raw, grid);
    return series;
}

std::vector<Snapshot> forward_fill(std::span<const std::optional<Snapshot>> raw, std::span<const Timestamp> grid) {
    if (raw.size() != grid.size()) throw ValidationError("forward_fill: grid and series lengths differ");
    std::vector<Snapshot> out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i]) {
            out.push_back(*raw[i]);
        } else {
            if (out.empty()) throw ValidationError("forward_fill: leading gap has no snapshot to duplicate");
            out.push_back(out.back());
        }
        out.back().time = grid[i];
    }
    return out;
}

std::vector<Snapshot> filter_auction(std::span<const Snapshot> series, const SessionCalendar& calendar) {
    std::vector<Snapshot> out;
    for (const auto& s : series)
        if (calendar.contains(s.time)) out.push_back(s);
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> contiguous_blocks(std::span<const Snapshot> series,
                                                                   Timestamp period) {
    std::vector<std::pair<std::size_t, std::size_t>> blocks;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= series.size(); ++i) {
        if (i == series.size() || series[i].time - series[i - 1].time != period) {
            if (i > start) blocks.emplace_back(start, i - start);
            start = i;
        }
    }
    return blocks;
}

std::vector<std::string> check_day_series(const DaySeries& series, const SessionCalendar& calendar) {
    std::vector<std::string> problems;
    const auto grid = calendar.grid();
    if (series.size() != grid.size())
        problems.push_back("expected " + std::to_string(grid.size()) + " snapshots, found " +
                           std::to_string(series.size()));
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series.snapshots[i];
        if (i < grid.size() && s.time != grid[i])
            problems.push_back("snapshot " + std::to_string(i) + " off the sampling grid");
        if (s.depth() != series.levels) problems.push_back("snapshot " + std::to_string(i) + " has wrong depth");
        for (const auto& v : validate_snapshot(s))
            problems.push_back("snapshot " + std::to_string(i) + ": " + to_string(v.kind) + " at level " +
                               std::to_string(v.level));
    }
    return problems;
}

}  // namespace lobench
