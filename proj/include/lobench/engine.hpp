#pragma once

#include "lobench/error.hpp"
#include "lobench/types.hpp"

#include <array>
#include <span>
#include <utility>
#include <vector>

namespace lobench {

struct Trade {
    OrderId taker = 0;
    OrderId maker = 0;
    Side taker_side = Side::bid;
    Ticks price = 0;  // always the maker's resting price
    Volume volume = 0;
    Timestamp timestamp = 0;

    bool operator==(const Trade&) const = default;
};

enum class EventKind : std::uint8_t { trade, rest, cancel_ok, cancel_miss, market_unfilled };

std::string to_string(EventKind k);

// Flat event record. Field meaning by kind:
//   trade           order_id = taker, other_id = maker, price/volume of the fill, side = taker side
//   rest            order_id, price, volume = remainder placed on the book
//   cancel_ok       order_id = cancel, other_id = target, side/price of the target, volume removed
//   cancel_miss     order_id = cancel, other_id = target
//   market_unfilled order_id, side, volume discarded
struct EngineEvent {
    EventKind kind = EventKind::rest;
    OrderId order_id = 0;
    OrderId other_id = 0;
    Side side = Side::bid;
    Ticks price = 0;
    Volume volume = 0;
    Timestamp timestamp = 0;

    Trade as_trade() const { return {order_id, other_id, side, price, volume, timestamp}; }
    bool operator==(const EngineEvent&) const = default;
};

class EventSink {
public:
    virtual ~EventSink() = default;
    virtual void on_event(const EngineEvent& e) = 0;
};

class VectorSink : public EventSink {
public:
    void on_event(const EngineEvent& e) override { events.push_back(e); }
    std::vector<EngineEvent> events;
};

// Per-side volume bookkeeping. Conservation holds when, for each side,
// submitted == executed + cancelled + resting + market_unfilled.
class VolumeLedger : public EventSink {
public:
    struct SideTotals {
        Volume submitted = 0;
        Volume executed = 0;
        Volume cancelled = 0;
        Volume market_unfilled = 0;
    };

    void record_order(const Order& o);
    void on_event(const EngineEvent& e) override;

    const SideTotals& totals(Side s) const { return sides_[static_cast<int>(s)]; }
    std::size_t cancel_misses() const { return cancel_misses_; }
    std::size_t trades() const { return trades_; }
    bool conserved(const BookState& book) const;

private:
    std::array<SideTotals, 2> sides_{};
    std::size_t cancel_misses_ = 0;
    std::size_t trades_ = 0;
};

// Thrown by top_levels when a side is thinner than the requested depth.
struct InsufficientDepth : ValidationError {
    InsufficientDepth(int requested, int bid_depth, int ask_depth);
    int requested;
    int bid_depth;
    int ask_depth;
};

// Price-time priority continuous double auction over a single instrument.
class MatchingEngine {
public:
    MatchingEngine() = default;
    explicit MatchingEngine(TickSize tick) { book_.tick_size = tick; }
    explicit MatchingEngine(BookState book) : book_(std::move(book)) {}

    // Applies one order. Throws ValidationError for malformed or stale orders;
    // unknown cancel targets are reported as cancel_miss events.
    void submit(const Order& o, EventSink& sink);
    std::vector<EngineEvent> submit(const Order& o);

    // Folds submit over a batch sorted by (timestamp, id).
    void step(std::span<const Order> batch, EventSink& sink);

    const BookState& book() const { return book_; }

private:
    template <class Levels>
    Volume match_against(Levels& levels, const Order& taker, Volume remaining, EventSink& sink);
    void rest(const Order& o, Volume remaining, EventSink& sink);
    void cancel(const Order& o, EventSink& sink);

    BookState book_;
};

std::pair<BookState, std::vector<EngineEvent>> submit(BookState book, const Order& o);
std::pair<BookState, std::vector<EngineEvent>> step(BookState book, std::span<const Order> batch);

// Best `levels` levels per side as a real-valued snapshot stamped with the book clock.
Snapshot top_levels(const BookState& book, int levels);

}  // namespace lobench
