#include "lobench/engine.hpp"

#include <algorithm>

namespace lobench {

std::string to_string(EventKind k) {
    switch (k) {
    case EventKind::trade: return "trade";
    case EventKind::rest: return "rest";
    case EventKind::cancel_ok: return "cancel_ok";
    case EventKind::cancel_miss: return "cancel_miss";
    case EventKind::market_unfilled: return "market_unfilled";
    }
    return "unknown";
}

void VolumeLedger::record_order(const Order& o) {
    if (o.kind != OrderKind::cancel && o.volume) sides_[static_cast<int>(o.side)].submitted += *o.volume;
}

void VolumeLedger::on_event(const EngineEvent& e) {
    switch (e.kind) {
    case EventKind::trade:
        sides_[static_cast<int>(e.side)].executed += e.volume;
        sides_[static_cast<int>(opposite(e.side))].executed += e.volume;
        ++trades_;
        break;
    case EventKind::cancel_ok: sides_[static_cast<int>(e.side)].cancelled += e.volume; break;
    case EventKind::cancel_miss: ++cancel_misses_; break;
    case EventKind::market_unfilled: sides_[static_cast<int>(e.side)].market_unfilled += e.volume; break;
    case EventKind::rest: break;
    }
}

bool VolumeLedger::conserved(const BookState& book) const {
    for (Side s : {Side::bid, Side::ask}) {
        const auto& t = totals(s);
        if (t.submitted != t.executed + t.cancelled + book.resting_volume(s) + t.market_unfilled) return false;
    }
    return true;
}

InsufficientDepth::InsufficientDepth(int requested_, int bid_depth_, int ask_depth_)
    : ValidationError("book too thin for " + std::to_string(requested_) + " levels (bid depth " +
                      std::to_string(bid_depth_) + ", ask depth " + std::to_string(ask_depth_) + ")"),
      requested(requested_), bid_depth(bid_depth_), ask_depth(ask_depth_) {}

void MatchingEngine::submit(const Order& o, EventSink& sink) {
    validate_order(o);
    if (o.timestamp < book_.clock)
        throw ValidationError("order " + std::to_string(o.id) + ": stale timestamp " + std::to_string(o.timestamp) +
                              " < book clock " + std::to_string(book_.clock));
    if (book_.last_id && o.timestamp == book_.clock && o.id <= *book_.last_id)
        throw ValidationError("order " + std::to_string(o.id) + ": timestamp tie must carry an increasing id");
    if (o.kind == OrderKind::limit && book_.locator.contains(o.id))
        throw ValidationError("order " + std::to_string(o.id) + ": id already resting on the book");

    book_.clock = o.timestamp;
    book_.last_id = o.id;

    switch (o.kind) {
    case OrderKind::limit: {
        Volume left = o.side == Side::bid ? match_against(book_.asks, o, *o.volume, sink)
                                          : match_against(book_.bids, o, *o.volume, sink);
        if (left > 0) rest(o, left, sink);
        break;
    }
    case OrderKind::market: {
        Volume left = o.side == Side::bid ? match_against(book_.asks, o, *o.volume, sink)
                                          : match_against(book_.bids, o, *o.volume, sink);
        if (left > 0) {
            EngineEvent e;
            e.kind = EventKind::market_unfilled;
            e.order_id = o.id;
            e.side = o.side;
            e.volume = left;
            e.timestamp = o.timestamp;
            sink.on_event(e);
        }
        break;
    }
    case OrderKind::cancel: cancel(o, sink); break;
    }
}

std::vector<EngineEvent> MatchingEngine::submit(const Order& o) {
    VectorSink sink;
    submit(o, sink);
    return std::move(sink.events);
}

void MatchingEngine::step(std::span<const Order> batch, EventSink& sink) {
    for (std::size_t i = 1; i < batch.size(); ++i) {
        const auto& a = batch[i - 1];
        const auto& b = batch[i];
        if (b.timestamp < a.timestamp || (b.timestamp == a.timestamp && b.id <= a.id))
            throw ValidationError("batch not sorted by (timestamp, id) at position " + std::to_string(i));
    }
    for (const auto& o : batch) submit(o, sink);
}

template <class Levels>
Volume MatchingEngine::match_against(Levels& levels, const Order& taker, Volume remaining, EventSink& sink) {
    const bool is_limit = taker.kind == OrderKind::limit;
    while (remaining > 0 && !levels.empty()) {
        auto it = levels.begin();
        PriceLevel& level = it->second;
        if (is_limit) {
            const bool crosses = taker.side == Side::bid ? level.price <= *taker.price : level.price >= *taker.price;
            if (!crosses) break;
        }
        while (remaining > 0 && !level.queue.empty()) {
            RestingOrder& maker = level.queue.front();
            const Volume fill = std::min(remaining, maker.remaining);
            EngineEvent e;
            e.kind = EventKind::trade;
            e.order_id = taker.id;
            e.other_id = maker.id;
            e.side = taker.side;
            e.price = level.price;
            e.volume = fill;
            e.timestamp = taker.timestamp;
            sink.on_event(e);
            remaining -= fill;
            maker.remaining -= fill;
            level.total_volume -= fill;
            if (maker.remaining == 0) {
                book_.locator.erase(maker.id);
                level.queue.pop_front();
            }
        }
        if (level.queue.empty()) levels.erase(it);
    }
    return remaining;
}

void MatchingEngine::rest(const Order& o, Volume remaining, EventSink& sink) {
    const Ticks price = *o.price;
    auto place = [&](auto& levels) {
        PriceLevel& level = levels[price];
        level.price = price;
        level.queue.push_back({o.id, remaining, o.timestamp});
        level.total_volume += remaining;
    };
    if (o.side == Side::bid) place(book_.bids);
    else place(book_.asks);
    book_.locator.emplace(o.id, std::make_pair(o.side, price));

    EngineEvent e;
    e.kind = EventKind::rest;
    e.order_id = o.id;
    e.side = o.side;
    e.price = price;
    e.volume = remaining;
    e.timestamp = o.timestamp;
    sink.on_event(e);
}

void MatchingEngine::cancel(const Order& o, EventSink& sink) {
    EngineEvent e;
    e.order_id = o.id;
    e.other_id = *o.target_id;
    e.side = o.side;
    e.timestamp = o.timestamp;

    auto loc = book_.locator.find(*o.target_id);
    if (loc == book_.locator.end()) {
        e.kind = EventKind::cancel_miss;
        sink.on_event(e);
        return;
    }
    const auto [side, price] = loc->second;
    auto remove_from = [&](auto& levels) {
        auto lit = levels.find(price);
        PriceLevel& level = lit->second;
        auto qit = std::find_if(level.queue.begin(), level.queue.end(),
                                [&](const RestingOrder& r) { return r.id == *o.target_id; });
        const Volume removed = qit->remaining;
        level.total_volume -= removed;
        level.queue.erase(qit);
        if (level.queue.empty()) levels.erase(lit);
        return removed;
    };
    e.volume = side == Side::bid ? remove_from(book_.bids) : remove_from(book_.asks);
    e.kind = EventKind::cancel_ok;
    e.side = side;
    e.price = price;
    book_.locator.erase(loc);
    sink.on_event(e);
}

std::pair<BookState, std::vector<EngineEvent>> submit(BookState book, const Order& o) {
    MatchingEngine engine(std::move(book));
    auto events = engine.submit(o);
    return {engine.book(), std::move(events)};
}

std::pair<BookState, std::vector<EngineEvent>> step(BookState book, std::span<const Order> batch) {
    MatchingEngine engine(std::move(book));
    VectorSink sink;
    engine.step(batch, sink);
    return {engine.book(), std::move(sink.events)};
}

Snapshot top_levels(const BookState& book, int levels) {
    const int bid_depth = static_cast<int>(book.bids.size());
    const int ask_depth = static_cast<int>(book.asks.size());
    if (levels < 1 || bid_depth < levels || ask_depth < levels) throw InsufficientDepth(levels, bid_depth, ask_depth);

    Snapshot s;
    s.time = book.clock;
    s.levels.resize(levels);
    auto bid = book.bids.begin();
    auto ask = book.asks.begin();
    for (int i = 0; i < levels; ++i, ++bid, ++ask) {
        s.levels[i] = {book.tick_size.to_price(bid->first), static_cast<double>(bid->second.total_volume),
                       book.tick_size.to_price(ask->first), static_cast<double>(ask->second.total_volume)};
    }
    return s;
}

}  // namespace lobench
