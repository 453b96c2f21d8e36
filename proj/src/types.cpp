#include "lobench/types.hpp"

#include "lobench/error.hpp"

#include <numeric>

namespace lobench {

Order Order::limit(OrderId id, Side side, Ticks price, Volume volume, Timestamp ts) {
    return Order{id, side, OrderKind::limit, price, volume, ts, std::nullopt};
}

Order Order::market(OrderId id, Side side, Volume volume, Timestamp ts) {
    return Order{id, side, OrderKind::market, std::nullopt, volume, ts, std::nullopt};
}

Order Order::cancel(OrderId id, Side side, OrderId target, Timestamp ts) {
    return Order{id, side, OrderKind::cancel, std::nullopt, std::nullopt, ts, target};
}

void validate_order(const Order& o) {
    const auto fail = [&](const char* why) {
        throw ValidationError("order " + std::to_string(o.id) + ": " + why);
    };
    switch (o.kind) {
    case OrderKind::limit:
        if (!o.price || *o.price <= 0) fail("limit order needs a positive price");
        if (!o.volume || *o.volume <= 0) fail("limit order needs a positive volume");
        if (o.target_id) fail("limit order cannot carry a target id");
        break;
    case OrderKind::market:
        if (o.price) fail("market order cannot carry a price");
        if (!o.volume || *o.volume <= 0) fail("market order needs a positive volume");
        if (o.target_id) fail("market order cannot carry a target id");
        break;
    case OrderKind::cancel:
        if (!o.target_id) fail("cancel needs a target id");
        if (o.price || o.volume) fail("cancel cannot carry price or volume");
        break;
    }
}

std::optional<Ticks> BookState::best_bid() const {
    if (bids.empty()) return std::nullopt;
    return bids.begin()->first;
}

std::optional<Ticks> BookState::best_ask() const {
    if (asks.empty()) return std::nullopt;
    return asks.begin()->first;
}

Volume BookState::resting_volume(Side s) const {
    Volume total = 0;
    const auto add = [&](const auto& side) {
        for (const auto& [price, level] : side) total += level.total_volume;
    };
    if (s == Side::bid) add(bids);
    else add(asks);
    return total;
}

std::vector<std::string> BookState::check_invariants() const {
    std::vector<std::string> out;
    std::size_t live = 0;
    const auto check_side = [&](const auto& side, const char* name) {
        for (const auto& [price, level] : side) {
            const std::string where = std::string(name) + " level " + std::to_string(price);
            if (level.price != price) out.push_back(where + ": key/price mismatch");
            if (level.queue.empty() || level.total_volume <= 0) out.push_back(where + ": empty level retained");
            Volume sum = 0;
            for (std::size_t i = 0; i < level.queue.size(); ++i) {
                const auto& r = level.queue[i];
                if (r.remaining <= 0) out.push_back(where + ": non-positive remaining volume");
                sum += r.remaining;
                if (i > 0) {
                    const auto& prev = level.queue[i - 1];
                    if (r.timestamp < prev.timestamp || (r.timestamp == prev.timestamp && r.id <= prev.id))
                        out.push_back(where + ": queue out of arrival order");
                }
                auto it = locator.find(r.id);
                if (it == locator.end() || it->second.second != price) out.push_back(where + ": order missing from locator");
            }
            live += level.queue.size();
            if (sum != level.total_volume) out.push_back(where + ": total volume != queue sum");
        }
    };
    check_side(bids, "bid");
    check_side(asks, "ask");
    if (live != locator.size()) out.push_back("locator size does not match resting orders");
    if (!bids.empty() && !asks.empty() && bids.begin()->first >= asks.begin()->first)
        out.push_back("crossed book: best bid " + std::to_string(bids.begin()->first) + " >= best ask " +
                      std::to_string(asks.begin()->first));
    return out;
}

std::string to_string(ViolationKind k) {
    switch (k) {
    case ViolationKind::bid_order: return "bid-order";
    case ViolationKind::ask_order: return "ask-order";
    case ViolationKind::cross: return "cross";
    case ViolationKind::non_positive: return "non-positive";
    }
    return "unknown";
}

std::vector<Violation> validate_snapshot(const Snapshot& s) {
    std::vector<Violation> out;
    const auto& lv = s.levels;
    for (int i = 0; i < s.depth(); ++i) {
        const auto& r = lv[i];
        for (double v : {r.bid_price, r.bid_volume, r.ask_price, r.ask_volume})
            if (!(v > 0)) out.push_back({ViolationKind::non_positive, i + 1, -v});
        if (i > 0) {
            if (r.bid_price >= lv[i - 1].bid_price)
                out.push_back({ViolationKind::bid_order, i + 1, r.bid_price - lv[i - 1].bid_price});
            if (r.ask_price <= lv[i - 1].ask_price)
                out.push_back({ViolationKind::ask_order, i + 1, lv[i - 1].ask_price - r.ask_price});
        }
    }
    if (!lv.empty() && lv[0].bid_price >= lv[0].ask_price)
        out.push_back({ViolationKind::cross, 1, lv[0].bid_price - lv[0].ask_price});
    return out;
}

double mid_price(const Snapshot& s) {
    if (s.levels.empty()) throw ValidationError("mid-price undefined: snapshot has no levels");
    return (s.levels[0].ask_price + s.levels[0].bid_price) / 2.0;
}

namespace layout {
std::vector<int> ascending_price_columns(int levels) {
    std::vector<int> cols;
    cols.reserve(2 * levels);
    for (int i = levels - 1; i >= 0; --i) cols.push_back(bid_price(levels, i));
    for (int i = 0; i < levels; ++i) cols.push_back(ask_price(levels, i));
    return cols;
}
}  // namespace layout

Vector flatten(const Snapshot& s) {
    const int l = s.depth();
    Vector v(4 * l);
    for (int i = 0; i < l; ++i) {
        v[layout::bid_price(l, i)] = s.levels[i].bid_price;
        v[layout::bid_volume(l, i)] = s.levels[i].bid_volume;
        v[layout::ask_price(l, i)] = s.levels[i].ask_price;
        v[layout::ask_volume(l, i)] = s.levels[i].ask_volume;
    }
    return v;
}

Snapshot unflatten(const Eigen::Ref<const Vector>& v, int levels, Timestamp time) {
    if (levels < 1 || v.size() != 4 * static_cast<Eigen::Index>(levels))
        throw ValidationError("unflatten: expected " + std::to_string(4 * levels) + " values, got " +
                              std::to_string(v.size()));
    Snapshot s;
    s.time = time;
    s.levels.resize(levels);
    for (int i = 0; i < levels; ++i) {
        s.levels[i] = {v[layout::bid_price(levels, i)], v[layout::bid_volume(levels, i)],
                       v[layout::ask_price(levels, i)], v[layout::ask_volume(levels, i)]};
    }
    return s;
}

}  // namespace lobench
