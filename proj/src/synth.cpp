#include "lobench/synth.hpp"

#include "lobench/error.hpp"
#include "lobench/text_format.hpp"

#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace lobench {

void FlowProfile::validate() const {
    const auto fail = [&](const std::string& why) { throw ValidationError("flow profile '" + name + "': " + why); };
    if (std::abs(p_limit + p_market + p_cancel - 1.0) > 1e-9) fail("order mix must sum to 1");
    if (p_limit < 0 || p_market < 0 || p_cancel < 0) fail("order mix probabilities must be >= 0");
    if (!(mean_price > 0 && price_std > 0 && min_price > 0 && max_price > min_price)) fail("bad price statistics");
    if (!(mean_price >= min_price && mean_price <= max_price)) fail("mean price outside [min, max]");
    if (!(bid_volume_mean > 0 && ask_volume_mean > 0)) fail("side volume means must be > 0");
    if (!(arrival_rate > 0)) fail("arrival rate must be > 0");
    if (!(offset_decay > 0 && offset_decay <= 1)) fail("offset decay must lie in (0, 1]");
    if (!(momentum >= 0 && momentum < 1)) fail("momentum must lie in [0, 1)");
    if (!(volume_sigma > 0 && order_size_fraction > 0)) fail("volume parameters must be > 0");
    if (seed_levels < 1 || trading_days < 1) fail("seed levels and trading days must be >= 1");
    if (tick.numerator <= 0 || tick.denominator <= 0) fail("tick size must be positive");
}

double FlowProfile::step_stddev(std::size_t steps_per_day) const {
    return price_std / std::sqrt(static_cast<double>(trading_days)) / std::sqrt(static_cast<double>(steps_per_day));
}

std::string FlowProfile::to_text() const {
    KeyValueWriter w;
    w.put("name", name);
    w.put("seed", static_cast<std::uint64_t>(seed));
    w.section("calibration");
    w.comment("price (currency units) and side volume means of the reference instrument");
    w.put("mean_price", mean_price);
    w.put("price_std", price_std);
    w.put("max_price", max_price);
    w.put("min_price", min_price);
    w.put("bid_volume_mean", bid_volume_mean);
    w.put("ask_volume_mean", ask_volume_mean);
    w.section("invented");
    w.comment("generator dynamics; not derived from market data");
    w.put("arrival_rate", arrival_rate);
    w.put("p_limit", p_limit);
    w.put("p_market", p_market);
    w.put("p_cancel", p_cancel);
    w.put("offset_decay", offset_decay);
    w.put("momentum", momentum);
    w.put("volume_sigma", volume_sigma);
    w.put("order_size_fraction", order_size_fraction);
    w.put("seed_levels", seed_levels);
    w.put("trading_days", trading_days);
    w.put("tick_numerator", static_cast<std::int64_t>(tick.numerator));
    w.put("tick_denominator", static_cast<std::int64_t>(tick.denominator));
    return w.str();
}

FlowProfile FlowProfile::from_text(const std::string& text) {
    const KeyValueReader r(text, "flow profile");
    FlowProfile p;
    p.name = r.get("name");
    p.seed = r.get_uint64_or("seed", 1);
    p.mean_price = r.get_double("calibration.mean_price");
    p.price_std = r.get_double("calibration.price_std");
    p.max_price = r.get_double("calibration.max_price");
    p.min_price = r.get_double("calibration.min_price");
    p.bid_volume_mean = r.get_double("calibration.bid_volume_mean");
    p.ask_volume_mean = r.get_double("calibration.ask_volume_mean");
    p.arrival_rate = r.get_double_or("invented.arrival_rate", p.arrival_rate);
    p.p_limit = r.get_double_or("invented.p_limit", p.p_limit);
    p.p_market = r.get_double_or("invented.p_market", p.p_market);
    p.p_cancel = r.get_double_or("invented.p_cancel", p.p_cancel);
    p.offset_decay = r.get_double_or("invented.offset_decay", p.offset_decay);
    p.momentum = r.get_double_or("invented.momentum", p.momentum);
    p.volume_sigma = r.get_double_or("invented.volume_sigma", p.volume_sigma);
    p.order_size_fraction = r.get_double_or("invented.order_size_fraction", p.order_size_fraction);
    p.seed_levels = r.get_int_or("invented.seed_levels", p.seed_levels);
    p.trading_days = r.get_int_or("invented.trading_days", p.trading_days);
    if (r.has("invented.tick_numerator")) p.tick.numerator = r.get_int64("invented.tick_numerator");
    if (r.has("invented.tick_denominator")) p.tick.denominator = r.get_int64("invented.tick_denominator");
    p.validate();
    return p;
}

namespace {
struct TickerStats {
    const char* name;
    double mean, std, max, min, bid_volume, ask_volume;
};
constexpr TickerStats kTickers[] = {
    {"sz000001", 13.83, 1.91, 18.29, 9.10, 1864194, 1964112},
    {"sz000002", 27.88, 1.72, 33.70, 23.68, 483086, 542093},
    {"sz000858", 108.06, 26.52, 154.00, 46.06, 63215, 61627},
    {"sz002415", 31.01, 3.16, 38.61, 22.77, 303046, 248262},
    {"sz300147", 7.00, 0.83, 10.10, 3.71, 496117, 304893},
};
}  // namespace

FlowProfile FlowProfile::builtin(const std::string& name) {
    for (const auto& t : kTickers) {
        if (name == t.name) {
            FlowProfile p;
            p.name = t.name;
            p.mean_price = t.mean;
            p.price_std = t.std;
            p.max_price = t.max;
            p.min_price = t.min;
            p.bid_volume_mean = t.bid_volume;
            p.ask_volume_mean = t.ask_volume;
            return p;
        }
    }
    throw ValidationError("unknown built-in profile '" + name + "'");
}

std::vector<std::string> FlowProfile::builtin_names() {
    std::vector<std::string> names;
    for (const auto& t : kTickers) names.emplace_back(t.name);
    return names;
}

namespace {

std::uint64_t day_seed(std::uint64_t seed, int day) {
    std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(day + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Resting orders the generator may cancel, with O(1) uniform pick and removal.
class LiveOrders : public EventSink {
public:
    void on_event(const EngineEvent& e) override {
        switch (e.kind) {
        case EventKind::rest:
            remaining_[e.order_id] = e.volume;
            sides_[e.order_id] = e.side;
            add(e.order_id);
            break;
        case EventKind::trade: {
            auto it = remaining_.find(e.other_id);
            if (it != remaining_.end() && (it->second -= e.volume) == 0) remove(e.other_id);
            break;
        }
        case EventKind::cancel_ok: remove(e.other_id); break;
        default: break;
        }
    }

    bool empty() const { return ids_.empty(); }
    std::pair<OrderId, Side> pick(std::mt19937_64& rng) const {
        std::uniform_int_distribution<std::size_t> u(0, ids_.size() - 1);
        const OrderId id = ids_[u(rng)];
        return {id, sides_.at(id)};
    }

private:
    void add(OrderId id) {
        pos_[id] = ids_.size();
        ids_.push_back(id);
    }
    void remove(OrderId id) {
        auto it = pos_.find(id);
        if (it == pos_.end()) return;
        const std::size_t i = it->second;
        ids_[i] = ids_.back();
        pos_[ids_[i]] = i;
        ids_.pop_back();
        pos_.erase(id);
        remaining_.erase(id);
        sides_.erase(id);
    }

    std::vector<OrderId> ids_;
    std::unordered_map<OrderId, std::size_t> pos_;
    std::unordered_map<OrderId, Volume> remaining_;
    std::unordered_map<OrderId, Side> sides_;
};

}  // namespace

FlowStream generate_day(const FlowProfile& profile, int day, const SessionCalendar& calendar) {
    profile.validate();
    calendar.validate();
    std::mt19937_64 rng(day_seed(profile.seed, day));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double tick = profile.tick.to_price(1);
    const std::size_t steps = calendar.points_per_day();

    // Opening level for the day, truncated to the observed price range.
    double open = 0;
    do {
        open = profile.mean_price + profile.price_std * normal(rng);
    } while (open < profile.min_price || open > profile.max_price);

    // Latent mid path on the 3-second grid, reflected at the price bounds.
    std::vector<double> path(steps + 1);
    path[0] = open;
    const double sigma = profile.step_stddev(steps);
    const double innovation = sigma * std::sqrt(1.0 - profile.momentum * profile.momentum);
    double inc = 0;
    for (std::size_t k = 1; k <= steps; ++k) {
        inc = profile.momentum * inc + innovation * normal(rng);
        double x = path[k - 1] + inc;
        if (x > profile.max_price) {
            x = 2 * profile.max_price - x;
            inc = -inc;
        } else if (x < profile.min_price) {
            x = 2 * profile.min_price - x;
            inc = -inc;
        }
        path[k] = x;
    }

    FlowStream stream;
    stream.instrument = profile.name;
    stream.day = day;
    MatchingEngine engine(profile.tick);
    LiveOrders live;
    OrderId next_id = 1;
    const auto emit = [&](const Order& o) {
        engine.submit(o, live);
        stream.orders.push_back(o);
    };

    const auto lots = [&](double mean_shares) {
        // log-normal with the requested mean, rounded to board lots of 100
        const double mu = std::log(mean_shares) - 0.5 * profile.volume_sigma * profile.volume_sigma;
        const double shares = std::exp(mu + profile.volume_sigma * normal(rng));
        return std::max<Volume>(1, std::llround(shares / 100.0)) * 100;
    };
    const auto side_mean = [&](Side s) {
        return profile.order_size_fraction * (s == Side::bid ? profile.bid_volume_mean : profile.ask_volume_mean);
    };

    // Seed the book at the open of the continuous session.
    const Timestamp open_ts = calendar.intervals.front().start;
    const Ticks mid_ticks = std::llround(open / tick);
    std::uniform_int_distribution<int> orders_per_level(1, 3);
    for (int i = 1; i <= profile.seed_levels; ++i) {
        for (Side s : {Side::bid, Side::ask}) {
            const Ticks px = s == Side::bid ? mid_ticks - i : mid_ticks + i;
            if (px <= 0) continue;
            const int n = orders_per_level(rng);
            for (int k = 0; k < n; ++k) emit(Order::limit(next_id++, s, px, lots(side_mean(s)), open_ts));
        }
    }

    std::exponential_distribution<double> gap(profile.arrival_rate);
    std::geometric_distribution<int> offset(profile.offset_decay);
    std::size_t step_base = 0;
    for (const auto& iv : calendar.intervals) {
        double t = static_cast<double>(iv.start);
        while (true) {
            t += gap(rng) * static_cast<double>(kNanosPerSecond);
            const auto ts = static_cast<Timestamp>(t);
            if (ts > iv.end) break;
            const std::size_t k = step_base + static_cast<std::size_t>((ts - iv.start) / calendar.period);
            const double ref = path[std::min(k, steps)] / tick;

            const double u = unit(rng);
            const Side side = unit(rng) < 0.5 ? Side::bid : Side::ask;
            if (u < profile.p_limit) {
                const int off = offset(rng);
                const Ticks px = side == Side::bid ? static_cast<Ticks>(std::floor(ref)) - off
                                                   : static_cast<Ticks>(std::ceil(ref)) + off;
                if (px <= 0) continue;
                emit(Order::limit(next_id++, side, px, lots(side_mean(side)), ts));
            } else if (u < profile.p_limit + profile.p_market) {
                emit(Order::market(next_id++, side, lots(0.5 * side_mean(side)), ts));
            } else if (!live.empty()) {
                const auto [target, target_side] = live.pick(rng);
                emit(Order::cancel(next_id++, target_side, target, ts));
            }
        }
        step_base += static_cast<std::size_t>((iv.end - iv.start) / calendar.period);
    }
    return stream;
}

std::string ReplayReport::summary() const {
    std::ostringstream os;
    for (Side s : {Side::bid, Side::ask}) {
        const auto& t = ledger.totals(s);
        os << (s == Side::bid ? "bid" : "ask") << ": submitted=" << t.submitted << " executed=" << t.executed
           << " cancelled=" << t.cancelled << " resting=" << resting[static_cast<int>(s)]
           << " market_unfilled=" << t.market_unfilled << '\n';
    }
    os << "orders=" << orders << " trades=" << ledger.trades() << " rests=" << rests << " cancels=" << cancels_ok
       << " cancel_misses=" << ledger.cancel_misses() << " conserved=" << (conserved ? "yes" : "no") << '\n';
    return os.str();
}

namespace {

class ReplaySink : public EventSink {
public:
    explicit ReplaySink(ReplayReport& r) : report_(r) {}
    void on_event(const EngineEvent& e) override {
        report_.ledger.on_event(e);
        if (e.kind == EventKind::rest) ++report_.rests;
        if (e.kind == EventKind::cancel_ok) ++report_.cancels_ok;
    }

private:
    ReplayReport& report_;
};

constexpr std::size_t kFullCheckEvery = 512;

// Replays with a full invariant check after every order up to `last`; returns the first offender.
OrderId locate_violation(const FlowStream& stream, std::size_t last) {
    MatchingEngine engine;
    VolumeLedger ledger;
    for (std::size_t i = 0; i <= last && i < stream.orders.size(); ++i) {
        ledger.record_order(stream.orders[i]);
        engine.submit(stream.orders[i], ledger);
        if (!engine.book().check_invariants().empty() || !ledger.conserved(engine.book())) return stream.orders[i].id;
    }
    return stream.orders[std::min(last, stream.orders.size() - 1)].id;
}

}  // namespace

ReplayReport replay_check(const FlowStream& stream, const SessionCalendar& calendar, const SampleOptions& options) {
    ReplayReport report;
    ReplaySink sink(report);
    std::size_t index = 0;
    std::string failure;
    std::size_t failed_at = 0;

    MatchingEngine engine;
    const auto observer = [&](const Order& o, const BookState& book) {
        report.ledger.record_order(o);
        ++report.orders;
        const auto bb = book.best_bid();
        const auto ba = book.best_ask();
        bool bad = bb && ba && *bb >= *ba;
        if (!bad && (index % kFullCheckEvery == 0 || index + 1 == stream.orders.size()))
            bad = !book.check_invariants().empty() || !report.ledger.conserved(book);
        if (bad && failure.empty()) {
            failure = "book invariant or conservation violated";
            failed_at = index;
        }
        ++index;
    };

    try {
        report.series = sample(engine, stream.orders, calendar, options, stream.instrument, stream.day, &sink, observer);
    } catch (const ValidationError& e) {
        throw ValidationError("replay " + stream.instrument + " day " + std::to_string(stream.day) + " order " +
                              std::to_string(index < stream.orders.size() ? stream.orders[index].id : -1) + ": " +
                              e.what());
    }
    if (!failure.empty())
        throw ValidationError("replay " + stream.instrument + " day " + std::to_string(stream.day) + ": " + failure +
                              " at order " + std::to_string(locate_violation(stream, failed_at)));

    for (const auto& problem : check_day_series(report.series, calendar))
        throw ValidationError("replay " + stream.instrument + " day " + std::to_string(stream.day) + ": " + problem);

    report.resting = {engine.book().resting_volume(Side::bid), engine.book().resting_volume(Side::ask)};
    report.conserved = report.ledger.conserved(engine.book());
    if (!report.conserved) throw ValidationError("replay: volume not conserved at end of day");
    return report;
}

}  // namespace lobench
