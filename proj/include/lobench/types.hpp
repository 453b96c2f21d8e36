#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace lobench {

using OrderId = std::int64_t;
using Ticks = std::int64_t;
using Volume = std::int64_t;
// Nanoseconds since the session opens (09:15:00 exchange-local, start of the opening call).
using Timestamp = std::int64_t;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

constexpr Timestamp kNanosPerSecond = 1'000'000'000;

// Exchange-local wall clock to session timestamp.
constexpr Timestamp clock_time(int hour, int minute, int second = 0) {
    return ((static_cast<Timestamp>(hour) * 3600 + minute * 60 + second) - (9 * 3600 + 15 * 60)) *
           kNanosPerSecond;
}

enum class Side : std::uint8_t { bid, ask };
enum class OrderKind : std::uint8_t { limit, market, cancel };

constexpr Side opposite(Side s) { return s == Side::bid ? Side::ask : Side::bid; }

struct Order {
    OrderId id = 0;
    Side side = Side::bid;
    OrderKind kind = OrderKind::limit;
    std::optional<Ticks> price;
    std::optional<Volume> volume;
    Timestamp timestamp = 0;
    std::optional<OrderId> target_id;

    static Order limit(OrderId id, Side side, Ticks price, Volume volume, Timestamp ts);
    static Order market(OrderId id, Side side, Volume volume, Timestamp ts);
    static Order cancel(OrderId id, Side side, OrderId target, Timestamp ts);

    bool operator==(const Order&) const = default;
};

// Throws ValidationError when the per-kind field invariants do not hold.
void validate_order(const Order& o);

// Price unit as an exact rational number of currency units (default 1/100).
struct TickSize {
    std::int64_t numerator = 1;
    std::int64_t denominator = 100;

    double to_price(Ticks t) const {
        return static_cast<double>(t * numerator) / static_cast<double>(denominator);
    }
    bool operator==(const TickSize&) const = default;
};

struct RestingOrder {
    OrderId id = 0;
    Volume remaining = 0;
    Timestamp timestamp = 0;
};

struct PriceLevel {
    Ticks price = 0;
    Volume total_volume = 0;
    std::deque<RestingOrder> queue;  // arrival order
};

struct BookState {
    std::map<Ticks, PriceLevel, std::greater<>> bids;  // best (highest) first
    std::map<Ticks, PriceLevel, std::less<>> asks;     // best (lowest) first
    TickSize tick_size;
    Timestamp clock = 0;
    std::optional<OrderId> last_id;  // id of the last applied order
    // Live resting orders: id -> (side, price).
    std::unordered_map<OrderId, std::pair<Side, Ticks>> locator;

    std::optional<Ticks> best_bid() const;
    std::optional<Ticks> best_ask() const;
    Volume resting_volume(Side s) const;

    // Human-readable descriptions of every broken structural invariant; empty when sound.
    std::vector<std::string> check_invariants() const;
};

struct LevelRow {
    double bid_price = 0;
    double bid_volume = 0;
    double ask_price = 0;
    double ask_volume = 0;

    bool operator==(const LevelRow&) const = default;
};

// One l x 4 book image. Row 0 is the best level.
struct Snapshot {
    std::vector<LevelRow> levels;
    Timestamp time = 0;

    int depth() const { return static_cast<int>(levels.size()); }
    bool operator==(const Snapshot&) const = default;
};

enum class ViolationKind : std::uint8_t { bid_order, ask_order, cross, non_positive };

std::string to_string(ViolationKind k);

struct Violation {
    ViolationKind kind;
    int level;  // 1-based
    double magnitude;
};

std::vector<Violation> validate_snapshot(const Snapshot& s);

// (best ask + best bid) / 2. Throws ValidationError on an empty snapshot.
double mid_price(const Snapshot& s);

// Field-major layout: b_p[1..l], b_v[1..l], a_p[1..l], a_v[1..l].
namespace layout {
constexpr int bid_price(int /*levels*/, int i) { return i; }
constexpr int bid_volume(int levels, int i) { return levels + i; }
constexpr int ask_price(int levels, int i) { return 2 * levels + i; }
constexpr int ask_volume(int levels, int i) { return 3 * levels + i; }
constexpr bool is_price(int levels, int col) {
    return col < levels || (col >= 2 * levels && col < 3 * levels);
}
// Level index (0-based) of a column.
constexpr int level_of(int levels, int col) { return col % levels; }
// The 2l price columns ordered lowest to highest for a well-formed book:
// b_p[l], ..., b_p[1], a_p[1], ..., a_p[l].
std::vector<int> ascending_price_columns(int levels);
}  // namespace layout

Vector flatten(const Snapshot& s);
Snapshot unflatten(const Eigen::Ref<const Vector>& v, int levels, Timestamp time = 0);

enum class Trend : std::int8_t { down = -1, steady = 0, up = 1 };

// Class index used by classifiers: down -> 0, steady -> 1, up -> 2.
constexpr int class_index(Trend t) { return static_cast<int>(t) + 1; }
constexpr Trend trend_from_class(int c) { return static_cast<Trend>(c - 1); }

struct WindowOrigin {
    std::string instrument;
    int day = 0;
    int start = 0;  // index of the first snapshot within the day series

    bool operator==(const WindowOrigin&) const = default;
};

struct Window {
    RowMatrix data;  // T x 4l
    std::optional<Trend> label;
    std::vector<int> mask;  // masked time-step indices, sorted
    WindowOrigin origin;

    int steps() const { return static_cast<int>(data.rows()); }
    int levels() const { return static_cast<int>(data.cols() / 4); }
};

// splitmix64 finalizer; derives independent stream seeds from (seed, index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace lobench
