#pragma once

#include "lobench/engine.hpp"
#include "lobench/pipeline.hpp"
#include "lobench/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lobench {

// Parameters of the synthetic order-flow generator. The price and side-volume fields
// are calibration targets taken from published per-ticker statistics; everything else
// (arrival rate, order mix, offsets, momentum) is invented and marked as such in
// profile files.
struct FlowProfile {
    std::string name;
    // Calibration targets.
    double mean_price = 13.83;
    double price_std = 1.91;
    double max_price = 18.29;
    double min_price = 9.10;
    double bid_volume_mean = 1864194;
    double ask_volume_mean = 1964112;
    // Invented dynamics.
    double arrival_rate = 1.0;  // orders per second
    double p_limit = 0.6;
    double p_market = 0.1;
    double p_cancel = 0.3;
    double offset_decay = 0.35;  // P(offset = k) = p (1 - p)^k ticks away from the reference price
    double momentum = 0.6;       // AR(1) coefficient of the 3-second mid increments
    double volume_sigma = 0.8;   // log-normal shape of order sizes
    double order_size_fraction = 0.025;  // mean order size as a fraction of the side volume mean
    int seed_levels = 15;
    int trading_days = 244;  // scales the yearly price std down to one day
    TickSize tick;
    std::uint64_t seed = 1;

    void validate() const;
    // Per-3-second stddev of the latent mid-price, in currency units.
    double step_stddev(std::size_t steps_per_day = 4740) const;

    std::string to_text() const;
    static FlowProfile from_text(const std::string& text);

    // Profiles named after the five calibration tickers, e.g. "sz000001".
    static FlowProfile builtin(const std::string& name);
    static std::vector<std::string> builtin_names();
};

struct FlowStream {
    std::string instrument;
    int day = 0;
    std::vector<Order> orders;
};

// One trading day of order flow; deterministic in (profile.seed, day).
FlowStream generate_day(const FlowProfile& profile, int day = 0, const SessionCalendar& calendar = {});

struct ReplayReport {
    DaySeries series;
    VolumeLedger ledger;
    std::size_t orders = 0;
    std::size_t rests = 0;
    std::size_t cancels_ok = 0;
    std::array<Volume, 2> resting{};  // end-of-day resting volume per side
    bool conserved = false;

    // Multi-line human-readable accounting summary.
    std::string summary() const;
};

// Replays through the engine and the sampler, checking book invariants and volume
// conservation. Throws ValidationError naming the offending order id on any violation.
ReplayReport replay_check(const FlowStream& stream, const SessionCalendar& calendar = {},
                          const SampleOptions& options = {});

}  // namespace lobench
