#include "lobench/engine.hpp"
#include "lobench/error.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lobench;

namespace {

std::vector<Trade> trades_of(const std::vector<EngineEvent>& events) {
    std::vector<Trade> out;
    for (const auto& e : events)
        if (e.kind == EventKind::trade) out.push_back(e.as_trade());
    return out;
}

// Random order stream against a book hovering around 1000 ticks.
std::vector<Order> random_stream(std::uint64_t seed, std::size_t n, std::int64_t first_id = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::uniform_int_distribution<int> offset(-6, 6), vol(1, 500);
    std::vector<Order> out;
    std::vector<OrderId> ids;
    Timestamp ts = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const OrderId id = first_id + static_cast<OrderId>(i);
        ts += static_cast<Timestamp>(rng() % 3);  // ties happen
        const Side side = u(rng) < 0.5 ? Side::bid : Side::ask;
        const double r = u(rng);
        if (r < 0.6) {
            out.push_back(Order::limit(id, side, 1000 + offset(rng), vol(rng), ts));
            ids.push_back(id);
        } else if (r < 0.75) {
            out.push_back(Order::market(id, side, vol(rng), ts));
        } else {
            // mostly live-ish targets, sometimes unknown ids
            const OrderId target = ids.empty() || u(rng) < 0.1 ? id + 1000000 : ids[rng() % ids.size()];
            out.push_back(Order::cancel(id, side, target, ts));
        }
    }
    return out;
}

}  // namespace

TEST(Engine, LimitOnEmptyBookRests) {
    MatchingEngine eng;
    const auto ev = eng.submit(Order::limit(1, Side::bid, 1000, 100, 0));
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].kind, EventKind::rest);
    EXPECT_EQ(eng.book().best_bid(), 1000);
    EXPECT_EQ(eng.book().bids.at(1000).total_volume, 100);
    EXPECT_FALSE(eng.book().best_ask());
}

TEST(Engine, CrossingLimitTradesAtMakerPriceAndRestsRemainder) {
    MatchingEngine eng;
    eng.submit(Order::limit(1, Side::ask, 1001, 50, 0));
    const auto ev = eng.submit(Order::limit(2, Side::bid, 1002, 80, 1));
    const auto tr = trades_of(ev);
    ASSERT_EQ(tr.size(), 1u);
    EXPECT_EQ(tr[0], (Trade{2, 1, Side::bid, 1001, 50, 1}));
    EXPECT_EQ(ev.back().kind, EventKind::rest);
    EXPECT_EQ(ev.back().volume, 30);
    EXPECT_EQ(eng.book().best_bid(), 1002);
    EXPECT_EQ(eng.book().bids.at(1002).total_volume, 30);
    EXPECT_TRUE(eng.book().asks.empty());
}

TEST(Engine, MarketOrderFifoWithinLevel) {
    MatchingEngine eng;
    eng.submit(Order::limit(1, Side::ask, 1001, 30, 0));
    eng.submit(Order::limit(2, Side::ask, 1001, 30, 0));
    const auto tr = trades_of(eng.submit(Order::market(3, Side::bid, 40, 1)));
    ASSERT_EQ(tr.size(), 2u);
    EXPECT_EQ(tr[0].maker, 1);
    EXPECT_EQ(tr[0].volume, 30);
    EXPECT_EQ(tr[1].maker, 2);
    EXPECT_EQ(tr[1].volume, 10);
    EXPECT_EQ(eng.book().asks.at(1001).total_volume, 20);
}

TEST(Engine, MarketRemainderIsDiscarded) {
    MatchingEngine eng;
    eng.submit(Order::limit(1, Side::bid, 999, 10, 0));
    const auto ev = eng.submit(Order::market(2, Side::ask, 25, 0));
    ASSERT_EQ(ev.size(), 2u);
    EXPECT_EQ(ev[1].kind, EventKind::market_unfilled);
    EXPECT_EQ(ev[1].volume, 15);
    EXPECT_TRUE(eng.book().bids.empty());
    EXPECT_TRUE(eng.book().asks.empty());
}

TEST(Engine, MarketOnEmptySideEmitsUnfilled) {
    MatchingEngine eng;
    const auto ev = eng.submit(Order::market(1, Side::bid, 10, 0));
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].kind, EventKind::market_unfilled);
}

TEST(Engine, LimitSweepsSeveralLevelsBestFirst) {
    MatchingEngine eng;
    eng.submit(Order::limit(1, Side::ask, 1003, 10, 0));
    eng.submit(Order::limit(2, Side::ask, 1001, 10, 0));
    eng.submit(Order::limit(3, Side::ask, 1002, 10, 0));
    const auto tr = trades_of(eng.submit(Order::limit(4, Side::bid, 1002, 25, 0)));
    ASSERT_EQ(tr.size(), 2u);
    EXPECT_EQ(tr[0].price, 1001);
    EXPECT_EQ(tr[1].price, 1002);
    EXPECT_EQ(eng.book().best_bid(), 1002);
    EXPECT_EQ(eng.book().bids.at(1002).total_volume, 5);
    EXPECT_EQ(eng.book().best_ask(), 1003);
}

TEST(Engine, CancelRemovesFullRemainder) {
    MatchingEngine eng;
    eng.submit(Order::limit(1, Side::bid, 1000, 100, 0));
    eng.submit(Order::market(2, Side::ask, 40, 0));
    const auto ev = eng.submit(Order::cancel(3, Side::bid, 1, 0));
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].kind, EventKind::cancel_ok);
    EXPECT_EQ(ev[0].volume, 60);
    EXPECT_TRUE(eng.book().bids.empty());
    EXPECT_TRUE(eng.book().locator.empty());
}

TEST(Engine, CancelOfUnknownOrFilledIdIsAMiss) {
    MatchingEngine eng;
    eng.submit(Order::limit(1, Side::bid, 1000, 10, 0));
    eng.submit(Order::market(2, Side::ask, 10, 0));
    auto ev = eng.submit(Order::cancel(3, Side::bid, 1, 0));
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].kind, EventKind::cancel_miss);
    ev = eng.submit(Order::cancel(4, Side::bid, 77, 0));
    EXPECT_EQ(ev[0].kind, EventKind::cancel_miss);
}

TEST(Engine, StaleTimestampThrows) {
    MatchingEngine eng;
    eng.submit(Order::limit(1, Side::bid, 1000, 10, 5));
    EXPECT_THROW(eng.submit(Order::limit(2, Side::bid, 1000, 10, 4)), ValidationError);
}

TEST(Engine, TieWithNonIncreasingIdThrows) {
    MatchingEngine eng;
    eng.submit(Order::limit(5, Side::bid, 1000, 10, 5));
    EXPECT_THROW(eng.submit(Order::limit(4, Side::bid, 1000, 10, 5)), ValidationError);
    EXPECT_NO_THROW(eng.submit(Order::limit(6, Side::bid, 1000, 10, 5)));
}

TEST(Engine, StepRejectsUnsortedBatch) {
    MatchingEngine eng;
    const std::vector<Order> batch{Order::limit(1, Side::bid, 1000, 10, 5), Order::limit(2, Side::bid, 1000, 10, 4)};
    VectorSink sink;
    EXPECT_THROW(eng.step(batch, sink), ValidationError);
}

TEST(Engine, EmptyBatchLeavesBookUnchanged) {
    BookState book;
    book = submit(book, Order::limit(1, Side::bid, 1000, 10, 0)).first;
    auto [after, events] = step(book, {});
    EXPECT_TRUE(events.empty());
    EXPECT_EQ(after.bids.at(1000).total_volume, 10);
    EXPECT_EQ(after.clock, book.clock);
}

TEST(Engine, LimitThenCancelIsIdentity) {
    BookState book;
    book = submit(book, Order::limit(1, Side::ask, 1005, 10, 0)).first;
    const std::vector<Order> batch{Order::limit(2, Side::bid, 1000, 10, 1), Order::cancel(3, Side::bid, 2, 1)};
    auto [after, events] = step(book, batch);
    ASSERT_EQ(events.size(), 2u);
    EXPECT_EQ(events[0].kind, EventKind::rest);
    EXPECT_EQ(events[1].kind, EventKind::cancel_ok);
    EXPECT_TRUE(after.bids.empty());
    EXPECT_EQ(after.asks.at(1005).total_volume, 10);
}

TEST(Engine, StepEqualsSequentialSubmit) {
    const auto stream = random_stream(42, 3000);
    auto [batched, batch_events] = step(BookState{}, stream);
    BookState seq;
    std::vector<EngineEvent> seq_events;
    for (const auto& o : stream) {
        auto [b, ev] = submit(std::move(seq), o);
        seq = std::move(b);
        seq_events.insert(seq_events.end(), ev.begin(), ev.end());
    }
    EXPECT_EQ(batch_events, seq_events);
    EXPECT_EQ(top_levels(batched, 1), top_levels(seq, 1));
}

TEST(TopLevels, ExactDepthAndBestFirst) {
    MatchingEngine eng;
    OrderId id = 1;
    for (int i = 0; i < 10; ++i) eng.submit(Order::limit(id++, Side::bid, 1000 - i, 10 + i, 0));
    for (int i = 0; i < 12; ++i) eng.submit(Order::limit(id++, Side::ask, 1001 + i, 20 + i, 0));
    const Snapshot s = top_levels(eng.book(), 10);
    ASSERT_EQ(s.depth(), 10);
    EXPECT_TRUE(validate_snapshot(s).empty());
    for (int i = 0; i < 10; ++i) {
        EXPECT_DOUBLE_EQ(s.levels[i].bid_price, (1000 - i) / 100.0);
        EXPECT_DOUBLE_EQ(s.levels[i].ask_price, (1001 + i) / 100.0);
        EXPECT_EQ(s.levels[i].ask_volume, 20 + i);
    }
}

TEST(TopLevels, VolumesEqualQueueSums) {
    auto [book, ev] = step(BookState{}, random_stream(9, 5000));
    const auto check = [](const auto& levels) {
        for (const auto& [price, lvl] : levels) {
            Volume sum = 0;
            for (const auto& r : lvl.queue) sum += r.remaining;
            EXPECT_EQ(sum, lvl.total_volume);
        }
    };
    check(book.bids);
    check(book.asks);
    const int depth = static_cast<int>(std::min(book.bids.size(), book.asks.size()));
    ASSERT_GT(depth, 0);
    const Snapshot s = top_levels(book, depth);
    auto b = book.bids.begin();
    for (int i = 0; i < depth; ++i, ++b) {
        Volume sum = 0;
        for (const auto& r : b->second.queue) sum += r.remaining;
        EXPECT_EQ(s.levels[i].bid_volume, static_cast<double>(sum));
    }
}

TEST(TopLevels, ThinBookReportsDepth) {
    MatchingEngine eng;
    eng.submit(Order::limit(1, Side::bid, 1000, 10, 0));
    eng.submit(Order::limit(2, Side::ask, 1001, 10, 0));
    eng.submit(Order::limit(3, Side::ask, 1002, 10, 0));
    try {
        top_levels(eng.book(), 10);
        FAIL() << "expected InsufficientDepth";
    } catch (const InsufficientDepth& e) {
        EXPECT_EQ(e.requested, 10);
        EXPECT_EQ(e.bid_depth, 1);
        EXPECT_EQ(e.ask_depth, 2);
    }
}

TEST(VolumeLedger, ConservationOnSmallScenario) {
    MatchingEngine eng;
    VolumeLedger ledger;
    const std::vector<Order> stream{Order::limit(1, Side::ask, 1001, 50, 0), Order::limit(2, Side::bid, 1002, 80, 1),
                                    Order::market(3, Side::ask, 100, 2), Order::cancel(4, Side::ask, 1, 3)};
    for (const auto& o : stream) {
        ledger.record_order(o);
        eng.submit(o, ledger);
    }
    EXPECT_TRUE(ledger.conserved(eng.book()));
    EXPECT_EQ(ledger.totals(Side::ask).submitted, 150);
    EXPECT_EQ(ledger.totals(Side::ask).executed, 80);
    EXPECT_EQ(ledger.totals(Side::ask).market_unfilled, 70);
    EXPECT_EQ(ledger.cancel_misses(), 1u);
}

// Fuzz: matches the naive oracle fill by fill, and keeps every invariant after every order.
TEST(EngineFuzz, AgreesWithNaiveOracleAndConserves) {
    std::size_t total = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto stream = random_stream(seed, 12000);
        MatchingEngine eng;
        VolumeLedger ledger;
        oracle::NaiveBook naive;
        for (const auto& o : stream) {
            VectorSink sink;
            ledger.record_order(o);
            eng.submit(o, sink);
            for (const auto& e : sink.events) ledger.on_event(e);
            ASSERT_GE(sink.events.size(), 1u);

            std::vector<oracle::NaiveBook::Fill> want;
            const bool bid = o.side == Side::bid;
            if (o.kind == OrderKind::limit) want = naive.limit(o.id, bid, *o.price, *o.volume);
            else if (o.kind == OrderKind::market) want = naive.market(o.id, bid, *o.volume);
            else naive.cancel(*o.target_id);
            const auto got = trades_of(sink.events);
            ASSERT_EQ(got.size(), want.size()) << "order " << o.id;
            for (std::size_t k = 0; k < got.size(); ++k) {
                EXPECT_EQ(got[k].maker, want[k].maker);
                EXPECT_EQ(got[k].price, want[k].price);
                EXPECT_EQ(got[k].volume, want[k].volume);
            }
            const auto bb = eng.book().best_bid();
            const auto ba = eng.book().best_ask();
            if (bb && ba) {
                ASSERT_LT(*bb, *ba) << "crossed after order " << o.id;
            }
            ++total;
        }
        EXPECT_TRUE(eng.book().check_invariants().empty());
        EXPECT_TRUE(ledger.conserved(eng.book()));
        for (bool bid : {true, false}) {
            const auto want = naive.levels(bid);
            std::vector<std::pair<std::int64_t, std::int64_t>> got;
            if (bid)
                for (const auto& [p, l] : eng.book().bids) got.emplace_back(p, l.total_volume);
            else
                for (const auto& [p, l] : eng.book().asks) got.emplace_back(p, l.total_volume);
            EXPECT_EQ(got, want);
        }
    }
    EXPECT_GE(total, 100000u);
}

TEST(EngineFuzz, DeterministicReplay) {
    const auto stream = random_stream(5, 20000);
    auto [a, ea] = step(BookState{}, stream);
    auto [b, eb] = step(BookState{}, stream);
    EXPECT_EQ(ea, eb);
    EXPECT_EQ(top_levels(a, 1), top_levels(b, 1));
}
