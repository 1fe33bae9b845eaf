#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "lenbench/metrics.hpp"

#include "helpers.hpp"
#include "reference_rows.hpp"

using namespace lenbench;
using namespace lenbench_test;

namespace {

ScoredToken tok(double logprob, token_t true_id = 0, token_t argmax = 0) {
    ScoredToken t;
    t.token_id     = true_id;
    t.logprob_nats = logprob;
    t.argmax_id    = argmax;
    return t;
}

}  // namespace

TEST_CASE("window_loss is the mean NLL over the window") {
    // hand-derived: -(-1 + -3)/2 = 2
    CHECK(window_loss({tok(-1.0), tok(-3.0)}) == 2.0);

    // single uniform-over-256 token: loss = ln 256 exactly
    CHECK(window_loss({tok(-std::log(256.0))}) == doctest::Approx(std::log(256.0)).epsilon(1e-15));

    // p = 0.5 and p = 0.75: mean NLL = -(ln 0.5 + ln 0.75)/2 ≈ 0.49041462650586276
    CHECK(window_loss({tok(std::log(0.5)), tok(std::log(0.75))}) ==
          doctest::Approx(0.49041462650586276).epsilon(1e-12));
}

TEST_CASE("window_loss rejects an empty window") {
    CHECK_THROWS_AS(window_loss({}), data_error);
}

TEST_CASE("aggregate: window_mean weighs windows equally, token_mean weighs tokens") {
    // two windows, nll sums 4 (over 2 tokens) and 1 (over 1 token)
    const std::vector<WindowStat> windows = {{4.0, 2}, {1.0, 1}};

    const auto wm = aggregate(windows, Aggregation::window_mean);
    CHECK(wm.mean_nll == doctest::Approx((4.0 / 2 + 1.0 / 1) / 2).epsilon(1e-15));  // 1.5
    CHECK(wm.ppl == doctest::Approx(std::exp(1.5)).epsilon(1e-15));

    const auto tm = aggregate(windows, Aggregation::token_mean);
    CHECK(tm.mean_nll == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
    CHECK(tm.ppl == doctest::Approx(std::exp(5.0 / 3.0)).epsilon(1e-15));
}

TEST_CASE("aggregate: equal-sized windows make both rules coincide") {
    const std::vector<WindowStat> windows = {{2.0, 4}, {6.0, 4}, {1.0, 4}};
    const auto wm = aggregate(windows, Aggregation::window_mean);
    const auto tm = aggregate(windows, Aggregation::token_mean);
    CHECK(wm.mean_nll == doctest::Approx(tm.mean_nll).epsilon(1e-15));
    CHECK(wm.mean_nll == doctest::Approx(9.0 / 12.0).epsilon(1e-15));
}

TEST_CASE("aggregate: zero NLL means perplexity one") {
    const auto r = aggregate({{0.0, 5}}, Aggregation::token_mean);
    CHECK(r.mean_nll == 0.0);
    CHECK(r.ppl == 1.0);
}

TEST_CASE("aggregate error cases") {
    CHECK_THROWS_AS(aggregate({}, Aggregation::window_mean), data_error);
    CHECK_THROWS_AS(aggregate({}, Aggregation::token_mean), data_error);
    // a zero-scored window poisons the per-window mean
    CHECK_THROWS_AS(aggregate({{1.0, 1}, {0.0, 0}}, Aggregation::window_mean), data_error);
    CHECK_THROWS_AS(aggregate({{0.0, 0}}, Aggregation::token_mean), data_error);
}

TEST_CASE("token_accuracy counts argmax hits in percent") {
    CHECK(token_accuracy({tok(-1, 7, 7), tok(-1, 3, 3)}) == 100.0);
    CHECK(token_accuracy({tok(-1, 7, 8), tok(-1, 3, 4)}) == 0.0);

    // 3 hits out of 8 = 37.5%
    std::vector<ScoredToken> mixed;
    for (int i = 0; i < 8; ++i) {
        mixed.push_back(tok(-1.0, i, i < 3 ? i : i + 1));
    }
    CHECK(token_accuracy(mixed) == 37.5);

    CHECK_THROWS_AS(token_accuracy({}), data_error);
}

TEST_CASE("delta_metrics computes signed deltas with the documented orientation") {
    // ΔPPL = sliding − non_sliding; ΔAcc = non_sliding − sliding
    const auto [ns, s] = records_from_row(kReferenceRows[3]);  // 12.9255 vs 15.7140
    const auto row     = delta_metrics(ns, s);
    CHECK(row.model_id == "LLaMA-3.2-3B");
    CHECK(row.seq_len == 8192);
    CHECK(row.delta_ppl == doctest::Approx(2.7885).epsilon(1e-12));
    CHECK(row.delta_acc == doctest::Approx(4.0220).epsilon(1e-12));
    CHECK(row.ppl_better == BetterSide::non_sliding);
    CHECK(row.acc_better == BetterSide::non_sliding);
}

TEST_CASE("delta_metrics flags sliding as better when its perplexity is lower") {
    // at the shortest length the sliding protocol can come out ahead on PPL
    const auto [ns, s] = records_from_row(kReferenceRows[0]);  // 15.7299 vs 15.7140
    const auto row     = delta_metrics(ns, s);
    CHECK(row.delta_ppl == doctest::Approx(-0.0159).epsilon(1e-10));
    CHECK(row.ppl_better == BetterSide::sliding);
    CHECK(row.acc_better == BetterSide::non_sliding);
}

TEST_CASE("delta_metrics reproduces every frozen reference row within a half-ulp of the 4th decimal") {
    for (const auto & ref : kReferenceRows) {
        CAPTURE(ref.model_id);
        CAPTURE(ref.seq_len);
        const auto [ns, s] = records_from_row(ref);
        const auto row     = delta_metrics(ns, s);
        // reference deltas were rounded from higher-precision inputs, so allow
        // exactly one unit in the 4th decimal place
        CHECK(std::llabs(std::llround(row.delta_ppl * 1e4) - std::llround(ref.delta_ppl * 1e4)) <= 1);
        CHECK(std::llabs(std::llround(row.delta_acc * 1e4) - std::llround(ref.delta_acc * 1e4)) <= 1);
        CHECK(row.ppl_better == ref.ppl_better);
        CHECK(row.acc_better == ref.acc_better);
    }
}

TEST_CASE("delta_metrics resolves exact ties to sliding") {
    EvalRecord ns;
    ns.model_id     = "m";
    ns.seq_len      = 128;
    ns.ppl          = 10.0;
    ns.accuracy_pct = 50.0;
    const auto row  = delta_metrics(ns, ns);
    CHECK(row.delta_ppl == 0.0);
    CHECK(row.delta_acc == 0.0);
    CHECK(row.ppl_better == BetterSide::sliding);
    CHECK(row.acc_better == BetterSide::sliding);
}

TEST_CASE("delta_metrics rejects mismatched cells") {
    EvalRecord a;
    a.model_id = "m1";
    a.seq_len  = 1024;
    EvalRecord b = a;
    b.model_id   = "m2";
    CHECK_THROWS_AS(delta_metrics(a, b), data_error);
    b          = a;
    b.seq_len  = 2048;
    CHECK_THROWS_AS(delta_metrics(a, b), data_error);
}

TEST_CASE("to_string(BetterSide)") {
    CHECK(std::string(to_string(BetterSide::non_sliding)) == "non_sliding");
    CHECK(std::string(to_string(BetterSide::sliding)) == "sliding");
}

TEST_CASE("percent_reduction") {
    CHECK(percent_reduction(200.0, 100.0) == 50.0);
    CHECK(percent_reduction(100.0, 100.0) == 0.0);
    // quoted endpoint pairs land on 17% and 16% after integer rounding
    CHECK(std::llround(percent_reduction(15.2, 12.6)) == 17);
    CHECK(std::llround(percent_reduction(16.4, 13.8)) == 16);
    CHECK(percent_reduction(15.2, 12.6) == doctest::Approx(17.105263157894736).epsilon(1e-12));
    // a negative result means the value grew
    CHECK(percent_reduction(10.0, 12.0) == doctest::Approx(-20.0).epsilon(1e-15));
    CHECK_THROWS_AS(percent_reduction(0.0, 1.0), data_error);
    CHECK_THROWS_AS(percent_reduction(-5.0, 1.0), data_error);
}
