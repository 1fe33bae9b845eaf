#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "lenbench/runner.hpp"

#include "helpers.hpp"

using namespace lenbench;
using namespace lenbench_test;

namespace {

std::vector<TokenSequence> bundled_sequences(std::int64_t seq_len) {
    const auto corpus = load_documents(data_file("tiny_corpus.jsonl"), CorpusFormat::jsonl_tokens);
    return pack_sequences(corpus.docs, seq_len, PackPolicy::concat_and_chunk);
}

MarkovBackend bundled_backend() {
    return MarkovBackend(load_markov(data_file("markov_k2.json")));
}

ProtocolConfig sliding_config(std::int64_t w, std::int64_t s,
                              Aggregation agg = Aggregation::window_mean) {
    ProtocolConfig c;
    c.variant          = Variant::sliding;
    c.plan.window_size = w;
    c.plan.stride      = s;
    c.aggregation      = agg;
    return c;
}

bool same_scores(const EvalRecord & a, const EvalRecord & b) {
    return a.nll_sum_nats == b.nll_sum_nats && a.ppl == b.ppl &&
           a.accuracy_pct == b.accuracy_pct && a.scored_tokens == b.scored_tokens &&
           a.cost_tokens == b.cost_tokens;
}

}  // namespace

TEST_CASE("run_protocol fills every field of the evaluation cell") {
    auto backend = bundled_backend();
    const auto seqs = bundled_sequences(256);
    ProtocolConfig config;  // non_sliding defaults

    const auto r = run_protocol(backend, seqs, config);
    CHECK(r.model_id == "markov-k2");
    CHECK(r.seq_len == 256);
    CHECK(r.n_sequences == static_cast<std::int64_t>(seqs.size()));
    CHECK(r.scored_tokens == r.seq_len * r.n_sequences);
    CHECK(r.cost_tokens == r.scored_tokens);  // one empty-context call per sequence
    CHECK(r.nll_sum_nats > 0.0);
    CHECK(r.ppl == doctest::Approx(std::exp(r.nll_sum_nats / (double) r.scored_tokens)).epsilon(1e-12));
    CHECK(r.accuracy_pct > 0.0);
    CHECK(r.accuracy_pct <= 100.0);
    CHECK(r.latency.n_calls == r.n_sequences);
    CHECK(r.latency.total_s > 0.0);
    CHECK(r.makespan_s > 0.0);
    REQUIRE(r.peak_mem_bytes.has_value());
    CHECK(*r.peak_mem_bytes > 0);
    CHECK_FALSE(r.skip_first_token);
}

TEST_CASE("a window covering the whole sequence degenerates to the non-sliding run") {
    auto backend = bundled_backend();
    for (const std::int64_t T : {64, 257, 1024}) {
        CAPTURE(T);
        const auto seqs = bundled_sequences(T);

        ProtocolConfig direct;
        const auto ns = run_protocol(backend, seqs, direct);
        const auto s  = run_protocol(backend, seqs, sliding_config(T, T));

        CHECK(ns.nll_sum_nats == s.nll_sum_nats);  // bit-identical, not approximate
        CHECK(ns.ppl == s.ppl);
        CHECK(ns.accuracy_pct == s.accuracy_pct);
        CHECK(ns.scored_tokens == s.scored_tokens);
        CHECK(ns.cost_tokens == s.cost_tokens);
    }
}

TEST_CASE("a constant-logprob backend pins perplexity to the vocabulary size") {
    ConstantBackend backend(-std::log(256.0), 0);
    const std::vector<TokenSequence> seqs = {
        make_seq(std::vector<token_t>(96, 1), 0),
        make_seq(std::vector<token_t>(96, 2), 1),
    };

    for (const auto variant : {Variant::non_sliding, Variant::sliding}) {
        for (const auto agg : {Aggregation::window_mean, Aggregation::token_mean}) {
            ProtocolConfig config = sliding_config(32, 16, agg);
            config.variant = variant;
            const auto r = run_protocol(backend, seqs, config);
            CAPTURE(static_cast<int>(variant));
            CAPTURE(static_cast<int>(agg));
            CHECK(r.ppl == doctest::Approx(256.0).epsilon(1e-12));
            CHECK(r.accuracy_pct == 0.0);  // argmax 0 never matches targets 1/2
        }
    }
}

TEST_CASE("window-local sliding pays the context penalty at every window start") {
    // backend rewards effective context length, so re-starting from an empty
    // context at each window must hurt exactly as the closed form predicts
    ContextRewardBackend backend;
    const auto seqs = std::vector<TokenSequence>{make_seq(std::vector<token_t>(64, 1))};

    const auto r = run_protocol(backend, seqs, sliding_config(16, 16, Aggregation::token_mean));
    kahan_sum expected;
    for (int win = 0; win < 4; ++win) {
        for (int j = 0; j < 16; ++j) {
            expected.add(-ContextRewardBackend::logprob_for(j, 1 << 30));
        }
    }
    CHECK(r.nll_sum_nats == doctest::Approx(expected.value()).epsilon(1e-12));

    // full-prefix sliding sees the whole preceding sequence instead
    ProtocolConfig fp = sliding_config(16, 16, Aggregation::token_mean);
    fp.plan.context_policy = ContextPolicy::full_prefix;
    const auto r_fp = run_protocol(backend, seqs, fp);
    kahan_sum expected_fp;
    for (int pos = 0; pos < 64; ++pos) {
        expected_fp.add(-ContextRewardBackend::logprob_for(pos, 1 << 30));
    }
    CHECK(r_fp.nll_sum_nats == doctest::Approx(expected_fp.value()).epsilon(1e-12));

    // and matches the non-sliding protocol exactly, which also sees full prefixes
    ProtocolConfig direct;
    direct.aggregation = Aggregation::token_mean;
    const auto r_ns = run_protocol(backend, seqs, direct);
    CHECK(r_fp.nll_sum_nats == doctest::Approx(r_ns.nll_sum_nats).epsilon(1e-12));
    CHECK(r.nll_sum_nats > r_fp.nll_sum_nats);  // context starvation strictly hurts
}

TEST_CASE("cost accounting across protocols at T=2048") {
    ConstantBackend backend(-1.0, 0);
    const auto seqs = std::vector<TokenSequence>{make_seq(std::vector<token_t>(2048, 1))};

    ProtocolConfig direct;
    CHECK(run_protocol(backend, seqs, direct).cost_tokens == 2048);

    CHECK(run_protocol(backend, seqs, sliding_config(1024, 1024)).cost_tokens == 2048);

    const auto overlapped = run_protocol(backend, seqs, sliding_config(1024, 1));
    CHECK(overlapped.cost_tokens == 1049600);  // 1025 windows × 1024 tokens
    CHECK(overlapped.latency.n_calls == 1025);

    // full-prefix chunks additionally bill the prefix as context
    ProtocolConfig fp = sliding_config(1024, 1024);
    fp.plan.context_policy = ContextPolicy::full_prefix;
    CHECK(run_protocol(backend, seqs, fp).cost_tokens == 2048 + 1024);

    // agreement with the naive window enumerator on random geometries
    split_mix64 rng{11};
    for (int trial = 0; trial < 25; ++trial) {
        const auto T = static_cast<std::int64_t>(rng.next() % 300 + 2);
        const auto w = static_cast<std::int64_t>(rng.next() % 64 + 1);
        const auto s = static_cast<std::int64_t>(rng.next() % 16 + 1);
        ProtocolConfig config = sliding_config(w, s);
        config.plan.include_remainder = (rng.next() & 1) != 0;
        if ((rng.next() & 1) != 0) {
            config.plan.context_policy = ContextPolicy::full_prefix;
        }
        const auto one = std::vector<TokenSequence>{make_seq(std::vector<token_t>((std::size_t) T, 1))};
        CAPTURE(T);
        CAPTURE(w);
        CAPTURE(s);
        const auto r = run_protocol(backend, one, config);
        CHECK(r.cost_tokens == naive_cost(T, config));
    }
}

TEST_CASE("skip_first_token drops only the context-free position from the denominators") {
    // constant backend: every position identical, so the effect is pure arithmetic
    ConstantBackend backend(-2.0, 1);
    const auto seqs = std::vector<TokenSequence>{make_seq(std::vector<token_t>(32, 1))};

    ProtocolConfig config = sliding_config(8, 8, Aggregation::token_mean);
    const auto keep = run_protocol(backend, seqs, config);
    CHECK(keep.scored_tokens == 32);
    CHECK(keep.accuracy_pct == 100.0);

    config.skip_first_token = true;
    const auto skip = run_protocol(backend, seqs, config);
    // each of the 4 window-local windows loses its first position
    CHECK(skip.scored_tokens == 28);
    CHECK(skip.nll_sum_nats == doctest::Approx(2.0 * 28).epsilon(1e-12));
    CHECK(skip.skip_first_token);
    // geometry and cost are untouched
    CHECK(skip.cost_tokens == keep.cost_tokens);
    CHECK(skip.latency.n_calls == keep.latency.n_calls);

    // under full_prefix only the very first window has a context-free start
    config.plan.context_policy = ContextPolicy::full_prefix;
    const auto skip_fp = run_protocol(backend, seqs, config);
    CHECK(skip_fp.scored_tokens == 31);

    // skipping everything there is to score is a configuration error
    ProtocolConfig all_skipped = sliding_config(1, 1, Aggregation::token_mean);
    all_skipped.skip_first_token = true;
    CHECK_THROWS_AS(run_protocol(backend, seqs, all_skipped), config_error);
}

TEST_CASE("parallel runs reproduce the serial result bit for bit") {
    auto inner = std::make_shared<MarkovBackend>(load_markov(data_file("markov_k2.json")));
    DelayBackend backend(inner, 2.0);
    const auto seqs = bundled_sequences(512);
    const auto config = sliding_config(128, 64);

    RunOptions serial;
    const auto base = run_protocol(backend, seqs, config, serial);

    for (const int par : {2, 4, 8}) {
        CAPTURE(par);
        RunOptions options;
        options.parallelism = par;
        const auto r = run_protocol(backend, seqs, config, options);
        CHECK(same_scores(base, r));
    }
}

TEST_CASE("errors inside a worker surface with the failing window attached") {
    auto backend = bundled_backend();
    // token 40 is outside the model's 32-token vocabulary
    std::vector<token_t> tokens(64, 1);
    tokens[40] = 40;
    const auto seqs = std::vector<TokenSequence>{make_seq(std::move(tokens), 7)};

    for (const int par : {1, 4}) {
        RunOptions options;
        options.parallelism = par;
        CAPTURE(par);
        CHECK_THROWS_WITH_AS(run_protocol(backend, seqs, sliding_config(16, 16), options),
                             doctest::Contains("seq 7 window [32,48)"), data_error);
    }
}

TEST_CASE("run_protocol validation") {
    auto backend = bundled_backend();
    ProtocolConfig config;

    CHECK_THROWS_AS(run_protocol(backend, {}, config), data_error);

    const std::vector<TokenSequence> mixed = {
        make_seq(std::vector<token_t>(16, 1), 0),
        make_seq(std::vector<token_t>(17, 1), 1),
    };
    CHECK_THROWS_WITH_AS(run_protocol(backend, mixed, config),
                         doctest::Contains("mixed sequence lengths"), data_error);

    RunOptions options;
    options.parallelism = 0;
    CHECK_THROWS_AS(run_protocol(backend, bundled_sequences(64), config, options), config_error);
}

TEST_CASE("window_sweep orders results by window size and fixes everything else") {
    auto backend = bundled_backend();
    const auto seqs = bundled_sequences(1024);
    ProtocolConfig config;  // sweep forces the sliding variant itself

    const auto sweep = window_sweep(backend, seqs, {256, 16, 64}, config);
    REQUIRE(sweep.size() == 3);
    CHECK(sweep[0].first == 16);
    CHECK(sweep[1].first == 64);
    CHECK(sweep[2].first == 256);

    // context starvation: smaller windows mean strictly worse perplexity here
    CHECK(sweep[0].second.ppl > sweep[1].second.ppl);
    CHECK(sweep[1].second.ppl > sweep[2].second.ppl);

    CHECK_THROWS_AS(window_sweep(backend, seqs, {}, config), config_error);
    CHECK_THROWS_AS(window_sweep(backend, seqs, {0}, config), config_error);
}

TEST_CASE("length_sweep repacks the corpus per length") {
    auto backend = bundled_backend();
    const auto corpus = load_documents(data_file("tiny_corpus.jsonl"), CorpusFormat::jsonl_tokens);
    ProtocolConfig config;

    const auto sweep = length_sweep(backend, corpus.docs, {512, 128}, config);
    REQUIRE(sweep.size() == 2);
    CHECK(sweep[0].first == 128);
    CHECK(sweep[1].first == 512);
    CHECK(sweep[0].second.seq_len == 128);
    CHECK(sweep[0].second.n_sequences == 125);  // 16000 tokens / 128
    CHECK(sweep[1].second.n_sequences == 31);   // 16000 tokens / 512

    CHECK_THROWS_AS(length_sweep(backend, corpus.docs, {}, config), config_error);
}

TEST_CASE("compare_protocols pairs both variants per length") {
    auto backend = bundled_backend();
    const auto corpus = load_documents(data_file("tiny_corpus.jsonl"), CorpusFormat::jsonl_tokens);
    ProtocolConfig config;

    const auto cmp = compare_protocols(backend, corpus.docs, {1024, 256}, 64, config);
    REQUIRE(cmp.rows.size() == 2);
    REQUIRE(cmp.records.size() == 2);
    CHECK(cmp.rows[0].seq_len == 256);
    CHECK(cmp.rows[1].seq_len == 1024);

    for (std::size_t i = 0; i < cmp.rows.size(); ++i) {
        const auto & [ns, s] = cmp.records[i];
        CHECK(ns.protocol.variant == Variant::non_sliding);
        CHECK(s.protocol.variant == Variant::sliding);
        CHECK(s.protocol.plan.window_size == 64);
        CHECK(cmp.rows[i].ppl_ns == ns.ppl);
        CHECK(cmp.rows[i].ppl_s == s.ppl);
        CHECK(cmp.rows[i].delta_ppl == s.ppl - ns.ppl);
    }

    // 64-token windows starve context badly on this corpus: direct wins
    CHECK(cmp.rows[1].ppl_better == BetterSide::non_sliding);
    CHECK(cmp.rows[1].acc_better == BetterSide::non_sliding);

    CHECK_THROWS_AS(compare_protocols(backend, corpus.docs, {}, 64, config), config_error);
    CHECK_THROWS_AS(compare_protocols(backend, corpus.docs, {256}, 0, config), config_error);
}
