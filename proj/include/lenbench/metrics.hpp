#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lenbench/common.hpp"
#include "lenbench/protocol.hpp"
#include "lenbench/sysmetrics.hpp"

namespace lenbench {

// one token's scoring result, as produced by a backend call
struct ScoredToken {
    std::int64_t position     = 0;    // absolute position within the sequence
    token_t      token_id     = 0;    // the true token that was scored
    double       logprob_nats = 0.0;  // log p(token_id | context), natural log
    token_t      argmax_id    = 0;    // backend's most likely next token at this position
    std::int64_t context_len  = 0;    // number of conditioning tokens the backend saw
};

// per-window accumulator used by the aggregation paths
struct WindowStat {
    double       nll_sum = 0.0;  // −Σ logprob over the window, compensated
    std::int64_t scored  = 0;    // tokens contributing to nll_sum
};

// result of collapsing a run's windows into a single loss figure
struct AggregateResult {
    double mean_nll = 0.0;
    double ppl      = 0.0;
};

// one (model, protocol, length) evaluation cell
struct EvalRecord {
    std::string    model_id;
    ProtocolConfig protocol;
    std::int64_t   seq_len          = 0;
    std::int64_t   n_sequences      = 0;
    std::int64_t   scored_tokens    = 0;
    double         nll_sum_nats     = 0.0;
    double         ppl              = 0.0;
    double         accuracy_pct     = 0.0;
    std::int64_t   cost_tokens      = 0;
    LatencyStats   latency;
    double         makespan_s       = 0.0;  // wall time of the whole run, not Σ per-call time
    std::optional<std::int64_t> peak_mem_bytes;
    bool           skip_first_token = false;
};

enum class BetterSide {
    non_sliding,
    sliding,
};

const char * to_string(BetterSide v);

// one comparison row: non-sliding vs sliding at a fixed (model, length)
struct DeltaRow {
    std::string  model_id;
    std::int64_t seq_len   = 0;
    double       ppl_ns    = 0.0;
    double       ppl_s     = 0.0;
    double       delta_ppl = 0.0;  // ppl_s − ppl_ns: positive means sliding is worse
    double       acc_ns    = 0.0;
    double       acc_s     = 0.0;
    double       delta_acc = 0.0;  // acc_ns − acc_s: positive means non-sliding is better
    BetterSide   ppl_better = BetterSide::sliding;
    BetterSide   acc_better = BetterSide::sliding;
};

// mean NLL over one window: −(1/n) Σ logprob, compensated summation
double window_loss(const std::vector<ScoredToken> & scored);

// collapse per-window stats into (mean NLL, ppl) under the chosen aggregation rule
AggregateResult aggregate(const std::vector<WindowStat> & windows, Aggregation mode);

// 100 × fraction of tokens whose backend argmax equals the true token
double token_accuracy(const std::vector<ScoredToken> & scored);

// Δ-metrics between a non-sliding and a sliding record of the same (model, length).
// Ties in the better-direction flags resolve to sliding: a strictly positive delta
// is required to claim a non-sliding win.
DeltaRow delta_metrics(const EvalRecord & ns, const EvalRecord & s);

// (start − end) / start × 100; start must be positive
double percent_reduction(double start, double end);

}  // namespace lenbench
