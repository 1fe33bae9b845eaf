#include "lenbench/metrics.hpp"

#include <cmath>

namespace lenbench {

const char * to_string(BetterSide v) {
    return v == BetterSide::non_sliding ? "non_sliding" : "sliding";
}

double window_loss(const std::vector<ScoredToken> & scored) {
    if (scored.empty()) {
        throw data_error("window_loss: no scored tokens");
    }
    kahan_sum sum;
    for (const auto & t : scored) {
        sum.add(-t.logprob_nats);
    }
    return sum.value() / (double) scored.size();
}

AggregateResult aggregate(const std::vector<WindowStat> & windows, Aggregation mode) {
    if (windows.empty()) {
        throw data_error("aggregate: no windows");
    }

    AggregateResult result;
    if (mode == Aggregation::window_mean) {
        // equal weight per window regardless of how many tokens each scored
        kahan_sum sum;
        for (const auto & w : windows) {
            if (w.scored == 0) {
                throw data_error("aggregate: window with zero scored tokens");
            }
            sum.add(w.nll_sum / (double) w.scored);
        }
        result.mean_nll = sum.value() / (double) windows.size();
    } else {
        // global NLL sum over global token count
        kahan_sum sum;
        std::int64_t scored = 0;
        for (const auto & w : windows) {
            sum.add(w.nll_sum);
            scored += w.scored;
        }
        if (scored == 0) {
            throw data_error("aggregate: zero scored tokens");
        }
        result.mean_nll = sum.value() / (double) scored;
    }
    result.ppl = std::exp(result.mean_nll);
    return result;
}

double token_accuracy(const std::vector<ScoredToken> & scored) {
    if (scored.empty()) {
        throw data_error("token_accuracy: no scored tokens");
    }
    std::int64_t matches = 0;
    for (const auto & t : scored) {
        if (t.argmax_id == t.token_id) {
            matches++;
        }
    }
    return 100.0 * (double) matches / (double) scored.size();
}

DeltaRow delta_metrics(const EvalRecord & ns, const EvalRecord & s) {
    if (ns.model_id != s.model_id) {
        throw data_error("delta_metrics: model_id mismatch (" + ns.model_id + " vs " + s.model_id + ")");
    }
    if (ns.seq_len != s.seq_len) {
        throw data_error("delta_metrics: seq_len mismatch (" + std::to_string(ns.seq_len) +
                         " vs " + std::to_string(s.seq_len) + ")");
    }

    DeltaRow row;
    row.model_id  = ns.model_id;
    row.seq_len   = ns.seq_len;
    row.ppl_ns    = ns.ppl;
    row.ppl_s     = s.ppl;
    row.delta_ppl = s.ppl - ns.ppl;
    row.acc_ns    = ns.accuracy_pct;
    row.acc_s     = s.accuracy_pct;
    row.delta_acc = ns.accuracy_pct - s.accuracy_pct;
    row.ppl_better = row.delta_ppl > 0.0 ? BetterSide::non_sliding : BetterSide::sliding;
    row.acc_better = row.delta_acc > 0.0 ? BetterSide::non_sliding : BetterSide::sliding;
    return row;
}

double percent_reduction(double start, double end) {
    if (!(start > 0.0)) {
        throw data_error("percent_reduction: start must be positive");
    }
    return (start - end) / start * 100.0;
}

}  // namespace lenbench
