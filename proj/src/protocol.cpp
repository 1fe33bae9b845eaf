#include "lenbench/protocol.hpp"

namespace lenbench {

std::vector<Window> plan_windows(std::int64_t seq_len, const WindowPlan & plan) {
    if (seq_len < 1) {
        throw config_error("plan_windows: sequence length must be >= 1");
    }
    const std::int64_t w = plan.window_size;
    const std::int64_t s = plan.effective_stride();
    if (w < 1 || s < 1) {
        throw config_error("plan_windows: window size and stride must be >= 1");
    }

    auto with_context = [&](std::int64_t start, std::int64_t end) {
        Window win;
        win.start = start;
        win.end = end;
        win.context_start = plan.context_policy == ContextPolicy::full_prefix ? 0 : start;
        return win;
    };

    std::vector<Window> out;
    std::int64_t start = 0;
    for (; start + w <= seq_len; start += s) {
        out.push_back(with_context(start, start + w));
    }

    if (out.empty()) {
        // w > T: single short window over the whole sequence
        out.push_back(with_context(0, seq_len));
        return out;
    }

    const std::int64_t last_full_end = out.back().end;
    if (plan.include_remainder && last_full_end < seq_len && start < seq_len) {
        out.push_back(with_context(start, seq_len));
    }
    return out;
}

const char * to_string(ContextPolicy v) {
    return v == ContextPolicy::window_local ? "window_local" : "full_prefix";
}

const char * to_string(Aggregation v) {
    return v == Aggregation::window_mean ? "window_mean" : "token_mean";
}

const char * to_string(Variant v) {
    return v == Variant::non_sliding ? "non_sliding" : "sliding";
}

std::optional<ContextPolicy> context_policy_from_string(const std::string & s) {
    if (s == "window_local" || s == "window-local") return ContextPolicy::window_local;
    if (s == "full_prefix" || s == "full-prefix")   return ContextPolicy::full_prefix;
    return std::nullopt;
}

std::optional<Aggregation> aggregation_from_string(const std::string & s) {
    if (s == "window_mean" || s == "window-mean") return Aggregation::window_mean;
    if (s == "token_mean" || s == "token-mean")   return Aggregation::token_mean;
    return std::nullopt;
}

std::optional<Variant> variant_from_string(const std::string & s) {
    if (s == "non_sliding" || s == "non-sliding") return Variant::non_sliding;
    if (s == "sliding")                           return Variant::sliding;
    return std::nullopt;
}

}  // namespace lenbench
