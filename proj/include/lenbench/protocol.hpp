#pragma once

#include "lenbench/common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lenbench {

enum class ContextPolicy { window_local, full_prefix };
enum class Aggregation { window_mean, token_mean };
enum class Variant { non_sliding, sliding };

// Scoring geometry for the sliding protocol. Stride defaults to the window
// size (disjoint chunks); stride 1 gives the maximally-overlapping form.
struct WindowPlan {
    std::int64_t window_size = 1024;
    std::optional<std::int64_t> stride;  // nullopt -> window_size
    ContextPolicy context_policy = ContextPolicy::window_local;
    bool include_remainder = false;

    std::int64_t effective_stride() const { return stride ? *stride : window_size; }
};

// [start, end) is the scored range; context_start marks the first position
// visible as context (== start under window_local, 0 under full_prefix).
struct Window {
    std::int64_t start = 0;
    std::int64_t end = 0;
    std::int64_t context_start = 0;
};

struct ProtocolConfig {
    Variant variant = Variant::non_sliding;
    WindowPlan plan;  // used when variant == sliding
    Aggregation aggregation = Aggregation::window_mean;
    bool skip_first_token = false;
};

// Window starts at 0, s, 2s, ... while start + w <= T. A window size >= T
// collapses to the single window [0, T). With include_remainder, tokens past
// the last full window get one final shorter window.
std::vector<Window> plan_windows(std::int64_t seq_len, const WindowPlan & plan);

const char * to_string(ContextPolicy v);
const char * to_string(Aggregation v);
const char * to_string(Variant v);

std::optional<ContextPolicy> context_policy_from_string(const std::string & s);
std::optional<Aggregation> aggregation_from_string(const std::string & s);
std::optional<Variant> variant_from_string(const std::string & s);

}  // namespace lenbench
