#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <vector>

#include "lenbench/common.hpp"

namespace lenbench {

// one timed backend call: wall time plus the token counts that drive cost accounting
struct CallSample {
    double       wall_time_s  = 0.0;
    std::int64_t context_len  = 0;
    std::int64_t target_len   = 0;
};

struct LatencyStats {
    std::int64_t n_calls  = 0;
    double       total_s  = 0.0;   // sum of per-call wall times (cpu-side cost, not makespan)
    double       mean_s   = 0.0;
    double       p50_s    = 0.0;
    double       p95_s    = 0.0;
};

// monotonic stopwatch for makespan measurement
class stop_watch {
  public:
    stop_watch() : t0_(clock::now()) {}

    void reset() { t0_ = clock::now(); }

    double elapsed_s() const {
        return std::chrono::duration<double>(clock::now() - t0_).count();
    }

  private:
    using clock = std::chrono::steady_clock;
    clock::time_point t0_;
};

// run fn(), returning its result and filling sample.wall_time_s
template <typename Fn>
auto timed_call(CallSample & sample, Fn && fn) {
    stop_watch sw;
    auto result = fn();
    sample.wall_time_s = sw.elapsed_s();
    return result;
}

// total request cost in tokens: sum over calls of context_len + target_len
std::int64_t cost_tokens(const std::vector<CallSample> & calls);

// nearest-rank percentiles over per-call wall times; n_calls == 0 yields all zeros
LatencyStats latency_stats(const std::vector<CallSample> & calls);

// resident set size of the current process, if the platform exposes it
std::optional<std::int64_t> current_rss_bytes();

// peak resident set size (high-water mark) of the current process
std::optional<std::int64_t> peak_rss_bytes();

}  // namespace lenbench
