#include "lenbench/sysmetrics.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <string>

#if defined(__unix__) || defined(__APPLE__)
#include <sys/resource.h>
#endif

namespace lenbench {

std::int64_t cost_tokens(const std::vector<CallSample> & calls) {
    std::int64_t total = 0;
    for (const auto & c : calls) {
        total += c.context_len + c.target_len;
    }
    return total;
}

// nearest-rank: the smallest sample index i (1-based) with i >= ceil(p/100 * n)
static double nearest_rank(const std::vector<double> & sorted, int p) {
    const std::int64_t n = (std::int64_t) sorted.size();
    std::int64_t idx = ((std::int64_t) p * n + 99) / 100 - 1;
    if (idx < 0) idx = 0;
    if (idx >= n) idx = n - 1;
    return sorted[(std::size_t) idx];
}

LatencyStats latency_stats(const std::vector<CallSample> & calls) {
    LatencyStats stats;
    stats.n_calls = (std::int64_t) calls.size();
    if (calls.empty()) {
        return stats;
    }

    std::vector<double> times;
    times.reserve(calls.size());
    kahan_sum total;
    for (const auto & c : calls) {
        times.push_back(c.wall_time_s);
        total.add(c.wall_time_s);
    }
    std::sort(times.begin(), times.end());

    stats.total_s = total.value();
    stats.mean_s  = stats.total_s / (double) stats.n_calls;
    stats.p50_s   = nearest_rank(times, 50);
    stats.p95_s   = nearest_rank(times, 95);
    return stats;
}

// parse a "VmRSS:   123 kB" style line from /proc/self/status
static std::optional<std::int64_t> proc_status_kb(const char * key) {
    FILE * f = std::fopen("/proc/self/status", "r");
    if (!f) {
        return std::nullopt;
    }
    std::optional<std::int64_t> result;
    char line[256];
    const std::size_t key_len = std::strlen(key);
    while (std::fgets(line, sizeof(line), f)) {
        if (std::strncmp(line, key, key_len) == 0 && line[key_len] == ':') {
            long long kb = 0;
            if (std::sscanf(line + key_len + 1, "%lld", &kb) == 1) {
                result = (std::int64_t) kb * 1024;
            }
            break;
        }
    }
    std::fclose(f);
    return result;
}

std::optional<std::int64_t> current_rss_bytes() {
    if (auto v = proc_status_kb("VmRSS")) {
        return v;
    }
    return std::nullopt;
}

std::optional<std::int64_t> peak_rss_bytes() {
    if (auto v = proc_status_kb("VmHWM")) {
        return v;
    }
#if defined(__unix__) || defined(__APPLE__)
    struct rusage ru;
    if (getrusage(RUSAGE_SELF, &ru) == 0 && ru.ru_maxrss > 0) {
#if defined(__APPLE__)
        return (std::int64_t) ru.ru_maxrss;           // bytes on macOS
#else
        return (std::int64_t) ru.ru_maxrss * 1024;    // kilobytes on Linux
#endif
    }
#endif
    return std::nullopt;
}

}  // namespace lenbench
