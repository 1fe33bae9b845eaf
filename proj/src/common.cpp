#include "lenbench/common.hpp"

#include <cstdlib>
#include <cstring>
#include <mutex>

namespace lenbench {

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_f6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

log_level log_threshold() {
    static log_level level = [] {
        const char * env = std::getenv("LENBENCH_LOG");
        if (env == nullptr) {
            return log_level::warn;
        }
        if (std::strcmp(env, "error") == 0) return log_level::error;
        if (std::strcmp(env, "warn")  == 0) return log_level::warn;
        if (std::strcmp(env, "info")  == 0) return log_level::info;
        if (std::strcmp(env, "debug") == 0) return log_level::debug;
        return log_level::warn;
    }();
    return level;
}

void log_msg(log_level level, const std::string & msg) {
    if (level > log_threshold()) {
        return;
    }
    static std::mutex mu;
    static const char * names[] = {"error", "warn", "info", "debug"};
    std::lock_guard<std::mutex> lock(mu);
    std::fprintf(stderr, "[lenbench %s] %s\n", names[static_cast<int>(level)], msg.c_str());
}

}  // namespace lenbench
