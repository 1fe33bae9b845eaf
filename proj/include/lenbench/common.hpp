#pragma once

#include <cstdint>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>

namespace lenbench {

using token_t = std::int32_t;

// Error classes map onto CLI exit codes: config -> 1, backend -> 2, data -> 3.
enum class error_kind { config, backend, data };

class error : public std::runtime_error {
  public:
    error(error_kind kind, const std::string & msg, bool retryable = false)
        : std::runtime_error(msg), kind_(kind), retryable_(retryable) {}

    error_kind kind() const { return kind_; }
    bool retryable() const { return retryable_; }

  private:
    error_kind kind_;
    bool retryable_;
};

class config_error : public error {
  public:
    explicit config_error(const std::string & msg) : error(error_kind::config, msg) {}
};

class data_error : public error {
  public:
    explicit data_error(const std::string & msg) : error(error_kind::data, msg) {}
};

class backend_error : public error {
  public:
    explicit backend_error(const std::string & msg, bool retryable = false)
        : error(error_kind::backend, msg, retryable) {}
};

// Kahan compensated summation. All loss reductions go through this so that
// serial and parallel runs produce bit-identical sums.
struct kahan_sum {
    double sum = 0.0;
    double c   = 0.0;

    void add(double x) {
        double y = x - c;
        double t = sum + y;
        c   = (t - sum) - y;
        sum = t;
    }

    double value() const { return sum; }
};

// 64-bit FNV-1a. Trace keys hash the full context token list with this,
// over little-endian 4-byte encodings of each id.
inline constexpr std::uint64_t FNV1A64_OFFSET = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t FNV1A64_PRIME  = 0x100000001b3ull;

inline std::uint64_t fnv1a64(const void * data, std::size_t len, std::uint64_t h = FNV1A64_OFFSET) {
    const auto * p = static_cast<const unsigned char *>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= FNV1A64_PRIME;
    }
    return h;
}

inline std::uint64_t fnv1a64_extend_token(std::uint64_t h, token_t id) {
    unsigned char le[4] = {
        static_cast<unsigned char>(id & 0xff),
        static_cast<unsigned char>((id >> 8) & 0xff),
        static_cast<unsigned char>((id >> 16) & 0xff),
        static_cast<unsigned char>((id >> 24) & 0xff),
    };
    return fnv1a64(le, 4, h);
}

inline std::uint64_t context_fingerprint(std::span<const token_t> ids) {
    std::uint64_t h = FNV1A64_OFFSET;
    for (token_t id : ids) {
        h = fnv1a64_extend_token(h, id);
    }
    return h;
}

std::string hex16(std::uint64_t v);

// SplitMix64: the pinned PRNG behind markov generation.
struct split_mix64 {
    std::uint64_t state;

    explicit split_mix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), 53 bits
    double next_double() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }
};

// 17 significant digits: enough to round-trip any finite double exactly.
std::string format_g17(double v);
// fixed 6 decimal places, used by CSV emitters
std::string format_f6(double v);

enum class log_level { error = 0, warn = 1, info = 2, debug = 3 };

log_level log_threshold();  // from LENBENCH_LOG, read once
void log_msg(log_level level, const std::string & msg);

inline void log_error(const std::string & msg) { log_msg(log_level::error, msg); }
inline void log_warn(const std::string & msg)  { log_msg(log_level::warn, msg); }
inline void log_info(const std::string & msg)  { log_msg(log_level::info, msg); }
inline void log_debug(const std::string & msg) { log_msg(log_level::debug, msg); }

}  // namespace lenbench
