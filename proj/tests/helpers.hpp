#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "lenbench/backend.hpp"
#include "lenbench/common.hpp"
#include "lenbench/corpus.hpp"
#include "lenbench/protocol.hpp"

namespace lenbench_test {

// ------------------------------------------------------------------ fixtures

// directory holding the bundled corpus/model fixtures; the build sets
// LENBENCH_DATA_DIR, the environment variable of the same name overrides it
inline std::string data_dir() {
    if (const char * env = std::getenv("LENBENCH_DATA_DIR"); env && *env) {
        return env;
    }
#ifdef LENBENCH_DATA_DIR
    return LENBENCH_DATA_DIR;
#else
    return "data";
#endif
}

inline std::string data_file(const std::string & name) {
    return data_dir() + "/" + name;
}

// fresh per-process scratch directory; files inside are cleaned up on exit
class temp_dir {
  public:
    temp_dir() {
        static std::atomic<int> counter{0};
        const auto base = std::filesystem::temp_directory_path();
        path_ = base / ("lenbench_test_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~temp_dir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    temp_dir(const temp_dir &) = delete;
    temp_dir & operator=(const temp_dir &) = delete;

    std::string file(const std::string & name) const { return (path_ / name).string(); }
    std::string str() const { return path_.string(); }

  private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline void write_file(const std::string & path, const std::string & content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline lenbench::TokenSequence make_seq(std::vector<lenbench::token_t> tokens,
                                        std::int64_t seq_id = 0) {
    lenbench::TokenSequence s;
    s.seq_id = seq_id;
    s.tokens = std::move(tokens);
    return s;
}

// ------------------------------------------------------------ fake backends

// backend returning the same logprob and argmax for every position; useful for
// calibration checks (logprob = -ln V  =>  ppl = V under any protocol)
class ConstantBackend : public lenbench::Backend {
  public:
    ConstantBackend(double logprob_nats, lenbench::token_t argmax_id,
                    std::string model_id = "constant")
        : logprob_(logprob_nats), argmax_(argmax_id), model_id_(std::move(model_id)) {}

    lenbench::BackendInfo info() override {
        lenbench::BackendInfo bi;
        bi.model_id = model_id_;
        return bi;
    }

    std::vector<lenbench::ScorePair> score_window(std::span<const lenbench::token_t> context,
                                                  std::span<const lenbench::token_t> targets) override {
        (void) context;
        n_calls.fetch_add(1);
        return std::vector<lenbench::ScorePair>(targets.size(),
                                                lenbench::ScorePair{logprob_, argmax_});
    }

    bool auto_skip_first_token() override { return false; }

    std::atomic<std::int64_t> n_calls{0};

  private:
    double              logprob_;
    lenbench::token_t   argmax_;
    std::string         model_id_;
};

// backend whose per-position logprob depends on how much conditioning context
// the position effectively has (context tokens plus earlier targets in the
// same call): more context, higher logprob, capped at `saturation`. Lets tests
// distinguish window-local from full-prefix conditioning exactly.
class ContextRewardBackend : public lenbench::Backend {
  public:
    explicit ContextRewardBackend(std::int64_t saturation = 1 << 30)
        : saturation_(saturation) {}

    lenbench::BackendInfo info() override {
        lenbench::BackendInfo bi;
        bi.model_id = "context-reward";
        return bi;
    }

    static double logprob_for(std::int64_t effective_context, std::int64_t saturation) {
        const auto c = effective_context < saturation ? effective_context : saturation;
        // strictly increasing in c, always < 0
        return -1.0 / (1.0 + static_cast<double>(c));
    }

    std::vector<lenbench::ScorePair> score_window(std::span<const lenbench::token_t> context,
                                                  std::span<const lenbench::token_t> targets) override {
        std::vector<lenbench::ScorePair> out;
        out.reserve(targets.size());
        for (std::size_t j = 0; j < targets.size(); ++j) {
            const auto effective = static_cast<std::int64_t>(context.size() + j);
            out.push_back({logprob_for(effective, saturation_), targets[j]});
        }
        return out;
    }

    bool auto_skip_first_token() override { return false; }

  private:
    std::int64_t saturation_;
};

// ------------------------------------------------- independent re-derivations
//
// Deliberately naive second implementations, sharing no code with the library,
// used as oracles: a plain map-based n-gram counter and a literal loop-based
// window enumerator.

// (count + lambda) / (total + lambda * V) over the last min(k, |context|)
// tokens, recounted from scratch over the documents. Every position j >= 1
// contributes one count per context length; an unseen context has total 0 and
// the formula collapses to uniform 1/V on its own.
inline double naive_markov_prob(const std::vector<lenbench::Document> & docs,
                                int k, double lambda, std::int64_t vocab,
                                const std::vector<lenbench::token_t> & context,
                                lenbench::token_t token) {
    const int use = static_cast<int>(context.size()) < k ? static_cast<int>(context.size()) : k;
    const std::vector<lenbench::token_t> c(context.end() - use, context.end());
    std::int64_t count = 0;
    std::int64_t total = 0;
    for (const auto & doc : docs) {
        const auto & t = doc.tokens;
        for (std::size_t j = 1; j < t.size(); ++j) {
            if (j < static_cast<std::size_t>(use)) {
                continue;  // not enough predecessors for this context length
            }
            bool match = true;
            for (int i = 0; i < use; ++i) {
                if (t[j - use + i] != c[static_cast<std::size_t>(i)]) {
                    match = false;
                    break;
                }
            }
            if (!match) {
                continue;
            }
            ++total;
            if (t[j] == token) {
                ++count;
            }
        }
    }
    return (static_cast<double>(count) + lambda) /
           (static_cast<double>(total) + lambda * static_cast<double>(vocab));
}

// literal restatement of the window-placement rules as a generate-and-filter
// loop over every candidate start position
inline std::vector<std::pair<std::int64_t, std::int64_t>> naive_windows(std::int64_t T,
                                                                        std::int64_t w,
                                                                        std::int64_t s,
                                                                        bool include_remainder) {
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    if (w > T) {
        out.emplace_back(0, T);
        return out;
    }
    std::int64_t last_full_end = 0;
    std::int64_t last_start    = 0;
    for (std::int64_t start = 0;; start += s) {
        if (start + w > T) { break; }
        out.emplace_back(start, start + w);
        last_full_end = start + w;
        last_start    = start;
    }
    if (include_remainder) {
        const std::int64_t start = out.empty() ? 0 : last_start + s;
        if (last_full_end < T && start < T) {
            out.emplace_back(start, T);
        }
    }
    return out;
}

// total context + target tokens the backend would see under a protocol,
// recomputed with the naive enumerator
inline std::int64_t naive_cost(std::int64_t T,
                               const lenbench::ProtocolConfig & config) {
    using lenbench::ContextPolicy;
    using lenbench::Variant;
    if (config.variant == Variant::non_sliding) {
        return T;  // empty context, whole sequence as targets, one call
    }
    const auto & plan = config.plan;
    std::int64_t cost = 0;
    for (const auto & [start, end] : naive_windows(T, plan.window_size,
                                                   plan.effective_stride(),
                                                   plan.include_remainder)) {
        const std::int64_t ctx = plan.context_policy == ContextPolicy::full_prefix ? start : 0;
        cost += ctx + (end - start);
    }
    return cost;
}

}  // namespace lenbench_test
