#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lenbench/common.hpp"
#include "lenbench/markov.hpp"

namespace lenbench {

// identifying metadata a backend reports about itself
struct BackendInfo {
    std::string                 model_id;
    std::optional<std::int64_t> reported_peak_mem_bytes;
    bool                        deterministic = true;
};

// one entry of a score_window result
struct ScorePair {
    double  logprob_nats = 0.0;
    token_t argmax_id    = 0;
};

// scoring-backend contract: given context and target tokens, return each target's
// true-token log-probability (nats) and the backend's argmax at that position.
// Entry j is conditioned on context ++ targets[0..j) — teacher forcing within the call.
class Backend {
  public:
    virtual ~Backend() = default;

    virtual BackendInfo info() = 0;

    virtual std::vector<ScorePair> score_window(std::span<const token_t> context,
                                                std::span<const token_t> targets) = 0;

    // vocabulary size, when the backend knows it (used for input validation)
    virtual std::optional<std::int64_t> vocab_size() { return std::nullopt; }

    // BOS token to prepend before an empty context, when the backend declares one
    virtual std::optional<token_t> bos_id() { return std::nullopt; }

    // default for skip_first_token when the caller leaves it on auto:
    // backends that define p(x | empty context) return false
    virtual bool auto_skip_first_token() { return true; }

    // how many score_window calls may be in flight concurrently
    virtual int max_in_flight() { return std::numeric_limits<int>::max(); }
};

// in-process adapter over a fitted Markov model; model_id is "markov-k<order>"
class MarkovBackend : public Backend {
  public:
    explicit MarkovBackend(MarkovModel model, std::string model_id = "");

    BackendInfo info() override;
    std::vector<ScorePair> score_window(std::span<const token_t> context,
                                        std::span<const token_t> targets) override;
    std::optional<std::int64_t> vocab_size() override;
    bool auto_skip_first_token() override { return false; }  // order-0 backoff defines p(x|∅)

    const MarkovModel & model() const { return model_; }

  private:
    MarkovModel model_;
    std::string model_id_;
};

// latency-injection wrapper: sleeps before each call, never alters values
class DelayBackend : public Backend {
  public:
    DelayBackend(std::shared_ptr<Backend> inner, double delay_ms);

    BackendInfo info() override { return inner_->info(); }
    std::vector<ScorePair> score_window(std::span<const token_t> context,
                                        std::span<const token_t> targets) override;
    std::optional<std::int64_t> vocab_size() override { return inner_->vocab_size(); }
    std::optional<token_t> bos_id() override { return inner_->bos_id(); }
    bool auto_skip_first_token() override { return inner_->auto_skip_first_token(); }
    int max_in_flight() override { return inner_->max_in_flight(); }

  private:
    std::shared_ptr<Backend> inner_;
    double delay_ms_;
};

// build a backend from a spec string:
//   markov:<model-file>     fitted Markov model saved by save_markov
//   trace:<trace-file>      replay of a recorded trace
//   remote:<url>            wire-protocol client, e.g. remote:http://127.0.0.1:8080
//   delay:<ms>:<spec>       latency wrapper around a nested spec
std::shared_ptr<Backend> parse_backend_spec(const std::string & spec);

}  // namespace lenbench
