#include "lenbench/backend.hpp"

#include <chrono>
#include <thread>

#include "lenbench/remote.hpp"
#include "lenbench/sysmetrics.hpp"
#include "lenbench/trace.hpp"

namespace lenbench {

// ------------------------------------------------------------ Markov adapter

MarkovBackend::MarkovBackend(MarkovModel model, std::string model_id)
        : model_(std::move(model)),
          model_id_(model_id.empty() ? "markov-k" + std::to_string(model_.order) : std::move(model_id)) {}

BackendInfo MarkovBackend::info() {
    BackendInfo info;
    info.model_id                = model_id_;
    info.deterministic           = true;
    info.reported_peak_mem_bytes = peak_rss_bytes();  // in-process: the harness's own high-water mark
    return info;
}

std::optional<std::int64_t> MarkovBackend::vocab_size() {
    return model_.vocab_size;
}

std::vector<ScorePair> MarkovBackend::score_window(std::span<const token_t> context,
                                                   std::span<const token_t> targets) {
    if (targets.empty()) {
        throw backend_error("score_window: empty targets");
    }
    for (token_t t : targets) {
        if (t < 0 || t >= model_.vocab_size) {
            throw data_error("score_window: token " + std::to_string(t) + " out of range [0, " +
                             std::to_string(model_.vocab_size) + ")");
        }
    }

    // teacher forcing: grow the context by one true token per scored target
    std::vector<token_t> ctx(context.begin(), context.end());
    ctx.reserve(context.size() + targets.size());

    std::vector<ScorePair> out;
    out.reserve(targets.size());
    for (token_t t : targets) {
        ScorePair pair;
        pair.logprob_nats = model_.logprob(ctx, t);
        pair.argmax_id    = model_.argmax(ctx);
        out.push_back(pair);
        ctx.push_back(t);
    }
    return out;
}

// ------------------------------------------------------------- delay wrapper

DelayBackend::DelayBackend(std::shared_ptr<Backend> inner, double delay_ms)
        : inner_(std::move(inner)), delay_ms_(delay_ms) {
    if (delay_ms_ < 0.0) {
        throw config_error("delay backend: delay must be >= 0 ms");
    }
}

std::vector<ScorePair> DelayBackend::score_window(std::span<const token_t> context,
                                                  std::span<const token_t> targets) {
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay_ms_));
    return inner_->score_window(context, targets);
}

// ---------------------------------------------------------------- spec parse

std::shared_ptr<Backend> parse_backend_spec(const std::string & spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) {
        throw config_error("backend spec \"" + spec +
                           "\" has no scheme; expected markov:, trace:, remote:, or delay:");
    }
    const std::string scheme = spec.substr(0, colon);
    const std::string rest   = spec.substr(colon + 1);

    if (scheme == "markov") {
        if (rest.empty()) {
            throw config_error("markov: backend spec needs a model file path");
        }
        return std::make_shared<MarkovBackend>(load_markov(rest));
    }
    if (scheme == "trace") {
        if (rest.empty()) {
            throw config_error("trace: backend spec needs a trace file path");
        }
        return open_trace(rest);
    }
    if (scheme == "remote") {
        if (rest.empty()) {
            throw config_error("remote: backend spec needs a URL, e.g. remote:http://127.0.0.1:8080");
        }
        return connect_remote(rest);
    }
    if (scheme == "delay") {
        const auto next = rest.find(':');
        if (next == std::string::npos) {
            throw config_error("delay backend spec must be delay:<ms>:<inner spec>");
        }
        double ms = 0.0;
        try {
            std::size_t used = 0;
            ms = std::stod(rest.substr(0, next), &used);
            if (used != next) {
                throw std::invalid_argument("trailing characters");
            }
        } catch (const std::exception &) {
            throw config_error("delay backend spec: \"" + rest.substr(0, next) + "\" is not a number of milliseconds");
        }
        return std::make_shared<DelayBackend>(parse_backend_spec(rest.substr(next + 1)), ms);
    }
    throw config_error("unknown backend scheme \"" + scheme +
                       "\"; expected markov:, trace:, remote:, or delay:");
}

}  // namespace lenbench
