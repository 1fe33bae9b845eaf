#pragma once

#include <cstdio>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include "lenbench/backend.hpp"

namespace lenbench {

// Recording wrapper: delegates to an inner backend and appends one trace line per
// scored token. Keys are FNV-1a hashes of the full context token-id list, so a
// recorded trace replays under any window plan that issues the same calls.
class TraceRecorder : public Backend {
  public:
    TraceRecorder(std::shared_ptr<Backend> inner, const std::string & path);
    ~TraceRecorder() override;

    BackendInfo info() override { return inner_->info(); }
    std::vector<ScorePair> score_window(std::span<const token_t> context,
                                        std::span<const token_t> targets) override;
    std::optional<std::int64_t> vocab_size() override { return inner_->vocab_size(); }
    std::optional<token_t> bos_id() override { return inner_->bos_id(); }
    bool auto_skip_first_token() override { return inner_->auto_skip_first_token(); }
    int max_in_flight() override { return inner_->max_in_flight(); }

    // flush and close the trace file; implicit in the destructor
    void close();

  private:
    std::shared_ptr<Backend> inner_;
    std::string path_;
    FILE * file_ = nullptr;
    std::mutex mutex_;
};

// Replay backend: answers score_window purely from a recorded trace.
// A query whose (context hash, target) key was never recorded is a hard error.
class TraceBackend : public Backend {
  public:
    explicit TraceBackend(const std::string & path);

    BackendInfo info() override;
    std::vector<ScorePair> score_window(std::span<const token_t> context,
                                        std::span<const token_t> targets) override;
    bool auto_skip_first_token() override { return false; }  // replays whatever was recorded

    std::size_t n_entries() const { return entries_.size(); }

  private:
    struct key_hash {
        std::size_t operator()(const std::pair<std::uint64_t, token_t> & k) const {
            return std::hash<std::uint64_t>{}(k.first ^ ((std::uint64_t) (std::uint32_t) k.second << 32));
        }
    };

    std::string model_id_;
    std::unordered_map<std::pair<std::uint64_t, token_t>, ScorePair, key_hash> entries_;
};

std::shared_ptr<TraceBackend> open_trace(const std::string & path);
std::shared_ptr<TraceRecorder> record_trace(std::shared_ptr<Backend> inner, const std::string & path);

}  // namespace lenbench
