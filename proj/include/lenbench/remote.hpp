#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "lenbench/backend.hpp"

namespace lenbench {

// Wire-protocol client. The constructor performs the /v1/info handshake and
// fails on unreachable endpoints or a protocol version other than 1.
// One HTTP request per score_window call; up to pool_size requests in flight.
class RemoteBackend : public Backend {
  public:
    explicit RemoteBackend(const std::string & url, int pool_size = 4);
    ~RemoteBackend() override;

    BackendInfo info() override;
    std::vector<ScorePair> score_window(std::span<const token_t> context,
                                        std::span<const token_t> targets) override;
    std::optional<std::int64_t> vocab_size() override;
    std::optional<token_t> bos_id() override { return bos_id_; }
    bool auto_skip_first_token() override { return !bos_id_.has_value(); }
    int max_in_flight() override { return (int) clients_.size(); }

  private:
    struct client_lease;
    client_lease acquire();

    std::string url_;
    std::string model_id_;
    std::int64_t vocab_size_ = 0;
    std::optional<token_t> bos_id_;
    bool deterministic_ = true;

    std::vector<std::unique_ptr<struct http_client>> clients_;
    std::vector<int> free_clients_;
    std::mutex mutex_;
    std::condition_variable client_freed_;

    std::optional<std::int64_t> peak_mem_bytes_;  // max over responses, guarded by mutex_
};

std::shared_ptr<RemoteBackend> connect_remote(const std::string & url, int pool_size = 4);

}  // namespace lenbench
