#include "lenbench/remote.hpp"

#include <httplib.h>
#include <json.hpp>

namespace lenbench {

using nlohmann::json;

// wrapper so remote.hpp does not have to pull in httplib
struct http_client {
    explicit http_client(const std::string & url) : cli(url) {
        cli.set_connection_timeout(10, 0);
        cli.set_read_timeout(120, 0);
        cli.set_keep_alive(true);
    }
    httplib::Client cli;
};

// RAII lease returning the client to the pool on destruction
struct RemoteBackend::client_lease {
    RemoteBackend * owner = nullptr;
    int index = -1;

    client_lease(RemoteBackend * o, int i) : owner(o), index(i) {}
    client_lease(const client_lease &) = delete;
    client_lease & operator=(const client_lease &) = delete;

    ~client_lease() {
        std::lock_guard<std::mutex> lock(owner->mutex_);
        owner->free_clients_.push_back(index);
        owner->client_freed_.notify_one();
    }

    httplib::Client & get() { return owner->clients_[(std::size_t) index]->cli; }
};

RemoteBackend::client_lease RemoteBackend::acquire() {
    std::unique_lock<std::mutex> lock(mutex_);
    client_freed_.wait(lock, [this] { return !free_clients_.empty(); });
    const int index = free_clients_.back();
    free_clients_.pop_back();
    return client_lease(this, index);
}

RemoteBackend::RemoteBackend(const std::string & url, int pool_size) : url_(url) {
    if (pool_size < 1) {
        throw config_error("remote backend pool size must be >= 1");
    }
    clients_.reserve((std::size_t) pool_size);
    for (int i = 0; i < pool_size; i++) {
        clients_.push_back(std::make_unique<http_client>(url));
        free_clients_.push_back(i);
    }

    auto res = clients_[0]->cli.Get("/v1/info");
    if (!res) {
        throw backend_error("cannot reach " + url + ": " + httplib::to_string(res.error()),
                            /*retryable=*/true);
    }
    if (res->status != 200) {
        throw backend_error(url + "/v1/info returned status " + std::to_string(res->status),
                            /*retryable=*/false);
    }

    json j;
    try {
        j = json::parse(res->body);
    } catch (const json::exception & e) {
        throw backend_error(url + "/v1/info: malformed JSON: " + e.what(), /*retryable=*/false);
    }
    if (!j.is_object() || !j.contains("protocol_version") || !j["protocol_version"].is_number_integer()) {
        throw backend_error(url + "/v1/info: missing protocol_version", /*retryable=*/false);
    }
    const std::int64_t version = j["protocol_version"].get<std::int64_t>();
    if (version != 1) {
        throw backend_error(url + ": server speaks protocol version " + std::to_string(version) +
                            ", this client speaks 1", /*retryable=*/false);
    }
    model_id_ = j.value("model_id", "");
    if (model_id_.empty()) {
        throw backend_error(url + "/v1/info: missing model_id", /*retryable=*/false);
    }
    vocab_size_ = j.value("vocab_size", (std::int64_t) 0);
    if (j.contains("bos_id") && j["bos_id"].is_number_integer()) {
        bos_id_ = j["bos_id"].get<token_t>();
    }
    deterministic_ = j.value("deterministic", true);
}

RemoteBackend::~RemoteBackend() = default;

BackendInfo RemoteBackend::info() {
    BackendInfo info;
    info.model_id      = model_id_;
    info.deterministic = deterministic_;
    std::lock_guard<std::mutex> lock(mutex_);
    info.reported_peak_mem_bytes = peak_mem_bytes_;
    return info;
}

std::optional<std::int64_t> RemoteBackend::vocab_size() {
    if (vocab_size_ > 0) {
        return vocab_size_;
    }
    return std::nullopt;
}

std::vector<ScorePair> RemoteBackend::score_window(std::span<const token_t> context,
                                                   std::span<const token_t> targets) {
    json body;
    auto & ctx = body["context"] = json::array();
    if (context.empty() && bos_id_) {
        ctx.push_back(*bos_id_);  // p(x | empty) is undefined for BOS-style models
    } else {
        for (token_t t : context) ctx.push_back(t);
    }
    auto & tgt = body["targets"] = json::array();
    for (token_t t : targets) tgt.push_back(t);

    httplib::Result res;
    {
        auto lease = acquire();
        res = lease.get().Post("/v1/score", body.dump(), "application/json");
    }
    if (!res) {
        throw backend_error("score request to " + url_ + " failed: " + httplib::to_string(res.error()),
                            /*retryable=*/true);
    }
    if (res->status == 400) {
        std::string detail = res->body;
        try {
            json err = json::parse(res->body);
            detail = err.value("detail", detail);
        } catch (const json::exception &) {
            // keep the raw body
        }
        throw backend_error(url_ + " rejected score request: " + detail, /*retryable=*/false);
    }
    if (res->status != 200) {
        throw backend_error(url_ + "/v1/score returned status " + std::to_string(res->status),
                            /*retryable=*/res->status >= 500);
    }

    json j;
    try {
        j = json::parse(res->body);
    } catch (const json::exception & e) {
        throw backend_error(url_ + "/v1/score: malformed JSON: " + e.what(), /*retryable=*/false);
    }
    if (!j.is_object() || !j.contains("logprobs") || !j["logprobs"].is_array() ||
        !j.contains("argmax_ids") || !j["argmax_ids"].is_array()) {
        throw backend_error(url_ + "/v1/score: response missing logprobs/argmax_ids arrays",
                            /*retryable=*/false);
    }
    const auto & logprobs   = j["logprobs"];
    const auto & argmax_ids = j["argmax_ids"];
    if (logprobs.size() != targets.size() || argmax_ids.size() != targets.size()) {
        throw backend_error(url_ + "/v1/score: response has " + std::to_string(logprobs.size()) +
                            " logprobs and " + std::to_string(argmax_ids.size()) +
                            " argmax ids for " + std::to_string(targets.size()) + " targets",
                            /*retryable=*/false);
    }

    std::vector<ScorePair> out;
    out.reserve(targets.size());
    for (std::size_t i = 0; i < targets.size(); i++) {
        if (!logprobs[i].is_number() || !argmax_ids[i].is_number_integer()) {
            throw backend_error(url_ + "/v1/score: non-numeric entry in response", /*retryable=*/false);
        }
        ScorePair pair;
        pair.logprob_nats = logprobs[i].get<double>();
        pair.argmax_id    = argmax_ids[i].get<token_t>();
        out.push_back(pair);
    }

    if (j.contains("peak_mem_bytes") && j["peak_mem_bytes"].is_number_integer()) {
        const std::int64_t peak = j["peak_mem_bytes"].get<std::int64_t>();
        std::lock_guard<std::mutex> lock(mutex_);
        if (!peak_mem_bytes_ || peak > *peak_mem_bytes_) {
            peak_mem_bytes_ = peak;
        }
    }
    return out;
}

std::shared_ptr<RemoteBackend> connect_remote(const std::string & url, int pool_size) {
    return std::make_shared<RemoteBackend>(url, pool_size);
}

}  // namespace lenbench
