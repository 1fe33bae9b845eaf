#include "lenbench/server.hpp"

#include <httplib.h>
#include <json.hpp>

#include "lenbench/common.hpp"
#include "lenbench/sysmetrics.hpp"

namespace lenbench {

using nlohmann::json;

struct ScoreServer::impl {
    MarkovModel     model;
    std::string     model_id;
    httplib::Server server;
};

static void send_bad_request(httplib::Response & res, const std::string & detail) {
    json body;
    body["error"]  = "bad_request";
    body["detail"] = detail;
    res.status = 400;
    res.set_content(body.dump(), "application/json");
}

// parse a JSON array of token ids, enforcing range [0, vocab)
static bool read_id_array(const json & j, const char * field, std::int64_t vocab,
                          std::vector<token_t> & out, std::string & detail) {
    if (!j.contains(field) || !j[field].is_array()) {
        detail = std::string(field) + " must be an array of token ids";
        return false;
    }
    out.clear();
    out.reserve(j[field].size());
    for (const auto & e : j[field]) {
        if (!e.is_number_integer()) {
            detail = std::string(field) + " must contain only integers";
            return false;
        }
        const std::int64_t id = e.get<std::int64_t>();
        if (id < 0 || id >= vocab) {
            detail = std::string(field) + " id " + std::to_string(id) + " out of range [0, " +
                     std::to_string(vocab) + ")";
            return false;
        }
        out.push_back((token_t) id);
    }
    return true;
}

ScoreServer::ScoreServer(MarkovModel model, const std::string & host, int port, std::string model_id)
        : impl_(std::make_unique<impl>()), host_(host), requested_port_(port) {
    impl_->model = std::move(model);
    impl_->model_id = model_id.empty() ? "markov-k" + std::to_string(impl_->model.order) : std::move(model_id);

    // allow quick rebinds after a restart, but skip SO_REUSEPORT (the library
    // default) so binding a fixed port that is already taken fails loudly
    // instead of silently sharing the listener
    impl_->server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR,
                   reinterpret_cast<const char *>(&yes), sizeof(yes));
    });

    impl_->server.Get("/v1/info", [this](const httplib::Request &, httplib::Response & res) {
        // fixed key order, hand-formatted; escaping delegated to the json dump of the string
        std::string body = "{\"protocol_version\":1,\"model_id\":" + json(impl_->model_id).dump() +
                           ",\"vocab_size\":" + std::to_string(impl_->model.vocab_size) +
                           ",\"bos_id\":null,\"deterministic\":true}";
        res.set_content(body, "application/json");
    });

    impl_->server.Post("/v1/score", [this](const httplib::Request & req, httplib::Response & res) {
        json j;
        try {
            j = json::parse(req.body);
        } catch (const json::exception & e) {
            send_bad_request(res, std::string("malformed JSON: ") + e.what());
            return;
        }
        if (!j.is_object()) {
            send_bad_request(res, "request body must be a JSON object");
            return;
        }

        std::vector<token_t> context;
        std::vector<token_t> targets;
        std::string detail;
        if (!read_id_array(j, "context", impl_->model.vocab_size, context, detail) ||
            !read_id_array(j, "targets", impl_->model.vocab_size, targets, detail)) {
            send_bad_request(res, detail);
            return;
        }
        if (targets.empty()) {
            send_bad_request(res, "targets must be non-empty");
            return;
        }

        // teacher forcing: entry j conditioned on context ++ targets[0..j)
        std::string logprobs;
        std::string argmax_ids;
        for (std::size_t i = 0; i < targets.size(); i++) {
            if (i > 0) {
                logprobs += ',';
                argmax_ids += ',';
                context.push_back(targets[i - 1]);
            }
            logprobs += format_g17(impl_->model.logprob(context, targets[i]));
            argmax_ids += std::to_string(impl_->model.argmax(context));
        }

        const auto peak = peak_rss_bytes();
        std::string body = "{\"logprobs\":[" + logprobs + "],\"argmax_ids\":[" + argmax_ids +
                           "],\"peak_mem_bytes\":" + (peak ? std::to_string(*peak) : "null") + "}";
        res.set_content(body, "application/json");
    });
}

ScoreServer::~ScoreServer() {
    stop();
}

void ScoreServer::bind() {
    if (port_ != 0) {
        return;  // already bound
    }
    if (requested_port_ == 0) {
        port_ = impl_->server.bind_to_any_port(host_);
    } else if (impl_->server.bind_to_port(host_, requested_port_)) {
        port_ = requested_port_;
    }
    if (port_ <= 0) {
        throw backend_error("cannot bind score server on " + host_ + ":" +
                            std::to_string(requested_port_), /*retryable=*/false);
    }
}

void ScoreServer::start() {
    bind();
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void ScoreServer::run() {
    bind();
    log_info("serving on " + url());
    impl_->server.listen_after_bind();
}

void ScoreServer::stop() {
    if (impl_ && impl_->server.is_running()) {
        impl_->server.stop();
    }
    if (thread_.joinable()) {
        thread_.join();
    }
}

std::string ScoreServer::url() const {
    return "http://" + host_ + ":" + std::to_string(port_);
}

}  // namespace lenbench
