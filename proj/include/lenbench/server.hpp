#pragma once

#include <memory>
#include <string>
#include <thread>

#include "lenbench/markov.hpp"

namespace lenbench {

// HTTP service answering the wire protocol from a Markov model:
//   GET  /v1/info   → {"protocol_version":1,"model_id":...,"vocab_size":N,"bos_id":null,"deterministic":true}
//   POST /v1/score  → {"logprobs":[...],"argmax_ids":[...],"peak_mem_bytes":N}
// Floats are serialized with 17 significant digits so a loopback client reproduces
// direct-adapter results bit-exactly.
class ScoreServer {
  public:
    // binds immediately; port 0 picks a free ephemeral port
    ScoreServer(MarkovModel model, const std::string & host = "127.0.0.1", int port = 0,
                std::string model_id = "");
    ~ScoreServer();

    ScoreServer(const ScoreServer &) = delete;
    ScoreServer & operator=(const ScoreServer &) = delete;

    // serve on a background thread and return once the server accepts connections
    void start();

    // serve on the calling thread until stop() is called from elsewhere
    void run();

    void stop();

    int port() const { return port_; }
    std::string url() const;

  private:
    void bind();

    struct impl;
    std::unique_ptr<impl> impl_;
    std::string host_;
    int requested_port_ = 0;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace lenbench
