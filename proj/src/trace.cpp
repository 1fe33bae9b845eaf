#include "lenbench/trace.hpp"

#include <fstream>

#include <json.hpp>

namespace lenbench {

using nlohmann::json;

// ---------------------------------------------------------------- recording

TraceRecorder::TraceRecorder(std::shared_ptr<Backend> inner, const std::string & path)
        : inner_(std::move(inner)), path_(path) {
    file_ = std::fopen(path.c_str(), "wb");
    if (!file_) {
        throw config_error("cannot open trace file for writing: " + path);
    }
    // keys in fixed order; nlohmann only does the string escaping
    const std::string id = json(inner_->info().model_id).dump();
    std::fprintf(file_, "{\"format\":\"lenbench-trace-v1\",\"model_id\":%s}\n", id.c_str());
}

TraceRecorder::~TraceRecorder() {
    close();
}

void TraceRecorder::close() {
    std::lock_guard<std::mutex> lock(mutex_);
    if (file_) {
        std::fclose(file_);
        file_ = nullptr;
    }
}

std::vector<ScorePair> TraceRecorder::score_window(std::span<const token_t> context,
                                                   std::span<const token_t> targets) {
    auto result = inner_->score_window(context, targets);

    std::lock_guard<std::mutex> lock(mutex_);
    if (!file_) {
        throw data_error("trace recorder already closed: " + path_);
    }
    std::uint64_t h = context_fingerprint(context);
    for (std::size_t j = 0; j < targets.size(); j++) {
        std::fprintf(file_, "{\"ctx\":\"%s\",\"t\":%d,\"lp\":%s,\"am\":%d}\n",
                     hex16(h).c_str(), (int) targets[j],
                     format_g17(result[j].logprob_nats).c_str(), (int) result[j].argmax_id);
        h = fnv1a64_extend_token(h, targets[j]);
    }
    return result;
}

// ------------------------------------------------------------------ replay

static std::uint64_t parse_hex16(const std::string & s, const std::string & path, std::int64_t line_no) {
    if (s.size() != 16) {
        throw data_error(path + ": line " + std::to_string(line_no) + ": ctx is not a 16-hex-digit hash");
    }
    std::uint64_t value = 0;
    for (char c : s) {
        int digit;
        if (c >= '0' && c <= '9')      digit = c - '0';
        else if (c >= 'a' && c <= 'f') digit = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') digit = c - 'A' + 10;
        else {
            throw data_error(path + ": line " + std::to_string(line_no) + ": ctx is not a 16-hex-digit hash");
        }
        value = (value << 4) | (std::uint64_t) digit;
    }
    return value;
}

TraceBackend::TraceBackend(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open trace file: " + path);
    }

    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        if (line.empty()) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception & e) {
            throw data_error(path + ": malformed line " + std::to_string(line_no) + ": " + e.what());
        }
        if (line_no == 1) {
            if (!j.is_object() || j.value("format", "") != "lenbench-trace-v1") {
                throw data_error(path + ": line 1: expected trace header {\"format\":\"lenbench-trace-v1\",...}");
            }
            model_id_ = j.value("model_id", "trace");
            continue;
        }
        if (!j.is_object() || !j.contains("ctx") || !j.contains("t") || !j.contains("lp") || !j.contains("am") ||
            !j["ctx"].is_string() || !j["t"].is_number_integer() || !j["lp"].is_number() ||
            !j["am"].is_number_integer()) {
            throw data_error(path + ": malformed line " + std::to_string(line_no) +
                             ": expected {\"ctx\":\"...\",\"t\":id,\"lp\":float,\"am\":id}");
        }
        const std::uint64_t ctx = parse_hex16(j["ctx"].get<std::string>(), path, line_no);
        ScorePair pair;
        pair.logprob_nats = j["lp"].get<double>();
        pair.argmax_id    = j["am"].get<token_t>();
        entries_[{ctx, j["t"].get<token_t>()}] = pair;
    }
    if (line_no == 0) {
        throw data_error(path + ": empty trace file (missing header)");
    }
}

BackendInfo TraceBackend::info() {
    BackendInfo info;
    info.model_id      = model_id_;
    info.deterministic = true;
    return info;
}

std::vector<ScorePair> TraceBackend::score_window(std::span<const token_t> context,
                                                  std::span<const token_t> targets) {
    if (targets.empty()) {
        throw backend_error("score_window: empty targets");
    }
    std::vector<ScorePair> out;
    out.reserve(targets.size());
    std::uint64_t h = context_fingerprint(context);
    for (token_t t : targets) {
        auto it = entries_.find({h, t});
        if (it == entries_.end()) {
            throw backend_error("trace miss: no recorded entry for context " + hex16(h) +
                                ", target " + std::to_string(t));
        }
        out.push_back(it->second);
        h = fnv1a64_extend_token(h, t);
    }
    return out;
}

std::shared_ptr<TraceBackend> open_trace(const std::string & path) {
    return std::make_shared<TraceBackend>(path);
}

std::shared_ptr<TraceRecorder> record_trace(std::shared_ptr<Backend> inner, const std::string & path) {
    return std::make_shared<TraceRecorder>(std::move(inner), path);
}

}  // namespace lenbench
