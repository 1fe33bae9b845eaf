#include "lenbench/markov.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace lenbench {

using nlohmann::json;

const MarkovModel::successor_counts * MarkovModel::lookup(std::span<const token_t> context) const {
    const std::size_t use = std::min<std::size_t>(static_cast<std::size_t>(order), context.size());
    if (use >= tables.size()) {
        return nullptr;  // tables missing for this length: treat as unseen
    }
    const std::span<const token_t> tail = context.subspan(context.size() - use);
    const count_table & table = tables[use];
    const std::vector<token_t> key(tail.begin(), tail.end());
    auto it = table.find(key);
    return it == table.end() ? nullptr : &it->second;
}

double MarkovModel::prob(std::span<const token_t> context, token_t token) const {
    const successor_counts * node = lookup(context);
    std::uint64_t count = 0;
    std::uint64_t total = 0;
    if (node != nullptr) {
        total = node->total;
        auto it = node->by_token.find(token);
        if (it != node->by_token.end()) {
            count = it->second;
        }
    }
    return (static_cast<double>(count) + lambda) /
           (static_cast<double>(total) + lambda * static_cast<double>(vocab_size));
}

double MarkovModel::logprob(std::span<const token_t> context, token_t token) const {
    const successor_counts * node = lookup(context);
    std::uint64_t count = 0;
    std::uint64_t total = 0;
    if (node != nullptr) {
        total = node->total;
        auto it = node->by_token.find(token);
        if (it != node->by_token.end()) {
            count = it->second;
        }
    }
    return std::log(static_cast<double>(count) + lambda) -
           std::log(static_cast<double>(total) + lambda * static_cast<double>(vocab_size));
}

token_t MarkovModel::argmax(std::span<const token_t> context) const {
    const successor_counts * node = lookup(context);
    if (node == nullptr || node->by_token.empty()) {
        return 0;  // uniform distribution, smallest id wins
    }
    token_t best_id = -1;
    std::uint64_t best_count = 0;
    for (const auto & [id, count] : node->by_token) {
        if (count > best_count || (count == best_count && (best_id < 0 || id < best_id))) {
            best_count = count;
            best_id = id;
        }
    }
    return best_id;
}

MarkovModel fit_markov(const std::vector<Document> & docs, int k, double lambda) {
    if (docs.empty()) {
        throw data_error("fit_markov: empty document stream");
    }
    if (k < 0) {
        throw config_error("fit_markov: order must be >= 0");
    }
    if (!(lambda > 0.0)) {
        throw config_error("fit_markov: lambda must be > 0");
    }

    MarkovModel model;
    model.order  = k;
    model.lambda = lambda;
    model.tables.resize(static_cast<std::size_t>(k) + 1);

    token_t max_id = 0;
    for (const Document & doc : docs) {
        const std::vector<token_t> & toks = doc.tokens;
        const std::int64_t n = static_cast<std::int64_t>(toks.size());
        for (std::int64_t j = 0; j < n; ++j) {
            max_id = std::max(max_id, toks[j]);
            if (j == 0) {
                continue;
            }
            const int max_order = static_cast<int>(std::min<std::int64_t>(k, j));
            for (int o = 0; o <= max_order; ++o) {
                std::vector<token_t> ctx(toks.begin() + (j - o), toks.begin() + j);
                auto & node = model.tables[static_cast<std::size_t>(o)][std::move(ctx)];
                node.total += 1;
                node.by_token[toks[j]] += 1;
            }
        }
    }
    model.vocab_size = std::max<std::int32_t>(2, max_id + 1);
    return model;
}

MarkovModel fit_markov(const Corpus & corpus, int k, double lambda) {
    MarkovModel model = fit_markov(corpus.docs, k, lambda);
    model.vocab_size = std::max(model.vocab_size, corpus.vocab_size);
    return model;
}

std::vector<token_t> generate(const MarkovModel & model, std::int64_t n, std::uint64_t seed) {
    if (n < 1) {
        throw config_error("generate: n must be >= 1");
    }
    split_mix64 rng(seed);
    std::vector<token_t> out;
    out.reserve(static_cast<std::size_t>(n));

    const double v = static_cast<double>(model.vocab_size);
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t ctx_len = std::min<std::size_t>(static_cast<std::size_t>(model.order), out.size());
        const std::span<const token_t> ctx(out.data() + out.size() - ctx_len, ctx_len);

        // one denominator lookup per step, then the inverse CDF in id order
        const MarkovModel::successor_counts * node = [&]() -> const MarkovModel::successor_counts * {
            const std::vector<token_t> key(ctx.begin(), ctx.end());
            const auto & table = model.tables[ctx_len];
            auto it = table.find(key);
            return it == table.end() ? nullptr : &it->second;
        }();

        const double denom = (node ? static_cast<double>(node->total) : 0.0) + model.lambda * v;
        const double u = rng.next_double();
        double cum = 0.0;
        token_t picked = model.vocab_size - 1;
        for (token_t t = 0; t < model.vocab_size; ++t) {
            std::uint64_t count = 0;
            if (node != nullptr) {
                auto it = node->by_token.find(t);
                if (it != node->by_token.end()) {
                    count = it->second;
                }
            }
            cum += (static_cast<double>(count) + model.lambda) / denom;
            if (u < cum) {
                picked = t;
                break;
            }
        }
        out.push_back(picked);
    }
    return out;
}

void save_markov(const MarkovModel & model, const std::string & path) {
    json doc;
    doc["format"]     = "lenbench-markov-v1";
    doc["k"]          = model.order;
    doc["vocab_size"] = model.vocab_size;
    doc["lambda"]     = model.lambda;

    // entries sorted by (order, context, token) so the file is deterministic
    json counts = json::array();
    for (std::size_t o = 0; o < model.tables.size(); ++o) {
        std::vector<const std::vector<token_t> *> keys;
        keys.reserve(model.tables[o].size());
        for (const auto & [ctx, node] : model.tables[o]) {
            (void) node;
            keys.push_back(&ctx);
        }
        std::sort(keys.begin(), keys.end(),
                  [](const auto * a, const auto * b) { return *a < *b; });
        for (const auto * ctx : keys) {
            const auto & node = model.tables[o].at(*ctx);
            std::vector<std::pair<token_t, std::uint64_t>> succ(node.by_token.begin(), node.by_token.end());
            std::sort(succ.begin(), succ.end());
            json entry;
            entry["ctx"]  = *ctx;
            json pairs = json::array();
            for (const auto & [tok, count] : succ) {
                pairs.push_back(json::array({tok, count}));
            }
            entry["succ"] = std::move(pairs);
            counts.push_back(std::move(entry));
        }
    }
    doc["counts"] = std::move(counts);

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw config_error("cannot write model file: " + path);
    }
    out << doc.dump() << '\n';
    if (!out) {
        throw config_error("write failed: " + path);
    }
}

MarkovModel load_markov(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open model file: " + path);
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception & e) {
        throw data_error(path + ": malformed model file: " + e.what());
    }
    if (doc.value("format", "") != "lenbench-markov-v1") {
        throw data_error(path + ": not a lenbench-markov-v1 file");
    }

    MarkovModel model;
    model.order      = doc.at("k").get<int>();
    model.vocab_size = doc.at("vocab_size").get<std::int32_t>();
    model.lambda     = doc.at("lambda").get<double>();
    if (model.order < 0 || model.vocab_size < 2 || !(model.lambda > 0.0)) {
        throw data_error(path + ": invalid model header");
    }
    model.tables.resize(static_cast<std::size_t>(model.order) + 1);

    for (const auto & entry : doc.at("counts")) {
        std::vector<token_t> ctx = entry.at("ctx").get<std::vector<token_t>>();
        if (static_cast<int>(ctx.size()) > model.order) {
            throw data_error(path + ": context longer than model order");
        }
        auto & node = model.tables[ctx.size()][ctx];
        for (const auto & pair : entry.at("succ")) {
            const token_t tok = pair.at(0).get<token_t>();
            const std::uint64_t count = pair.at(1).get<std::uint64_t>();
            if (tok < 0 || tok >= model.vocab_size) {
                throw data_error(path + ": successor token outside vocab");
            }
            node.by_token[tok] += count;
            node.total += count;  // totals rebuilt from transitions
        }
    }
    return model;
}

}  // namespace lenbench
