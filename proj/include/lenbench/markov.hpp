#pragma once

#include "lenbench/common.hpp"
#include "lenbench/corpus.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace lenbench {

// Exact k-order add-lambda-smoothed Markov language model. Counts are stored
// as integers for every context length 0..k, so probabilities stay defined
// (and hand-checkable) for any available context, including the empty one.
struct MarkovModel {
    struct context_key_hash {
        std::size_t operator()(const std::vector<token_t> & key) const {
            return static_cast<std::size_t>(
                fnv1a64(key.data(), key.size() * sizeof(token_t)));
        }
    };

    struct successor_counts {
        std::uint64_t total = 0;
        std::unordered_map<token_t, std::uint64_t> by_token;
    };

    using count_table = std::unordered_map<std::vector<token_t>, successor_counts, context_key_hash>;

    int order = 0;  // k
    std::int32_t vocab_size = 2;
    double lambda = 1.0;
    std::vector<count_table> tables;  // tables[o] holds order-o contexts, o in [0, k]

    // (count + lambda) / (total + lambda * V) on the last min(k, |context|)
    // tokens; an unseen context falls through to the uniform 1/V.
    double prob(std::span<const token_t> context, token_t token) const;

    // log(count + lambda) - log(total + lambda * V); the scoring path works in
    // nats end to end.
    double logprob(std::span<const token_t> context, token_t token) const;

    // most probable successor, ties broken toward the smallest id
    token_t argmax(std::span<const token_t> context) const;

  private:
    const successor_counts * lookup(std::span<const token_t> context) const;
};

// vocab inferred from the largest id seen (minimum 2)
MarkovModel fit_markov(const std::vector<Document> & docs, int k, double lambda);
// same, but never smaller than the corpus-declared vocab
MarkovModel fit_markov(const Corpus & corpus, int k, double lambda);

// n tokens sampled autoregressively: SplitMix64 state seeded with `seed`, one
// draw per token mapped through the inverse CDF over the V outcomes in id
// order. Same seed, same model -> bit-identical output.
std::vector<token_t> generate(const MarkovModel & model, std::int64_t n, std::uint64_t seed);

// lenbench-markov-v1 JSON, lossless round trip
void save_markov(const MarkovModel & model, const std::string & path);
MarkovModel load_markov(const std::string & path);

}  // namespace lenbench
