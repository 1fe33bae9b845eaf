// Regenerates the committed fixtures under data/: a small synthetic token corpus
// and an order-2 Markov model fitted to it. Both are deterministic, so rerunning
// this tool must reproduce the committed files byte for byte.

#include <cstdio>
#include <string>

#include "lenbench/common.hpp"
#include "lenbench/corpus.hpp"
#include "lenbench/markov.hpp"

using namespace lenbench;

namespace {

constexpr std::int64_t  VOCAB      = 32;
constexpr int           N_DOCS     = 8;
constexpr std::int64_t  DOC_TOKENS = 2000;
constexpr std::uint64_t SEED       = 0x6c656e62;  // arbitrary fixed seed

// Second-order structured stream: mostly x_j = (x_{j-1} + x_{j-2}) mod V, with
// occasional uniform noise. Longer context genuinely helps on this data, which
// the window-size sweep tests rely on.
std::vector<token_t> make_doc(split_mix64 & rng) {
    std::vector<token_t> tokens;
    tokens.reserve(DOC_TOKENS);
    tokens.push_back((token_t) (rng.next() % VOCAB));
    tokens.push_back((token_t) (rng.next() % VOCAB));
    while ((std::int64_t) tokens.size() < DOC_TOKENS) {
        const std::size_t n = tokens.size();
        if (rng.next_double() < 0.85) {
            tokens.push_back((token_t) ((tokens[n - 1] + tokens[n - 2]) % VOCAB));
        } else {
            tokens.push_back((token_t) (rng.next() % VOCAB));
        }
    }
    return tokens;
}

}  // namespace

int main(int argc, char ** argv) {
    const std::string out_dir = argc > 1 ? argv[1] : "data";
    const std::string corpus_path = out_dir + "/tiny_corpus.jsonl";
    const std::string model_path  = out_dir + "/markov_k2.json";

    split_mix64 rng(SEED);
    std::vector<Document> docs;
    for (int d = 0; d < N_DOCS; d++) {
        docs.push_back({d, make_doc(rng)});
    }

    FILE * f = std::fopen(corpus_path.c_str(), "wb");
    if (!f) {
        std::fprintf(stderr, "cannot write %s\n", corpus_path.c_str());
        return 1;
    }
    std::fprintf(f, "{\"format\":\"lenbench-corpus-v1\",\"vocab_size\":%lld}\n", (long long) VOCAB);
    for (const auto & doc : docs) {
        std::fputs("{\"tokens\":[", f);
        for (std::size_t i = 0; i < doc.tokens.size(); i++) {
            std::fprintf(f, i ? ",%d" : "%d", (int) doc.tokens[i]);
        }
        std::fputs("]}\n", f);
    }
    std::fclose(f);

    const MarkovModel model = fit_markov(docs, /*k=*/2, /*lambda=*/0.1);
    save_markov(model, model_path);

    std::printf("wrote %s (%d docs x %lld tokens, V=%lld)\n", corpus_path.c_str(), N_DOCS,
                (long long) DOC_TOKENS, (long long) VOCAB);
    std::printf("wrote %s (k=%d, lambda=%g)\n", model_path.c_str(), model.order, model.lambda);
    return 0;
}
