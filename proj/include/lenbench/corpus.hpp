#pragma once

#include "lenbench/common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lenbench {

struct Document {
    std::int64_t doc_id = 0;
    std::vector<token_t> tokens;
};

// A fixed-length run of token ids carved from a corpus; the unit of evaluation.
struct TokenSequence {
    std::int64_t seq_id = 0;
    std::vector<token_t> tokens;
    std::pair<std::int64_t, std::int64_t> source_span = {0, 0};  // first/last contributing doc_id
    bool bos_present = false;
};

enum class CorpusFormat { jsonl_tokens, raw_text };

struct Corpus {
    std::int32_t vocab_size = 0;
    std::vector<Document> docs;
};

// One token per byte, vocab 256.
std::vector<token_t> byte_tokenize(std::string_view text);

// jsonl_tokens: header line {"format":"lenbench-corpus-v1","vocab_size":N},
// then one {"tokens":[...]} record per document.
// raw_text: blank-line-delimited blocks, byte-tokenized, vocab 256.
Corpus load_documents(const std::string & path, CorpusFormat format);

enum class PackPolicy { concat_and_chunk, per_doc };

// concat_and_chunk: concatenate everything (separator between documents when
// given) and cut consecutive non-overlapping chunks of exactly seq_len; the
// trailing remainder is discarded, never padded.
// per_doc: each document truncated to seq_len; shorter documents are skipped.
std::vector<TokenSequence> pack_sequences(const std::vector<Document> & docs,
                                          std::int64_t seq_len,
                                          PackPolicy policy,
                                          std::optional<token_t> separator_id = std::nullopt);

}  // namespace lenbench
