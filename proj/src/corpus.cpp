#include "lenbench/corpus.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace lenbench {

using nlohmann::json;

std::vector<token_t> byte_tokenize(std::string_view text) {
    std::vector<token_t> out;
    out.reserve(text.size());
    for (unsigned char b : text) {
        out.push_back(static_cast<token_t>(b));
    }
    return out;
}

static Corpus load_jsonl_tokens(const std::string & path, std::ifstream & in) {
    Corpus corpus;
    std::string line;
    std::int64_t line_no = 0;
    std::int64_t doc_id  = 0;
    bool have_header = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception & e) {
            throw data_error(path + ": malformed line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!have_header) {
            if (!rec.is_object() || rec.value("format", "") != "lenbench-corpus-v1") {
                throw data_error(path + ": line 1: expected corpus header {\"format\":\"lenbench-corpus-v1\",...}");
            }
            if (!rec.contains("vocab_size") || !rec["vocab_size"].is_number_integer() ||
                rec["vocab_size"].get<std::int64_t>() < 2) {
                throw data_error(path + ": line 1: header missing integer vocab_size >= 2");
            }
            corpus.vocab_size = rec["vocab_size"].get<std::int32_t>();
            have_header = true;
            continue;
        }
        if (!rec.is_object() || !rec.contains("tokens") || !rec["tokens"].is_array()) {
            throw data_error(path + ": malformed line " + std::to_string(line_no) +
                             ": expected {\"tokens\":[...]}");
        }
        Document doc;
        doc.doc_id = doc_id;
        doc.tokens.reserve(rec["tokens"].size());
        std::int64_t pos = 0;
        for (const auto & v : rec["tokens"]) {
            if (!v.is_number_integer()) {
                throw data_error(path + ": malformed line " + std::to_string(line_no) +
                                 ": non-integer token at position " + std::to_string(pos));
            }
            const std::int64_t id = v.get<std::int64_t>();
            if (id < 0 || id >= corpus.vocab_size) {
                throw data_error(path + ": doc " + std::to_string(doc_id) + " position " +
                                 std::to_string(pos) + ": token id " + std::to_string(id) +
                                 " outside vocab_size " + std::to_string(corpus.vocab_size));
            }
            doc.tokens.push_back(static_cast<token_t>(id));
            ++pos;
        }
        if (doc.tokens.empty()) {
            throw data_error(path + ": doc " + std::to_string(doc_id) + " has no tokens (line " +
                             std::to_string(line_no) + ")");
        }
        corpus.docs.push_back(std::move(doc));
        ++doc_id;
    }
    // an entirely empty file is an empty stream, not an error
    return corpus;
}

static Corpus load_raw_text(std::ifstream & in) {
    Corpus corpus;
    corpus.vocab_size = 256;

    std::string line;
    std::string block;
    std::int64_t doc_id = 0;

    auto flush_block = [&] {
        if (block.empty()) {
            return;
        }
        Document doc;
        doc.doc_id = doc_id++;
        doc.tokens = byte_tokenize(block);
        corpus.docs.push_back(std::move(doc));
        block.clear();
    };

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            flush_block();
            continue;
        }
        if (!block.empty()) {
            block.push_back('\n');
        }
        block += line;
    }
    flush_block();
    return corpus;
}

Corpus load_documents(const std::string & path, CorpusFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open corpus file: " + path);
    }
    switch (format) {
        case CorpusFormat::jsonl_tokens: return load_jsonl_tokens(path, in);
        case CorpusFormat::raw_text:     return load_raw_text(in);
    }
    throw config_error("unknown corpus format");
}

std::vector<TokenSequence> pack_sequences(const std::vector<Document> & docs,
                                          std::int64_t seq_len,
                                          PackPolicy policy,
                                          std::optional<token_t> separator_id) {
    if (seq_len < 2) {
        throw config_error("seq_len must be >= 2, got " + std::to_string(seq_len));
    }

    std::vector<TokenSequence> out;

    if (policy == PackPolicy::per_doc) {
        for (const Document & doc : docs) {
            if (static_cast<std::int64_t>(doc.tokens.size()) < seq_len) {
                continue;
            }
            TokenSequence seq;
            seq.seq_id = static_cast<std::int64_t>(out.size());
            seq.tokens.assign(doc.tokens.begin(), doc.tokens.begin() + seq_len);
            seq.source_span = {doc.doc_id, doc.doc_id};
            out.push_back(std::move(seq));
        }
    } else {
        // single concatenated stream with per-token doc provenance; separators
        // inherit the preceding document's id
        std::vector<token_t> stream;
        std::vector<std::int64_t> origin;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            if (separator_id && i > 0) {
                stream.push_back(*separator_id);
                origin.push_back(docs[i - 1].doc_id);
            }
            stream.insert(stream.end(), docs[i].tokens.begin(), docs[i].tokens.end());
            origin.insert(origin.end(), docs[i].tokens.size(), docs[i].doc_id);
        }
        const std::int64_t n_seq = static_cast<std::int64_t>(stream.size()) / seq_len;
        for (std::int64_t s = 0; s < n_seq; ++s) {
            TokenSequence seq;
            seq.seq_id = s;
            const std::int64_t begin = s * seq_len;
            seq.tokens.assign(stream.begin() + begin, stream.begin() + begin + seq_len);
            seq.source_span = {origin[begin], origin[begin + seq_len - 1]};
            out.push_back(std::move(seq));
        }
    }

    if (out.empty()) {
        throw data_error("corpus too small for seq_len " + std::to_string(seq_len));
    }
    return out;
}

}  // namespace lenbench
