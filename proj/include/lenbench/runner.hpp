#pragma once

#include <utility>
#include <vector>

#include "lenbench/backend.hpp"
#include "lenbench/corpus.hpp"
#include "lenbench/metrics.hpp"
#include "lenbench/protocol.hpp"

namespace lenbench {

struct RunOptions {
    // harness-side worker threads; the effective degree is also capped by the
    // backend's max_in_flight(). 1 means fully serial.
    int parallelism = 1;
};

// Execute one protocol over packed sequences and return the evaluation cell.
// Backend calls for distinct windows may run concurrently; aggregation is
// reduced by a single thread in (sequence, window) index order with compensated
// summation, so parallel and serial runs are bit-identical.
EvalRecord run_protocol(Backend & backend,
                        const std::vector<TokenSequence> & sequences,
                        const ProtocolConfig & config,
                        const RunOptions & options = {});

// One run per window size, all other settings held fixed; output ordered by w ascending.
std::vector<std::pair<std::int64_t, EvalRecord>> window_sweep(Backend & backend,
                                                              const std::vector<TokenSequence> & sequences,
                                                              std::vector<std::int64_t> sizes,
                                                              const ProtocolConfig & config_template,
                                                              const RunOptions & options = {});

// For each length L (ascending): pack the docs into length-L sequences
// (concat_and_chunk) and run the protocol.
std::vector<std::pair<std::int64_t, EvalRecord>> length_sweep(Backend & backend,
                                                              const std::vector<Document> & docs,
                                                              std::vector<std::int64_t> lengths,
                                                              const ProtocolConfig & config_template,
                                                              const RunOptions & options = {});

struct CompareResult {
    std::vector<DeltaRow> rows;
    // (non_sliding, sliding) records per length, same order as rows
    std::vector<std::pair<EvalRecord, EvalRecord>> records;
};

// Non-sliding vs sliding(w, s=w) at each length, reduced to per-length delta rows.
CompareResult compare_protocols(Backend & backend,
                                const std::vector<Document> & docs,
                                std::vector<std::int64_t> lengths,
                                std::int64_t window_size,
                                const ProtocolConfig & config_template,
                                const RunOptions & options = {});

}  // namespace lenbench
