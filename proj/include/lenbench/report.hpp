#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lenbench/backend.hpp"
#include "lenbench/metrics.hpp"

namespace lenbench {

// reproducibility envelope written into every JSON report
struct RunManifest {
    std::string    tool_version;
    nlohmann::json config;              // fully resolved run configuration
    std::string    corpus_fingerprint;  // content hash of the corpus file, empty if none
    BackendInfo    backend;
    std::string    timestamp;           // ISO-8601 UTC; excluded from determinism guarantees
};

// report read back from a JSON file (the round-trip side of emit_json)
struct ParsedReport {
    RunManifest              manifest;
    std::vector<EvalRecord>  records;
    std::vector<DeltaRow>    deltas;
};

// ISO-8601 UTC wall-clock time, e.g. "2026-08-22T14:03:07Z"
std::string current_timestamp_utc();

// 16-hex-digit FNV-1a fingerprint of a file's bytes
std::string file_fingerprint(const std::string & path);

// the resolved ProtocolConfig as a JSON object (shared by reports and manifests)
nlohmann::json protocol_to_json(const ProtocolConfig & config);

// single object {"manifest":..., "records":[...]} plus "deltas" when non-empty;
// floats carry 17 significant digits so reading the file back is lossless
void emit_json(const RunManifest & manifest, const std::vector<EvalRecord> & records,
               const std::vector<DeltaRow> & deltas, const std::string & path);

ParsedReport parse_report_json(const std::string & path);

// fixed column order; floats at 6 decimals; absent peak memory is an empty cell
void emit_csv(const std::vector<EvalRecord> & records, const std::string & path);

// plain-text comparison table: per-protocol PPL and accuracy plus signed deltas,
// each delta suffixed with an arrow for the better-performing protocol
// ("↑" non-sliding, "↓" sliding)
std::string render_delta_table(const std::vector<DeltaRow> & rows);

// long-format plot CSV: one row per sweep point, sorted by (model_id, x);
// the first column is named by x_name (e.g. "window_size" or "seq_len")
void emit_plotdata(const std::vector<std::pair<std::int64_t, EvalRecord>> & sweep,
                   const std::string & x_name, const std::string & path);

// true when a and b agree on everything except latency, makespan, and memory —
// the fields allowed to differ between runs of identical configuration
bool same_data(const EvalRecord & a, const EvalRecord & b);

}  // namespace lenbench
