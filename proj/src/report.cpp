#include "lenbench/report.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

namespace lenbench {

using nlohmann::json;

std::string current_timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

std::string file_fingerprint(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open file for fingerprinting: " + path);
    }
    std::uint64_t h = FNV1A64_OFFSET;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a64(buf, (std::size_t) in.gcount(), h);
    }
    return hex16(h);
}

nlohmann::json protocol_to_json(const ProtocolConfig & config) {
    json j;
    j["variant"]           = to_string(config.variant);
    j["window_size"]       = config.plan.window_size;
    j["stride"]            = config.plan.effective_stride();
    j["context_policy"]    = to_string(config.plan.context_policy);
    j["include_remainder"] = config.plan.include_remainder;
    j["aggregation"]       = to_string(config.aggregation);
    j["skip_first_token"]  = config.skip_first_token;
    return j;
}

static ProtocolConfig protocol_from_json(const json & j) {
    ProtocolConfig config;
    if (auto v = variant_from_string(j.value("variant", ""))) {
        config.variant = *v;
    }
    config.plan.window_size = j.value("window_size", (std::int64_t) 1024);
    config.plan.stride      = j.value("stride", config.plan.window_size);
    if (auto v = context_policy_from_string(j.value("context_policy", ""))) {
        config.plan.context_policy = *v;
    }
    config.plan.include_remainder = j.value("include_remainder", false);
    if (auto v = aggregation_from_string(j.value("aggregation", ""))) {
        config.aggregation = *v;
    }
    config.skip_first_token = j.value("skip_first_token", false);
    return config;
}

// ------------------------------------------------------------------- writing
//
// JSON is assembled by hand so every float is rendered with printf %.17g —
// 17 significant digits round-trip doubles exactly.

namespace {

class json_writer {
  public:
    void field(const char * name, const std::string & text) {
        raw(name, json(text).dump());
    }
    void field(const char * name, const char * text) {
        raw(name, json(text).dump());
    }
    void field(const char * name, double value) {
        raw(name, format_g17(value));
    }
    void field(const char * name, std::int64_t value) {
        raw(name, std::to_string(value));
    }
    void field(const char * name, bool value) {
        raw(name, value ? "true" : "false");
    }
    void field(const char * name, const std::optional<std::int64_t> & value) {
        raw(name, value ? std::to_string(*value) : "null");
    }
    void raw(const char * name, const std::string & value) {
        if (!out_.empty()) {
            out_ += ',';
        }
        out_ += json(name).dump();
        out_ += ':';
        out_ += value;
    }
    std::string object() const { return "{" + out_ + "}"; }

  private:
    std::string out_;
};

std::string record_to_json(const EvalRecord & r) {
    json_writer w;
    w.field("model_id", r.model_id);
    w.raw("protocol", protocol_to_json(r.protocol).dump());
    w.field("seq_len", r.seq_len);
    w.field("n_sequences", r.n_sequences);
    w.field("scored_tokens", r.scored_tokens);
    w.field("nll_sum_nats", r.nll_sum_nats);
    w.field("ppl", r.ppl);
    w.field("accuracy_pct", r.accuracy_pct);
    w.field("cost_tokens", r.cost_tokens);

    json_writer lat;
    lat.field("n_calls", r.latency.n_calls);
    lat.field("total_s", r.latency.total_s);
    lat.field("mean_s", r.latency.mean_s);
    lat.field("p50_s", r.latency.p50_s);
    lat.field("p95_s", r.latency.p95_s);
    w.raw("latency", lat.object());

    w.field("makespan_s", r.makespan_s);
    w.field("peak_mem_bytes", r.peak_mem_bytes);
    w.field("skip_first_token", r.skip_first_token);
    return w.object();
}

std::string delta_to_json(const DeltaRow & d) {
    json_writer w;
    w.field("model_id", d.model_id);
    w.field("seq_len", d.seq_len);
    w.field("ppl_ns", d.ppl_ns);
    w.field("ppl_s", d.ppl_s);
    w.field("delta_ppl", d.delta_ppl);
    w.field("acc_ns", d.acc_ns);
    w.field("acc_s", d.acc_s);
    w.field("delta_acc", d.delta_acc);
    w.field("ppl_better", to_string(d.ppl_better));
    w.field("acc_better", to_string(d.acc_better));
    return w.object();
}

void write_text_file(const std::string & path, const std::string & text) {
    FILE * f = std::fopen(path.c_str(), "wb");
    if (!f) {
        throw config_error("cannot open output file for writing: " + path);
    }
    const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
    if (std::fclose(f) != 0 || !ok) {
        throw config_error("failed writing output file: " + path);
    }
}

}  // namespace

void emit_json(const RunManifest & manifest, const std::vector<EvalRecord> & records,
               const std::vector<DeltaRow> & deltas, const std::string & path) {
    if (records.empty()) {
        throw data_error("emit_json: no records");
    }

    json_writer man;
    man.field("tool_version", manifest.tool_version);
    man.raw("config", manifest.config.is_null() ? "{}" : manifest.config.dump());
    man.field("corpus_fingerprint", manifest.corpus_fingerprint);
    json_writer backend;
    backend.field("model_id", manifest.backend.model_id);
    backend.field("reported_peak_mem_bytes", manifest.backend.reported_peak_mem_bytes);
    backend.field("deterministic", manifest.backend.deterministic);
    man.raw("backend", backend.object());
    man.field("timestamp", manifest.timestamp);

    std::string out = "{\"manifest\":" + man.object() + ",\"records\":[";
    for (std::size_t i = 0; i < records.size(); i++) {
        if (i > 0) {
            out += ',';
        }
        out += record_to_json(records[i]);
    }
    out += ']';
    if (!deltas.empty()) {
        out += ",\"deltas\":[";
        for (std::size_t i = 0; i < deltas.size(); i++) {
            if (i > 0) {
                out += ',';
            }
            out += delta_to_json(deltas[i]);
        }
        out += ']';
    }
    out += "}\n";
    write_text_file(path, out);
}

// ------------------------------------------------------------------- reading

static EvalRecord record_from_json(const json & j) {
    EvalRecord r;
    r.model_id      = j.value("model_id", "");
    r.protocol      = protocol_from_json(j.value("protocol", json::object()));
    r.seq_len       = j.value("seq_len", (std::int64_t) 0);
    r.n_sequences   = j.value("n_sequences", (std::int64_t) 0);
    r.scored_tokens = j.value("scored_tokens", (std::int64_t) 0);
    r.nll_sum_nats  = j.value("nll_sum_nats", 0.0);
    r.ppl           = j.value("ppl", 0.0);
    r.accuracy_pct  = j.value("accuracy_pct", 0.0);
    r.cost_tokens   = j.value("cost_tokens", (std::int64_t) 0);
    if (j.contains("latency") && j["latency"].is_object()) {
        const json & lat = j["latency"];
        r.latency.n_calls = lat.value("n_calls", (std::int64_t) 0);
        r.latency.total_s = lat.value("total_s", 0.0);
        r.latency.mean_s  = lat.value("mean_s", 0.0);
        r.latency.p50_s   = lat.value("p50_s", 0.0);
        r.latency.p95_s   = lat.value("p95_s", 0.0);
    }
    r.makespan_s = j.value("makespan_s", 0.0);
    if (j.contains("peak_mem_bytes") && j["peak_mem_bytes"].is_number_integer()) {
        r.peak_mem_bytes = j["peak_mem_bytes"].get<std::int64_t>();
    }
    r.skip_first_token = j.value("skip_first_token", false);
    return r;
}

ParsedReport parse_report_json(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open report file: " + path);
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception & e) {
        throw data_error(path + ": malformed report JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("records") || !j["records"].is_array()) {
        throw data_error(path + ": report missing records array");
    }

    ParsedReport report;
    if (j.contains("manifest") && j["manifest"].is_object()) {
        const json & m = j["manifest"];
        report.manifest.tool_version       = m.value("tool_version", "");
        report.manifest.config             = m.value("config", json::object());
        report.manifest.corpus_fingerprint = m.value("corpus_fingerprint", "");
        report.manifest.timestamp          = m.value("timestamp", "");
        if (m.contains("backend") && m["backend"].is_object()) {
            const json & b = m["backend"];
            report.manifest.backend.model_id      = b.value("model_id", "");
            report.manifest.backend.deterministic = b.value("deterministic", true);
            if (b.contains("reported_peak_mem_bytes") && b["reported_peak_mem_bytes"].is_number_integer()) {
                report.manifest.backend.reported_peak_mem_bytes = b["reported_peak_mem_bytes"].get<std::int64_t>();
            }
        }
    }
    for (const auto & rec : j["records"]) {
        report.records.push_back(record_from_json(rec));
    }
    if (j.contains("deltas") && j["deltas"].is_array()) {
        for (const auto & d : j["deltas"]) {
            DeltaRow row;
            row.model_id  = d.value("model_id", "");
            row.seq_len   = d.value("seq_len", (std::int64_t) 0);
            row.ppl_ns    = d.value("ppl_ns", 0.0);
            row.ppl_s     = d.value("ppl_s", 0.0);
            row.delta_ppl = d.value("delta_ppl", 0.0);
            row.acc_ns    = d.value("acc_ns", 0.0);
            row.acc_s     = d.value("acc_s", 0.0);
            row.delta_acc = d.value("delta_acc", 0.0);
            row.ppl_better = d.value("ppl_better", "") == "non_sliding" ? BetterSide::non_sliding
                                                                        : BetterSide::sliding;
            row.acc_better = d.value("acc_better", "") == "non_sliding" ? BetterSide::non_sliding
                                                                        : BetterSide::sliding;
            report.deltas.push_back(row);
        }
    }
    return report;
}

// ----------------------------------------------------------------------- CSV

void emit_csv(const std::vector<EvalRecord> & records, const std::string & path) {
    if (records.empty()) {
        throw data_error("emit_csv: no records");
    }
    std::string out =
        "model_id,protocol,seq_len,window_size,stride,ppl,acc_pct,scored_tokens,nll_sum,"
        "cost_tokens,latency_total_s,latency_mean_s,latency_p50_s,latency_p95_s,makespan_s,"
        "peak_mem_bytes\n";
    for (const auto & r : records) {
        const bool sliding = r.protocol.variant == Variant::sliding;
        out += r.model_id;
        out += ',';
        out += to_string(r.protocol.variant);
        out += ',';
        out += std::to_string(r.seq_len);
        out += ',';
        out += sliding ? std::to_string(r.protocol.plan.window_size) : "";
        out += ',';
        out += sliding ? std::to_string(r.protocol.plan.effective_stride()) : "";
        out += ',';
        out += format_f6(r.ppl);
        out += ',';
        out += format_f6(r.accuracy_pct);
        out += ',';
        out += std::to_string(r.scored_tokens);
        out += ',';
        out += format_f6(r.nll_sum_nats);
        out += ',';
        out += std::to_string(r.cost_tokens);
        out += ',';
        out += format_f6(r.latency.total_s);
        out += ',';
        out += format_f6(r.latency.mean_s);
        out += ',';
        out += format_f6(r.latency.p50_s);
        out += ',';
        out += format_f6(r.latency.p95_s);
        out += ',';
        out += format_f6(r.makespan_s);
        out += ',';
        out += r.peak_mem_bytes ? std::to_string(*r.peak_mem_bytes) : "";
        out += '\n';
    }
    write_text_file(path, out);
}

// ---------------------------------------------------------------- text table

static std::string format_4f(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

static std::string format_delta(double v, BetterSide better) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%+.4f", v);
    return std::string(buf) + " " + (better == BetterSide::non_sliding ? "↑" : "↓");
}

// display width of a UTF-8 cell: the arrows are 3 bytes but one column
static std::size_t display_width(const std::string & s) {
    std::size_t width = 0;
    for (unsigned char c : s) {
        if ((c & 0xc0) != 0x80) {  // count non-continuation bytes
            width++;
        }
    }
    return width;
}

std::string render_delta_table(const std::vector<DeltaRow> & rows) {
    if (rows.empty()) {
        throw data_error("render_delta_table: no rows");
    }

    const std::vector<std::string> header = {"model",  "seq_len",  "ppl_ns", "ppl_s",
                                             "d_ppl",  "acc_ns",   "acc_s",  "d_acc"};
    std::vector<std::vector<std::string>> cells;
    cells.push_back(header);
    for (const auto & r : rows) {
        cells.push_back({r.model_id, std::to_string(r.seq_len), format_4f(r.ppl_ns),
                         format_4f(r.ppl_s), format_delta(r.delta_ppl, r.ppl_better),
                         format_4f(r.acc_ns), format_4f(r.acc_s),
                         format_delta(r.delta_acc, r.acc_better)});
    }

    std::vector<std::size_t> widths(header.size(), 0);
    for (const auto & row : cells) {
        for (std::size_t c = 0; c < row.size(); c++) {
            widths[c] = std::max(widths[c], display_width(row[c]));
        }
    }

    std::string out;
    for (std::size_t rix = 0; rix < cells.size(); rix++) {
        const auto & row = cells[rix];
        std::string line;
        for (std::size_t c = 0; c < row.size(); c++) {
            line += row[c];
            if (c + 1 < row.size()) {
                line.append(widths[c] - display_width(row[c]) + 2, ' ');
            }
        }
        out += line;
        out += '\n';
        if (rix == 0) {
            std::size_t total = 0;
            for (std::size_t c = 0; c < widths.size(); c++) {
                total += widths[c] + (c + 1 < widths.size() ? 2 : 0);
            }
            out.append(total, '-');
            out += '\n';
        }
    }
    return out;
}

// ------------------------------------------------------------------ plotdata

void emit_plotdata(const std::vector<std::pair<std::int64_t, EvalRecord>> & sweep,
                   const std::string & x_name, const std::string & path) {
    if (sweep.empty()) {
        throw data_error("emit_plotdata: no sweep points");
    }

    std::vector<const std::pair<std::int64_t, EvalRecord> *> order;
    order.reserve(sweep.size());
    for (const auto & p : sweep) {
        order.push_back(&p);
    }
    std::stable_sort(order.begin(), order.end(), [](const auto * a, const auto * b) {
        if (a->second.model_id != b->second.model_id) {
            return a->second.model_id < b->second.model_id;
        }
        return a->first < b->first;
    });

    std::string out = x_name + ",model_id,ppl,acc_pct,latency_mean_s,peak_mem_bytes,cost_tokens\n";
    for (const auto * p : order) {
        const EvalRecord & r = p->second;
        out += std::to_string(p->first);
        out += ',';
        out += r.model_id;
        out += ',';
        out += format_f6(r.ppl);
        out += ',';
        out += format_f6(r.accuracy_pct);
        out += ',';
        out += format_f6(r.latency.mean_s);
        out += ',';
        out += r.peak_mem_bytes ? std::to_string(*r.peak_mem_bytes) : "";
        out += ',';
        out += std::to_string(r.cost_tokens);
        out += '\n';
    }
    write_text_file(path, out);
}

// ---------------------------------------------------------------- comparison

bool same_data(const EvalRecord & a, const EvalRecord & b) {
    return a.model_id == b.model_id &&
           protocol_to_json(a.protocol) == protocol_to_json(b.protocol) &&
           a.seq_len == b.seq_len &&
           a.n_sequences == b.n_sequences &&
           a.scored_tokens == b.scored_tokens &&
           a.nll_sum_nats == b.nll_sum_nats &&
           a.ppl == b.ppl &&
           a.accuracy_pct == b.accuracy_pct &&
           a.cost_tokens == b.cost_tokens &&
           a.skip_first_token == b.skip_first_token;
}

}  // namespace lenbench
