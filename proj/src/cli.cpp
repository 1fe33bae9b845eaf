#include "lenbench/cli.hpp"

#include <cstdio>
#include <fstream>
#include <future>

#include <CLI11.hpp>
#include <json.hpp>

#include "lenbench/backend.hpp"
#include "lenbench/corpus.hpp"
#include "lenbench/markov.hpp"
#include "lenbench/remote.hpp"
#include "lenbench/report.hpp"
#include "lenbench/runner.hpp"
#include "lenbench/server.hpp"
#include "lenbench/trace.hpp"
#include "lenbench/version.hpp"

namespace lenbench {

namespace {

using nlohmann::json;

struct eval_options {
    std::string  config_path;
    std::string  corpus;
    std::string  corpus_format = "jsonl";
    std::string  backend_spec;
    std::string  protocol = "non-sliding";
    std::int64_t window   = 1024;
    std::int64_t stride   = 0;  // 0 -> same as window (disjoint chunks)
    std::string  context  = "window-local";
    std::string  aggregation = "window-mean";
    std::string  skip        = "auto";
    bool         include_remainder = false;
    std::vector<std::int64_t> lengths;
    std::vector<std::int64_t> window_sizes;
    std::string  out_json;
    std::string  out_csv;
    std::string  out_plot;
    std::uint64_t seed  = 0;
    int parallelism     = 1;

    // fit-markov
    int         order  = 2;
    double      lambda = 0.1;
    std::string out_model;

    // serve
    std::string model_path;
    std::string host = "127.0.0.1";
    int         port = 8080;

    // record-trace
    std::string run_kind;
    std::string trace_out;
};

// option handles per subcommand, so config-file merging can tell which flags
// the user set explicitly (explicit flags always win over the file)
struct flag_refs {
    CLI::Option * corpus = nullptr;
    CLI::Option * corpus_format = nullptr;
    CLI::Option * backend = nullptr;
    CLI::Option * protocol = nullptr;
    CLI::Option * window = nullptr;
    CLI::Option * stride = nullptr;
    CLI::Option * context = nullptr;
    CLI::Option * aggregation = nullptr;
    CLI::Option * skip = nullptr;
    CLI::Option * include_remainder = nullptr;
    CLI::Option * lengths = nullptr;
    CLI::Option * window_sizes = nullptr;
    CLI::Option * out_json = nullptr;
    CLI::Option * out_csv = nullptr;
    CLI::Option * out_plot = nullptr;
    CLI::Option * seed = nullptr;
    CLI::Option * parallelism = nullptr;
    CLI::Option * order = nullptr;
    CLI::Option * lambda = nullptr;
    CLI::Option * out_model = nullptr;
    CLI::Option * model = nullptr;
    CLI::Option * host = nullptr;
    CLI::Option * port = nullptr;
    CLI::Option * run_kind = nullptr;
    CLI::Option * trace_out = nullptr;
};

// ------------------------------------------------------- config file merging

json load_config_file(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw config_error("cannot open config file: " + path);
    }
    json cfg;
    try {
        cfg = json::parse(in);
    } catch (const json::exception & e) {
        throw config_error(path + ": malformed config JSON: " + e.what());
    }
    if (!cfg.is_object()) {
        throw config_error(path + ": config file must hold a JSON object");
    }
    return cfg;
}

bool take(const CLI::Option * opt, const json & cfg, const char * key) {
    return opt != nullptr && opt->count() == 0 && cfg.contains(key);
}

void merge_str(const CLI::Option * opt, const json & cfg, const char * key, std::string & value) {
    if (!take(opt, cfg, key)) {
        return;
    }
    if (!cfg[key].is_string()) {
        throw config_error(std::string("config key \"") + key + "\" must be a string");
    }
    value = cfg[key].get<std::string>();
}

template <typename T>
void merge_num(const CLI::Option * opt, const json & cfg, const char * key, T & value) {
    if (!take(opt, cfg, key)) {
        return;
    }
    if (!cfg[key].is_number()) {
        throw config_error(std::string("config key \"") + key + "\" must be a number");
    }
    value = cfg[key].get<T>();
}

void merge_bool(const CLI::Option * opt, const json & cfg, const char * key, bool & value) {
    if (!take(opt, cfg, key)) {
        return;
    }
    if (!cfg[key].is_boolean()) {
        throw config_error(std::string("config key \"") + key + "\" must be a boolean");
    }
    value = cfg[key].get<bool>();
}

std::vector<std::int64_t> parse_int_list(const std::string & text, const char * what) {
    std::vector<std::int64_t> out;
    std::size_t begin = 0;
    while (begin <= text.size()) {
        std::size_t end = text.find(',', begin);
        if (end == std::string::npos) {
            end = text.size();
        }
        const std::string item = text.substr(begin, end - begin);
        try {
            std::size_t used = 0;
            out.push_back(std::stoll(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument("trailing characters");
            }
        } catch (const std::exception &) {
            throw config_error(std::string(what) + ": \"" + item + "\" is not an integer");
        }
        begin = end + 1;
        if (end == text.size()) {
            break;
        }
    }
    return out;
}

void merge_list(const CLI::Option * opt, const json & cfg, const char * key,
                std::vector<std::int64_t> & value) {
    if (!take(opt, cfg, key)) {
        return;
    }
    const json & v = cfg[key];
    if (v.is_string()) {
        value = parse_int_list(v.get<std::string>(), key);
        return;
    }
    if (!v.is_array()) {
        throw config_error(std::string("config key \"") + key +
                           "\" must be an array of integers or a comma-separated string");
    }
    value.clear();
    for (const auto & e : v) {
        if (!e.is_number_integer()) {
            throw config_error(std::string("config key \"") + key + "\" must contain only integers");
        }
        value.push_back(e.get<std::int64_t>());
    }
}

void merge_config(eval_options & o, const flag_refs & f) {
    if (o.config_path.empty()) {
        return;
    }
    const json cfg = load_config_file(o.config_path);
    merge_str(f.corpus, cfg, "corpus", o.corpus);
    merge_str(f.corpus_format, cfg, "corpus_format", o.corpus_format);
    merge_str(f.backend, cfg, "backend", o.backend_spec);
    merge_str(f.protocol, cfg, "protocol", o.protocol);
    merge_num(f.window, cfg, "window", o.window);
    merge_num(f.stride, cfg, "stride", o.stride);
    merge_str(f.context, cfg, "context", o.context);
    merge_str(f.aggregation, cfg, "aggregation", o.aggregation);
    merge_str(f.skip, cfg, "skip_first_token", o.skip);
    merge_bool(f.include_remainder, cfg, "include_remainder", o.include_remainder);
    merge_list(f.lengths, cfg, "lengths", o.lengths);
    merge_list(f.window_sizes, cfg, "window_sizes", o.window_sizes);
    merge_str(f.out_json, cfg, "out_json", o.out_json);
    merge_str(f.out_csv, cfg, "out_csv", o.out_csv);
    merge_str(f.out_plot, cfg, "out_plot", o.out_plot);
    merge_num(f.seed, cfg, "seed", o.seed);
    merge_num(f.parallelism, cfg, "parallelism", o.parallelism);
    merge_num(f.order, cfg, "order", o.order);
    merge_num(f.lambda, cfg, "lambda", o.lambda);
    merge_str(f.out_model, cfg, "out_model", o.out_model);
    merge_str(f.model, cfg, "model", o.model_path);
    merge_str(f.host, cfg, "host", o.host);
    merge_num(f.port, cfg, "port", o.port);
    merge_str(f.run_kind, cfg, "run", o.run_kind);
    merge_str(f.trace_out, cfg, "trace_out", o.trace_out);
}

// ------------------------------------------------------------- flag plumbing

void add_config_flag(CLI::App * cmd, eval_options & o) {
    cmd->add_option("--config", o.config_path,
                    "JSON config file; explicit flags override file values");
}

void add_corpus_flags(CLI::App * cmd, eval_options & o, flag_refs & f) {
    f.corpus = cmd->add_option("--corpus", o.corpus, "corpus file to evaluate");
    f.corpus_format = cmd->add_option("--corpus-format", o.corpus_format,
                                      "corpus file format")
                          ->check(CLI::IsMember({"jsonl", "text"}));
}

void add_eval_flags(CLI::App * cmd, eval_options & o, flag_refs & f, bool with_window_sizes) {
    add_corpus_flags(cmd, o, f);
    f.backend = cmd->add_option("--backend", o.backend_spec,
                                "backend spec: markov:<file> | trace:<file> | remote:<url> | delay:<ms>:<spec>");
    f.protocol = cmd->add_option("--protocol", o.protocol, "evaluation protocol")
                     ->check(CLI::IsMember({"non-sliding", "non_sliding", "sliding"}));
    f.window = cmd->add_option("--window", o.window, "sliding window size w");
    f.stride = cmd->add_option("--stride", o.stride, "window stride s (default: w, disjoint chunks)");
    f.context = cmd->add_option("--context", o.context, "context visible to each window")
                    ->check(CLI::IsMember({"window-local", "window_local", "full-prefix", "full_prefix"}));
    f.aggregation = cmd->add_option("--aggregation", o.aggregation, "loss aggregation rule")
                        ->check(CLI::IsMember({"window-mean", "window_mean", "token-mean", "token_mean"}));
    f.skip = cmd->add_option("--skip-first-token", o.skip,
                             "exclude each context-free first token from metrics")
                 ->check(CLI::IsMember({"auto", "on", "off"}));
    f.include_remainder = cmd->add_flag("--include-remainder", o.include_remainder,
                                        "score the shorter tail window past the last full window");
    f.lengths = cmd->add_option("--lengths", o.lengths, "sequence length(s), comma-separated")
                    ->delimiter(',');
    if (with_window_sizes) {
        f.window_sizes = cmd->add_option("--window-sizes", o.window_sizes,
                                         "window sizes to sweep, comma-separated")
                             ->delimiter(',');
    }
    f.out_json = cmd->add_option("--out-json", o.out_json, "write a JSON report here");
    f.out_csv  = cmd->add_option("--out-csv", o.out_csv, "write a CSV report here");
    f.out_plot = cmd->add_option("--out-plot", o.out_plot, "write long-format plot CSV here");
    f.seed = cmd->add_option("--seed", o.seed, "seed echoed into the run manifest");
    f.parallelism = cmd->add_option("--parallelism", o.parallelism,
                                    "max concurrent backend calls (default 1)");
    add_config_flag(cmd, o);
}

// --------------------------------------------------------------- evaluation

CorpusFormat corpus_format_from(const std::string & name) {
    if (name == "jsonl") {
        return CorpusFormat::jsonl_tokens;
    }
    if (name == "text") {
        return CorpusFormat::raw_text;
    }
    throw config_error("unknown corpus format \"" + name + "\" (expected jsonl or text)");
}

ProtocolConfig build_protocol(const eval_options & o, Backend & backend) {
    ProtocolConfig config;
    const auto variant = variant_from_string(o.protocol);
    if (!variant) {
        throw config_error("unknown protocol \"" + o.protocol + "\"");
    }
    config.variant = *variant;

    if (o.window < 1) {
        throw config_error("--window must be >= 1");
    }
    config.plan.window_size = o.window;
    if (o.stride != 0) {
        if (o.stride < 1) {
            throw config_error("--stride must be >= 1");
        }
        config.plan.stride = o.stride;
    }
    const auto policy = context_policy_from_string(o.context);
    if (!policy) {
        throw config_error("unknown context policy \"" + o.context + "\"");
    }
    config.plan.context_policy    = *policy;
    config.plan.include_remainder = o.include_remainder;

    const auto agg = aggregation_from_string(o.aggregation);
    if (!agg) {
        throw config_error("unknown aggregation \"" + o.aggregation + "\"");
    }
    config.aggregation = *agg;

    if (o.skip == "auto") {
        config.skip_first_token = backend.auto_skip_first_token();
    } else if (o.skip == "on") {
        config.skip_first_token = true;
    } else if (o.skip == "off") {
        config.skip_first_token = false;
    } else {
        throw config_error("--skip-first-token must be auto, on, or off");
    }
    return config;
}

json resolved_config_json(const char * subcommand, const eval_options & o,
                          const ProtocolConfig & config) {
    json cfg;
    cfg["subcommand"]    = subcommand;
    cfg["corpus"]        = o.corpus;
    cfg["corpus_format"] = o.corpus_format;
    cfg["backend"]       = o.backend_spec;
    cfg["protocol"]      = protocol_to_json(config);
    cfg["lengths"]       = o.lengths;
    if (!o.window_sizes.empty()) {
        cfg["window_sizes"] = o.window_sizes;
    }
    cfg["seed"]        = o.seed;
    cfg["parallelism"] = o.parallelism;
    return cfg;
}

void print_record_line(const EvalRecord & r) {
    const std::string window_text =
        r.protocol.variant == Variant::sliding
            ? " w=" + std::to_string(r.protocol.plan.window_size) +
              " s=" + std::to_string(r.protocol.plan.effective_stride())
            : "";
    std::printf("%s  %s%s  L=%lld  ppl=%.4f  acc=%.4f%%  tokens=%lld  cost=%lld  "
                "lat_mean=%.6fs  makespan=%.6fs\n",
                r.model_id.c_str(), to_string(r.protocol.variant), window_text.c_str(),
                (long long) r.seq_len, r.ppl, r.accuracy_pct, (long long) r.scored_tokens,
                (long long) r.cost_tokens, r.latency.mean_s, r.makespan_s);
}

void emit_reports(const RunManifest & manifest, const std::vector<EvalRecord> & records,
                  const std::vector<DeltaRow> & deltas,
                  const std::vector<std::pair<std::int64_t, EvalRecord>> & sweep,
                  const std::string & x_name, const eval_options & o) {
    if (!o.out_json.empty()) {
        emit_json(manifest, records, deltas, o.out_json);
    }
    if (!o.out_csv.empty()) {
        emit_csv(records, o.out_csv);
    }
    if (!o.out_plot.empty() && !sweep.empty()) {
        emit_plotdata(sweep, x_name, o.out_plot);
    }
}

int cmd_eval(const char * kind, eval_options & o, std::shared_ptr<Backend> backend) {
    if (o.corpus.empty()) {
        throw config_error("--corpus is required");
    }
    if (!backend && o.backend_spec.empty()) {
        throw config_error("--backend is required");
    }
    if (o.parallelism < 1) {
        throw config_error("--parallelism must be >= 1");
    }
    const Corpus corpus = load_documents(o.corpus, corpus_format_from(o.corpus_format));
    if (!backend) {
        backend = parse_backend_spec(o.backend_spec);
    }

    const ProtocolConfig config = build_protocol(o, *backend);
    RunOptions run_options;
    run_options.parallelism = o.parallelism;

    const std::string kind_name(kind);
    std::vector<EvalRecord> records;
    std::vector<DeltaRow> deltas;
    std::vector<std::pair<std::int64_t, EvalRecord>> sweep;
    std::string x_name = "seq_len";

    if (kind_name == "score") {
        if (o.lengths.size() != 1) {
            throw config_error("score needs exactly one --lengths value");
        }
        const auto sequences = pack_sequences(corpus.docs, o.lengths[0], PackPolicy::concat_and_chunk);
        EvalRecord record = run_protocol(*backend, sequences, config, run_options);
        sweep.emplace_back(o.lengths[0], record);
        records.push_back(std::move(record));
    } else if (kind_name == "sweep-window") {
        if (o.lengths.size() != 1) {
            throw config_error("sweep-window needs exactly one --lengths value (the packing length)");
        }
        if (o.window_sizes.empty()) {
            throw config_error("--window-sizes is required for sweep-window");
        }
        const auto sequences = pack_sequences(corpus.docs, o.lengths[0], PackPolicy::concat_and_chunk);
        sweep = window_sweep(*backend, sequences, o.window_sizes, config, run_options);
        x_name = "window_size";
        for (const auto & [w, record] : sweep) {
            records.push_back(record);
        }
    } else if (kind_name == "sweep-length") {
        if (o.lengths.empty()) {
            throw config_error("--lengths is required for sweep-length");
        }
        sweep = length_sweep(*backend, corpus.docs, o.lengths, config, run_options);
        for (const auto & [L, record] : sweep) {
            records.push_back(record);
        }
    } else {  // compare
        if (o.lengths.empty()) {
            throw config_error("--lengths is required for compare");
        }
        CompareResult result = compare_protocols(*backend, corpus.docs, o.lengths, o.window,
                                                 config, run_options);
        deltas = std::move(result.rows);
        for (auto & [ns, s] : result.records) {
            records.push_back(std::move(ns));
            records.push_back(std::move(s));
        }
    }

    RunManifest manifest;
    manifest.tool_version       = LENBENCH_VERSION;
    manifest.config             = resolved_config_json(kind, o, config);
    manifest.corpus_fingerprint = file_fingerprint(o.corpus);
    manifest.backend            = backend->info();
    manifest.timestamp          = current_timestamp_utc();

    emit_reports(manifest, records, deltas, sweep, x_name, o);

    if (!deltas.empty()) {
        std::fputs(render_delta_table(deltas).c_str(), stdout);
    } else {
        for (const auto & record : records) {
            print_record_line(record);
        }
    }
    return 0;
}

// ------------------------------------------------------- utility subcommands

int cmd_fit_markov(eval_options & o) {
    if (o.corpus.empty()) {
        throw config_error("--corpus is required");
    }
    if (o.out_model.empty()) {
        throw config_error("--out-model is required");
    }
    if (o.order < 0) {
        throw config_error("--order must be >= 0");
    }
    if (!(o.lambda > 0.0)) {
        throw config_error("--lambda must be > 0");
    }
    const Corpus corpus = load_documents(o.corpus, corpus_format_from(o.corpus_format));
    const MarkovModel model = fit_markov(corpus, o.order, o.lambda);
    save_markov(model, o.out_model);
    std::printf("wrote markov-k%d model (V=%lld, lambda=%g) to %s\n", model.order,
                (long long) model.vocab_size, model.lambda, o.out_model.c_str());
    return 0;
}

int cmd_serve(eval_options & o) {
    if (o.model_path.empty()) {
        throw config_error("--model is required");
    }
    ScoreServer server(load_markov(o.model_path), o.host, o.port);
    server.start();
    std::printf("listening on %s\n", server.url().c_str());
    std::fflush(stdout);
    std::promise<void>().get_future().wait();  // serve until the process is interrupted
    return 0;
}

int cmd_record_trace(eval_options & o) {
    if (o.trace_out.empty()) {
        throw config_error("--trace-out is required");
    }
    if (o.run_kind != "score" && o.run_kind != "sweep-window" && o.run_kind != "sweep-length" &&
        o.run_kind != "compare") {
        throw config_error("--run must be one of score, sweep-window, sweep-length, compare");
    }
    if (o.backend_spec.empty()) {
        throw config_error("--backend is required");
    }
    auto recorder = record_trace(parse_backend_spec(o.backend_spec), o.trace_out);
    const int rc = cmd_eval(o.run_kind.c_str(), o, recorder);
    recorder->close();
    std::printf("trace written to %s\n", o.trace_out.c_str());
    return rc;
}

}  // namespace

int run_cli(int argc, const char * const * argv) {
    eval_options o;
    flag_refs score_f, sweep_w_f, sweep_l_f, compare_f, fit_f, serve_f, record_f;

    CLI::App app{"length-aware language model evaluation: sliding vs non-sliding "
                 "perplexity, accuracy, latency, and cost"};
    app.require_subcommand(1);
    app.set_version_flag("--version", LENBENCH_VERSION);

    CLI::App * score = app.add_subcommand("score", "run one protocol at one sequence length");
    add_eval_flags(score, o, score_f, /*with_window_sizes=*/false);

    CLI::App * sweep_w = app.add_subcommand("sweep-window", "sliding runs across window sizes");
    add_eval_flags(sweep_w, o, sweep_w_f, /*with_window_sizes=*/true);

    CLI::App * sweep_l = app.add_subcommand("sweep-length", "runs across sequence lengths");
    add_eval_flags(sweep_l, o, sweep_l_f, /*with_window_sizes=*/false);

    CLI::App * compare = app.add_subcommand("compare",
                                            "non-sliding vs sliding deltas across lengths");
    add_eval_flags(compare, o, compare_f, /*with_window_sizes=*/false);

    CLI::App * fit = app.add_subcommand("fit-markov", "fit a smoothed Markov model to a corpus");
    add_corpus_flags(fit, o, fit_f);
    fit_f.order     = fit->add_option("--order", o.order, "model order k (default 2)");
    fit_f.lambda    = fit->add_option("--lambda", o.lambda, "add-lambda smoothing mass (default 0.1)");
    fit_f.out_model = fit->add_option("--out-model", o.out_model, "model file to write");
    add_config_flag(fit, o);

    CLI::App * serve = app.add_subcommand("serve", "serve a Markov model over the wire protocol");
    serve_f.model = serve->add_option("--model", o.model_path, "markov model file to serve");
    serve_f.host  = serve->add_option("--host", o.host, "bind address (default 127.0.0.1)");
    serve_f.port  = serve->add_option("--port", o.port, "bind port; 0 picks a free port (default 8080)");
    add_config_flag(serve, o);

    CLI::App * record = app.add_subcommand("record-trace",
                                           "run an evaluation while recording a replayable trace");
    add_eval_flags(record, o, record_f, /*with_window_sizes=*/true);
    record_f.run_kind = record->add_option("--run", o.run_kind,
                                           "which evaluation to record")
                            ->check(CLI::IsMember({"score", "sweep-window", "sweep-length", "compare"}));
    record_f.trace_out = record->add_option("--trace-out", o.trace_out, "trace file to write");

    try {
        app.parse(argc, argv);

        if (score->parsed()) {
            merge_config(o, score_f);
            return cmd_eval("score", o, nullptr);
        }
        if (sweep_w->parsed()) {
            merge_config(o, sweep_w_f);
            return cmd_eval("sweep-window", o, nullptr);
        }
        if (sweep_l->parsed()) {
            merge_config(o, sweep_l_f);
            return cmd_eval("sweep-length", o, nullptr);
        }
        if (compare->parsed()) {
            merge_config(o, compare_f);
            return cmd_eval("compare", o, nullptr);
        }
        if (fit->parsed()) {
            merge_config(o, fit_f);
            return cmd_fit_markov(o);
        }
        if (serve->parsed()) {
            merge_config(o, serve_f);
            return cmd_serve(o);
        }
        if (record->parsed()) {
            merge_config(o, record_f);
            return cmd_record_trace(o);
        }
        throw config_error("no subcommand given");
    } catch (const CLI::CallForHelp &) {
        std::fputs(app.help().c_str(), stdout);
        return 0;
    } catch (const CLI::CallForVersion &) {
        std::printf("%s\n", LENBENCH_VERSION);
        return 0;
    } catch (const CLI::ParseError & e) {
        std::fprintf(stderr, "lenbench: %s\n", e.what());
        std::fprintf(stderr, "run 'lenbench --help' for usage\n");
        return 1;
    } catch (const error & e) {
        const char * kind = e.kind() == error_kind::config  ? "config error"
                            : e.kind() == error_kind::backend ? "backend error"
                                                              : "data error";
        const char * retry = e.kind() == error_kind::backend && e.retryable() ? " (retryable)" : "";
        std::fprintf(stderr, "lenbench: %s%s: %s\n", kind, retry, e.what());
        switch (e.kind()) {
            case error_kind::config:  return 1;
            case error_kind::backend: return 2;
            case error_kind::data:    return 3;
        }
        return 1;
    } catch (const std::exception & e) {
        std::fprintf(stderr, "lenbench: error: %s\n", e.what());
        return 1;
    }
}

}  // namespace lenbench
