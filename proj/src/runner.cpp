#include "lenbench/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "lenbench/sysmetrics.hpp"

namespace lenbench {

namespace {

// one backend call: a window of one sequence (non-sliding = single full-sequence window)
struct window_task {
    std::int64_t seq_index = 0;  // index into the sequences vector
    Window       window;
};

struct task_result {
    WindowStat   stat;          // nll over included tokens, included-token count
    std::int64_t correct = 0;   // argmax hits among included tokens
    CallSample   sample;
    std::exception_ptr error;
};

// re-throw a harness error with the failing (sequence, window) location attached
[[noreturn]] void rethrow_located(const std::exception_ptr & ep, const TokenSequence & seq,
                                  const Window & win) {
    const std::string where = "seq " + std::to_string(seq.seq_id) + " window [" +
                              std::to_string(win.start) + "," + std::to_string(win.end) + "): ";
    try {
        std::rethrow_exception(ep);
    } catch (const config_error & e) {
        throw config_error(where + e.what());
    } catch (const data_error & e) {
        throw data_error(where + e.what());
    } catch (const backend_error & e) {
        throw backend_error(where + e.what(), e.retryable());
    } catch (const error & e) {
        throw error(e.kind(), where + e.what(), e.retryable());
    } catch (const std::exception & e) {
        throw backend_error(where + e.what());
    }
}

}  // namespace

EvalRecord run_protocol(Backend & backend,
                        const std::vector<TokenSequence> & sequences,
                        const ProtocolConfig & config,
                        const RunOptions & options) {
    if (sequences.empty()) {
        throw data_error("run_protocol: no sequences to evaluate");
    }
    const std::int64_t T = (std::int64_t) sequences[0].tokens.size();
    for (const auto & seq : sequences) {
        if ((std::int64_t) seq.tokens.size() != T) {
            throw data_error("run_protocol: mixed sequence lengths (" + std::to_string(T) + " vs " +
                             std::to_string(seq.tokens.size()) + " at seq " + std::to_string(seq.seq_id) + ")");
        }
    }
    if (options.parallelism < 1) {
        throw config_error("run_protocol: parallelism must be >= 1");
    }

    stop_watch run_clock;

    // plan the full task list up front, in (sequence, window) order
    std::vector<Window> windows;
    if (config.variant == Variant::sliding) {
        windows = plan_windows(T, config.plan);
    } else {
        Window whole;
        whole.start         = 0;
        whole.end           = T;
        whole.context_start = 0;
        windows.push_back(whole);
    }

    std::vector<window_task> tasks;
    tasks.reserve(sequences.size() * windows.size());
    for (std::int64_t si = 0; si < (std::int64_t) sequences.size(); si++) {
        for (const auto & win : windows) {
            tasks.push_back({si, win});
        }
    }
    const std::int64_t windows_per_seq = (std::int64_t) windows.size();

    std::vector<task_result> results(tasks.size());

    // RSS is sampled by whichever worker completes a sequence's last window
    std::vector<std::atomic<std::int64_t>> seq_remaining(sequences.size());
    for (auto & r : seq_remaining) {
        r.store(windows_per_seq, std::memory_order_relaxed);
    }
    std::mutex rss_mutex;
    std::optional<std::int64_t> rss_peak;

    auto run_task = [&](std::int64_t task_index) {
        const window_task & task = tasks[(std::size_t) task_index];
        const TokenSequence & seq = sequences[(std::size_t) task.seq_index];
        task_result & res = results[(std::size_t) task_index];
        try {
            const Window & win = task.window;
            const std::span<const token_t> all(seq.tokens);
            const auto context = all.subspan((std::size_t) win.context_start,
                                             (std::size_t) (win.start - win.context_start));
            const auto targets = all.subspan((std::size_t) win.start,
                                             (std::size_t) (win.end - win.start));

            res.sample.context_len = (std::int64_t) context.size();
            res.sample.target_len  = (std::int64_t) targets.size();
            auto scores = timed_call(res.sample, [&] { return backend.score_window(context, targets); });

            if ((std::int64_t) scores.size() != res.sample.target_len) {
                throw backend_error("backend returned " + std::to_string(scores.size()) +
                                    " scores for " + std::to_string(targets.size()) + " targets");
            }

            // a token whose visible context is empty is skipped when configured:
            // position == context_start means nothing precedes it in this call
            kahan_sum nll;
            for (std::int64_t j = 0; j < (std::int64_t) scores.size(); j++) {
                const double lp = scores[(std::size_t) j].logprob_nats;
                if (!std::isfinite(lp) || lp > 0.0) {
                    throw backend_error("backend returned invalid logprob " + format_g17(lp) +
                                        " at position " + std::to_string(win.start + j));
                }
                if (config.skip_first_token && win.start + j == win.context_start) {
                    continue;
                }
                nll.add(-lp);
                res.stat.scored++;
                if (scores[(std::size_t) j].argmax_id == targets[(std::size_t) j]) {
                    res.correct++;
                }
            }
            res.stat.nll_sum = nll.value();
        } catch (...) {
            res.error = std::current_exception();
        }

        if (seq_remaining[(std::size_t) task.seq_index].fetch_sub(1, std::memory_order_acq_rel) == 1) {
            if (auto rss = current_rss_bytes()) {
                std::lock_guard<std::mutex> lock(rss_mutex);
                if (!rss_peak || *rss > *rss_peak) {
                    rss_peak = *rss;
                }
            }
        }
    };

    const int workers = (int) std::min<std::int64_t>(
        {(std::int64_t) options.parallelism, (std::int64_t) backend.max_in_flight(),
         (std::int64_t) tasks.size()});
    if (workers <= 1) {
        for (std::int64_t i = 0; i < (std::int64_t) tasks.size(); i++) {
            run_task(i);
            if (results[(std::size_t) i].error) {
                break;  // serial mode stops at the first failure
            }
        }
    } else {
        std::atomic<std::int64_t> next{0};
        std::atomic<bool> failed{false};
        std::vector<std::thread> pool;
        pool.reserve((std::size_t) workers);
        for (int w = 0; w < workers; w++) {
            pool.emplace_back([&] {
                while (!failed.load(std::memory_order_acquire)) {
                    const std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
                    if (i >= (std::int64_t) tasks.size()) {
                        return;
                    }
                    run_task(i);
                    if (results[(std::size_t) i].error) {
                        failed.store(true, std::memory_order_release);
                    }
                }
            });
        }
        for (auto & t : pool) {
            t.join();
        }
    }

    // single-threaded reduction in task-index order: first error wins, sums are
    // combined with compensated summation so thread count cannot change results
    for (std::size_t i = 0; i < tasks.size(); i++) {
        if (results[i].error) {
            rethrow_located(results[i].error, sequences[(std::size_t) tasks[i].seq_index], tasks[i].window);
        }
    }

    std::vector<WindowStat> window_stats;
    window_stats.reserve(results.size());
    std::vector<CallSample> calls;
    calls.reserve(results.size());
    kahan_sum nll_total;
    std::int64_t scored_total  = 0;
    std::int64_t correct_total = 0;
    for (const auto & res : results) {
        window_stats.push_back(res.stat);
        calls.push_back(res.sample);
        nll_total.add(res.stat.nll_sum);
        scored_total += res.stat.scored;
        correct_total += res.correct;
    }
    if (scored_total == 0) {
        throw config_error("run_protocol: configuration leaves no scored tokens "
                           "(skip_first_token with single-token windows?)");
    }

    const AggregateResult agg = aggregate(window_stats, config.aggregation);

    const BackendInfo backend_info = backend.info();  // queried after the run for final peak memory

    EvalRecord record;
    record.model_id         = backend_info.model_id;
    record.protocol         = config;
    record.seq_len          = T;
    record.n_sequences      = (std::int64_t) sequences.size();
    record.scored_tokens    = scored_total;
    record.nll_sum_nats     = nll_total.value();
    record.ppl              = agg.ppl;
    record.accuracy_pct     = 100.0 * (double) correct_total / (double) scored_total;
    record.cost_tokens      = cost_tokens(calls);
    record.latency          = latency_stats(calls);
    record.makespan_s       = run_clock.elapsed_s();
    record.skip_first_token = config.skip_first_token;

    // peak memory: max of harness RSS samples and the backend's self-reported peak
    record.peak_mem_bytes = rss_peak;
    if (backend_info.reported_peak_mem_bytes &&
        (!record.peak_mem_bytes || *backend_info.reported_peak_mem_bytes > *record.peak_mem_bytes)) {
        record.peak_mem_bytes = backend_info.reported_peak_mem_bytes;
    }
    return record;
}

std::vector<std::pair<std::int64_t, EvalRecord>> window_sweep(Backend & backend,
                                                              const std::vector<TokenSequence> & sequences,
                                                              std::vector<std::int64_t> sizes,
                                                              const ProtocolConfig & config_template,
                                                              const RunOptions & options) {
    if (sizes.empty()) {
        throw config_error("window_sweep: no window sizes given");
    }
    for (std::int64_t w : sizes) {
        if (w < 1) {
            throw config_error("window_sweep: window size must be >= 1, got " + std::to_string(w));
        }
    }
    std::sort(sizes.begin(), sizes.end());

    std::vector<std::pair<std::int64_t, EvalRecord>> out;
    out.reserve(sizes.size());
    for (std::int64_t w : sizes) {
        ProtocolConfig config = config_template;
        config.variant          = Variant::sliding;
        config.plan.window_size = w;
        out.emplace_back(w, run_protocol(backend, sequences, config, options));
    }
    return out;
}

std::vector<std::pair<std::int64_t, EvalRecord>> length_sweep(Backend & backend,
                                                              const std::vector<Document> & docs,
                                                              std::vector<std::int64_t> lengths,
                                                              const ProtocolConfig & config_template,
                                                              const RunOptions & options) {
    if (lengths.empty()) {
        throw config_error("length_sweep: no lengths given");
    }
    std::sort(lengths.begin(), lengths.end());

    std::vector<std::pair<std::int64_t, EvalRecord>> out;
    out.reserve(lengths.size());
    for (std::int64_t L : lengths) {
        const auto sequences = pack_sequences(docs, L, PackPolicy::concat_and_chunk);
        out.emplace_back(L, run_protocol(backend, sequences, config_template, options));
    }
    return out;
}

CompareResult compare_protocols(Backend & backend,
                                const std::vector<Document> & docs,
                                std::vector<std::int64_t> lengths,
                                std::int64_t window_size,
                                const ProtocolConfig & config_template,
                                const RunOptions & options) {
    if (lengths.empty()) {
        throw config_error("compare_protocols: no lengths given");
    }
    if (window_size < 1) {
        throw config_error("compare_protocols: window size must be >= 1");
    }
    std::sort(lengths.begin(), lengths.end());

    CompareResult result;
    for (std::int64_t L : lengths) {
        const auto sequences = pack_sequences(docs, L, PackPolicy::concat_and_chunk);

        ProtocolConfig ns = config_template;
        ns.variant = Variant::non_sliding;

        ProtocolConfig s = config_template;
        s.variant          = Variant::sliding;
        s.plan.window_size = window_size;
        s.plan.stride      = window_size;  // disjoint chunks

        EvalRecord rec_ns = run_protocol(backend, sequences, ns, options);
        EvalRecord rec_s  = run_protocol(backend, sequences, s, options);
        result.rows.push_back(delta_metrics(rec_ns, rec_s));
        result.records.emplace_back(std::move(rec_ns), std::move(rec_s));
    }
    return result;
}

}  // namespace lenbench
