#include "lasp/pipeline_sim.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>

#include "lasp/errors.hpp"

namespace lasp {

std::int64_t StageTiming::cycles(std::int64_t length) const {
    std::int64_t total = 0;
    for (const auto& t : terms) total += (t.per_token * length + t.fixed + t.divisor - 1) / t.divisor;
    return total;
}

void PipelineConfig::validate() const {
    if (batch.empty()) throw EmptyBatch("pipeline batch is empty");
    if (stages.empty()) throw InvalidConfig("pipeline needs at least one stage");
    if (layers == 0) throw InvalidConfig("pipeline needs at least one layer");
    if (buffer_depth == 0) throw InvalidConfig("buffer_depth must be >= 1");
    if (!(clock_hz > 0.0)) throw InvalidConfig("clock_hz must be positive");
    for (const auto& s : stages) {
        if (s.replicas < 1) throw InvalidConfig("stage replication must be >= 1");
        for (const auto& t : s.terms)
            if (t.per_token < 0 || t.fixed < 0 || t.divisor < 1) throw InvalidConfig("invalid stage latency term");
    }
    for (const auto& t : batch)
        if (t.length < 1) throw InvalidConfig("task " + std::to_string(t.id) + " has length < 1");
}

std::vector<StageTiming> stage_timings(const OperatorGraph& g, const StageAllocation& alloc,
                                       const ResourceBudget& budget, std::int64_t s_avg) {
    std::vector<StageTiming> out;
    for (std::size_t k = 0; k < alloc.stage_count(); ++k) {
        StageTiming st;
        st.replicas = k < alloc.replication.size() ? alloc.replication[k] : 1;
        std::int64_t heaviest = -1;
        for (NodeId v : alloc.stages[k]) {
            const auto& node = g.node(v);
            st.terms.push_back({node.per_token, node.fixed, alloc.parallelism.at(v) * units_per_instance(node, budget)});
            if (operator_weight(node, s_avg) > heaviest) {
                heaviest = operator_weight(node, s_avg);
                st.state = node.state;
            }
        }
        out.push_back(std::move(st));
    }
    return out;
}

std::vector<StageTiming> linear_stages(const std::vector<std::int64_t>& per_token_cycles) {
    std::vector<StageTiming> out;
    for (std::size_t k = 0; k < per_token_cycles.size(); ++k) {
        StageTiming st;
        st.terms.push_back({per_token_cycles[k], 0, 1});
        st.state = k == 0 ? ControllerState::StateMM : (k + 1 == per_token_cycles.size() && k > 1
                                                             ? ControllerState::StateFF
                                                             : ControllerState::StateAtten);
        out.push_back(std::move(st));
    }
    return out;
}

std::vector<SequenceTask> make_batch(const std::vector<std::int64_t>& lengths) {
    std::vector<SequenceTask> out;
    out.reserve(lengths.size());
    for (std::size_t i = 0; i < lengths.size(); ++i) out.push_back({i, lengths[i], i});
    return out;
}

std::int64_t PipelineTrace::makespan() const noexcept {
    if (events.empty()) return 0;
    std::int64_t lo = events.front().start;
    std::int64_t hi = events.front().end;
    for (const auto& e : events) {
        lo = std::min(lo, e.start);
        hi = std::max(hi, e.end);
    }
    return hi - lo;
}

std::vector<SequenceTask> sort_batch(std::vector<SequenceTask> tasks) {
    if (tasks.empty()) throw EmptyBatch("cannot sort an empty batch");
    std::stable_sort(tasks.begin(), tasks.end(), [](const SequenceTask& a, const SequenceTask& b) {
        if (a.length != b.length) return a.length > b.length;
        return a.arrival < b.arrival;
    });
    return tasks;
}

std::int64_t stage_latency_cycles(std::size_t stage, std::int64_t length, const PipelineConfig& config) {
    if (length < 1) throw InvalidConfig("stage latency needs length >= 1");
    return config.stages.at(stage).cycles(length);
}

double stage_latency(std::size_t stage, std::int64_t length, const PipelineConfig& config) {
    return static_cast<double>(stage_latency_cycles(stage, length, config)) / config.clock_hz;
}

namespace {

// Runs one schedule over tasks already in dispatch order, starting at `origin`.
// Appends to `trace`.
void run_pipeline(const PipelineConfig& config, const std::vector<TraceTask>& order, std::int64_t origin,
                  PipelineTrace& trace) {
    const std::size_t K = config.stages.size();
    const std::size_t B = order.size();
    const std::size_t L = config.layers;

    // latency[k][p]
    std::vector<std::vector<std::int64_t>> latency(K, std::vector<std::int64_t>(B));
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t p = 0; p < B; ++p) latency[k][p] = config.stages[k].cycles(order[p].effective_length);

    using Item = std::pair<std::size_t, std::size_t>;  // (layer, position)
    std::vector<std::set<Item>> ready(K);
    std::vector<std::vector<bool>> replica_busy(K);
    std::vector<std::size_t> inflight(K, 0);
    std::vector<std::size_t> waiting(K, 0);  // finished at k, not yet started at k+1
    for (std::size_t k = 0; k < K; ++k) replica_busy[k].assign(static_cast<std::size_t>(config.stages[k].replicas), false);
    for (std::size_t p = 0; p < B; ++p) ready[0].insert({0, p});
    // Each replica carries its own output buffer.
    std::vector<std::size_t> capacity(K);
    for (std::size_t k = 0; k < K; ++k) capacity[k] = config.buffer_depth * static_cast<std::size_t>(config.stages[k].replicas);

    // (end, stage, layer, position, replica), popped in ascending order.
    using Completion = std::tuple<std::int64_t, std::size_t, std::size_t, std::size_t, std::size_t>;
    std::priority_queue<Completion, std::vector<Completion>, std::greater<>> pending;

    auto dispatch = [&](std::int64_t now) {
        for (;;) {
            std::size_t best_stage = K;
            Item best_item{};
            for (std::size_t k = 0; k < K; ++k) {
                if (ready[k].empty()) continue;
                if (k + 1 < K && inflight[k] + waiting[k] >= capacity[k]) continue;
                const auto& rb = replica_busy[k];
                if (std::find(rb.begin(), rb.end(), false) == rb.end()) continue;
                const Item cand = *ready[k].begin();
                if (best_stage == K || cand < best_item) {
                    best_stage = k;
                    best_item = cand;
                }
            }
            if (best_stage == K) return;
            const std::size_t k = best_stage;
            ready[k].erase(ready[k].begin());
            if (k > 0) --waiting[k - 1];
            ++inflight[k];
            auto& rb = replica_busy[k];
            const auto replica = static_cast<std::size_t>(std::find(rb.begin(), rb.end(), false) - rb.begin());
            rb[replica] = true;
            const auto [layer, pos] = best_item;
            const std::int64_t end = now + latency[k][pos];
            trace.events.push_back({k, replica, order[pos].id, layer, config.stages[k].state, now, end});
            pending.emplace(end, k, layer, pos, replica);
        }
    };

    dispatch(origin);
    while (!pending.empty()) {
        const std::int64_t now = std::get<0>(pending.top());
        while (!pending.empty() && std::get<0>(pending.top()) == now) {
            const auto [end, k, layer, pos, replica] = pending.top();
            pending.pop();
            replica_busy[k][replica] = false;
            --inflight[k];
            if (k + 1 < K) {
                ++waiting[k];
                ready[k + 1].insert({layer, pos});
            } else if (layer + 1 < L) {
                ready[0].insert({layer + 1, pos});
            }
        }
        dispatch(now);
    }
}

PipelineTrace empty_trace(const PipelineConfig& config, std::string label) {
    PipelineTrace trace;
    trace.label = std::move(label);
    trace.layers = config.layers;
    trace.clock_hz = config.clock_hz;
    for (const auto& s : config.stages) trace.replicas.push_back(s.replicas);
    return trace;
}

std::vector<TraceTask> to_trace_tasks(const std::vector<SequenceTask>& sorted) {
    std::vector<TraceTask> out;
    out.reserve(sorted.size());
    for (const auto& t : sorted) out.push_back({t.id, t.length, t.length});
    return out;
}

}  // namespace

PipelineTrace simulate(const PipelineConfig& config) {
    config.validate();
    PipelineTrace trace = empty_trace(config, "length-aware");
    trace.tasks = to_trace_tasks(sort_batch(config.batch));
    run_pipeline(config, trace.tasks, 0, trace);
    return trace;
}

PipelineTrace baseline_padded(const PipelineConfig& config) {
    config.validate();
    PipelineTrace trace = empty_trace(config, "padded");
    trace.tasks = to_trace_tasks(sort_batch(config.batch));
    const std::int64_t max_len = trace.tasks.front().length;
    for (auto& t : trace.tasks) t.effective_length = max_len;
    run_pipeline(config, trace.tasks, 0, trace);
    return trace;
}

PipelineTrace baseline_microbatch(const PipelineConfig& config, std::size_t micro_size) {
    config.validate();
    if (micro_size == 0) throw InvalidConfig("micro-batch size must be >= 1");
    PipelineTrace trace = empty_trace(config, "microbatch-" + std::to_string(micro_size));
    trace.tasks = to_trace_tasks(sort_batch(config.batch));
    std::int64_t origin = 0;
    for (std::size_t lo = 0; lo < trace.tasks.size(); lo += micro_size) {
        const std::size_t hi = std::min(lo + micro_size, trace.tasks.size());
        std::vector<TraceTask> group(trace.tasks.begin() + static_cast<std::ptrdiff_t>(lo),
                                     trace.tasks.begin() + static_cast<std::ptrdiff_t>(hi));
        for (auto& t : group) t.effective_length = group.front().length;
        for (std::size_t i = lo; i < hi; ++i) trace.tasks[i].effective_length = group.front().length;
        const std::size_t first_event = trace.events.size();
        run_pipeline(config, group, origin, trace);
        for (std::size_t e = first_event; e < trace.events.size(); ++e) origin = std::max(origin, trace.events[e].end);
    }
    return trace;
}

std::vector<StageUtilization> utilization(const PipelineTrace& trace, UtilizationWindow window) {
    if (trace.events.empty()) throw EmptyTrace("utilization of an empty trace");
    const std::size_t K = trace.stage_count();
    std::vector<StageUtilization> out(K);
    std::vector<std::int64_t> first(K, INT64_MAX);
    std::vector<std::int64_t> last(K, INT64_MIN);
    std::int64_t global_first = INT64_MAX;
    std::int64_t global_last = INT64_MIN;
    for (const auto& e : trace.events) {
        out[e.stage].busy += e.end - e.start;
        first[e.stage] = std::min(first[e.stage], e.start);
        last[e.stage] = std::max(last[e.stage], e.end);
        global_first = std::min(global_first, e.start);
        global_last = std::max(global_last, e.end);
    }
    for (std::size_t k = 0; k < K; ++k) {
        out[k].stage = k;
        std::int64_t window_len = 0;
        if (window == UtilizationWindow::Global) {
            window_len = global_last - global_first;
        } else if (first[k] != INT64_MAX) {
            window_len = last[k] - first[k];
        }
        out[k].span = window_len * trace.replicas[k];
        out[k].fraction = out[k].span > 0 ? static_cast<double>(out[k].busy) / static_cast<double>(out[k].span)
                                          : (out[k].busy == 0 && first[k] != INT64_MAX ? 1.0 : 0.0);
    }
    return out;
}

std::size_t bottleneck_stage(const PipelineTrace& trace) {
    if (trace.events.empty()) throw EmptyTrace("bottleneck of an empty trace");
    std::vector<long double> per_replica(trace.stage_count(), 0.0L);
    for (const auto& e : trace.events) per_replica[e.stage] += static_cast<long double>(e.end - e.start);
    std::size_t best = 0;
    for (std::size_t k = 0; k < per_replica.size(); ++k) {
        per_replica[k] /= trace.replicas[k];
        if (per_replica[k] > per_replica[best]) best = k;
    }
    return best;
}

std::int64_t stage_idle_cycles(const PipelineTrace& trace, std::size_t stage) {
    const auto u = utilization(trace, UtilizationWindow::PerStage);
    return u.at(stage).span - u.at(stage).busy;
}

std::vector<std::string> check_trace(const PipelineTrace& trace, std::size_t buffer_depth) {
    std::vector<std::string> problems;
    auto report = [&](const std::string& msg) {
        if (problems.size() < 32) problems.push_back(msg);
    };
    const std::size_t K = trace.stage_count();
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, const TraceEvent*> by_item;  // (task, layer, stage)
    for (const auto& e : trace.events) {
        if (e.stage >= K) {
            report("event on unknown stage " + std::to_string(e.stage));
            continue;
        }
        if (e.end <= e.start) report("non-positive interval for task " + std::to_string(e.task));
        if (e.replica >= static_cast<std::size_t>(trace.replicas[e.stage])) report("replica index out of range");
        if (!by_item.emplace(std::make_tuple(e.task, e.layer, e.stage), &e).second) {
            report("duplicate work item task " + std::to_string(e.task) + " layer " + std::to_string(e.layer));
        }
    }
    if (by_item.size() != trace.tasks.size() * trace.layers * K) report("trace does not cover every work item");

    // Causality.
    for (const auto& [key, e] : by_item) {
        const auto [task, layer, stage] = key;
        const TraceEvent* pred = nullptr;
        if (stage > 0) {
            auto it = by_item.find({task, layer, stage - 1});
            if (it != by_item.end()) pred = it->second;
        } else if (layer > 0) {
            auto it = by_item.find({task, layer - 1, K - 1});
            if (it != by_item.end()) pred = it->second;
        }
        if (pred != nullptr && e->start < pred->end) {
            report("task " + std::to_string(task) + " layer " + std::to_string(layer) + " stage " +
                   std::to_string(stage) + " starts before its predecessor ends");
        }
    }

    // Replica exclusivity and stage concurrency.
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<std::pair<std::int64_t, int>> edges;
        std::map<std::size_t, std::vector<std::pair<std::int64_t, std::int64_t>>> per_replica;
        for (const auto& e : trace.events) {
            if (e.stage != k) continue;
            edges.emplace_back(e.start, +1);
            edges.emplace_back(e.end, -1);
            per_replica[e.replica].emplace_back(e.start, e.end);
        }
        std::sort(edges.begin(), edges.end());  // ends (-1) before starts at equal time
        int live = 0;
        for (const auto& [t, d] : edges) {
            live += d;
            if (live > trace.replicas[k]) {
                report("stage " + std::to_string(k) + " exceeds its replica count at cycle " + std::to_string(t));
                break;
            }
        }
        for (auto& [r, iv] : per_replica) {
            std::sort(iv.begin(), iv.end());
            for (std::size_t i = 1; i < iv.size(); ++i)
                if (iv[i].first < iv[i - 1].second) report("overlapping intervals on stage " + std::to_string(k));
        }
    }

    // Buffer occupancy between stage k and k+1: items in progress at k plus
    // items finished at k and not yet started at k+1.
    for (std::size_t k = 0; k + 1 < K; ++k) {
        std::vector<std::pair<std::int64_t, int>> edges;
        for (const auto& [key, e] : by_item) {
            const auto [task, layer, stage] = key;
            if (stage != k) continue;
            auto next = by_item.find({task, layer, k + 1});
            if (next == by_item.end()) continue;
            edges.emplace_back(e->start, +1);
            edges.emplace_back(next->second->start, -1);
        }
        std::sort(edges.begin(), edges.end());
        std::int64_t live = 0;
        for (const auto& [t, d] : edges) {
            live += d;
            const auto capacity = static_cast<std::int64_t>(buffer_depth) * trace.replicas[k];
            if (live > capacity) {
                report("buffer after stage " + std::to_string(k) + " holds more than " + std::to_string(capacity) +
                       " items at cycle " + std::to_string(t));
                break;
            }
        }
    }
    return problems;
}

ComparisonReport compare(const std::vector<NamedTrace>& traces) {
    if (traces.size() < 2) throw InvalidConfig("compare needs at least two traces");
    auto signature = [](const PipelineTrace& t) {
        std::vector<std::pair<std::size_t, std::int64_t>> sig;
        for (const auto& task : t.tasks) sig.emplace_back(task.id, task.length);
        std::sort(sig.begin(), sig.end());
        return sig;
    };
    const auto& subject = *traces.front().trace;
    const auto reference = signature(subject);
    ComparisonReport report;
    report.subject = traces.front().name;
    for (const auto& nt : traces) {
        if (nt.trace->layers != subject.layers || signature(*nt.trace) != reference) {
            throw WorkloadMismatch("trace '" + nt.name + "' covers a different workload than '" + report.subject + "'");
        }
        if (nt.trace->events.empty()) throw EmptyTrace("trace '" + nt.name + "' is empty");
        ComparisonEntry entry;
        entry.name = nt.name;
        entry.makespan_cycles = nt.trace->makespan();
        entry.makespan_seconds = nt.trace->makespan_seconds();
        entry.speedup = static_cast<double>(entry.makespan_cycles) / static_cast<double>(subject.makespan());
        entry.saved_cycles = entry.makespan_cycles - subject.makespan();
        entry.utilization = utilization(*nt.trace);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace lasp
