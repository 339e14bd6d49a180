#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lasp/encoder_graph.hpp"

namespace lasp {

struct SequenceTask {
    std::size_t id = 0;
    std::int64_t length = 1;
    std::size_t arrival = 0;
    friend bool operator==(const SequenceTask&, const SequenceTask&) = default;
};

/// One additive term of a stage latency: ceil((per_token * s + fixed) / divisor) cycles.
struct LatencyTerm {
    std::int64_t per_token = 0;
    std::int64_t fixed = 0;
    std::int64_t divisor = 1;
    friend bool operator==(const LatencyTerm&, const LatencyTerm&) = default;
};

struct StageTiming {
    std::vector<LatencyTerm> terms;
    int replicas = 1;
    ControllerState state = ControllerState::StateMM;

    /// Per-item latency on one replica, in cycles.
    [[nodiscard]] std::int64_t cycles(std::int64_t length) const;
    friend bool operator==(const StageTiming&, const StageTiming&) = default;
};

struct PipelineConfig {
    std::vector<StageTiming> stages;
    std::size_t layers = 1;
    std::vector<SequenceTask> batch;
    std::size_t buffer_depth = 2;
    double clock_hz = 200e6;

    void validate() const;
};

/// Stage timings from an allocation: each member contributes
/// ceil(W(v, s) / (N(v) * units_per_instance(v))); replicas from alloc.replication.
/// The stage's controller state is that of its heaviest member at s_avg.
[[nodiscard]] std::vector<StageTiming> stage_timings(const OperatorGraph& g, const StageAllocation& alloc,
                                                     const ResourceBudget& budget, std::int64_t s_avg);

/// Stages with latency per_token[k] * s cycles each.
[[nodiscard]] std::vector<StageTiming> linear_stages(const std::vector<std::int64_t>& per_token_cycles);

[[nodiscard]] std::vector<SequenceTask> make_batch(const std::vector<std::int64_t>& lengths);

struct TraceTask {
    std::size_t id = 0;
    std::int64_t length = 1;            // original
    std::int64_t effective_length = 1;  // length the stages were charged for
    friend bool operator==(const TraceTask&, const TraceTask&) = default;
};

struct TraceEvent {
    std::size_t stage = 0;
    std::size_t replica = 0;
    std::size_t task = 0;
    std::size_t layer = 0;
    ControllerState state = ControllerState::StateMM;
    std::int64_t start = 0;
    std::int64_t end = 0;
    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct PipelineTrace {
    std::string label;
    std::size_t layers = 1;
    std::vector<int> replicas;      // per stage
    std::vector<TraceTask> tasks;   // dispatch order
    double clock_hz = 200e6;
    std::vector<TraceEvent> events; // dispatch order

    [[nodiscard]] std::size_t stage_count() const noexcept { return replicas.size(); }
    [[nodiscard]] std::int64_t makespan() const noexcept;
    [[nodiscard]] double makespan_seconds() const noexcept {
        return static_cast<double>(makespan()) / clock_hz;
    }
    friend bool operator==(const PipelineTrace&, const PipelineTrace&) = default;
};

/// Stable sort by descending length; equal lengths keep arrival order.
[[nodiscard]] std::vector<SequenceTask> sort_batch(std::vector<SequenceTask> tasks);

[[nodiscard]] std::int64_t stage_latency_cycles(std::size_t stage, std::int64_t length, const PipelineConfig& config);
[[nodiscard]] double stage_latency(std::size_t stage, std::int64_t length, const PipelineConfig& config);

/// Length-aware schedule: sorted batch, layers processed in order, items
/// dispatched by (layer, batch position, stage) as soon as the predecessor is
/// done, an output buffer slot is free and a replica is idle. A stage's output
/// buffer holds buffer_depth items per replica, counting items in progress and
/// items not yet started by the next stage; the last stage writes back to
/// memory without a bound.
[[nodiscard]] PipelineTrace simulate(const PipelineConfig& config);

/// Same schedule with every task charged at the batch maximum length.
[[nodiscard]] PipelineTrace baseline_padded(const PipelineConfig& config);

/// Sorted batch split into consecutive micro-batches, each padded to its own
/// maximum and run to completion before the next one starts.
[[nodiscard]] PipelineTrace baseline_microbatch(const PipelineConfig& config, std::size_t micro_size);

enum class UtilizationWindow { PerStage, Global };

struct StageUtilization {
    std::size_t stage = 0;
    std::int64_t busy = 0;  // summed over replicas
    std::int64_t span = 0;  // window length times replica count
    double fraction = 0.0;
};

[[nodiscard]] std::vector<StageUtilization> utilization(const PipelineTrace& trace,
                                                        UtilizationWindow window = UtilizationWindow::PerStage);

/// Stage with the largest busy time per replica; lowest index on ties.
[[nodiscard]] std::size_t bottleneck_stage(const PipelineTrace& trace);

/// Cycles within [first start, last end] of the stage during which a replica was idle.
[[nodiscard]] std::int64_t stage_idle_cycles(const PipelineTrace& trace, std::size_t stage);

/// Empty when the trace honors replica, dependency, ordering and buffer
/// constraints; one message per violation otherwise.
[[nodiscard]] std::vector<std::string> check_trace(const PipelineTrace& trace, std::size_t buffer_depth);

struct NamedTrace {
    std::string name;
    const PipelineTrace* trace = nullptr;
};

struct ComparisonEntry {
    std::string name;
    std::int64_t makespan_cycles = 0;
    double makespan_seconds = 0.0;
    double speedup = 1.0;            // this makespan / subject makespan
    std::int64_t saved_cycles = 0;   // this makespan - subject makespan
    std::vector<StageUtilization> utilization;
};

struct ComparisonReport {
    std::string subject;
    std::vector<ComparisonEntry> entries;  // entries[0] is the subject
};

/// The first trace is the subject. Throws WorkloadMismatch unless every trace
/// covers the same task ids, original lengths and layer count.
[[nodiscard]] ComparisonReport compare(const std::vector<NamedTrace>& traces);

}  // namespace lasp
