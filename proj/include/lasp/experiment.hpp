#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lasp/config.hpp"
#include "lasp/encoder_graph.hpp"
#include "lasp/pipeline_sim.hpp"

namespace lasp {

struct NumericCheck {
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t k = 0;
    int bits = 4;
    double max_abs_error = 0.0;
    double max_rel_error = 0.0;  // max |Z_sparse - Z_dense| / max |Z_dense|
};

/// Graph, allocation and replication for a config at a given average length.
struct AllocationResult {
    OperatorGraph graph;
    std::int64_t s_avg = 1;
    StageAllocation allocation;
};

[[nodiscard]] AllocationResult plan_allocation(const ExperimentConfig& config, std::int64_t s_avg);

/// Average length used for allocation: the stats target when the workload is
/// stats-driven, else the rounded batch mean.
[[nodiscard]] std::int64_t allocation_length(const ExperimentConfig& config, const std::vector<std::int64_t>& lengths);

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<std::int64_t> lengths;
    AllocationResult plan;
    PipelineTrace length_aware;
    PipelineTrace padded;
    PipelineTrace microbatch;
    ComparisonReport comparison;
    std::vector<std::vector<StageUtilization>> window_utilization;  // per schedule, config.window
    NumericCheck numeric;
};

/// Sparse vs dense attention on seeded Gaussian tensors.
[[nodiscard]] NumericCheck numeric_spot_check(std::size_t n, std::size_t d, std::size_t k, int bits,
                                              std::uint64_t seed);

[[nodiscard]] ExperimentReport run_experiment(const ExperimentConfig& config);

/// Structured summary as JSON text. Speedup fields are computed from the
/// makespans written alongside them.
[[nodiscard]] std::string report_json(const ExperimentReport& report);
[[nodiscard]] std::string report_summary(const ExperimentReport& report);

/// Writes report.json, summary.txt, trace_<schedule>.txt,
/// utilization_<schedule>.tsv and gantt_<schedule>.svg into `dir`.
void write_report_files(const ExperimentReport& report, const std::string& dir);

}  // namespace lasp
