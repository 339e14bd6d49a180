#pragma once

#include <iosfwd>
#include <string>

#include "lasp/pipeline_sim.hpp"

namespace lasp {

/// Line-oriented trace format:
///
///   lasp-trace 1
///   label <name>
///   layers <L>
///   clock_hz <hz>
///   replicas <R_0> ... <R_{K-1}>
///   task <id> <length> <effective_length>          (dispatch order)
///   event <stage> <replica> <task> <layer> <state> <start_cycle> <end_cycle>
///   summary makespan_cycles=<c> makespan_seconds=<s>
///   stage_summary <k> busy=<c> span=<c> utilization=<f>
///
/// Summary lines are derived data and ignored by read_trace.
void write_trace(std::ostream& os, const PipelineTrace& trace);
[[nodiscard]] PipelineTrace read_trace(std::istream& is);

[[nodiscard]] std::string format_double(double value);

}  // namespace lasp
